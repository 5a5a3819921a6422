import numpy as np
import pytest

from bayesagg.cli import main
from bayesagg.harness import CSV_HEADER


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("seed = 1\nT = 200\naggregator = dynamic\nenvironment = example1\n")
    return str(path)


@pytest.fixture
def matrix_file(tmp_path):
    path = tmp_path / "matrix.txt"
    path.write_text("1 1 0\n0 1 1\n")
    return str(path)


class TestSimulate:
    def test_stdout_csv(self, config_file, capsys):
        assert main(["simulate", "--config", config_file]) == 0
        out = capsys.readouterr().out
        lines = out.splitlines()
        assert lines[0] == CSV_HEADER
        assert len([l for l in lines if not l.startswith("#")]) == 201

    def test_out_file(self, config_file, tmp_path, capsys):
        out_path = tmp_path / "trace.csv"
        assert main(["simulate", "--config", config_file, "--out", str(out_path)]) == 0
        assert out_path.read_text().splitlines()[0] == CSV_HEADER
        assert "total expected regret" in capsys.readouterr().out

    def test_missing_config(self, capsys):
        assert main(["simulate", "--config", "/nonexistent.cfg"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_config(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("bogus = 1\n")
        assert main(["simulate", "--config", str(path)]) == 1
        assert "error:" in capsys.readouterr().err


class TestSweep:
    def test_summary_table(self, config_file, capsys):
        assert main(["sweep", "--config", config_file, "--T", "200,400", "--seeds", "2"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("T,total_regret_mean")
        assert len(lines) == 3
        assert lines[1].split(",")[0] == "200"

    def test_short_grid_fails(self, config_file, capsys):
        assert main(["sweep", "--config", config_file, "--T", "200", "--seeds", "2"]) == 1


class TestExample1:
    def test_report(self, capsys):
        assert main(["example1"]) == 0
        out = capsys.readouterr().out
        assert "regret_floor: 0.0245" in out
        assert "sigma_min: " in out

    def test_with_simulation(self, capsys):
        assert main(["example1", "--T", "300", "--seed", "2"]) == 0
        out = capsys.readouterr().out
        assert "mean per-round expected regret" in out


class TestProp1:
    def test_non_injective_matrix(self, matrix_file, capsys):
        assert main(["prop1", "--matrix", matrix_file, "--T", "300"]) == 0
        out = capsys.readouterr().out
        assert "regret_floor: 0.0143" in out
        assert "mean per-round expected regret" in out

    def test_injective_matrix(self, tmp_path, capsys):
        path = tmp_path / "eye.txt"
        path.write_text("1 0\n0 1\n")
        assert main(["prop1", "--matrix", str(path)]) == 0
        assert "injective" in capsys.readouterr().out

    def test_zero_sum_kernel(self, tmp_path, capsys):
        path = tmp_path / "row.txt"
        path.write_text("1 1\n")
        assert main(["prop1", "--matrix", str(path)]) == 0
        assert "open question" in capsys.readouterr().out


class TestVerifyLemmas:
    def test_clean_run(self, capsys):
        assert main(["verify-lemmas", "--n", "2", "--alpha", "0.1", "--trials", "200"]) == 0
        out = capsys.readouterr().out
        assert "violations: 0" in out
        assert "near-extremal conditional" in out

    def test_bad_alpha(self, capsys):
        assert main(["verify-lemmas", "--n", "2", "--alpha", "0.7", "--trials", "10"]) == 1


class TestSpectral:
    def test_non_injective(self, matrix_file, capsys):
        assert main(["spectral", "--matrix", matrix_file]) == 0
        out = capsys.readouterr().out
        assert "injective = False" in out

    def test_injective(self, tmp_path, capsys):
        path = tmp_path / "tri.txt"
        path.write_text("1 0\n1 1\n")
        assert main(["spectral", "--matrix", str(path)]) == 0
        out = capsys.readouterr().out
        assert "sigma_min = 0.618" in out
        assert "h_star_norm = 1" in out
