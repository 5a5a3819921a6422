"""Command line interface.

Subcommands: simulate, sweep, example1, prop1, verify-lemmas, spectral.
Exit code 0 on success, 1 with a one-line reason on failure.
"""

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import adversarial, harness
from .spectral import SpectralReport
from .structures import load_matrix, StructureError


def _cmd_simulate(args):
    config = harness.RunConfig.load(args.config)
    if args.out:
        config = replace(config, out=args.out)
    trace = harness.run(config)
    if not config.out:
        sys.stdout.write(trace.to_csv())
    else:
        print(f"wrote {len(trace.t)} rounds to {config.out}")
        print(f"total expected regret: {trace.total_expected_regret:.6g}")
    return 0


def _cmd_sweep(args):
    config = harness.RunConfig.load(args.config)
    T_grid = [int(tok) for tok in args.T.split(",") if tok]
    rows = harness.sweep(config, T_grid, args.seeds)
    print("T,total_regret_mean,total_regret_stderr,regret_per_sqrtT,regret_per_bound")
    for row in rows:
        print(
            "%d,%.12g,%.12g,%.12g,%.12g"
            % (
                row["T"], row["total_regret_mean"], row["total_regret_stderr"],
                row["regret_per_sqrtT"], row["regret_per_bound"],
            )
        )
    return 0


def _cmd_example1(args):
    structure = adversarial.example1()
    floor = adversarial.regret_floor(structure)
    print(f"experts: {structure.n}, signals: {structure.m}, prior: {structure.mu}")
    print(f"sigma_min: {structure.evidence.sigma_min:.6g}")
    print(f"regret_floor: {floor:.6g}")
    if args.T:
        config = harness.RunConfig(
            seed=args.seed, T=args.T, aggregator=args.aggregator,
            environment="structure", structure=structure,
        )
        trace = harness.run(config)
        print(f"aggregator: {args.aggregator}")
        print(f"mean per-round expected regret over T={args.T}: "
              f"{trace.total_expected_regret / args.T:.6g}")
    return 0


def _cmd_prop1(args):
    evidence = load_matrix(args.matrix)
    structure = adversarial.proposition1_instance(evidence, scale=args.scale)
    if structure is None:
        if evidence.injective:
            print("matrix is injective: no impossibility instance exists")
        else:
            print("kernel exists but every kernel vector has zero coordinate "
                  "sum: learnability in this regime is an open question; "
                  "no instance constructed")
        return 0
    floor = adversarial.regret_floor(structure)
    print(f"regret_floor: {floor:.6g}")
    if args.T:
        config = harness.RunConfig(
            seed=args.seed, T=args.T, aggregator="dynamic",
            environment="structure", structure=structure,
        )
        trace = harness.run(config)
        print(f"dynamic aggregator mean per-round expected regret over "
              f"T={args.T}: {trace.total_expected_regret / args.T:.6g}")
    return 0


def _cmd_verify_lemmas(args):
    rng = np.random.default_rng(args.seed)
    violations = adversarial.extreme_lemma_oracle(args.n, args.alpha, args.trials, rng)
    bound = args.n * args.alpha / ((1 - args.alpha) + args.n * args.alpha)
    attained = adversarial.near_extremal_structure(args.n, args.alpha).omega1_given_some_low()
    print(f"n={args.n} alpha={args.alpha} trials={args.trials}")
    print(f"violations: {violations}")
    print(f"near-extremal conditional: {attained:.6g} (limit {bound:.6g})")
    return 0 if violations == 0 else 1


def _cmd_spectral(args):
    evidence = load_matrix(args.matrix)
    report = SpectralReport.from_matrix(evidence.entries)
    print(f"sigma_min = {report.sigma_min:.12g}")
    print(f"injective = {report.injective}")
    if report.injective:
        print(f"h_star_norm = {report.h_star_norm:.12g}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bayesagg",
        description="Forecast aggregation learning in partial-evidence environments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="run a horizon grid with many seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--T", required=True, help="comma-separated horizons")
    p.add_argument("--seeds", type=int, default=20)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("example1", help="the two-expert impossibility example")
    p.add_argument("--T", type=int, default=0, help="also simulate T rounds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--aggregator", default="dynamic")
    p.set_defaults(func=_cmd_example1)

    p = sub.add_parser("prop1", help="impossibility instance from a matrix file")
    p.add_argument("--matrix", required=True)
    p.add_argument("--T", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0)
    p.set_defaults(func=_cmd_prop1)

    p = sub.add_parser("verify-lemmas", help="extreme-forecast bound oracle")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify_lemmas)

    p = sub.add_parser("spectral", help="spectral report for a matrix file")
    p.add_argument("--matrix", required=True)
    p.set_defaults(func=_cmd_spectral)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (StructureError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
