import numpy as np
import pytest

from bayesagg.harness import _random_signal
from bayesagg.structures import EvidenceMatrix, InformationStructure


def random_structure(rng, max_n=6, max_m=6, max_outcomes=4, beta=0.05):
    """Random valid structure for oracle-equivalence style tests.

    The evidence matrix is arbitrary 0/1 with nonempty rows (injectivity
    is not required for forecasting), the prior is drawn away from the
    boundaries, each signal has 2..max_outcomes outcomes with posterior
    values in [beta, 1 - beta].
    """
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    while True:
        A = (rng.random((n, m)) < 0.5).astype(int)
        if np.all(A.sum(axis=1) >= 1):
            break
    mu = float(rng.uniform(0.2, 0.8))
    signals = []
    for _ in range(m):
        outcomes = int(rng.integers(2, max_outcomes + 1))
        signals.append(_random_signal(outcomes, mu, beta, rng))
    return InformationStructure(mu, signals, EvidenceMatrix(A))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
