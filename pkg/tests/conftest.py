from pathlib import Path

import numpy as np
import pytest

from gjn.network import DistributionSpec, NetworkSpec

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

P42 = np.array([[0.3, 0.6], [0.4, 0.2]])
ALPHA42 = np.array([0.3, 0.2])

# (arrival shapes, service shapes) of the three distribution cases
SHAPES = {
    "A": ([1.2, 1.3], [1.1, 1.25]),
    "B": ([0.75, 0.8], [0.95, 0.6]),
    "C": ([0.6, 0.45], [0.5, 0.4]),
}


def two_station(shapes=None, rho=(0.92, 0.98)) -> NetworkSpec:
    if shapes is None:
        arr = svc = [DistributionSpec.exponential()] * 2
    else:
        arr = [DistributionSpec.gamma(s) for s in shapes[0]]
        svc = [DistributionSpec.gamma(s) for s in shapes[1]]
    spec = NetworkSpec(alpha=ALPHA42, mu=[1.0, 1.0], P=P42, arrival_dist=arr, service_dist=svc)
    return spec.with_rho(rho)


def random_transient_P(rng: np.random.Generator, J: int, max_row: float = 0.95) -> np.ndarray:
    P = rng.random((J, J))
    P *= (rng.random((J, 1)) * max_row) / P.sum(axis=1, keepdims=True)
    return P


def random_network(rng: np.random.Generator, J: int) -> NetworkSpec:
    """Random transient network with mixed primitives and rho in (0.5, 0.95)."""
    fams = [DistributionSpec.exponential(), DistributionSpec.deterministic()]

    def dist():
        k = rng.integers(3)
        return fams[k] if k < 2 else DistributionSpec.gamma(float(rng.uniform(0.3, 3.0)))

    alpha = rng.random(J)
    alpha[rng.random(J) < 0.3] = 0.0
    alpha[0] = max(alpha[0], 0.1)
    spec = NetworkSpec(
        alpha=alpha,
        mu=np.ones(J),
        P=random_transient_P(rng, J),
        arrival_dist=[dist() for _ in range(J)],
        service_dist=[dist() for _ in range(J)],
    )
    return spec.with_rho(rng.uniform(0.5, 0.95, J))


@pytest.fixture
def case_b() -> NetworkSpec:
    return two_station(SHAPES["B"])


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(test_acceptance.RESULTS):
        terminalreporter.write_line(test_acceptance.RESULTS[n])
