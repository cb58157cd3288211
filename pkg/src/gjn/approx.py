"""Product-form steady-state approximation of queue lengths.

Station ``j`` is approximated by a mixed law ``Y_j``: an atom ``1 - rho_j``
at zero plus an exponential part of total mass ``rho_j`` and mean
``rho_j d_j / (1 - rho_j)``. Stations are treated as independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .flow import TrafficSolution, compute_w, solve_traffic
from .network import NetworkError, NetworkSpec

PMF_CONVENTIONS = ("mass-preserving", "paper-literal")
TAIL_MASS = 1e-12


class UnstableNetworkError(NetworkError):
    pass


def variance_parameters(spec: NetworkSpec, traffic: TrafficSolution, w: np.ndarray) -> np.ndarray:
    """Aggregate arrival variability into each station.

    Sources for station ``j``: external arrivals at lightly loaded stations
    ``i < j`` split with probability ``w[i, j]``, the own external arrivals,
    service completions at heavily loaded stations ``i > j`` split with
    ``w[i, j]``, and the own service process with feedback ``w[j, j]``.
    """
    alpha, lam = spec.alpha, traffic.lam
    ce2, cs2 = spec.c2_arrival, spec.c2_service
    J = spec.J
    sigma2 = np.zeros(J)
    for j in range(J):
        col = w[:, j]
        split = col * (1.0 - col)
        upstream = alpha[:j] @ (col[:j] ** 2 * ce2[:j] + split[:j])
        own_arrival = alpha[j] * ce2[j]
        downstream = lam[j + 1 :] @ (col[j + 1 :] ** 2 * cs2[j + 1 :] + split[j + 1 :])
        wjj = col[j]
        own_service = lam[j] * (cs2[j] * (1.0 - wjj) ** 2 + wjj * (1.0 - wjj))
        sigma2[j] = upstream + own_arrival + downstream + own_service
    return sigma2


@dataclass(frozen=True, eq=False)
class ApproxModel:
    spec: NetworkSpec
    traffic: TrafficSolution
    w: np.ndarray
    sigma2: np.ndarray
    d: np.ndarray

    @property
    def rho(self) -> np.ndarray:
        return self.traffic.rho

    @property
    def J(self) -> int:
        return self.spec.J

    def decay(self, j: int) -> float:
        """Rate ``(1 - rho_j) / (rho_j d_j)`` of the exponential part."""
        rho, d = self.rho[j], self.d[j]
        if rho == 0.0 or d == 0.0:
            return math.inf
        return (1.0 - rho) / (rho * d)

    def mean_queue(self, j: int) -> float:
        rho = self.rho[j]
        return rho * self.d[j] / (1.0 - rho)

    def means(self) -> np.ndarray:
        return self.rho * self.d / (1.0 - self.rho)

    def cdf(self, j: int, x: float) -> float:
        if x < 0:
            return 0.0
        rho = self.rho[j]
        c = self.decay(j)
        if math.isinf(c):
            return 1.0 if (x > 0 or rho == 0.0) else 1.0 - rho
        return (1.0 - rho) - rho * math.expm1(-x * c)

    def quantile(self, j: int, q: float) -> float:
        """Smallest ``x >= 0`` with ``cdf(j, x) >= q``."""
        if not 0.0 < q < 1.0:
            raise ValueError("q must lie in (0, 1)")
        rho = self.rho[j]
        if q <= 1.0 - rho:
            return 0.0
        c = self.decay(j)
        if math.isinf(c):
            return 0.0
        return -math.log((1.0 - q) / rho) / c

    def pmf(self, j: int, k: int, convention: str = "mass-preserving") -> float:
        """Discretized probability that station ``j`` holds ``k`` jobs.

        ``mass-preserving`` assigns the exponential mass on ``(k-1, k]`` to
        ``k``, so the pmf sums to one. ``paper-literal`` assigns ``(k, k+1]``
        to ``k`` for ``k >= 1``, which leaves the mass on ``(0, 1]`` unassigned.
        """
        if convention not in PMF_CONVENTIONS:
            raise ValueError(f"unknown pmf convention {convention!r}")
        if k < 0:
            return 0.0
        rho = self.rho[j]
        if k == 0:
            return 1.0 - rho
        c = self.decay(j)
        if math.isinf(c):
            return rho if (k == 1 and convention == "mass-preserving") else 0.0
        lo = k - 1 if convention == "mass-preserving" else k
        return rho * math.exp(-lo * c) * -math.expm1(-c)

    def pmf_vector(self, j: int, kmax: int | None = None, convention: str = "mass-preserving") -> np.ndarray:
        """pmf for ``k = 0..kmax``; by default truncated where the tail mass drops below 1e-12."""
        if kmax is None:
            kmax = self.tail_cutoff(j)
        return np.array([self.pmf(j, k, convention) for k in range(kmax + 1)])

    def tail_cutoff(self, j: int, tail: float = TAIL_MASS) -> int:
        """Smallest ``k`` with ``P(Y_j > k) <= tail``."""
        rho = self.rho[j]
        c = self.decay(j)
        if rho <= tail or math.isinf(c):
            return 1
        return max(1, math.ceil(math.log(rho / tail) / c))


def build_approx(spec: NetworkSpec) -> ApproxModel:
    """Compute lam, rho, w, sigma^2 and d for a stable network."""
    traffic = solve_traffic(spec)
    for j, rho in enumerate(traffic.rho):
        if rho >= 1.0:
            raise UnstableNetworkError(f"unstable station {j + 1}: rho = {rho:.6g} >= 1")
    w = compute_w(spec.P)
    diag = np.diag(w)
    if np.any(diag >= 1.0):
        raise NetworkError("degenerate self-loop: w_jj = 1")
    sigma2 = variance_parameters(spec, traffic, w)
    lam = traffic.lam
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(lam > 0, sigma2 / (2.0 * lam * (1.0 - diag)), 0.0)
    return ApproxModel(spec=spec, traffic=traffic, w=w, sigma2=sigma2, d=d)
