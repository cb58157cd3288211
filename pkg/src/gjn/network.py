"""Generalized Jackson network description and primitive distributions.

All interarrival and service distributions are unitized (mean 1); the
actual times are obtained by dividing a draw by the arrival rate
``alpha[j]`` or the service rate ``mu[j]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

FAMILIES = ("exponential", "gamma", "deterministic")

# integer codes shared with the simulation kernel
FAMILY_CODE = {"exponential": 0, "gamma": 1, "deterministic": 2}

SINGULAR_TOL = 1e-10


class NetworkError(ValueError):
    """Raised for invalid or unsupported network descriptions."""


@dataclass(frozen=True)
class DistributionSpec:
    """Unit-mean distribution of a primitive (interarrival or service) time."""

    family: str
    shape: float | None = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise NetworkError(f"unknown distribution family {self.family!r}")
        if self.family == "gamma":
            if self.shape is None or not (self.shape > 0 and math.isfinite(self.shape)):
                raise NetworkError("gamma distribution needs a positive finite shape")
            object.__setattr__(self, "shape", float(self.shape))
        elif self.shape is not None:
            raise NetworkError(f"{self.family} distribution takes no shape")

    @classmethod
    def exponential(cls) -> DistributionSpec:
        return cls("exponential")

    @classmethod
    def gamma(cls, shape: float) -> DistributionSpec:
        return cls("gamma", shape)

    @classmethod
    def deterministic(cls) -> DistributionSpec:
        return cls("deterministic")

    @property
    def mean(self) -> float:
        return 1.0

    def scv(self) -> float:
        """Squared coefficient of variation (equal to the variance)."""
        if self.family == "exponential":
            return 1.0
        if self.family == "gamma":
            return 1.0 / self.shape
        return 0.0

    # Laplace transform L(s) = E[exp(-s T)], defined for s > transform_lower.

    @property
    def transform_lower(self) -> float:
        if self.family == "exponential":
            return -1.0
        if self.family == "gamma":
            return -self.shape
        return -math.inf

    def log_laplace(self, s: float) -> float:
        if s <= self.transform_lower:
            return math.inf
        if self.family == "exponential":
            return -math.log1p(s)
        if self.family == "gamma":
            return -self.shape * math.log1p(s / self.shape)
        return -s

    def dlog_laplace(self, s: float) -> float:
        """Derivative of :meth:`log_laplace` with respect to ``s``."""
        if self.family == "exponential":
            return -1.0 / (1.0 + s)
        if self.family == "gamma":
            return -1.0 / (1.0 + s / self.shape)
        return -1.0

    def to_dict(self) -> dict[str, Any]:
        if self.family == "gamma":
            return {"family": "gamma", "shape": self.shape}
        return {"family": self.family}

    @classmethod
    def from_dict(cls, data: dict[str, Any] | str) -> DistributionSpec:
        if isinstance(data, str):
            return cls(data)
        return cls(data["family"], data.get("shape"))


def _readonly(a: Any, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Open generalized Jackson network with ``J`` single-server FCFS stations.

    ``P[j, k]`` is the probability that a job finishing service at ``j``
    moves to ``k``; the remainder ``1 - P[j].sum()`` exits the network.
    """

    alpha: np.ndarray
    mu: np.ndarray
    P: np.ndarray
    arrival_dist: tuple[DistributionSpec, ...]
    service_dist: tuple[DistributionSpec, ...]
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        alpha = _readonly(self.alpha)
        mu = _readonly(self.mu)
        P = _readonly(self.P)
        if alpha.ndim != 1 or alpha.size == 0:
            raise NetworkError("alpha must be a non-empty vector")
        J = alpha.size
        if mu.shape != (J,) or P.shape != (J, J):
            raise NetworkError(f"shape mismatch: alpha {alpha.shape}, mu {mu.shape}, P {P.shape}")
        arr = tuple(self.arrival_dist)
        svc = tuple(self.service_dist)
        if len(arr) != J or len(svc) != J:
            raise NetworkError("need one arrival and one service distribution per station")
        labels = tuple(self.labels) or tuple(f"station{j + 1}" for j in range(J))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "arrival_dist", arr)
        object.__setattr__(self, "service_dist", svc)
        object.__setattr__(self, "labels", labels)

    @property
    def J(self) -> int:
        return self.alpha.size

    @property
    def exit_prob(self) -> np.ndarray:
        return 1.0 - self.P.sum(axis=1)

    @property
    def c2_arrival(self) -> np.ndarray:
        """Arrival SCVs; zero where the station has no external arrivals."""
        return np.array(
            [d.scv() if a > 0 else 0.0 for d, a in zip(self.arrival_dist, self.alpha)]
        )

    @property
    def c2_service(self) -> np.ndarray:
        return np.array([d.scv() for d in self.service_dist])

    def replace(self, **changes: Any) -> NetworkSpec:
        kwargs = dict(
            alpha=self.alpha,
            mu=self.mu,
            P=self.P,
            arrival_dist=self.arrival_dist,
            service_dist=self.service_dist,
            labels=self.labels,
        )
        kwargs.update(changes)
        return NetworkSpec(**kwargs)

    def with_rho(self, rho: Sequence[float]) -> NetworkSpec:
        """Return a copy whose service rates give traffic intensities ``rho``."""
        from .flow import solve_traffic

        lam = solve_traffic(self).lam
        rho = np.asarray(rho, dtype=float)
        if rho.shape != lam.shape or np.any(rho <= 0):
            raise NetworkError("rho must hold one positive value per station")
        return self.replace(mu=lam / rho)

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha.tolist(),
            "mu": self.mu.tolist(),
            "P": self.P.tolist(),
            "arrival_dist": [d.to_dict() for d in self.arrival_dist],
            "service_dist": [d.to_dict() for d in self.service_dist],
            "labels": list(self.labels),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> NetworkSpec:
        J = len(data["alpha"])
        exp = {"family": "exponential"}
        return cls(
            alpha=data["alpha"],
            mu=data["mu"],
            P=data["P"],
            arrival_dist=[DistributionSpec.from_dict(d) for d in data.get("arrival_dist", [exp] * J)],
            service_dist=[DistributionSpec.from_dict(d) for d in data.get("service_dist", [exp] * J)],
            labels=tuple(data.get("labels", ())),
        )


def validate(spec: NetworkSpec) -> list[str]:
    """Return a list of human-readable violations; empty when ``spec`` is valid."""
    problems: list[str] = []
    J = spec.J
    if not np.all(np.isfinite(spec.alpha)) or np.any(spec.alpha < 0):
        problems.append("alpha: external arrival rates must be finite and nonnegative")
    if not np.all(np.isfinite(spec.mu)) or np.any(spec.mu <= 0):
        problems.append("mu: service rates must be finite and positive")
    P = spec.P
    if not np.all(np.isfinite(P)):
        problems.append("P: entries must be finite")
        return problems
    for j in range(J):
        if np.any(P[j] < 0):
            problems.append(f"P row {j + 1}: negative routing probability")
        if P[j].sum() > 1.0 + 1e-12:
            problems.append(f"P row {j + 1}: row-stochasticity exceeded (sum {P[j].sum():.6g} > 1)")
    A = np.eye(J) - P
    try:
        x = np.linalg.solve(A, np.ones(J))
        singular = not np.all(np.isfinite(x)) or np.max(np.abs(A @ x - 1.0)) > SINGULAR_TOL
    except np.linalg.LinAlgError:
        singular = True
    if singular:
        problems.append("(I-P) singular: routing matrix is not transient")
    return problems


def sample(dist: DistributionSpec, rng: np.random.Generator, size: int | None = None):
    """Draw unit-mean variates from ``dist`` using ``rng``."""
    if dist.family == "exponential":
        return rng.exponential(1.0, size)
    if dist.family == "gamma":
        return rng.gamma(dist.shape, 1.0 / dist.shape, size)
    if size is None:
        return 1.0
    return np.ones(size)
