"""Traffic equation and the w-matrix of first-visit probabilities.

Stations are 0-indexed throughout. ``w[i, j]`` is the probability that the
routing chain started at ``i`` reaches ``j`` (after at least one step)
before exiting or entering any station with index greater than ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import SINGULAR_TOL, NetworkError, NetworkSpec


@dataclass(frozen=True, eq=False)
class TrafficSolution:
    lam: np.ndarray
    rho: np.ndarray


def _checked_solve(A: np.ndarray, b: np.ndarray, message: str) -> np.ndarray:
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NetworkError(message) from exc
    scale = 1.0 + np.max(np.abs(b), initial=0.0)
    if not np.all(np.isfinite(x)) or np.max(np.abs(A @ x - b), initial=0.0) > SINGULAR_TOL * scale:
        raise NetworkError(message)
    return x


def solve_traffic(spec: NetworkSpec) -> TrafficSolution:
    """Solve ``lam = alpha + P' lam`` and return ``lam`` with ``rho = lam / mu``.

    Stability is not checked here.
    """
    J = spec.J
    lam = _checked_solve(np.eye(J) - spec.P.T, spec.alpha, "routing matrix not transient")
    return TrafficSolution(lam=lam, rho=lam / spec.mu)


def compute_w(P: np.ndarray) -> np.ndarray:
    """Build the w-matrix column by column from the block formulas.

    For column ``j`` the entries above the diagonal come from
    ``(I - P[:j, :j])^{-1} P[:j, j]`` and the rest from
    ``P[j:, j] + P[j:, :j] @ upper``; empty blocks contribute zero.
    """
    P = np.asarray(P, dtype=float)
    J = P.shape[0]
    w = np.zeros((J, J))
    for j in range(J):
        if j > 0:
            upper = _checked_solve(
                np.eye(j) - P[:j, :j], P[:j, j], f"block (I-P_{j}) singular"
            )
            w[:j, j] = upper
            w[j:, j] = P[j:, j] + P[j:, :j] @ upper
        else:
            w[:, j] = P[:, j]
    return w


def oracle_w_linear(P: np.ndarray, j: int) -> np.ndarray:
    """Column ``j`` of the w-matrix from the full J-dimensional first-step system.

    Solves ``w_i = P[i, j] + sum_{k<j} P[i, k] w_k`` for all ``i`` at once.
    """
    P = np.asarray(P, dtype=float)
    J = P.shape[0]
    A = np.eye(J)
    A[:, :j] -= P[:, :j]
    return _checked_solve(A, P[:, j].copy(), f"block (I-P_{j}) singular")


@dataclass(frozen=True, eq=False)
class MonteCarloW:
    estimate: np.ndarray
    stderr: np.ndarray
    truncated: int


def oracle_w_montecarlo(
    P: np.ndarray,
    j: int,
    trials: int,
    rng: np.random.Generator,
    max_steps: int = 10**6,
) -> MonteCarloW:
    """Estimate column ``j`` of the w-matrix by simulating the routing chain.

    Each walk starts at ``i`` and succeeds when it enters ``j`` before the
    exit state or any station above ``j``. Walks still alive after
    ``max_steps`` steps count as failures and are reported in ``truncated``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    P = np.asarray(P, dtype=float)
    J = P.shape[0]
    # column J is the exit state
    cum = np.cumsum(np.hstack([P, 1.0 - P.sum(axis=1, keepdims=True)]), axis=1)
    cum[:, -1] = 1.0
    est = np.zeros(J)
    truncated = 0
    for i in range(J):
        state = np.full(trials, i)
        hits = 0
        steps = 0
        while state.size and steps < max_steps:
            u = rng.random(state.size)
            nxt = (u[:, None] >= cum[state]).sum(axis=1)
            hits += int(np.count_nonzero(nxt == j))
            state = nxt[nxt < j]
            steps += 1
        truncated += state.size
        est[i] = hits / trials
    se = np.sqrt(est * (1.0 - est) / trials)
    return MonteCarloW(estimate=est, stderr=se, truncated=truncated)
