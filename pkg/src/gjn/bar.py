"""Transform functions behind the basic adjoint relationship, made checkable.

``gamma_fn`` and ``xi_fn`` solve the moment-generating-function equations
that make the exponential test function invariant under arrival and
service jumps. The quadratic ``q_star`` and the ``build_theta`` construction
let the linear-algebra identities underlying the product-form limit be
verified numerically on concrete networks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .flow import TrafficSolution
from .network import DistributionSpec, NetworkError, NetworkSpec

ROOT_TOL = 1e-12


class RootFindError(ArithmeticError):
    pass


def _solve_transform(dist: DistributionSpec, log_mult: float) -> float:
    """Return ``s`` with ``log_mult + log E[exp(-s T)] = 0``.

    ``log E[exp(-s T)]`` is strictly decreasing and convex, so the root is
    unique. A bracket is grown from 0 toward the root, then Newton steps
    are taken with bisection whenever a step leaves the bracket.
    """
    if log_mult == 0.0:
        return 0.0

    def f(s: float) -> float:
        return dist.log_laplace(s) + log_mult

    if log_mult > 0:
        lo, hi = 0.0, max(1.0, 2.0 * log_mult)
        for _ in range(2000):
            if f(hi) <= 0:
                break
            lo, hi = hi, 2.0 * hi
        else:
            raise RootFindError("bracket failure (upper)")
    else:
        lower = dist.transform_lower
        hi, lo = 0.0, max(2.0 * log_mult, -1.0)
        if lo <= lower:
            lo = 0.5 * lower
        for _ in range(2000):
            if f(lo) >= 0:
                break
            hi = lo
            lo = 2.0 * lo if math.isinf(lower) else 0.5 * (lo + lower)
        else:
            raise RootFindError("bracket failure (lower)")

    s = min(max(-log_mult, lo), hi)
    for _ in range(200):
        fs = f(s)
        if fs == 0.0:
            return s
        if fs > 0:
            lo = s
        else:
            hi = s
        step = fs / dist.dlog_laplace(s)
        nxt = s - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - s) <= 4 * np.finfo(float).eps * max(abs(s), 1e-300):
            return nxt
        s = nxt
    return s


def transform_residual(dist: DistributionSpec, log_mult: float, s: float) -> float:
    """``|exp(log_mult) E[exp(-s T)] - 1|`` for a computed root ``s``."""
    return abs(math.expm1(log_mult + dist.log_laplace(s)))


def gamma_fn(dist: DistributionSpec, theta_i: float) -> float:
    """Solve ``exp(theta_i) E[exp(-gamma T_e)] = 1`` for ``gamma``."""
    return _solve_transform(dist, float(theta_i))


def routing_log_multiplier(p_row: np.ndarray, theta: np.ndarray, i: int) -> float:
    """``log(P_i0 exp(-theta_i) + sum_j P_ij exp(theta_j - theta_i))`` without cancellation."""
    p_row = np.asarray(p_row, dtype=float)
    theta = np.asarray(theta, dtype=float)
    p_exit = 1.0 - p_row.sum()
    m_minus_1 = p_exit * math.expm1(-theta[i]) + float(p_row @ np.expm1(theta - theta[i]))
    return math.log1p(m_minus_1)


def xi_fn(dist: DistributionSpec, p_row: np.ndarray, theta, i: int) -> float:
    """Solve the service-jump equation for station ``i`` with routing row ``p_row``."""
    theta = np.asarray(getattr(theta, "theta", theta), dtype=float)
    return _solve_transform(dist, routing_log_multiplier(p_row, theta, i))


def gamma_closed_form(dist: DistributionSpec, theta_i: float) -> float:
    if dist.family == "exponential":
        return math.expm1(theta_i)
    if dist.family == "gamma":
        return dist.shape * math.expm1(theta_i / dist.shape)
    return theta_i


def xi_closed_form(dist: DistributionSpec, p_row: np.ndarray, theta, i: int) -> float:
    theta = np.asarray(getattr(theta, "theta", theta), dtype=float)
    log_m = routing_log_multiplier(p_row, theta, i)
    if dist.family == "exponential":
        return math.expm1(log_m)
    if dist.family == "gamma":
        return dist.shape * math.expm1(log_m / dist.shape)
    return log_m


def xi_bar(P: np.ndarray, theta, i: int) -> float:
    theta = np.asarray(getattr(theta, "theta", theta), dtype=float)
    return float(np.asarray(P)[i] @ theta - theta[i])


def gamma_star(scv: float, theta_i: float) -> float:
    return scv * theta_i**2


def xi_star(P: np.ndarray, scv: float, theta, i: int) -> float:
    theta = np.asarray(getattr(theta, "theta", theta), dtype=float)
    row = np.asarray(P)[i]
    routed = float(row @ theta)
    return scv * (routed - theta[i]) ** 2 + float(row @ theta**2) - routed**2


def q_star(spec: NetworkSpec, traffic: TrafficSolution, theta) -> float:
    """Second-order part of the jump generator: half the weighted sum of gamma* and xi*."""
    theta = np.asarray(getattr(theta, "theta", theta), dtype=float)
    ce2, cs2 = spec.c2_arrival, spec.c2_service
    total = 0.0
    for i in range(spec.J):
        total += spec.alpha[i] * gamma_star(ce2[i], theta[i])
        total += traffic.lam[i] * xi_star(spec.P, cs2[i], theta, i)
    return 0.5 * total


def flow_balance_residual(spec: NetworkSpec, traffic: TrafficSolution, theta) -> float:
    """``sum_i (alpha_i theta_i + lam_i xi_bar_i(theta))``; zero for every theta."""
    theta = np.asarray(getattr(theta, "theta", theta), dtype=float)
    xb = spec.P @ theta - theta
    return float(spec.alpha @ theta + traffic.lam @ xb)


@dataclass(frozen=True, eq=False)
class ThetaVector:
    theta: np.ndarray
    eta: np.ndarray | None = None
    j: int | None = None
    r: float | None = None

    def __post_init__(self) -> None:
        theta = np.array(self.theta, dtype=float)
        if np.any(theta > 0):
            raise ValueError("theta components must be nonpositive")
        object.__setattr__(self, "theta", theta)


def entry_weights(P: np.ndarray, j: int) -> np.ndarray:
    """Probabilities of first entering each station ``i > j`` through stations below ``j`` only.

    Row ``l <= j`` holds, for every ``i > j``, the probability that the
    routing chain started at ``l`` reaches ``i`` on a path whose
    intermediate states all lie in ``0..j-1``. Columns ``<= j`` are zero.
    """
    P = np.asarray(P, dtype=float)
    J = P.shape[0]
    U = np.zeros((J, J))
    if j + 1 >= J:
        return U
    rhs = P[:, j + 1 :]
    if j > 0:
        upper = np.linalg.solve(np.eye(j) - P[:j, :j], rhs[:j])
        U[:j, j + 1 :] = upper
        U[j, j + 1 :] = rhs[j] + P[j, :j] @ upper
    else:
        U[0, 1:] = rhs[0]
    return U


def build_theta(
    w: np.ndarray, eta: Sequence[float], j: int, r: float, P: np.ndarray | None = None
) -> ThetaVector:
    """Construct the probe point for station ``j`` (0-indexed) at scale ``r``.

    Components above ``j`` are ``eta_k r^(k+1)``. Component ``j`` is
    ``eta_j r^(j+1)`` plus the feedback-corrected pull of the higher
    components, and components below ``j`` are w-weighted combinations,
    so that ``xi_bar`` vanishes below ``j``.

    With ``P`` given, the higher components are weighted by
    :func:`entry_weights`, which solves the linear system exactly. Without
    ``P`` they are weighted by ``w[:, i]`` itself; the two agree to leading
    order in ``r`` but the latter leaves an ``O(r^(j+2))`` residual.
    Since all weights are nonnegative, ``eta <= 0`` gives ``theta <= 0``.
    """
    w = np.asarray(w, dtype=float)
    eta = np.asarray(eta, dtype=float)
    J = w.shape[0]
    if not 0 <= j < J:
        raise ValueError("station index out of range")
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie in (0, 1)")
    if w[j, j] >= 1.0:
        raise NetworkError("degenerate self-loop: w_jj = 1")
    weights = w if P is None else entry_weights(P, j)
    theta = np.zeros(J)
    powers = r ** np.arange(1, J + 1)
    theta[j + 1 :] = eta[j + 1 :] * powers[j + 1 :]
    tail = weights[:, j + 1 :] @ theta[j + 1 :]
    theta[j] = eta[j] * powers[j] + tail[j] / (1.0 - w[j, j])
    theta[:j] = w[:j, j] * theta[j] + tail[:j]
    return ThetaVector(theta=theta, eta=eta.copy(), j=j, r=float(r))


@dataclass
class LinearCheck:
    j: int
    residuals: np.ndarray  # xi_bar_l for l < j, then xi_bar_j - target
    scale: float
    tol: float = ROOT_TOL
    ok: bool = field(init=False)

    def __post_init__(self) -> None:
        self.ok = bool(np.all(np.abs(self.residuals) <= self.tol * max(self.scale, 1e-300)))


def check_linear(P: np.ndarray, w: np.ndarray, tv: ThetaVector) -> LinearCheck:
    """Verify ``xi_bar_l = 0`` for ``l < j`` and ``xi_bar_j = -(1 - w_jj) r^(j+1) eta_j``.

    Residuals are reported relative to ``|theta| = sum |theta_k|``.
    """
    if tv.eta is None:
        raise ValueError("theta carries no provenance; build it with build_theta")
    j, r, theta = tv.j, tv.r, tv.theta
    P = np.asarray(P, dtype=float)
    xb = P @ theta - theta
    target = -(1.0 - w[j, j]) * r ** (j + 1) * float(tv.eta[j])
    res = np.append(xb[:j], xb[j] - target)
    scale = float(np.abs(theta).sum())
    if scale == 0.0:
        return LinearCheck(j=j, residuals=res, scale=1.0)
    return LinearCheck(j=j, residuals=res, scale=scale)


def sigma_identity_residuals(spec: NetworkSpec, traffic: TrafficSolution, w: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    """``2 Q*(u_j) - sigma2_j`` with ``u_j = (w_1j, ..., w_{j-1,j}, 1, 0, ..., 0)``."""
    J = spec.J
    out = np.zeros(J)
    for j in range(J):
        u = np.zeros(J)
        u[:j] = w[:j, j]
        u[j] = 1.0
        out[j] = 2.0 * q_star(spec, traffic, u) - sigma2[j]
    return out


@dataclass
class TaylorReport:
    scales: np.ndarray
    ratios: np.ndarray

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.ratios) < 0))

    @property
    def final(self) -> float:
        return float(self.ratios[-1])


def taylor_gamma(dist: DistributionSpec, thetas: Sequence[float]) -> TaylorReport:
    """Normalized second-order remainder ``|gamma - theta - c2 theta^2 / 2| / theta^2``."""
    thetas = np.asarray(thetas, dtype=float)
    c2 = dist.scv()
    ratios = np.array(
        [abs(gamma_fn(dist, t) - t - 0.5 * gamma_star(c2, t)) / t**2 for t in thetas]
    )
    return TaylorReport(scales=thetas, ratios=ratios)


def taylor_xi(
    dist: DistributionSpec, P: np.ndarray, i: int, direction: Sequence[float], scales: Sequence[float]
) -> TaylorReport:
    """Same as :func:`taylor_gamma` for ``xi_i`` along ``theta = scale * direction``.

    Normalized by ``|theta|^2`` with ``|theta| = sum |theta_k|``.
    """
    P = np.asarray(P, dtype=float)
    direction = np.asarray(direction, dtype=float)
    c2 = dist.scv()
    scales = np.asarray(scales, dtype=float)
    ratios = []
    for s in scales:
        theta = s * direction
        approx = xi_bar(P, theta, i) + 0.5 * xi_star(P, c2, theta, i)
        ratios.append(abs(xi_fn(dist, P[i], theta, i) - approx) / np.abs(theta).sum() ** 2)
    return TaylorReport(scales=scales, ratios=np.array(ratios))


@dataclass
class CheckResult:
    name: str
    worst: float
    tol: float
    ok: bool
    detail: str = ""


def _taylor_ok(rep: TaylorReport, final_tol: float) -> bool:
    if np.all(rep.ratios <= 1e-14):
        return True
    return rep.monotone and rep.final < final_tol


def bar_check(
    spec: NetworkSpec,
    rng: np.random.Generator,
    n_theta: int = 1000,
    rs: Sequence[float] = (0.1, 0.05, 0.01),
) -> list[CheckResult]:
    """Run every algebraic identity check on ``spec`` and collect the residuals."""
    from .approx import variance_parameters
    from .flow import compute_w, solve_traffic

    traffic = solve_traffic(spec)
    w = compute_w(spec.P)
    J = spec.J
    results = []

    thetas = -rng.random((n_theta, J))
    fb = max(abs(flow_balance_residual(spec, traffic, t)) for t in thetas)
    results.append(CheckResult("flow-balance", fb, ROOT_TOL, fb <= ROOT_TOL, f"{n_theta} random theta"))

    sigma2 = variance_parameters(spec, traffic, w)
    sg = float(np.max(np.abs(sigma_identity_residuals(spec, traffic, w, sigma2))))
    results.append(CheckResult("sigma2 = 2 Q*(u_j)", sg, ROOT_TOL, sg <= ROOT_TOL))

    worst = literal = 0.0
    ok = True
    for j in range(J):
        for r in rs:
            eta = -rng.random(J) - 0.1
            chk = check_linear(spec.P, w, build_theta(w, eta, j, r, spec.P))
            worst = max(worst, float(np.max(np.abs(chk.residuals)) / chk.scale))
            ok &= chk.ok
            lit = check_linear(spec.P, w, build_theta(w, eta, j, r))
            literal = max(literal, float(np.max(np.abs(lit.residuals)) / lit.scale))
    results.append(CheckResult("linear system (relative)", worst, ROOT_TOL, ok, f"r in {list(rs)}"))
    results.append(CheckResult("linear system, w-weighted tail", literal, math.inf, True,
                               "informational: leading-order only"))

    scales = -(2.0 ** -np.arange(3, 21))
    worst, ok = 0.0, True
    for i in range(J):
        if spec.alpha[i] > 0:
            rep = taylor_gamma(spec.arrival_dist[i], scales)
            worst = max(worst, rep.final)
            ok &= _taylor_ok(rep, 1e-3)
        direction = -(0.5 + rng.random(J))
        rep = taylor_xi(spec.service_dist[i], spec.P, i, direction, -scales)
        worst = max(worst, rep.final)
        ok &= _taylor_ok(rep, 1e-3)
    results.append(CheckResult("taylor remainder (final ratio)", worst, 1e-3, ok, "theta = -2^-n, n=3..20"))

    worst_cf = 0.0
    worst_res = 0.0
    for _ in range(20):
        theta = -rng.random(J)
        for i in range(J):
            da, ds = spec.arrival_dist[i], spec.service_dist[i]
            g = gamma_fn(da, theta[i])
            worst_cf = max(worst_cf, abs(g - gamma_closed_form(da, theta[i])))
            worst_res = max(worst_res, transform_residual(da, theta[i], g))
            x = xi_fn(ds, spec.P[i], theta, i)
            worst_cf = max(worst_cf, abs(x - xi_closed_form(ds, spec.P[i], theta, i)))
            worst_res = max(worst_res, transform_residual(ds, routing_log_multiplier(spec.P[i], theta, i), x))
    results.append(CheckResult("closed form vs root-finder", worst_cf, ROOT_TOL, worst_cf <= ROOT_TOL))
    results.append(CheckResult("defining-equation residual", worst_res, ROOT_TOL, worst_res <= ROOT_TOL))
    return results
