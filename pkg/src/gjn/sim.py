"""Discrete-event simulation of a generalized Jackson network.

One trajectory starts empty at time 0. Queue lengths are integrated over
the post-warmup window, which is split into equal contiguous batches
for batch-means confidence intervals. Optionally the joint state is
sampled at evenly spaced representative points.

The event loop is compiled with numba and uses numba's own generator,
seeded from a :class:`numpy.random.SeedSequence`, so a given
``(spec, config)`` pair reproduces bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .network import FAMILY_CODE, NetworkError, NetworkSpec, validate
from .stats import batch_ci

DEFAULT_PMF_CAP = 1000
PMF_CAP_FACTOR = 10


@dataclass(frozen=True)
class SimConfig:
    horizon: float = 1e7
    warmup_fraction: float = 0.9
    num_batches: int = 20
    seed: int = 12345
    pmf_cap: int | None = None
    joint_interval: float | None = None
    joint_pair: tuple[int, int] = (0, 1)
    joint_cap: int = 10

    def __post_init__(self) -> None:
        if not self.horizon > 0:
            raise ValueError("horizon <= 0")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError("warmup_fraction must lie in [0, 1)")
        if self.num_batches < 1:
            raise ValueError("num_batches must be positive")
        if self.joint_interval is not None and not self.joint_interval > 0:
            raise ValueError("joint_interval must be positive")

    @property
    def window(self) -> float:
        return (1.0 - self.warmup_fraction) * self.horizon

    @property
    def batch_length(self) -> float:
        """Equal batch length; whole time units when possible, remainder discarded."""
        raw = self.window / self.num_batches
        return float(math.floor(raw + 1e-9)) if raw >= 1.0 else raw

    @property
    def window_start(self) -> float:
        return self.horizon - self.window


@dataclass(frozen=True, eq=False)
class SimEstimate:
    """Time-average statistics of one simulated trajectory.

    Arrays are indexed ``[batch, station, ...]``. ``pmf_batches`` holds the
    fraction of batch time spent at each level ``0..pmf_cap``; time above
    the cap goes to ``overflow_batches`` and its queue-length integral to
    ``overflow_area``.
    """

    batch_length: float
    window_start: float
    batch_means: np.ndarray
    pmf_batches: np.ndarray
    overflow_batches: np.ndarray
    overflow_area: np.ndarray
    exits: np.ndarray
    external_arrivals: np.ndarray
    joint_pair: tuple[int, int] | None = None
    joint_batches: np.ndarray | None = None
    points: np.ndarray | None = None
    level: float = 0.95
    meta: dict = field(default_factory=dict)

    @property
    def num_batches(self) -> int:
        return self.batch_means.shape[0]

    @property
    def J(self) -> int:
        return self.batch_means.shape[1]

    @property
    def pmf_cap(self) -> int:
        return self.pmf_batches.shape[2] - 1

    @property
    def mean(self) -> np.ndarray:
        return self.batch_means.mean(axis=0)

    @property
    def ci_halfwidth(self) -> np.ndarray:
        return np.array([batch_ci(self.batch_means[:, j], self.level)[1] for j in range(self.J)])

    @property
    def stderr(self) -> np.ndarray:
        return _batch_se(self.batch_means)

    @property
    def pmf(self) -> np.ndarray:
        """Batch-averaged fraction of time at each level, shape ``(J, pmf_cap + 1)``."""
        return self.pmf_batches.mean(axis=0)

    @property
    def pmf_stderr(self) -> np.ndarray:
        return _batch_se(self.pmf_batches)

    @property
    def pmf_ci_halfwidth(self) -> np.ndarray:
        from scipy import stats

        n = self.num_batches
        if n < 2:
            return np.zeros_like(self.pmf)
        t = stats.t.ppf(0.5 * (1.0 + self.level), n - 1)
        return t * self.pmf_stderr

    @property
    def overflow(self) -> np.ndarray:
        return self.overflow_batches.mean(axis=0)

    def quantile(self, j: int, q: float) -> int:
        """Smallest level whose batch-averaged cumulative time fraction reaches ``q``."""
        cum = np.cumsum(self.pmf[j])
        idx = np.flatnonzero(cum >= q - 1e-12)
        if idx.size == 0:
            raise ValueError(f"quantile {q} lies above pmf_cap={self.pmf_cap}")
        return int(idx[0])

    def throughput(self) -> np.ndarray:
        """Per-batch rate of departures to the outside."""
        return self.exits / self.batch_length

    def conservation_gap(self) -> np.ndarray:
        """Relative gap between batch means and ``sum_k k pmf_k + overflow``, per batch and station."""
        k = np.arange(self.pmf_cap + 1)
        rebuilt = (self.pmf_batches * k).sum(axis=2) + self.overflow_area / self.batch_length
        return np.abs(rebuilt - self.batch_means) / np.maximum(np.abs(self.batch_means), 1e-300)


def _batch_se(values: np.ndarray) -> np.ndarray:
    n = values.shape[0]
    if n < 2:
        return np.zeros(values.shape[1:])
    return values.std(axis=0, ddof=1) / math.sqrt(n)


@numba.njit(cache=True)
def _draw(family, shape):
    if family == 0:
        return np.random.exponential(1.0)
    if family == 1:
        return np.random.gamma(shape, 1.0 / shape)
    return 1.0


@numba.njit(cache=True)
def _accumulate(z, dt, b, area, pmf_time, over_time, over_area, joint, ja, jb, jcap):
    J = z.shape[0]
    cap = pmf_time.shape[2] - 1
    for j in range(J):
        k = z[j]
        area[b, j] += k * dt
        if k <= cap:
            pmf_time[b, j, k] += dt
        else:
            over_time[b, j] += dt
            over_area[b, j] += k * dt
    if ja >= 0:
        ka = z[ja]
        kb = z[jb]
        if ka <= jcap and kb <= jcap:
            joint[b, ka, kb] += dt


@numba.njit(cache=True)
def _run(
    alpha, mu, cum_route, arr_family, arr_shape, svc_family, svc_shape,
    t_start, batch_len, num_batches, pmf_cap, point_interval, n_points,
    ja, jb, jcap, seed,
):
    np.random.seed(seed)
    J = alpha.shape[0]
    inf = np.inf
    z = np.zeros(J, np.int64)
    next_arr = np.full(J, inf)
    next_dep = np.full(J, inf)
    for j in range(J):
        if alpha[j] > 0.0:
            next_arr[j] = _draw(arr_family[j], arr_shape[j]) / alpha[j]

    area = np.zeros((num_batches, J))
    pmf_time = np.zeros((num_batches, J, pmf_cap + 1))
    over_time = np.zeros((num_batches, J))
    over_area = np.zeros((num_batches, J))
    exits = np.zeros(num_batches, np.int64)
    ext = np.zeros((num_batches, J), np.int64)
    joint = np.zeros((num_batches, jcap + 1, jcap + 1))
    points = np.zeros((n_points, J), np.int64)

    t_end = t_start + num_batches * batch_len
    clock = 0.0
    batch = -1
    next_boundary = t_start
    point_idx = 0
    next_point = t_start if n_points > 0 else inf

    while True:
        # departures win ties over arrivals, lower station index wins within a kind
        te = inf
        kind = -1
        st = -1
        for j in range(J):
            if next_dep[j] < te:
                te = next_dep[j]
                kind = 1
                st = j
        for j in range(J):
            if next_arr[j] < te:
                te = next_arr[j]
                kind = 0
                st = j
        target = te if te < t_end else t_end

        while True:
            nxt = next_boundary if next_boundary < next_point else next_point
            if nxt > target:
                break
            if 0 <= batch < num_batches:
                _accumulate(z, nxt - clock, batch, area, pmf_time, over_time, over_area,
                            joint, ja, jb, jcap)
            clock = nxt
            if nxt == next_point:
                for j in range(J):
                    points[point_idx, j] = z[j]
                point_idx += 1
                next_point = t_start + point_idx * point_interval if point_idx < n_points else inf
            if nxt == next_boundary:
                batch += 1
                next_boundary = t_start + (batch + 1) * batch_len if batch < num_batches else inf
        if batch >= num_batches:
            break
        if 0 <= batch < num_batches:
            _accumulate(z, target - clock, batch, area, pmf_time, over_time, over_area,
                        joint, ja, jb, jcap)
        clock = target
        if kind < 0:
            break

        in_window = 0 <= batch < num_batches
        if kind == 0:
            z[st] += 1
            if in_window:
                ext[batch, st] += 1
            next_arr[st] = te + _draw(arr_family[st], arr_shape[st]) / alpha[st]
            if z[st] == 1:
                next_dep[st] = te + _draw(svc_family[st], svc_shape[st]) / mu[st]
        else:
            z[st] -= 1
            next_dep[st] = inf
            u = np.random.random()
            dest = -1
            for k in range(J):
                if u < cum_route[st, k]:
                    dest = k
                    break
            if dest >= 0:
                z[dest] += 1
                if z[dest] == 1:
                    next_dep[dest] = te + _draw(svc_family[dest], svc_shape[dest]) / mu[dest]
            elif in_window:
                exits[batch] += 1
            if z[st] >= 1 and next_dep[st] == inf:
                next_dep[st] = te + _draw(svc_family[st], svc_shape[st]) / mu[st]

    return area, pmf_time, over_time, over_area, exits, ext, joint, points[:point_idx]


def _dist_arrays(dists):
    fam = np.array([FAMILY_CODE[d.family] for d in dists], dtype=np.int64)
    shp = np.array([d.shape if d.shape is not None else 1.0 for d in dists], dtype=float)
    return fam, shp


def kernel_seed(seed: int, *spawn_key: int) -> int:
    """32-bit seed for the compiled generator, derived from ``seed`` and an optional child key."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(spawn_key))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def default_pmf_cap(spec: NetworkSpec) -> int:
    from .approx import build_approx

    try:
        means = build_approx(spec).means()
    except NetworkError:
        return DEFAULT_PMF_CAP
    return max(50, int(math.ceil(PMF_CAP_FACTOR * float(np.max(means)))))


def simulate(spec: NetworkSpec, cfg: SimConfig, *, stream: int | None = None) -> SimEstimate:
    """Run one replication and collect batch statistics over the post-warmup window.

    ``stream`` selects an independent child stream of ``cfg.seed`` (used for
    parameter sweeps).
    """
    problems = validate(spec)
    if problems:
        raise NetworkError("; ".join(problems))
    if not np.any(spec.alpha > 0):
        raise NetworkError("dead network: no external arrivals and the network starts empty")

    pmf_cap = cfg.pmf_cap if cfg.pmf_cap is not None else default_pmf_cap(spec)
    batch_len = cfg.batch_length
    if cfg.joint_interval is not None:
        n_points = int(math.floor(cfg.window / cfg.joint_interval + 1e-9))
        point_interval = float(cfg.joint_interval)
    else:
        n_points, point_interval = 0, 0.0
    if spec.J >= 2:
        ja, jb = cfg.joint_pair
        if not (0 <= ja < spec.J and 0 <= jb < spec.J and ja != jb):
            raise ValueError("joint_pair must name two distinct stations")
    else:
        ja, jb = -1, -1

    cum_route = np.cumsum(spec.P, axis=1)
    arr_f, arr_s = _dist_arrays(spec.arrival_dist)
    svc_f, svc_s = _dist_arrays(spec.service_dist)
    seed = kernel_seed(cfg.seed) if stream is None else kernel_seed(cfg.seed, stream)

    area, pmf_time, over_time, over_area, exits, ext, joint, points = _run(
        np.ascontiguousarray(spec.alpha, dtype=float),
        np.ascontiguousarray(spec.mu, dtype=float),
        cum_route, arr_f, arr_s, svc_f, svc_s,
        float(cfg.window_start), float(batch_len), int(cfg.num_batches), int(pmf_cap),
        point_interval, n_points, ja, jb, int(cfg.joint_cap), seed,
    )
    return SimEstimate(
        batch_length=batch_len,
        window_start=cfg.window_start,
        batch_means=area / batch_len,
        pmf_batches=pmf_time / batch_len,
        overflow_batches=over_time / batch_len,
        overflow_area=over_area,
        exits=exits,
        external_arrivals=ext,
        joint_pair=(ja, jb) if ja >= 0 else None,
        joint_batches=joint / batch_len if ja >= 0 else None,
        points=points if n_points > 0 else None,
        meta={"horizon": cfg.horizon, "warmup_fraction": cfg.warmup_fraction,
              "seed": cfg.seed, "stream": stream},
    )


@dataclass(frozen=True, eq=False)
class JacksonOracle:
    """Exact product-form law of an all-exponential network: geometric marginals."""

    rho: np.ndarray
    cap: int

    @property
    def means(self) -> np.ndarray:
        return self.rho / (1.0 - self.rho)

    @property
    def pmf(self) -> np.ndarray:
        k = np.arange(self.cap + 1)
        return (1.0 - self.rho[:, None]) * self.rho[:, None] ** k[None, :]

    def joint(self, levels: tuple[int, ...]) -> float:
        return float(np.prod([(1.0 - r) * r**k for r, k in zip(self.rho, levels)]))


def jackson_oracle(spec: NetworkSpec, cap: int = 100) -> JacksonOracle:
    from .flow import solve_traffic

    for a, d in zip(spec.alpha, spec.arrival_dist):
        if a > 0 and d.family != "exponential":
            raise NetworkError("oracle requires Jackson network (exponential primitives)")
    if any(d.family != "exponential" for d in spec.service_dist):
        raise NetworkError("oracle requires Jackson network (exponential primitives)")
    rho = solve_traffic(spec).rho
    if np.any(rho >= 1):
        raise NetworkError("oracle requires every rho_j < 1")
    return JacksonOracle(rho=rho, cap=cap)


def with_horizon(cfg: SimConfig, horizon: float) -> SimConfig:
    return replace(cfg, horizon=horizon)
