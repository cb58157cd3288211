"""Batch-means intervals, chi-square tails and the G-test of independence."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as _sps

GAMMA_TOL = 1e-15
GAMMA_MAXITER = 10**7


def _gamma_series(a: float, x: float) -> float:
    # lower regularized P(a, x), valid for x < a + 1
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(GAMMA_MAXITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * GAMMA_TOL:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_contfrac(a: float, x: float) -> float:
    # upper regularized Q(a, x) by modified Lentz, valid for x >= a + 1
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, GAMMA_MAXITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < GAMMA_TOL:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammaincc(a: float, x: float) -> float:
    """Regularized upper incomplete gamma function ``Q(a, x)``."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gamma_series(a, x))
    return _gamma_contfrac(a, x)


def chi2_sf(x: float, df: float) -> float:
    """Upper tail ``P(chi2_df > x)``."""
    if df <= 0:
        raise ValueError("df must be positive")
    if x <= 0:
        return 1.0
    return gammaincc(0.5 * df, 0.5 * x)


def batch_ci(batch_values: Sequence[float], level: float = 0.95) -> tuple[float, float]:
    """Mean and Student-t half-width from ``n >= 2`` batch averages."""
    values = np.asarray(batch_values, dtype=float)
    n = values.size
    if n < 2:
        raise ValueError("need at least 2 batches")
    mean = float(values.mean())
    s = float(values.std(ddof=1))
    t = float(_sps.t.ppf(0.5 * (1.0 + level), n - 1))
    return mean, t * s / math.sqrt(n)


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    counts: np.ndarray
    row_labels: np.ndarray
    col_labels: np.ndarray

    @classmethod
    def from_pairs(cls, rows: Sequence[int], cols: Sequence[int]) -> ContingencyTable:
        """Count co-occurrences; only observed values become rows/columns."""
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        rl, ri = np.unique(rows, return_inverse=True)
        cl, ci = np.unique(cols, return_inverse=True)
        counts = np.zeros((rl.size, cl.size), dtype=np.int64)
        np.add.at(counts, (ri, ci), 1)
        return cls(counts, rl, cl)

    def trimmed(self) -> ContingencyTable:
        keep_r = self.counts.sum(axis=1) > 0
        keep_c = self.counts.sum(axis=0) > 0
        return ContingencyTable(
            self.counts[keep_r][:, keep_c], self.row_labels[keep_r], self.col_labels[keep_c]
        )

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape


@dataclass(frozen=True)
class GTestResult:
    G: float
    df: int
    p_value: float
    shape: tuple[int, int]


def g_test(table: ContingencyTable | np.ndarray) -> GTestResult:
    """Likelihood-ratio test of independence, ``G = 2 sum O ln(O / E)``.

    Empty rows and columns are dropped first; zero cells contribute nothing.
    """
    if not isinstance(table, ContingencyTable):
        counts = np.asarray(table)
        table = ContingencyTable(counts, np.arange(counts.shape[0]), np.arange(counts.shape[1]))
    table = table.trimmed()
    O = table.counts.astype(float)
    n = O.sum()
    if n < 1:
        raise ValueError("contingency table is empty")
    R, C = O.shape
    if R < 2 or C < 2:
        raise ValueError(f"degenerate {R}x{C} table: no degrees of freedom")
    E = np.outer(O.sum(axis=1), O.sum(axis=0)) / n
    mask = O > 0
    G = 2.0 * float(np.sum(O[mask] * np.log(O[mask] / E[mask])))
    if G < 0 and G > -1e-9 * n:
        G = 0.0
    df = (R - 1) * (C - 1)
    return GTestResult(G=G, df=df, p_value=chi2_sf(G, df), shape=(R, C))


def joint_product_report(estimate, k_max: int) -> np.ndarray:
    """Time-weighted ``P(Z_a=k1) P(Z_b=k2)`` next to ``P(Z_a=k1, Z_b=k2)``.

    Returns an array of shape ``(k_max + 1, k_max + 1, 2)`` where the last
    axis is (product of marginals, joint).
    """
    if estimate.J < 2:
        raise ValueError("joint report needs at least two stations")
    if estimate.joint_batches is None:
        raise ValueError("joint recording absent")
    jcap = estimate.joint_batches.shape[1] - 1
    if k_max > min(jcap, estimate.pmf_cap):
        raise ValueError(f"k_max={k_max} exceeds recorded joint_cap={jcap}")
    a, b = estimate.joint_pair
    pmf = estimate.pmf
    product = np.outer(pmf[a, : k_max + 1], pmf[b, : k_max + 1])
    joint = estimate.joint_batches.mean(axis=0)[: k_max + 1, : k_max + 1]
    return np.stack([product, joint], axis=-1)
