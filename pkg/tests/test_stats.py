import math

import numpy as np
import pytest
from scipy import special, stats

from gjn.sim import SimEstimate
from gjn.stats import ContingencyTable, batch_ci, chi2_sf, g_test, gammaincc, joint_product_report


@pytest.mark.parametrize("a", [0.5, 1.0, 2.5, 5.0, 30.0, 200.0])
@pytest.mark.parametrize("x", [1e-3, 0.5, 1.0, 3.0, 10.0, 50.0, 400.0])
def test_gammaincc_matches_scipy(a, x):
    assert gammaincc(a, x) == pytest.approx(special.gammaincc(a, x), rel=1e-9, abs=1e-300)


def test_gammaincc_edges():
    assert gammaincc(2.0, 0.0) == 1.0
    with pytest.raises(ValueError):
        gammaincc(0.0, 1.0)
    with pytest.raises(ValueError):
        gammaincc(1.0, -1.0)


@pytest.mark.parametrize("df, x", [(1, 3.841), (10, 18.307)])
def test_chi2_critical_values(df, x):
    assert abs(chi2_sf(x, df) - 0.05) < 1e-4


def test_chi2_sf_nonpositive_statistic():
    assert chi2_sf(0.0, 3) == 1.0


def test_batch_ci_hand_example():
    mean, hw = batch_ci([1, 2, 3, 4, 5])
    assert mean == 3.0
    assert hw == pytest.approx(2.7764 * 1.5811 / math.sqrt(5), rel=1e-4)


def test_batch_ci_constant_batches():
    assert batch_ci([2.0] * 20) == (2.0, 0.0)


def test_batch_ci_needs_two_batches():
    with pytest.raises(ValueError):
        batch_ci([1.0])


def test_batch_ci_coverage():
    rng = np.random.default_rng(8)
    reps = 10_000
    covered = 0
    for row in rng.standard_normal((reps, 20)):
        m, hw = batch_ci(row)
        covered += abs(m) <= hw
    assert abs(covered / reps - 0.95) <= 0.01


def test_g_test_proportional_table():
    res = g_test(np.outer([1, 2, 3], [4, 5]) * 10)
    assert res.G == 0.0
    assert res.p_value == 1.0
    assert res.df == 2


def test_g_test_perfect_dependence():
    res = g_test(np.eye(10, dtype=int) * 100)
    assert res.G == pytest.approx(2 * 1000 * math.log(10))
    assert res.p_value < 1e-10
    assert res.p_value == pytest.approx(stats.chi2.sf(res.G, 81), rel=1e-8)


def test_g_test_trims_empty_rows_and_columns():
    counts = np.array([[5, 0, 3], [0, 0, 0], [2, 0, 7]])
    res = g_test(counts)
    assert res.shape == (2, 2) and res.df == 1
    O = np.array([[5, 3], [2, 7]], dtype=float)
    E = np.outer(O.sum(1), O.sum(0)) / O.sum()
    assert res.G == pytest.approx(2 * np.sum(O * np.log(O / E)))


def test_g_test_zero_cells_contribute_nothing():
    res = g_test(np.array([[10, 0], [0, 10]]))
    assert res.G == pytest.approx(40 * math.log(2))


def test_g_test_degenerate_table():
    with pytest.raises(ValueError, match="degenerate"):
        g_test(np.array([[3, 4, 5]]))
    with pytest.raises(ValueError):
        g_test(np.zeros((2, 2)))


def test_contingency_from_pairs():
    t = ContingencyTable.from_pairs([0, 0, 3, 3, 3], [1, 2, 1, 1, 2])
    np.testing.assert_array_equal(t.row_labels, [0, 3])
    np.testing.assert_array_equal(t.col_labels, [1, 2])
    np.testing.assert_array_equal(t.counts, [[1, 1], [2, 1]])
    assert t.total == 5


def _synthetic_estimate(pa, pb, joint, J=2):
    nb = 4
    K = len(pa) - 1
    pmf = np.zeros((nb, J, K + 1))
    pmf[:, 0] = pa
    if J > 1:
        pmf[:, 1] = pb
    z = np.zeros((nb, J))
    return SimEstimate(
        batch_length=1.0, window_start=0.0, batch_means=z, pmf_batches=pmf,
        overflow_batches=z, overflow_area=z, exits=np.zeros(nb, dtype=np.int64),
        external_arrivals=np.zeros((nb, J), dtype=np.int64),
        joint_pair=(0, 1) if J > 1 else None,
        joint_batches=None if joint is None else np.repeat(joint[None], nb, axis=0),
        points=None, level=0.95, meta={},
    )


def test_joint_report_independent_streams():
    pa = np.array([0.5, 0.3, 0.2])
    pb = np.array([0.6, 0.3, 0.1])
    rep = joint_product_report(_synthetic_estimate(pa, pb, np.outer(pa, pb)), 2)
    np.testing.assert_allclose(rep[..., 0], rep[..., 1])


def test_joint_report_single_station():
    with pytest.raises(ValueError, match="two stations"):
        joint_product_report(_synthetic_estimate(np.array([0.5, 0.5]), None, None, J=1), 1)


def test_joint_report_cap():
    pa = np.array([0.5, 0.3, 0.2])
    with pytest.raises(ValueError):
        joint_product_report(_synthetic_estimate(pa, pa, np.outer(pa, pa)), 5)
