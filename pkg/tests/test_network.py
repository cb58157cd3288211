import numpy as np
import pytest

from gjn.network import DistributionSpec, NetworkError, NetworkSpec, sample, validate

from .conftest import ALPHA42, P42, two_station


def _spec(P, alpha=(0.3, 0.2)):
    J = len(alpha)
    exp = [DistributionSpec.exponential()] * J
    return NetworkSpec(alpha=alpha, mu=np.ones(J), P=P, arrival_dist=exp, service_dist=exp)


def test_scv_per_family():
    assert DistributionSpec.exponential().scv() == 1.0
    assert DistributionSpec.gamma(0.75).scv() == pytest.approx(1 / 0.75)
    assert DistributionSpec.deterministic().scv() == 0.0


def test_gamma_needs_positive_shape():
    with pytest.raises(NetworkError):
        DistributionSpec.gamma(0.0)
    with pytest.raises(NetworkError):
        DistributionSpec("weibull")


def test_distribution_round_trip():
    for d in (DistributionSpec.exponential(), DistributionSpec.gamma(1.7), DistributionSpec.deterministic()):
        assert DistributionSpec.from_dict(d.to_dict()) == d


def test_laplace_transforms_match_closed_forms():
    s = np.array([-0.4, 0.0, 0.3, 2.0])
    for x in s:
        assert DistributionSpec.exponential().log_laplace(x) == pytest.approx(-np.log1p(x))
        assert DistributionSpec.gamma(2.0).log_laplace(x) == pytest.approx(-2.0 * np.log1p(x / 2.0))
        assert DistributionSpec.deterministic().log_laplace(x) == pytest.approx(-x)


def test_validate_reference_network_is_clean():
    assert validate(_spec(P42)) == []


def test_validate_row_sum_above_one():
    problems = validate(_spec([[0.6, 0.6], [0.4, 0.2]]))
    assert any("row-stochasticity exceeded" in p for p in problems)


def test_validate_identity_routing_is_singular():
    problems = validate(_spec(np.eye(2)))
    assert any("(I-P) singular" in p for p in problems)


def test_validate_negative_entries_and_rates():
    spec = _spec([[0.3, -0.1], [0.4, 0.2]]).replace(mu=[1.0, 0.0])
    problems = validate(spec)
    assert any("negative" in p for p in problems)
    assert any("mu" in p for p in problems)


def test_shape_mismatch_raises():
    exp = [DistributionSpec.exponential()] * 2
    with pytest.raises(NetworkError):
        NetworkSpec(alpha=[1.0, 1.0], mu=[1.0], P=np.zeros((2, 2)), arrival_dist=exp, service_dist=exp)


def test_spec_arrays_are_read_only():
    spec = _spec(P42)
    with pytest.raises(ValueError):
        spec.P[0, 0] = 0.5


def test_spec_round_trip_and_with_rho():
    spec = two_station(([0.75, 0.8], [0.95, 0.6]))
    again = NetworkSpec.from_dict(spec.to_dict())
    np.testing.assert_array_equal(again.mu, spec.mu)
    assert again.service_dist == spec.service_dist
    np.testing.assert_allclose(spec.mu, [1 / 0.92, 1 / 0.98])
    np.testing.assert_array_equal(spec.alpha, ALPHA42)


def test_c2_arrival_zero_without_external_arrivals():
    spec = _spec(P42, alpha=(0.3, 0.0)).replace(arrival_dist=[DistributionSpec.gamma(0.5)] * 2)
    np.testing.assert_allclose(spec.c2_arrival, [2.0, 0.0])


def test_deterministic_sample_is_one():
    rng = np.random.default_rng(0)
    assert sample(DistributionSpec.deterministic(), rng) == 1.0
    assert np.all(sample(DistributionSpec.deterministic(), rng, 5) == 1.0)


def test_exponential_sample_mean():
    x = sample(DistributionSpec.exponential(), np.random.default_rng(1), 10**6)
    assert abs(x.mean() - 1.0) < 5e-3


def test_gamma_sample_variance():
    x = sample(DistributionSpec.gamma(0.75), np.random.default_rng(2), 10**6)
    assert abs(x.mean() - 1.0) < 5e-3
    assert abs(x.var() / (1 / 0.75) - 1.0) < 0.02
