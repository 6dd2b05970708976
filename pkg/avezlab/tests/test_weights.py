import math

import numpy as np
import pytest

from avezlab.errors import ConfigError, DomainError
from avezlab.estimators import weighted_avez_entropy
from avezlab.measures import SparseMeasure, convolution_power, shannon_entropy
from avezlab.utils import zeta_partial
from avezlab.weights import (ConstantWeight, ExponentialWeight, PolynomialWeight, Weight, WeightKind,
                             build_inverse_series_weight, check_submultiplicative, gibbs_slack, growth_rate, kl_form,
                             l1_interpolation, log_moment, lq_interpolation, parse_weight,
                             verify_convolution_domination, weighted_l1_norm, weighted_lq_norm,
                             weighted_renyi_sequence, weighted_shannon_entropy)


class SquareWeight(Weight):
    """exp(L^2), not submultiplicative."""
    kind = WeightKind.Polynomial

    def log_of_lengths(self, lengths):
        return np.asarray(lengths, dtype=float) ** 2


def test_weighted_norms(f2_srw, z_srw):
    assert weighted_l1_norm(f2_srw, PolynomialWeight(2)) == pytest.approx(4)
    omega = ExponentialWeight(a=math.e)
    assert weighted_lq_norm(z_srw, 2, omega.power(2)) == pytest.approx(math.sqrt(math.e / 2))
    assert weighted_l1_norm(z_srw, ConstantWeight(1)) == pytest.approx(1)


def test_growth_rates(z, f2):
    assert growth_rate(ExponentialWeight(a=math.e), z) == pytest.approx(math.e)
    assert growth_rate(ConstantWeight(1), f2) == pytest.approx(1)
    assert growth_rate(PolynomialWeight(2), f2) == pytest.approx(1, abs=0.05)


def test_log_moments(f2_srw, z_srw):
    assert log_moment(f2_srw, PolynomialWeight(1)) == pytest.approx(math.log(2))
    assert log_moment(z_srw, ExponentialWeight(rate=1.0)) == pytest.approx(1)
    assert log_moment(f2_srw, ConstantWeight(1)) == 0


def test_weighted_entropy_identity(f2_srw):
    omega = PolynomialWeight(1.5)
    for n in (1, 3):
        power = convolution_power(f2_srw, n)
        expected = shannon_entropy(power) - log_moment(power, omega)
        assert weighted_shannon_entropy(power, omega) == pytest.approx(expected, abs=1e-9)
        assert kl_form(power, omega) == pytest.approx(expected, abs=1e-9)


def test_weighted_entropy_can_be_negative(f2_srw):
    omega = ExponentialWeight(rate=2.0)
    assert weighted_shannon_entropy(f2_srw, omega) == pytest.approx(math.log(4) - 2)
    # h - 2 l with h = log(3)/2 and speed 1/2
    report = weighted_avez_entropy(f2_srw, omega, 12)
    assert report.estimate == pytest.approx(0.5 * math.log(3) - 1, abs=0.04)
    assert report.estimate < 0
    assert report.diagnostics["difference_route"] == pytest.approx(report.estimate, abs=0.04)
    assert report.diagnostics["identity_defect"] <= 1e-9


def test_gibbs_slack(z_srw):
    # sum over Z of e^-|x| is coth(1/2)
    log_norm = math.log(1 / math.tanh(0.5))
    slack = gibbs_slack(z_srw, ExponentialWeight(rate=1.0), log_norm)
    assert slack == pytest.approx(1 + log_norm - math.log(2))
    assert slack >= 0


def test_domination_bound(z_srw, f2_srw):
    for mu, n in ((z_srw, 8), (f2_srw, 6)):
        report = verify_convolution_domination(build_inverse_series_weight(mu, n))
        assert report.max_ratio <= 9.62
        assert report.within


def test_domination_point_mass(f2):
    omega = build_inverse_series_weight(SparseMeasure.point_mass(f2), 5)
    report = verify_convolution_domination(omega)
    assert report.max_ratio == pytest.approx(zeta_partial(3, 5))
    assert omega.inverse_l1_norm() == pytest.approx(zeta_partial(3, 5))


def test_inverse_series_outside_support(z_srw, z):
    omega = build_inverse_series_weight(z_srw, 2)
    assert math.isinf(omega.log_of_key(z, (5,)))
    with pytest.raises(DomainError):
        log_moment(SparseMeasure.point_mass(z, (5,)), omega)


def test_interpolation_inequalities(f2):
    rng = np.random.default_rng(5)
    for _ in range(20):
        keys = {f2.random_key(rng, 4) for _ in range(8)}
        f = SparseMeasure(f2, {k: float(rng.uniform(0.1, 1.0)) for k in keys}, normalize=True)
        omega = PolynomialWeight(float(rng.uniform(0.5, 3)))
        u, p = sorted(rng.uniform(1, 10, size=2))
        lhs, rhs = l1_interpolation(f, omega, u, p)
        assert lhs <= rhs * (1 + 1e-10)
        p0, p1 = sorted(rng.uniform(1.1, 10, size=2))
        lhs, rhs = lq_interpolation(f, omega, p0, p1)
        assert lhs <= rhs * (1 + 1e-10)


def test_weighted_renyi_sequence_increases(f2_srw):
    power = convolution_power(f2_srw, 3)
    seq = weighted_renyi_sequence(power, PolynomialWeight(2), [2, 4, 8, 16, 32])
    assert seq.is_monotone(increasing=True)
    assert seq.last <= weighted_shannon_entropy(power, PolynomialWeight(2)) + 1e-9


def test_submultiplicativity(f2):
    assert check_submultiplicative(ExponentialWeight(rate=1.0), f2) <= 1 + 1e-12
    assert check_submultiplicative(PolynomialWeight(2), f2) <= 1 + 1e-12
    with pytest.raises(DomainError):
        check_submultiplicative(SquareWeight(), f2)


def test_parse_weight(f2_srw):
    assert parse_weight("exp:a=e").base == pytest.approx(math.e)
    assert parse_weight("poly:d=2").d == 2
    assert parse_weight("const").c == 1
    assert parse_weight("invseries:N=3", f2_srw).n_terms == 3
    with pytest.raises(ConfigError):
        parse_weight("blob:1")
    with pytest.raises(ConfigError):
        parse_weight("invseries:N=3")
    with pytest.raises(ConfigError):
        parse_weight("exp:a=0.5")


def test_weight_powers():
    omega = PolynomialWeight(2).power(4)
    assert omega.log_of_lengths(np.array([3.0]))[0] == pytest.approx(math.log(16) / 4)
    with pytest.raises(ValueError):
        PolynomialWeight(2).power(0.5)
