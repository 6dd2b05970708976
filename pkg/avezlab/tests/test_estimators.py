import math

import pytest

from avezlab.estimators import (MonteCarloConfig, avez_entropy, convolution_entropy, fundamental_inequality_report,
                                inverse_series_report, lyapunov_direct, lyapunov_via_radius, weighted_avez_entropy,
                                weighted_shannon_limit)
from avezlab.groups import GroupDescriptor
from avezlab.measures import SparseMeasure
from avezlab.weights import ConstantWeight, ExponentialWeight, PolynomialWeight

H_F2 = 0.5 * math.log(3)


def test_avez_point_mass(f2):
    report = avez_entropy(SparseMeasure.point_mass(f2), 5)
    assert report.estimate == 0
    assert report.upper == 0


def test_avez_free(f2_srw):
    report = avez_entropy(f2_srw, 12)
    assert report.estimate == pytest.approx(H_F2, rel=0.05)
    assert report.lower <= report.estimate <= report.upper
    assert report.upper == pytest.approx(min(v / n for n, v in report.sequence))
    assert report.diagnostics["point_method"] == "log-linear-fit"


def test_avez_z(z_srw):
    assert avez_entropy(z_srw, 200).estimate <= 0.02


def test_avez_monte_carlo(f2_srw):
    report = avez_entropy(f2_srw, 6, MonteCarloConfig(seed=1, paths=500, steps=50))
    assert report.seed == 1
    assert "monte-carlo" in report.method
    assert report.diagnostics["monte_carlo"]["config"] == {"seed": 1, "paths": 500, "steps": 50}
    with pytest.raises(ValueError):
        MonteCarloConfig(seed=None)


def test_lyapunov_trivial_weight(f2_srw):
    report = lyapunov_direct(f2_srw, ConstantWeight(1), 50)
    assert report.estimate == 0
    assert report.upper == 0


def test_lyapunov_exponential_is_speed(f2_srw):
    report = lyapunov_direct(f2_srw, ExponentialWeight(rate=1.0), 400)
    assert report.estimate == pytest.approx(0.5, abs=0.01)
    assert report.estimate >= 0


def test_lyapunov_log_length_vanishes(f2_srw):
    report = lyapunov_direct(f2_srw, PolynomialWeight(1), 800)
    assert report.sequences["per_n"].last <= 0.01
    assert report.diagnostics["tail_decreasing"]


def test_lyapunov_via_radius_z(z_srw):
    report = lyapunov_via_radius(z_srw, ExponentialWeight(rate=1.0), [1, 2, 4, 8, 16], n_max=12)
    for p, value in report.sequence:
        assert value == pytest.approx(p * math.log(math.cosh(1 / p)), rel=1e-6)
    assert 0 <= report.estimate <= 0.01
    assert not report.flags


@pytest.mark.slow
def test_lyapunov_routes_agree(f2_srw):
    omega = ExponentialWeight(rate=1.0)
    direct = lyapunov_direct(f2_srw, omega, 400).estimate
    radius = lyapunov_via_radius(f2_srw, omega, n_max=400).estimate
    assert radius == pytest.approx(0.5, abs=0.02)
    assert direct == pytest.approx(radius, abs=0.02)


def test_weighted_shannon_limit(f2_srw, f2):
    assert weighted_shannon_limit(f2_srw, ConstantWeight(1)).estimate == pytest.approx(math.log(4), abs=1e-9)
    report = weighted_shannon_limit(f2_srw, PolynomialWeight(1))
    assert report.estimate == pytest.approx(math.log(2), abs=1e-9)
    assert report.diagnostics["error"] <= 1e-9
    delta = SparseMeasure.point_mass(f2)
    assert weighted_shannon_limit(delta, PolynomialWeight(2)).estimate == pytest.approx(0, abs=1e-12)


def test_weighted_avez_entropy(f2_srw):
    report = weighted_avez_entropy(f2_srw, PolynomialWeight(1), 12)
    assert report.diagnostics["identity_defect"] <= 1e-9
    assert not report.flags
    assert report.estimate == pytest.approx(H_F2, abs=0.03)
    trivial = weighted_avez_entropy(f2_srw, ConstantWeight(1), 12)
    assert trivial.estimate == pytest.approx(avez_entropy(f2_srw, 12).estimate, abs=1e-9)


def test_convolution_entropy_free(f2_srw):
    report = convolution_entropy(f2_srw, n_max=400)
    assert report.estimate == pytest.approx(H_F2, rel=0.10)
    assert report.lower <= report.estimate <= report.upper
    assert report.sequences["per_p"].is_monotone(increasing=True, slack=1e-9)


def test_convolution_entropy_amenable():
    report = convolution_entropy(SparseMeasure.srw(GroupDescriptor("abelian", 2)), n_max=200)
    assert report.estimate <= 0.02
    assert "folner" in report.method


@pytest.mark.slow
def test_lamplighter_strict_gap():
    mu = SparseMeasure.srw(GroupDescriptor("lamplighter", 3))
    h = avez_entropy(mu, 10)
    assert h.estimate >= 0.05
    report = convolution_entropy(mu, n_max=100)
    assert 0 <= report.estimate <= 0.02
    assert report.diagnostics["c_le_h"]
    assert report.diagnostics["h_estimate"] == pytest.approx(h.estimate)


@pytest.mark.slow
def test_avez_lamplighter_default_steps():
    report = avez_entropy(SparseMeasure.srw(GroupDescriptor("lamplighter", 3)))
    assert len(report.sequence) == 12
    assert report.estimate > 0


def test_fundamental_inequality(f2_srw, f2):
    report = fundamental_inequality_report(f2_srw, [ExponentialWeight(rate=1.0)], 12)
    assert report.diagnostics["v_S"] == pytest.approx(math.log(3), abs=1e-3)
    assert report.diagnostics["speed"] == pytest.approx(0.5, abs=0.01)
    assert report.estimate == pytest.approx(0, abs=0.04)
    delta = fundamental_inequality_report(SparseMeasure.point_mass(f2), [ExponentialWeight(rate=1.0)], 6)
    assert delta.estimate == pytest.approx(0, abs=1e-12)
    assert delta.diagnostics["weights"][0]["slack"] == pytest.approx(0, abs=1e-12)


def test_inverse_series_report(f2_srw):
    report = inverse_series_report(f2_srw, 6)
    assert report.diagnostics["band_ok"]
    assert report.diagnostics["gibbs_ok"]
    assert report.diagnostics["domination"]["within"]
    assert not report.flags
