from fractions import Fraction
import math

import numpy as np
import pytest

from avezlab.boundary import (CylinderMeasure, FiniteStationarySpace, KoopmanTruncation, QPower, cocycle_defect,
                              cylinder_ratio, furstenberg_entropy, furstenberg_log_q, harish_chandra_xi,
                              harmonic_measure, koopman_limit, koopman_norm_lower, koopman_pairing, radial_classes,
                              rn_derivative, stationarity_defect, xi_entropy_limit, xi_radial_table)
from avezlab.errors import DomainError, ResourceError
from avezlab.groups import GroupDescriptor
from avezlab.measures import SparseMeasure
from avezlab.spectra import radius_pfq_upper_rd

H_F2 = 0.5 * math.log(3)


@pytest.fixture
def nu():
    return harmonic_measure(2, 3)


def test_cylinder_masses():
    nu = harmonic_measure(2, 2)
    assert [nu.mass(w) for w in nu.words(1)] == [Fraction(1, 4)] * 4
    assert len(nu.words(2)) == 12
    assert all(nu.mass(w) == Fraction(1, 12) for w in nu.words(2))
    assert nu.total(3) == 1
    assert nu.refinement_defect((1, 2)) == 0


def test_depth_cap():
    assert harmonic_measure(2, 12).depth == 12
    with pytest.raises(ResourceError):
        harmonic_measure(2, 13)
    with pytest.raises(ValueError):
        CylinderMeasure(1, 2)


def test_rn_derivative_of_a(nu):
    rho = rn_derivative("a", nu, 1)
    assert rho.value((-1,)).to_fraction(3) == 3
    for w in [(1,), (2,), (-2,)]:
        assert rho.value(w).to_fraction(3) == Fraction(1, 3)
    assert rho.integral() == 1
    assert rho.value((-1, -2, 1)) == rho.value((-1,))
    with pytest.raises(DomainError):
        rn_derivative("ab", nu, 1)


def test_rn_integrals(nu):
    for r in range(4):
        for s in nu.words(r) if r else [()]:
            assert rn_derivative(s, nu, max(r, 1)).integral() == 1


def test_stationarity(f2_srw, f2):
    nu = harmonic_measure(2, 4)
    for m in range(1, 5):
        assert stationarity_defect(f2_srw, nu, m) == 0
    assert stationarity_defect(SparseMeasure.lazy_srw(f2), nu, 3) == 0
    assert stationarity_defect(SparseMeasure.point_mass(f2, (1,)), nu, 2) > 0


def test_cocycle_identity(nu):
    rng = np.random.default_rng(0)
    for _ in range(20):
        s, t = nu.group.random_key(rng, 2), nu.group.random_key(rng, 2)
        assert cocycle_defect(s, t, nu) == 0
    with pytest.raises(DomainError):
        cocycle_defect("ab", "a", nu, 2)


def test_cylinder_ratio_refines(nu):
    # ab cancels all of B, so C_B is refined until the image is a cylinder
    assert cylinder_ratio(nu, (1, 2), (-2,)) == Fraction(11, 3)
    assert cylinder_ratio(nu, (1,), (-1,)) == 3


def test_harish_chandra_xi(nu):
    assert harish_chandra_xi("e", nu) == pytest.approx(1)
    assert harish_chandra_xi("a", nu) == pytest.approx(math.sqrt(3) / 2)
    assert harish_chandra_xi("a", nu, 1) == pytest.approx(harish_chandra_xi("a", nu, 3), abs=1e-12)
    assert harish_chandra_xi("ab", nu) == pytest.approx(math.exp(xi_radial_table(2, 2)[2]), abs=1e-12)
    assert harish_chandra_xi("ab", nu) == pytest.approx(harish_chandra_xi("BA", nu), abs=1e-12)


def test_radial_classes():
    for r in range(6):
        classes = radial_classes(2, r)
        assert sum(mass for mass, _ in classes) == 1
        assert sum(mass * Fraction(3) ** e for mass, e in classes) == 1


def test_furstenberg_entropy(f2_srw, f2):
    nu = harmonic_measure(2, 1)
    assert furstenberg_log_q(f2_srw, nu) == Fraction(1, 2)
    assert furstenberg_entropy(f2_srw, nu) == pytest.approx(0.549306, abs=1e-6)
    assert furstenberg_entropy(f2_srw, nu, 3) == pytest.approx(0.549306, abs=1e-6)
    assert furstenberg_entropy(SparseMeasure.point_mass(f2), nu) == 0
    f3 = SparseMeasure.srw(GroupDescriptor("free", 3))
    assert furstenberg_log_q(f3, harmonic_measure(3, 1)) == Fraction(2, 3)


def test_group_mismatch(z_srw, nu):
    with pytest.raises(DomainError):
        furstenberg_entropy(z_srw, nu)


def test_finite_stationary_space():
    cyclic = GroupDescriptor("cyclic", 5)
    space = FiniteStationarySpace(cyclic)
    mu = SparseMeasure.srw(cyclic)
    assert stationarity_defect(mu, space) == 0
    assert furstenberg_entropy(mu, space) == 0
    skewed = FiniteStationarySpace(GroupDescriptor("cyclic", 3), [Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)])
    assert skewed.stationarity_defect(SparseMeasure.srw(GroupDescriptor("cyclic", 3))) > 0
    with pytest.raises(ValueError):
        FiniteStationarySpace(cyclic, [Fraction(1, 2)] * 5)


def test_koopman_pairing(f2_srw, nu):
    assert koopman_pairing(f2_srw, nu, 2) == pytest.approx(math.sqrt(3) / 2)
    assert koopman_pairing(f2_srw, nu, 8, m=2) == pytest.approx(koopman_pairing(f2_srw, nu, 8), abs=1e-12)
    with pytest.raises(DomainError):
        koopman_pairing(f2_srw, nu, 1.5)


def test_koopman_limit(f2_srw, nu):
    report = koopman_limit(f2_srw, nu)
    assert report.estimate == pytest.approx(H_F2, abs=1e-3)
    assert report.sequence.is_monotone(increasing=True, slack=1e-12)
    assert report.estimate <= report.diagnostics["furstenberg"] + 1e-12
    assert report.diagnostics["error"] <= 1e-3
    assert not report.flags


def test_xi_entropy_limit(f2_srw, nu):
    report = xi_entropy_limit(f2_srw, nu, 400)
    assert report.estimate == pytest.approx(H_F2, rel=0.02)


@pytest.mark.slow
def test_xi_entropy_limit_long(f2_srw, nu):
    assert xi_entropy_limit(f2_srw, nu, 2000).estimate == pytest.approx(H_F2, rel=0.02)


def test_koopman_truncation(f2_srw, f2):
    one = koopman_norm_lower(f2_srw, harmonic_measure(2, 1), m=1)
    assert one >= math.sqrt(3) / 2 - 1e-12
    three = koopman_norm_lower(f2_srw, harmonic_measure(2, 3), m=3)
    assert three >= one - 1e-12
    assert koopman_norm_lower(SparseMeasure.point_mass(f2), harmonic_measure(2, 2), m=2) == pytest.approx(1)
    truncation = KoopmanTruncation(f2_srw, harmonic_measure(2, 1), 2, 1)
    assert truncation.pairing_with_constant() == pytest.approx(math.sqrt(3) / 2)


def test_koopman_norm_below_rd_radius(f2_srw, nu):
    norm = koopman_norm_lower(f2_srw, nu, 2.0, m=3)
    upper = radius_pfq_upper_rd(f2_srw, 2, 2, 400)
    p = 2.0
    assert -p * math.log(norm) >= -p * math.log(upper.value) - 0.03
    assert norm <= upper.upper


def test_qpower():
    assert QPower.from_fraction(Fraction(1, 3), 3) == QPower(-1, Fraction(1))
    assert QPower.from_fraction(Fraction(18, 5), 3) == QPower(2, Fraction(2, 5))
    assert (QPower(2) * QPower(-3, Fraction(1, 2))).to_fraction(3) == Fraction(1, 6)
    with pytest.raises(ValueError):
        QPower.from_fraction(Fraction(0), 3)
