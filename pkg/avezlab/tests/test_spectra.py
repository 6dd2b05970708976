import math

import pytest

from avezlab.errors import DomainError
from avezlab.groups import GroupDescriptor
from avezlab.measures import SparseMeasure
from avezlab.spectra import (RadiusMethod, folner_lower, radius_l1_weighted, radius_pf2_symmetric, radius_pfq_lower,
                             radius_pfq_upper_rd, return_probabilities, sample_steps)
from avezlab.weights import ConstantWeight, ExponentialWeight

KESTEN_F2 = math.sqrt(3) / 2


def test_l1_radius_trivial_weight(f2_srw):
    estimate = radius_l1_weighted(f2_srw, ConstantWeight(1), n_max=50)
    assert estimate.value == pytest.approx(1, abs=1e-12)
    assert estimate.lower == 1


def test_l1_radius_cosh(z_srw):
    estimate = radius_l1_weighted(z_srw, ExponentialWeight(rate=1.0), p=1, n_max=12)
    assert estimate.value == pytest.approx(math.cosh(1), rel=1e-9)
    assert estimate.upper >= estimate.value


def test_kesten_free(f2_srw):
    estimate = radius_pf2_symmetric(f2_srw, 400)
    assert estimate.value == pytest.approx(KESTEN_F2, abs=5e-3)
    assert estimate.lower <= estimate.value <= 1
    assert RadiusMethod.ReturnProb in estimate.method


@pytest.mark.slow
def test_kesten_free_long(f2_srw):
    assert radius_pf2_symmetric(f2_srw, 2000).value == pytest.approx(KESTEN_F2, abs=1e-3)


def test_kesten_point_mass(f2):
    assert radius_pf2_symmetric(SparseMeasure.point_mass(f2), 10).value == 1


def test_kesten_amenable(z_srw):
    estimate = radius_pf2_symmetric(z_srw, 500)
    assert estimate.value >= 0.996
    assert RadiusMethod.Folner in estimate.method


@pytest.mark.parametrize("spec", ["lamplighter:1", "cyclic:6", "abelian:2"])
def test_kesten_amenable_families(spec):
    estimate = radius_pf2_symmetric(SparseMeasure.srw(GroupDescriptor.from_spec(spec)), 200)
    assert estimate.lower >= 0.99
    assert estimate.upper == 1
    assert RadiusMethod.Folner in estimate.method


def test_return_probabilities_z(z_srw):
    returns = dict(return_probabilities(z_srw, 8))
    assert returns[4] == pytest.approx(0.375)
    assert returns[8] == pytest.approx(math.comb(8, 4) / 256)


def test_folner():
    bound, info = folner_lower(SparseMeasure.srw(GroupDescriptor("abelian", 2)))
    assert 0.999 < bound <= 1
    assert folner_lower(SparseMeasure.srw(GroupDescriptor("cyclic", 5)))[0] == 1
    with pytest.raises(DomainError):
        folner_lower(SparseMeasure.srw(GroupDescriptor("free", 2)))


def test_symmetric_only(z):
    with pytest.raises(DomainError):
        radius_pf2_symmetric(SparseMeasure.uniform(z, [(1,)]), 10)


def test_pfq_bracket(f2_srw):
    lower = radius_pfq_lower(f2_srw, 2, 400)
    upper = radius_pfq_upper_rd(f2_srw, 2, 2, 400)
    assert lower.value == pytest.approx(KESTEN_F2, abs=3e-3)
    assert lower.value <= upper.value + 0.02
    assert upper.value == pytest.approx(KESTEN_F2, abs=0.02)


def test_pfq_point_mass(f2):
    delta = SparseMeasure.point_mass(f2)
    assert radius_pfq_lower(delta, 1.5, 10).value == 1
    assert radius_pfq_upper_rd(delta, 2, 2, 10).value == 1


def test_pfq_amenable_upper():
    estimate = radius_pfq_upper_rd(SparseMeasure.srw(GroupDescriptor("abelian", 1)), 2, 2, 2000)
    assert estimate.value == pytest.approx(1, abs=0.01)


@pytest.mark.slow
def test_pfq_free_long(f2_srw):
    assert radius_pfq_lower(f2_srw, 2, 2000).value == pytest.approx(KESTEN_F2, abs=2e-3)
    assert radius_pfq_upper_rd(f2_srw, 2, 2, 2000).value == pytest.approx(KESTEN_F2, abs=0.02)


def test_pfq_domain_errors(f2_srw):
    with pytest.raises(DomainError):
        radius_pfq_lower(f2_srw, 1.0, 10)
    with pytest.raises(DomainError):
        radius_pfq_upper_rd(SparseMeasure.srw(GroupDescriptor("lamplighter", 1)), 2, 2, 10)


def test_sample_steps():
    steps = sample_steps(1000, 5)
    assert steps == sorted(set(steps))
    assert steps[0] == 1
    assert steps[-10:] == list(range(991, 1001))
