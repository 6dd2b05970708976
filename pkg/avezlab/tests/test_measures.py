from fractions import Fraction
import math

import numpy as np
import pytest

from avezlab.errors import ConfigError, DomainError, ResourceError
from avezlab.groups import GroupDescriptor
from avezlab.labrules import LabRules
from avezlab.measures import (LatticeMeasure, RadialMeasure, SparseMeasure, alpha_moment, convolution_power,
                              iter_powers, lattice_power, lq_norm, renyi_entropy, series_measure, shannon_entropy,
                              speed_term)


def test_z_square(z_srw):
    square = convolution_power(z_srw, 2)
    assert square.atoms == pytest.approx({(-2,): 0.25, (0,): 0.5, (2,): 0.25})
    assert square.exact == {(-2,): Fraction(1, 4), (0,): Fraction(1, 2), (2,): Fraction(1, 4)}


def test_free_square(f2_srw):
    square = convolution_power(f2_srw, 2)
    assert square.mass("e") == pytest.approx(0.25)
    twos = [m for k, m in square.items() if len(k) == 2]
    assert len(twos) == 12
    assert twos == pytest.approx([1 / 16] * 12)


def test_return_probability_z(z_srw):
    assert lattice_power(z_srw, 4).mass_at_identity() == pytest.approx(0.375)
    assert convolution_power(z_srw, 4).mass_at_identity() == pytest.approx(0.375)


def test_entropies(f2_srw, z_srw):
    assert shannon_entropy(f2_srw) == pytest.approx(math.log(4))
    assert shannon_entropy(convolution_power(f2_srw, 2)) == pytest.approx(2.426015, abs=1e-6)
    assert lq_norm(z_srw, 2) == pytest.approx(1 / math.sqrt(2))
    assert renyi_entropy(convolution_power(f2_srw, 3), 1.0001) == pytest.approx(
        shannon_entropy(convolution_power(f2_srw, 3)), abs=1e-3)


def test_length_moments(f2_srw):
    assert speed_term(convolution_power(f2_srw, 2)) == pytest.approx(1.5)
    assert alpha_moment(f2_srw) == pytest.approx(1.0)
    assert alpha_moment(convolution_power(f2_srw, 2), alpha=2) == pytest.approx(0.75 * 4)


def test_radial_matches_sparse(f2_srw):
    exact = convolution_power(f2_srw, 5, "exact")
    radial = convolution_power(f2_srw, 5, "radial")
    assert shannon_entropy(exact) == pytest.approx(shannon_entropy(radial), abs=1e-12)
    assert exact.mass("e") == pytest.approx(radial.mass("e"), abs=1e-15)


def test_radial_powers_keep_mass(f2_srw):
    for n, power in iter_powers(f2_srw, 60):
        assert isinstance(power, RadialMeasure)
        assert power.total == pytest.approx(1.0, abs=1e-12)
        assert power.radius == n


def test_lattice_power_matches_direct():
    z2 = GroupDescriptor("abelian", 2)
    mu = SparseMeasure.lazy_srw(z2)
    direct = convolution_power(mu, 5)
    fourier = lattice_power(mu, 5)
    for key in [(0, 0), (1, 2), (-3, 0), (5, 0)]:
        assert math.exp(fourier.log_element_mass(key)) == pytest.approx(direct.mass(key), abs=1e-12)


def test_cyclic_powers_wrap():
    cyclic = GroupDescriptor("cyclic", 3)
    powers = dict(iter_powers(SparseMeasure.srw(cyclic), 4))
    assert isinstance(powers[4], LatticeMeasure)
    assert powers[4].total == pytest.approx(1.0)
    assert powers[2].mass_at_identity() == pytest.approx(0.5)


def test_workers_do_not_change_powers():
    mu = SparseMeasure.srw(GroupDescriptor("lamplighter", 1))
    rules = LabRules({"convolution_shards": 3})
    assert convolution_power(mu, 4, rules=rules, workers=4).atoms == convolution_power(mu, 4, rules=rules).atoms


def test_element_cap(f2_srw):
    with pytest.raises(ResourceError):
        convolution_power(f2_srw, 4, "exact", LabRules({"element_cap": 50}))


def test_series_measure(f2_srw):
    series, tail = series_measure(f2_srw, [0.5, 0.25, 0.25])
    assert tail == 0
    assert series.mass_at_identity() == pytest.approx(0.5625)
    partial, tail = series_measure(f2_srw, [0.5, 0.25])
    assert tail == pytest.approx(0.25)
    assert partial.mass_at_identity() == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        series_measure(f2_srw, [0.0, 1.0])


def test_presets(f2):
    lazy = SparseMeasure.lazy_srw(f2)
    assert lazy.mass_at_identity() == 0.5
    assert lazy.is_symmetric()
    assert SparseMeasure.point_mass(f2).is_radial()
    assert not SparseMeasure.uniform(f2, [(1,)]).is_symmetric()
    sws = SparseMeasure.switch_walk_switch(GroupDescriptor("lamplighter", 1))
    assert sum(sws.exact.values()) == 1
    with pytest.raises(DomainError):
        SparseMeasure.switch_walk_switch(f2)


def test_from_spec(f2):
    mu = SparseMeasure.from_spec('{"group": "free:2", "atoms": [{"elem": "a", "mass": "1/2"}, '
                                 '{"elem": "A", "mass": "1/2"}]}')
    assert mu.exact == {(1,): Fraction(1, 2), (-1,): Fraction(1, 2)}
    assert SparseMeasure.from_spec("preset:lazy-srw:1/4", f2).mass_at_identity() == 0.25
    with pytest.raises(ConfigError):
        SparseMeasure.from_spec("preset:blob", f2)
    with pytest.raises(ConfigError):
        SparseMeasure.from_spec({"atoms": [{"elem": "a", "mass": 1}]})


def test_invalid_masses(f2):
    with pytest.raises(ValueError):
        SparseMeasure(f2, {(1,): 0.5})
    with pytest.raises(ValueError):
        SparseMeasure(f2, {(1,): -0.5, (-1,): 1.5})
    assert SparseMeasure(f2, {(1,): 2.0, (-1,): 2.0}, normalize=True).mass("a") == 0.5


def test_radial_measure_checks(f2):
    with pytest.raises(DomainError):
        RadialMeasure(GroupDescriptor("abelian", 1), [1.0])
    radial = RadialMeasure(f2, np.array([0.5, 0.5]))
    assert radial.to_sparse().mass("b") == pytest.approx(0.125)


def test_entropy_needs_no_lengths():
    lamplighter = GroupDescriptor("lamplighter", 2)
    far = lamplighter.parse("|10,10").key
    mu = SparseMeasure.uniform(lamplighter, [lamplighter.identity_key(), far])
    rules = LabRules({"bfs_radius_cap": 2})
    assert shannon_entropy(mu, rules) == pytest.approx(math.log(2))
    assert lq_norm(mu, 2, rules) == pytest.approx(math.sqrt(0.5))
    with pytest.raises(ResourceError):
        alpha_moment(mu, rules=rules)


def test_lattice_power_keeps_faint_atoms(z_srw):
    direct = lattice_power(z_srw, 60)
    assert direct.log_element_mass((60,)) == pytest.approx(-60 * math.log(2))
    fourier = lattice_power(z_srw, 60, LabRules({"work_cap": 1}))
    assert fourier.mass_at_identity() == pytest.approx(math.comb(60, 30) / 2 ** 60, rel=1e-9)
    assert fourier.total == pytest.approx(1.0, abs=1e-12)
    # below the retention floor but inside the support
    assert fourier.log_element_mass((60,)) > -math.inf
    assert fourier.log_element_mass((59,)) == -math.inf
    assert np.count_nonzero(fourier.array) == np.count_nonzero(direct.array) == 61
