import math

import numpy as np
import pytest

from avezlab.errors import ConfigError, DomainError, ResourceError
from avezlab.groups import (Family, GroupDescriptor, ball_size, inverse, length, multiply, sphere, sphere_keys,
                            sphere_size, volume_growth)
from avezlab.labrules import LabRules


def test_free_multiplication_reduces(f2):
    assert f2.parse("ab") * f2.parse("Ba") == f2.parse("aa")
    assert multiply(f2.parse("aB"), f2.parse("bA")) == f2.identity()


def test_inverses(f2):
    assert inverse(f2.parse("ab")) == f2.parse("BA")
    cyclic = GroupDescriptor("cyclic", 5)
    assert cyclic.inv_key(2) == 3
    assert ~cyclic.element(2) == cyclic.element(3)


def test_word_length(f2):
    assert f2.parse("abA").length == 3
    assert length(f2.parse("aA")) == 0
    assert GroupDescriptor("abelian", 2).element((2, -3)).length == 5
    assert GroupDescriptor("cyclic", 6).element(5).length == 1


def test_ball_and_sphere_sizes(f2, z):
    assert ball_size(f2, 2) == 17
    assert ball_size(z, 3) == 7
    assert sphere_size(f2, 3) == len(sphere_keys(f2, 3)) == 36
    z2 = GroupDescriptor("abelian", 2)
    assert sphere_size(z2, 3) == len(sphere(z2, 3)) == 12
    assert ball_size(GroupDescriptor("cyclic", 6), 10) == 6
    assert sphere_keys(GroupDescriptor("cyclic", 6), 3) == [3]


def test_volume_growth(f2):
    assert volume_growth(f2, 12).extrapolation["growth_fit"] == pytest.approx(math.log(3), abs=1e-3)
    assert volume_growth(GroupDescriptor("abelian", 2), 40).extrapolation["growth_fit"] == pytest.approx(0, abs=0.02)


def test_lamplighter_lengths():
    lamplighter = GroupDescriptor("lamplighter", 1)
    assert lamplighter.parse("0|0").length == 1
    assert lamplighter.parse("0|1").length == 2
    assert lamplighter.parse("|3").length == 3
    assert sphere_size(lamplighter, 1) == 3


def test_lamplighter_radius_cap():
    lamplighter = GroupDescriptor("lamplighter", 2)
    far = lamplighter.parse("|10,10")
    with pytest.raises(ResourceError):
        lamplighter.len_key(far.key, LabRules({"bfs_radius_cap": 2}))


@pytest.mark.parametrize("spec", ["free:2", "abelian:2", "cyclic:6", "lamplighter:1"])
def test_group_axioms(spec):
    desc = GroupDescriptor.from_spec(spec)
    rng = np.random.default_rng(3)
    e = desc.identity_key()
    for _ in range(100):
        a, b, c = (desc.random_key(rng, 5) for _ in range(3))
        assert desc.mul_key(desc.mul_key(a, b), c) == desc.mul_key(a, desc.mul_key(b, c))
        assert desc.mul_key(a, desc.inv_key(a)) == e
        assert desc.mul_key(e, a) == a


def test_literals(f2):
    assert f2.key_str(f2.parse_key("abAB")) == "abAB"
    assert f2.key_str(()) == "e"
    lamplighter = GroupDescriptor("lamplighter", 1)
    assert lamplighter.parse_key("0;0;2|1") == (frozenset({(2,)}), (1,))


def test_specs():
    assert GroupDescriptor.from_spec({"family": "cyclic", "order": 6}) == GroupDescriptor(Family.Cyclic, 6)
    assert GroupDescriptor.from_spec('{"family": "free", "rank": 3}').to_spec() == {"family": "free", "rank": 3}
    assert str(GroupDescriptor.from_spec("abelian:2")) == "abelian:2"
    with pytest.raises(ConfigError):
        GroupDescriptor.from_spec("free:0")
    with pytest.raises(ConfigError):
        GroupDescriptor.from_spec("blob:2")


def test_invalid_elements(f2):
    with pytest.raises(ValueError):
        f2.canonical((3,))
    with pytest.raises(ValueError):
        f2.parse("a1")
    with pytest.raises(DomainError):
        multiply(f2.parse("a"), GroupDescriptor("free", 3).parse("a"))


def test_family_properties():
    assert not GroupDescriptor("free", 2).amenable
    assert GroupDescriptor("free", 1).amenable
    assert not GroupDescriptor("lamplighter", 1).rd_capable
    assert GroupDescriptor("cyclic", 4).rd_capable
