import pytest

from avezlab.groups import GroupDescriptor
from avezlab.measures import SparseMeasure, convolution_power, shannon_entropy
from avezlab.walks import WalkSample, sample_paths


def test_free_speed(f2_srw):
    stats = sample_paths(f2_srw, 1000, 2000, seed=7)
    assert stats.speed == pytest.approx(0.5, abs=0.01)
    assert stats.kv_entropy is None


def test_point_mass_stays(f2):
    stats = sample_paths(SparseMeasure.point_mass(f2), 50, 100, seed=1)
    assert stats.speed == 0
    assert stats.escape["fraction_at_identity"] == 1.0


def test_reproducible_across_workers(z_srw):
    one = sample_paths(z_srw, 40, 3000, seed=11)
    many = sample_paths(z_srw, 40, 3000, seed=11, workers=3)
    assert one.to_dict() == many.to_dict()
    assert sample_paths(z_srw, 40, 3000, seed=12).to_dict() != one.to_dict()


def test_kv_entropy_with_law(f2_srw):
    law = convolution_power(f2_srw, 6, "radial")
    stats = sample_paths(f2_srw, 6, 4000, seed=3, law=law)
    # -log mu^{*6}(W_6) averages to H(mu^{*6})
    assert stats.kv_entropy * 6 == pytest.approx(shannon_entropy(law), rel=0.03)


def test_generic_sampler():
    lamplighter = GroupDescriptor("lamplighter", 1)
    stats = sample_paths(SparseMeasure.srw(lamplighter), 10, 500, seed=5)
    assert 0 < stats.speed <= 1


def test_walk_sample(f2_srw):
    walk = WalkSample.simulate(f2_srw, 20, seed=2)
    assert len(walk) == 20
    product = walk.positions[0]
    for step in walk.steps:
        product = product * step
    assert product == walk.final
    with pytest.raises(ValueError):
        WalkSample(0, walk.steps, walk.positions[:-1])
