import pytest

from avezlab.groups import GroupDescriptor
from avezlab.measures import SparseMeasure


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long sweeps, deselect with -m 'not slow'")


@pytest.fixture
def f2():
    return GroupDescriptor.from_spec("free:2")


@pytest.fixture
def z():
    return GroupDescriptor.from_spec("abelian:1")


@pytest.fixture
def f2_srw(f2):
    return SparseMeasure.srw(f2)


@pytest.fixture
def z_srw(z):
    return SparseMeasure.srw(z)
