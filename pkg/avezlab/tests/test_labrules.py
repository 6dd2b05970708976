import pytest

from avezlab.errors import ConfigError
from avezlab.labrules import DEFAULT, LabRules


def test_defaults():
    assert DEFAULT.element_cap == LabRules.DEFAULT_RULES["element_cap"]
    assert DEFAULT.p_grid == (2, 4, 8, 16, 32, 64)
    assert repr(DEFAULT) == "LabRules({})"


def test_override():
    rules = LabRules({"element_cap": 10})
    assert rules.element_cap == 10
    assert rules.work_cap == DEFAULT.work_cap
    changed = rules.override(cauchy_tol=1e-6)
    assert changed.element_cap == 10
    assert changed.cauchy_tol == 1e-6
    assert "element_cap" in repr(changed)


def test_invalid_rules():
    with pytest.raises(ConfigError):
        LabRules({"nope": 1})
    with pytest.raises(ConfigError):
        LabRules({"work_cap": 0})


def test_depth_cap():
    assert DEFAULT.depth_cap(2) == 12
    assert 4 * 3 ** (DEFAULT.depth_cap(2) - 1) <= DEFAULT.cylinder_cap
    assert LabRules({"cylinder_cap": 4}).depth_cap(2) == 1
    assert DEFAULT.depth_cap(3) == 8
