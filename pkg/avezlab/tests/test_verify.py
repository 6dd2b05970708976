import pytest

from avezlab import verify
from avezlab.labrules import LabRules


def test_registry():
    assert verify.CHECKS.suites == ["boundary", "dlvp", "estimators", "groups", "measures", "spectra", "weights"]
    assert len(verify.CHECKS.get_by_suite("all")) == len(verify.CHECKS.dict_by_name)
    with pytest.raises(ValueError):
        verify.CHECKS.get_by_suite("nope")


def test_duplicate_check():
    store = verify.CheckStore()
    check = verify.Check("c", "s", lambda seed, rules: (True, ""))
    store.add(check)
    with pytest.raises(ValueError):
        store.add(check)


def test_failing_check_is_recorded(monkeypatch):
    store = verify.CheckStore()

    def broken(seed, rules):
        raise RuntimeError("boom")

    store.add(verify.Check("broken", "s", broken))
    store.add(verify.Check("fine", "s", lambda seed, rules: (True, "ok")))
    store.add(verify.Check("long", "s", lambda seed, rules: (True, "ok"), slow=True))
    monkeypatch.setattr(verify, "CHECKS", store)
    results = verify.run_suite("s", include_slow=False)
    assert [r.name for r in results] == ["broken", "fine"]
    assert not results[0].passed
    assert results[0].detail == "RuntimeError: boom"
    assert results[1].to_dict()["passed"]


@pytest.mark.parametrize("suite", ["groups", "measures", "weights", "dlvp"])
def test_quick_suites_pass(suite):
    results = verify.run_suite(suite, seed=1, include_slow=False)
    assert results
    assert all(r.passed for r in results), [r.detail for r in results if not r.passed]


@pytest.mark.slow
def test_all_suites_pass():
    results = verify.run_suite("all", rules=LabRules())
    assert all(r.passed for r in results), [(r.name, r.detail) for r in results if not r.passed]


def test_summary_plain():
    check = verify.Check("c", "s", lambda seed, rules: (True, ""))
    results = [verify.CheckResult(check, True, "fine", 0.25), verify.CheckResult(check, False, "off", 1.0)]
    text = verify.summary(results, fancy=False)
    assert text.splitlines() == ["ok s/c (0.250 s): fine", "FAILED s/c (1.000 s): off", "1/2 checks passed"]
    assert "\033[92m" in verify.summary(results)


def test_long_checks_are_marked_slow():
    slow = {name for name, c in verify.CHECKS.dict_by_name.items() if c.slow}
    assert {"kesten_amenable", "pfq_sandwich", "lamplighter_strict_gap", "koopman_below_rd_radius"} <= slow
    quick = {name for name, c in verify.CHECKS.dict_by_name.items() if not c.slow}
    assert {"weighted_renyi_limit", "convolution_entropy_bounds", "inverse_series_band", "koopman_chain"} <= quick


def test_koopman_chain_reads_extrapolation_error():
    passed, detail = verify.koopman_chain(0, LabRules())
    assert passed
    assert "extrapolation error" in detail


def test_weighted_renyi_limit_check():
    passed, detail = verify.weighted_renyi_limit(0, LabRules())
    assert passed, detail
