import json
import math

import pytest

from avezlab import report
from avezlab.cli import RunConfig, build_parser, run
from avezlab.errors import ConfigError, ReportIOError
from avezlab.sequence import AsymptoticSequence, EstimateReport, IndexKind


@pytest.fixture
def sample_report():
    seq = AsymptoticSequence(IndexKind.Step, [(n, 1.0 / n) for n in range(1, 6)], name="per_n")
    seq.fit_inverse_p()
    return EstimateReport("avez_entropy", 0.2, 0.0, 1.0, ["exact", "ratio"], {"per_n": seq},
                          params={"n_max": 5}, tolerances={"fit": 1e-3}, seed=3, diagnostics={"note": "x"})


def test_sequence_csv(tmp_path, sample_report):
    path = report.write_sequence_csv(tmp_path / "s.csv", sample_report.sequence)
    lines = path.read_text().splitlines()
    assert len(lines) == 6
    assert lines[0] == "index,value"
    assert lines[2] == "2,0.5"


def test_json_round_trip(tmp_path, sample_report):
    written = report.emit_report(sample_report, "json", tmp_path / "run")
    assert written == [tmp_path / "run.json"]
    loaded = report.load_report(written[0])
    assert loaded == {"avez_entropy": sample_report}
    assert loaded["avez_entropy"].sequence.extrapolation == sample_report.sequence.extrapolation


def test_both_formats(tmp_path, sample_report):
    written = report.emit_report({"h": sample_report}, "both", tmp_path / "out" / "run.json")
    assert [p.name for p in written] == ["run.json", "run.h.per_n.csv"]
    assert all(p.exists() for p in written)


def test_payload_is_stable(sample_report):
    first = report.dumps(sample_report, timestamp=False)
    assert first == report.dumps(sample_report, timestamp=False)
    payload = json.loads(first)
    assert "created" not in payload["metadata"]
    assert payload["reports"]["avez_entropy"]["sequence"][0] == {"index": 1, "value": 1.0}


def test_default_output_dir(monkeypatch, tmp_path, sample_report):
    monkeypatch.setenv(report.CACHE_ENV, str(tmp_path))
    written = report.emit_report(sample_report)
    assert written == [tmp_path / "avez_entropy.json"]


def test_report_io_errors(tmp_path, sample_report):
    with pytest.raises(ReportIOError):
        report.load_report(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("not json")
    with pytest.raises(ReportIOError):
        report.load_report(bad)
    bad.write_text('{"metadata": {}}')
    with pytest.raises(ReportIOError):
        report.load_report(bad)
    with pytest.raises(ValueError):
        report.emit_report(sample_report, "xml", tmp_path / "r")


# --- command line -----------------------------------------------------------------------


def _stdout_json(capsys) -> dict:
    return json.loads(capsys.readouterr().out)


def test_cli_furstenberg(capsys):
    assert run(["boundary", "--quantity", "furstenberg", "--depth", "3"]) == 0
    result = _stdout_json(capsys)["reports"]["furstenberg_entropy"]
    assert result["estimate"] == pytest.approx(0.5 * math.log(3))
    assert result["diagnostics"]["log_q_coefficient"] == "1/2"


def test_cli_xi(capsys):
    assert run(["boundary", "--quantity", "xi", "--element", "a", "--depth", "2"]) == 0
    result = _stdout_json(capsys)["reports"]["harish_chandra_xi"]
    assert result["estimate"] == pytest.approx(math.sqrt(3) / 2)


def test_cli_exit_codes(capsys):
    assert run(["entropy", "--group", "blob:2"]) == 2
    assert _stdout_json(capsys)["error"]["category"] == "config"
    assert run(["boundary", "--depth", "13"]) == 3
    assert _stdout_json(capsys)["error"]["category"] == "resource"
    assert run(["entropy", "--rules", '{"nope": 1}']) == 2
    assert run(["lyapunov", "--weight", "exp:rate=1", "--weight", "poly:d=1"]) == 2


def test_cli_out_and_report(tmp_path, capsys):
    stem = tmp_path / "fb"
    assert run(["boundary", "--depth", "2", "--out", str(stem)]) == 0
    assert capsys.readouterr().out == ""
    stored = report.load_report(tmp_path / "fb.json")
    assert stored["furstenberg_entropy"].params["depth"] == 2
    assert run(["report", "--input", str(tmp_path / "fb.json")]) == 0
    again = _stdout_json(capsys)["reports"]["furstenberg_entropy"]
    assert again["estimate"] == pytest.approx(stored["furstenberg_entropy"].estimate)


def test_cli_verify_quick(capsys):
    assert run(["verify", "--suite", "groups", "--quick"]) == 0
    extra = _stdout_json(capsys)["extra"]
    assert extra["passed"]
    assert [c["name"] for c in extra["checks"]] == ["group_axioms"]


def test_cli_spectral_radius(capsys):
    assert run(["spectral-radius", "--group", "abelian:1", "--space", "l1w", "--weight", "exp:rate=1",
                "--nmax", "12"]) == 0
    result = _stdout_json(capsys)["reports"]["radius_l1w"]
    assert result["estimate"] == pytest.approx(math.cosh(1), rel=1e-9)


def test_run_config():
    args = build_parser().parse_args(["entropy", "--support-cap", "1000", "--p-grid", "2,4"])
    cfg = RunConfig.from_args(args)
    assert cfg.rules.element_cap == 1000
    assert cfg.p_grid == [2.0, 4.0]
    assert cfg.n(12) == 12
    with pytest.raises(ConfigError):
        RunConfig(n_max=0)
    with pytest.raises(ConfigError):
        RunConfig.from_args(build_parser().parse_args(["entropy", "--p-grid", "2,x"]))
