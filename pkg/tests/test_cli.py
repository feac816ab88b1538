import json

import pytest

from online_dcopf.cli import main


@pytest.fixture
def bad_case(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({
        "base_mva": 100, "buses": [1, 2], "slack_bus": 1,
        "lines": [], "generators": [{"bus": 1, "p_max_mw": 10}], "loads": [{"bus": 2, "p_mw": 50}],
    }))
    return p


def test_run_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "res"
    assert main(["run", "--case", "ieee14", "--horizon", "50", "--seed", "42", "--out", str(out)]) == 0
    for name in ("trace.csv", "curves.csv", "summary.json"):
        assert (out / name).is_file()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["horizon"] == 50
    assert "regret" in capsys.readouterr().out


def test_trace_stride(tmp_path):
    out = tmp_path / "res"
    assert main(["run", "--horizon", "25", "--stride", "10", "--out", str(out)]) == 0
    rounds = {line.split(",")[0] for line in (out / "trace.csv").read_text().splitlines()[1:]}
    assert rounds == {"1", "10", "20", "25"}
    assert len((out / "curves.csv").read_text().splitlines()) == 26


def test_validate_ok(capsys):
    assert main(["validate", "--case", "ieee14"]) == 0
    assert "OK" in capsys.readouterr().out


def test_validate_bad(bad_case, capsys):
    assert main(["validate", "--case", str(bad_case)]) == 1
    assert "FAILED" in capsys.readouterr().out


def test_run_bad_case(bad_case, tmp_path):
    assert main(["run", "--case", str(bad_case), "--out", str(tmp_path / "o")]) == 1


def test_missing_case_file(tmp_path):
    assert main(["validate", "--case", str(tmp_path / "none.json")]) == 1


def test_usage_errors():
    assert main([]) == 2
    assert main(["run", "--bogus"]) == 2
    assert main(["frobnicate"]) == 2


def test_dispatch(capsys):
    assert main(["dispatch", "--case", "ieee14", "--horizon", "2000", "--seed", "42"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["total_pu"] == pytest.approx(7.11, abs=1e-9)
    assert sum(out["p_star_pu"].values()) == pytest.approx(7.11, abs=1e-9)
    assert out["theta_star_rad"]["3"] == 0
    assert out["marginal_price"] > 0


def test_bounds(capsys):
    assert main(["bounds", "--horizon", "20"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out) == {"derivation_partial", "derivation_limit", "table_partial", "table_limit"}
    assert out["derivation_partial"]["M1"] == pytest.approx(14 * 3.14159265359, rel=1e-9)


def test_config_replay(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--horizon", "30", "--seed", "9", "--no-theta-bound", "--out", str(a)]) == 0
    assert main(["run", "--config", str(a / "summary.json"), "--out", str(b)]) == 0
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()
