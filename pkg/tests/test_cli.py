import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from kahlerpinch.cli import run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_config(tmp_path, data, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data), encoding="utf-8")
    return str(p)


def invoke(*argv):
    out = io.StringIO()
    code = run([str(a) for a in argv], stdout=out)
    return code, out.getvalue()


BALL = {"variant": "ball", "center": [0, 0], "radius": 1.0}


def test_curvature_ball_range(tmp_path):
    code, text = invoke("curvature", "--config", CONFIGS / "ball_curvature.json", "--out", tmp_path)
    assert code == 0
    rep = json.loads((tmp_path / "curvature.json").read_text())
    agg = rep["results"]["aggregate"]
    assert agg["hbc_inf"] == pytest.approx(-4 / 3, abs=1e-3)
    assert agg["hbc_sup"] == pytest.approx(-2 / 3, abs=1e-3)
    assert "HBC range" in text
    assert rep["config"]["metrics"]["g"]["kind"] == "ball_bergman"


def test_curvature_euclidean(tmp_path):
    cfg = write_config(tmp_path, {"domain": BALL, "metrics": {"g": {"kind": "euclidean", "n": 2}},
                                  "region": {"density": 8}})
    code, text = invoke("curvature", "--config", cfg, "--out", tmp_path / "o")
    assert code == 0
    agg = json.loads((tmp_path / "o" / "curvature.json").read_text())["results"]["aggregate"]
    assert agg["hbc_inf"] == 0.0 and agg["hbc_sup"] == 0.0


@pytest.mark.parametrize("text", ["{not json", "[1, 2]", '{"domain": {"variant": "torus"}}'])
def test_bad_config_exits_2_without_outputs(tmp_path, text):
    cfg = tmp_path / "bad.json"
    cfg.write_text(text)
    out = tmp_path / "out"
    code, _ = invoke("curvature", "--config", cfg, "--out", out)
    assert code == 2
    assert not out.exists()


def test_missing_config_and_unknown_metric(tmp_path):
    assert invoke("curvature", "--out", tmp_path / "a")[0] == 2
    cfg = write_config(tmp_path, {"domain": BALL, "metrics": {"g": {"kind": "nope"}}})
    assert invoke("curvature", "--config", cfg, "--out", tmp_path / "b")[0] == 2
    assert not (tmp_path / "b").exists()


def test_compare_self_is_half(tmp_path):
    g = {"kind": "ball_bergman", "R": 1.0, "n": 2}
    cfg = write_config(tmp_path, {"domain": BALL, "metrics": {"h": g, "g": g}, "region": {"density": 16}})
    code, _ = invoke("compare", "--config", cfg, "--out", tmp_path / "o")
    assert code == 0
    res = json.loads((tmp_path / "o" / "compare.json").read_text())["results"]
    assert res["C_hg"] == pytest.approx(0.5, abs=1e-12)


def test_compare_both_orders_and_audit(tmp_path):
    base = json.loads((CONFIGS / "compare.json").read_text())
    code, _ = invoke("compare", "--config", CONFIGS / "compare.json", "--out", tmp_path / "a", "--audit")
    assert code == 0
    swapped = dict(base, metrics={"h": base["metrics"]["g"], "g": base["metrics"]["h"]})
    code, _ = invoke("compare", "--config", write_config(tmp_path, swapped), "--out", tmp_path / "b")
    assert code == 0
    a = json.loads((tmp_path / "a" / "compare.json").read_text())["results"]
    b = json.loads((tmp_path / "b" / "compare.json").read_text())["results"]
    for pa, pb in zip(a["per_point"], b["per_point"]):
        assert pa["C_hg"] + pb["C_hg"] <= 1 + 1e-12
        assert pa["C_hg"] == pytest.approx(pb["C_gh"], abs=1e-14)
    assert a["audit_max_deviation"] <= 1e-3
    rows = list(csv.reader(io.StringIO((tmp_path / "a" / "compare.csv").read_text())))
    assert "brute_force_C_hg" in rows[0] and "deviation" in rows[0]
    assert sum(1 for r in rows[1:] if r[rows[0].index("deviation")]) == 5


def test_pinch_exit_codes(tmp_path):
    assert invoke("pinch", "--config", CONFIGS / "euclidean_pinch.json", "--out", tmp_path / "e")[0] == 3
    cert = json.loads((tmp_path / "e" / "certificate.json").read_text())
    assert cert["verdict"] == "hypothesis_not_met"
    small = json.loads((CONFIGS / "flagship.json").read_text())
    small["pinch"]["R"] = 0.9
    code, _ = invoke("pinch", "--config", write_config(tmp_path, small), "--out", tmp_path / "r")
    assert code == 2
    assert not (tmp_path / "r").exists()


def test_pinch_short_circuit_via_cli(tmp_path):
    cfg = write_config(tmp_path, {"domain": BALL, "metrics": {"g": {"kind": "ball_bergman", "R": 1.0, "n": 2}},
                                  "pinch": {"density": 12, "max_evals": 30}, "optimizer": {"restarts": 4}})
    code, text = invoke("pinch", "--config", cfg, "--out", tmp_path / "o")
    assert code == 0
    assert "verdict pass" in text
    rows = list(csv.reader(io.StringIO((tmp_path / "o" / "constants.csv").read_text())))
    assert rows[0] == ["constant", "value", "region", "seed", "units"]
    assert {r[0] for r in rows[1:]} >= {"A0", "B1", "B2", "C0", "C1"}


@pytest.mark.parametrize("suite", ["wu-hsc", "chern-lu", "ineq4", "schwarz-yau"])
def test_verify_suites_pass(tmp_path, suite):
    cfg = write_config(tmp_path, {"wu": {"density": 40}, "ineq4": {"points": 10, "pairs": 20}})
    code, text = invoke("verify", "--suite", suite, "--config", cfg, "--out", tmp_path / "o")
    assert code == 0, text
    rep = json.loads((tmp_path / "o" / "verify.json").read_text())
    checks = rep["results"][suite]["checks"]
    assert all(c["passed"] in (True, None) for c in checks)
    if suite == "wu-hsc":
        assert checks[0]["bound"] == pytest.approx(-4 / 3)
    if suite == "chern-lu":
        assert max(c["residual"] for c in checks) <= 1e-4
    if suite == "schwarz-yau":
        assert [c["status"] for c in checks].count("inapplicable") == 1


def test_verify_negative_control_exits_4(tmp_path):
    cfg = write_config(tmp_path, {"ineq4": {"swap_weights": True, "points": 10, "pairs": 20}})
    code, text = invoke("verify", "--suite", "ineq4", "--config", cfg, "--out", tmp_path / "o")
    assert code == 4
    assert "fail" in text


def test_verify_unknown_or_missing_suite(tmp_path):
    assert invoke("verify", "--suite", "nope", "--out", tmp_path / "a")[0] == 2
    assert invoke("verify", "--out", tmp_path / "b")[0] == 2


def test_squeeze_ball_and_bidisc(tmp_path):
    cfg = write_config(tmp_path, {"domain": BALL, "squeeze": {"points": [[0, 0]]}})
    code, text = invoke("squeeze", "--config", cfg, "--out", tmp_path / "b")
    assert code == 0
    pt = json.loads((tmp_path / "b" / "squeeze.json").read_text())["results"]["points"][0]
    assert pt["bound"] == pytest.approx(0.5, abs=1e-12)
    assert pt["exact"] == 1.0 and "exact value 1" in text
    code, _ = invoke("squeeze", "--config", CONFIGS / "squeeze.json", "--out", tmp_path / "p")
    res = json.loads((tmp_path / "p" / "squeeze.json").read_text())["results"]
    assert res["points"][0]["bound"] == pytest.approx(1 / (2 * math.sqrt(2)), abs=1e-9)
    ray = res["rays"][0]
    assert ray["monotone_nonincreasing"] and ray["last_bound"] < 1e-4


def test_outputs_are_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert invoke("compare", "--config", CONFIGS / "compare.json", "--out", tmp_path / d, "--audit")[0] == 0
    for name in ("compare.json", "compare.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "timing.json").exists()


def test_seed_override_is_echoed(tmp_path):
    invoke("curvature", "--config", CONFIGS / "ball_curvature.json", "--out", tmp_path, "--seed", "3")
    rep = json.loads((tmp_path / "curvature.json").read_text())
    assert rep["config"]["seed"] == 3
    assert rep["results"]["seed"] == 3


def test_every_csv_has_units_column(tmp_path):
    invoke("curvature", "--config", CONFIGS / "ball_curvature.json", "--out", tmp_path)
    invoke("squeeze", "--config", CONFIGS / "squeeze.json", "--out", tmp_path)
    invoke("verify", "--suite", "chern-lu", "--out", tmp_path)
    for f in tmp_path.glob("*.csv"):
        header = next(csv.reader(io.StringIO(f.read_text())))
        assert header[-1] == "units", f.name


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "kahlerpinch", "verify", "--suite", "chern-lu",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "chern-lu" in proc.stdout
