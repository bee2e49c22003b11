import csv
import io
import json
import math
from pathlib import Path

import pytest

from loophole_lab import analytic as A
from loophole_lab.cli import fmt, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def write_config(tmp_path, **overrides):
    cfg = {"schemaVersion": 1, "nPairs": 200_000, "seed": 3,
           "detectorA": {"halfAngle": 90}, "detectorB": {"halfAngle": 90}}
    cfg.update(overrides)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def test_fmt():
    assert fmt(None) == ""
    assert fmt(0.5) == "0.500000000"
    assert fmt(-0.0) == "0.00000000"
    assert fmt(12) == "12"
    assert fmt(1e-12) == "1.00000000e-12"


def test_predict_perfect(capsys):
    code, out, _ = run(capsys, "predict", "--beta", "90", "--phi-steps", "5")
    assert code == 0
    table = rows(out)
    assert [r["phi_deg"] for r in table][1] == "45.0000000"
    assert float(table[1]["e_normalised"]) == pytest.approx(0.5)
    assert list(table[0]) == ["phi_deg", "p_ss", "p_ns", "total_rate", "e_normalised",
                              "e_unnormalised", "qm_coincidence", "qm_correlation"]


def test_predict_beta75_matches_closed_form(capsys):
    _, out, _ = run(capsys, "predict", "--beta", "75", "--phi-steps", "5")
    row = next(r for r in rows(out) if float(r["phi_deg"]) == 90)
    assert float(row["p_ss"]) == pytest.approx(A.p_like(math.pi / 2, math.radians(75)), rel=1e-8)


def test_predict_undefined_cells(capsys, tmp_path):
    target = tmp_path / "curve.csv"
    code, _, _ = run(capsys, "predict", "--beta", "30", "--phi-steps", "19", "--output", str(target))
    assert code == 0
    text = target.read_text()
    assert "nan" not in text.lower()
    table = rows(text)
    for r in table:
        undefined = float(r["total_rate"]) == 0.0
        assert (r["e_normalised"] == "") == undefined
    assert next(r for r in table if float(r["phi_deg"]) == 90)["e_normalised"] == ""
    man = json.loads((tmp_path / "curve.csv.manifest.json").read_text())
    assert set(man) == {"toolVersion", "configDigest", "seed", "command", "timestamp"}


def test_simulate_deterministic(capsys, tmp_path):
    cfg = write_config(tmp_path)
    _, first, _ = run(capsys, "simulate", "--config", cfg, "--b", "45")
    _, second, _ = run(capsys, "simulate", "--config", cfg, "--b", "45")
    a, b = json.loads(first), json.loads(second)
    a["manifest"].pop("timestamp"), b["manifest"].pop("timestamp")
    assert a == b
    n = a["emitted"]
    assert abs(a["nn"] / n - 0.375) < 4 * math.sqrt(0.375 * 0.625 / n)
    assert sum(v for k, v in a.items() if k not in ("emitted", "settings", "manifest")) == n


@pytest.mark.parametrize("bad", [
    {"nPairs": 0}, {"schemaVersion": 2}, {"bogus": 1}, {"darkRate": 1.5},
    {"detectorA": {"halfAngle": 95}}, {"detectorA": {"halfAngle": 45, "extra": 1}},
    {"source": {"kind": "anisotropic", "axis": [0, 0, 0], "strength": 1}},
    {"source": {"kind": "weird"}}, {"seed": -4}, {"identicalSpins": "yes"},
])
def test_config_errors_exit_2(capsys, tmp_path, bad):
    code, _, err = run(capsys, "simulate", "--config", write_config(tmp_path, **bad))
    assert code == 2 and "config error" in err


def test_missing_config_file(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate", "--config", str(tmp_path / "absent.json"))
    assert code == 2


def test_test_command(capsys):
    cfg = str(CONFIGS / "beta75.json")
    _, out, _ = run(capsys, "test", "--config", cfg, "--n-pairs", "400000")
    rep = json.loads(out)
    assert rep["violatesClassical"] and abs(rep["sValue"] - 3.331) < 4 * rep["standardError"] + 1e-3
    _, out, _ = run(capsys, "test", "--config", cfg, "--n-pairs", "400000", "--estimator", "emitted")
    assert abs(json.loads(out)["sValue"]) <= 2
    _, out, _ = run(capsys, "test", "--config", str(CONFIGS / "beta90.json"), "--n-pairs", "400000")
    rep = json.loads(out)
    assert abs(rep["sValue"] - 2) < 4 * rep["standardError"]


def test_test_command_subtraction(capsys):
    _, out, _ = run(capsys, "test", "--config", str(CONFIGS / "subtraction_bias.json"),
                    "--subtract-accidentals", "--n-pairs", "200000")
    rep = json.loads(out)
    assert rep["accidentalsSubtracted"] and len(rep["clippedCells"]) == 4


def test_test_command_bad_angles(capsys):
    code, _, _ = run(capsys, "test", "--config", str(CONFIGS / "beta90.json"), "--angles", "0,90,45")
    assert code == 2


def test_scan_with_diagnostics(capsys, tmp_path):
    diag_path = tmp_path / "diag.json"
    csv_path = tmp_path / "scan.csv"
    code, _, _ = run(capsys, "scan", "--config", str(CONFIGS / "beta75.json"), "--n-pairs", "100000",
                     "--output", str(csv_path), "--diagnostics", str(diag_path))
    assert code == 0
    table = rows(csv_path.read_text())
    assert len(table) == 13
    diag = json.loads(diag_path.read_text())
    assert diag["totalRateMaxRelativeVariation"] > 0.1
    assert abs(diag["minTotalRatePhiDeg"] - 90) <= 15
    assert diag["visibilityThresholds"]["half"] == 0.5


def test_scan_grid_mode(capsys, tmp_path):
    diag_path = tmp_path / "diag.json"
    code, out, _ = run(capsys, "scan", "--config", str(CONFIGS / "anisotropic.json"), "--n-pairs", "200000",
                       "--a-grid", "0,45", "--b-grid", "45,90", "--diagnostics", str(diag_path))
    assert code == 0 and len(rows(out)) == 4
    assert json.loads(diag_path.read_text())["rotationalInvarianceMaxZ"] > 4


def test_scan_rejects_duplicate_grid(capsys):
    code, _, _ = run(capsys, "scan", "--config", str(CONFIGS / "beta90.json"), "--a-grid", "0,0",
                     "--b-grid", "10")
    assert code == 2


def test_oracle_command(capsys):
    code, out, _ = run(capsys, "oracle", "--alpha", "80", "--beta", "75", "--polar-steps", "200",
                       "--azimuth-steps", "400", "--mc-samples", "10000")
    assert code == 0
    row = rows(out)[0]
    assert float(row["analytic"]) == float(row["quadrature"]) == float(row["monte_carlo"]) == 0.0


def test_oracle_default_grid(capsys):
    code, out, _ = run(capsys, "oracle", "--mc-samples", "20000")
    assert code == 0
    assert max(abs(float(r["quad_delta"])) for r in rows(out)) < 1e-4


@pytest.mark.parametrize("argv", [["oracle", "--alpha", "abc"], ["oracle", "--alpha", "100"],
                                  ["predict", "--beta", "120"], ["predict"], []])
def test_bad_arguments_exit_2(capsys, argv):
    assert run(capsys, *argv)[0] == 2
