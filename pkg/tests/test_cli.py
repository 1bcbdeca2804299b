import csv
import json
from importlib import resources

import numpy as np
import pytest
import yaml

from ccdglm.cli import SUMMARY_COLUMNS, main

BUNDLED_CONFIG = resources.files("ccdglm") / "data" / "hvof_campaign.yaml"
BUNDLED_DATA = resources.files("ccdglm") / "data" / "hvof_campaign.csv"


def write_config(tmp_path, **overrides):
    doc = yaml.safe_load(BUNDLED_CONFIG.read_text(encoding="utf-8"))
    doc.update(overrides)
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(doc), encoding="utf-8")
    return path


def two_factor_config(tmp_path, **overrides):
    doc = {
        "factors": [{"name": "a", "center": 10, "step": 2}, {"name": "b", "center": 0, "step": 1}],
        "design": {"n_center": 1},
        "responses": ["y"],
        "seed": 5,
    }
    doc.update(overrides)
    path = tmp_path / "two.yaml"
    path.write_text(yaml.safe_dump(doc), encoding="utf-8")
    return path


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_design_49_runs(tmp_path, capsys):
    assert main(["design", "--config", str(BUNDLED_CONFIG), "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "design.csv")
    assert len(rows) == 49
    assert {r["point_class"] for r in rows} == {"cube", "star", "center"}
    assert "PFR_physical" in rows[0] and "run_order" in rows[0]
    assert json.loads((tmp_path / "design.json").read_text())["alpha"] == pytest.approx(5**0.5)
    assert capsys.readouterr().out == (tmp_path / "design.csv").read_text()


def test_design_two_factors(tmp_path):
    assert main(["design", "--config", str(two_factor_config(tmp_path)), "--out", str(tmp_path)]) == 0
    assert len(read_rows(tmp_path / "design.csv")) == 9


def test_design_bad_step(tmp_path, capsys):
    cfg = two_factor_config(tmp_path, factors=[{"name": "a", "center": 1, "step": 2}, {"name": "bad", "center": 0, "step": 0}])
    code = main(["design", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 1
    assert "bad" in capsys.readouterr().err


def test_missing_config_is_input_error(tmp_path, capsys):
    assert main(["design", "--config", str(tmp_path / "nope.yaml")]) == 1
    assert "cannot read config" in capsys.readouterr().err


def test_fit_table(tmp_path, capsys):
    args = ["fit", "--config", str(BUNDLED_CONFIG), "--data", str(BUNDLED_DATA), "--response", "deposition_rate", "--out", str(tmp_path)]
    assert main(args) == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert lines[1].split()[:3] == ["Term", "Estimate", "(Std."]
    body = [ln.split()[0] for ln in lines[3:24]]
    assert body[:6] == ["Intercept", "PFR", "SOD", "Lambda", "CV", "TGF"]
    assert len(body) == 21
    assert "***" in out
    assert "AIC" in out and "Log Likelihood" in out
    report = json.loads((tmp_path / "fit_deposition_rate_full.json").read_text())
    assert [r["term"] for r in report["coefficients"]] == body


def noise_free_data(tmp_path):
    cfg = two_factor_config(tmp_path)
    assert main(["design", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "design.csv")
    for r in rows:
        r["y"] = repr(float(np.exp(1.0 + 0.5 * float(r["a"]) - 0.25 * float(r["b"]))))
    path = tmp_path / "data.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return cfg, path


def test_design_fit_round_trip_noise_free(tmp_path, capsys):
    cfg, data = noise_free_data(tmp_path)
    cfg2 = two_factor_config(tmp_path, model=["Intercept", "a", "b"])
    capsys.readouterr()
    assert main(["fit", "--config", str(cfg2), "--data", str(data), "--response", "y", "--model", "explicit",
                 "--out", str(tmp_path), "--format", "json"]) == 0
    report = json.loads(capsys.readouterr().out)
    est = {r["term"]: r["estimate"] for r in report["coefficients"]}
    assert est == pytest.approx({"Intercept": 1.0, "a": 0.5, "b": -0.25}, abs=1e-8)
    assert report["nu_hat"] is None  # perfect fit: dispersion not identified


def test_zero_response_is_gamma_support_error(tmp_path, capsys):
    cfg, data = noise_free_data(tmp_path)
    text = data.read_text().splitlines()
    head, first = text[0], text[1].split(",")
    first[-1] = "0"
    data.write_text("\n".join([head, ",".join(first), *text[2:]]) + "\n")
    assert main(["fit", "--config", str(cfg), "--data", str(data), "--response", "y"]) == 1
    assert "gamma support" in capsys.readouterr().err


def test_unknown_response_column(tmp_path, capsys):
    assert main(["fit", "--config", str(BUNDLED_CONFIG), "--data", str(BUNDLED_DATA), "--response", "colour"]) == 1
    assert "colour" in capsys.readouterr().err


def test_rank_deficiency_is_numerical_failure(tmp_path, capsys):
    cfg, data = noise_free_data(tmp_path)
    # 9-run design cannot carry a term that duplicates another column
    rows = read_rows(data)
    for r in rows:
        r["b"] = r["a"]
        r.pop("b_physical")
    with open(data, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    assert main(["fit", "--config", str(cfg), "--data", str(data), "--response", "y", "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_select_with_everything_forced(tmp_path, capsys):
    from ccdglm.model import ModelSpec

    names = ["PFR", "SOD", "Lambda", "CV", "TGF"]
    cfg = write_config(tmp_path, forced_terms=ModelSpec.full_second_order(names).labels, responses=["hardness"])
    assert main(["select", "--config", str(cfg), "--data", str(BUNDLED_DATA), "--response", "hardness",
                 "--out", str(tmp_path), "--format", "json"]) == 0
    trace = json.loads(capsys.readouterr().out)
    assert len(trace["steps"]) == 1 and len(trace["final_terms"]) == 21
    assert main(["report", "--config", str(cfg), "--data", str(BUNDLED_DATA), "--out", str(tmp_path), "--format", "json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    full, reduced = rows
    assert {k: v for k, v in full.items() if k != "Model"} == {k: v for k, v in reduced.items() if k != "Model"}


def test_validate_per_obs(tmp_path, capsys):
    assert main(["validate", "--config", str(BUNDLED_CONFIG), "--data", str(BUNDLED_DATA), "--response", "porosity",
                 "--out", str(tmp_path), "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    rows = read_rows(tmp_path / "loocv_porosity_full.csv")
    assert len(rows) == doc["n"] == 49
    assert doc["p"] == 21 and doc["cv_n"] > 0


def test_report_summary(tmp_path, capsys):
    assert main(["report", "--config", str(BUNDLED_CONFIG), "--data", str(BUNDLED_DATA), "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "summary.csv")
    assert len(rows) == 16
    assert tuple(rows[0]) == SUMMARY_COLUMNS
    assert set(rows[0]) == {"Property", "Model", "N_p", "AIC", "R²", "R²_adj", "CV(n)"}
    assert [r["Model"] for r in rows] == ["full", "reduced"] * 8
    for r in rows:
        assert len(read_rows(tmp_path / f"loocv_{r['Property']}_{r['Model']}.csv")) == 49
    table = capsys.readouterr().out
    assert table == (tmp_path / "summary.txt").read_text()
    # six significant digits in the text table
    first = table.splitlines()[2].split()
    assert len(first[3].replace(".", "").replace("-", "").lstrip("0")) <= 6


def test_report_partial_failure(tmp_path, capsys):
    rows = read_rows(BUNDLED_DATA)
    for r in rows:
        r["broken"] = "1.0"
    rows[0]["broken"] = "-1.0"
    data = tmp_path / "data.csv"
    with open(data, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    cfg = write_config(tmp_path, responses=["hardness", "broken"])
    code = main(["report", "--config", str(cfg), "--data", str(data), "--out", str(tmp_path)])
    assert code == 2
    captured = capsys.readouterr()
    assert "broken" in captured.err and "gamma support" in captured.err
    assert [r["Property"] for r in read_rows(tmp_path / "summary.csv")] == ["hardness", "hardness"]
