import json

import numpy as np
import pytest

from covdilate.cli import main, render_report, run
from covdilate.errors import ScenarioParseError, ScenarioValidationError
from covdilate.scenario import (DEMO_NAMES, build_scenario, demo_fixture,
                                load_scenario, parse_matrix, parse_scalar)


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_parse_scalar_and_matrix():
    assert parse_scalar(2) == 2.0 + 0j
    assert parse_scalar([1, -1]) == 1.0 - 1.0j
    with pytest.raises(ScenarioParseError):
        parse_scalar("x")
    m = parse_matrix([[[0, 1], [1, 0]], [[2, 0], 3]])
    assert np.allclose(m, np.array([[1j, 1.0], [2.0, 3.0]]))


def test_minimal_scalar_scenario_loads(tmp_path):
    data = demo_fixture("scalar")
    sc = load_scenario(write(tmp_path, "s.json", data))
    assert sc.backend == "finite-dim"
    assert sc.pair.space_dim == 1
    assert sc.levels == 3 and sc.copies == 3


def test_contraction_gate(tmp_path):
    data = demo_fixture("scalar")
    data["T"] = [[[1.5, 0.0]]]
    with pytest.raises(ScenarioValidationError) as err:
        load_scenario(write(tmp_path, "bad.json", data))
    assert err.value.gate == "contraction"


def test_depth_budget_gate(tmp_path):
    data = demo_fixture("tower")
    data["levels"] = 9
    with pytest.raises(ScenarioValidationError) as err:
        load_scenario(write(tmp_path, "deep.json", data))
    assert err.value.gate == "depth budget"


def test_covariance_gate():
    data = demo_fixture("automorphism")
    data["T"] = [[[0.5 if i == j else 0.0, 0.0] for j in range(4)] for i in range(4)]
    with pytest.raises(ScenarioValidationError) as err:
        build_scenario(data)
    assert err.value.gate == "covariance"


def test_parse_error_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"schema": 1,')
    with pytest.raises(ScenarioParseError) as err:
        load_scenario(str(path))
    assert "line" in str(err.value)


def test_strategy_gate():
    data = demo_fixture("scalar")
    data["strategy"] = {"kind": "adapted", "tau": {"coords": [[[0.5, 0.0]]]}}
    with pytest.raises(ScenarioValidationError) as err:
        build_scenario(data)
    assert err.value.gate == "strategy"


def test_run_check_scalar_all_clauses_pass():
    sc = build_scenario(demo_fixture("scalar"))
    report = run(sc, "check")
    assert report["passed"]
    names = [c["name"] for c in report["clauses"]]
    assert "pair/covariance" in names
    assert all("residual" in c and "threshold" in c for c in report["clauses"])


def test_run_unitary_scalar_compression_exact():
    sc = build_scenario(demo_fixture("scalar"))
    report = run(sc, "unitary")
    assert report["passed"]
    comp = next(c for c in report["clauses"] if c["name"] == "unitary/compression")
    assert comp["residual"] <= 1e-12


def test_compare_tower_states_inequivalent():
    a = demo_fixture("tower")
    b = demo_fixture("tower")
    b["strategy"] = {"kind": "adapted", "phi": {"vector": [[1, 0], [0, 0]]}}
    sa = build_scenario(a)
    sb = build_scenario(b)
    report = run(sa, "compare", other=sb)
    assert report["verdicts"]["chains"]["verdict"] == "inequivalent"
    w = report["verdicts"]["chains"]["witness"]
    assert w["mismatch"] >= 1e-7


def test_compare_same_scenario_equivalent():
    sa = build_scenario(demo_fixture("tower"))
    sb = build_scenario(demo_fixture("tower"))
    report = run(sa, "compare", other=sb)
    assert report["verdicts"]["chains"]["verdict"] == "equivalent"
    assert report["passed"]


def test_cli_exit_codes(tmp_path):
    good = write(tmp_path, "good.json", demo_fixture("scalar"))
    assert main(["check", "--scenario", good, "--out", str(tmp_path / "r.json")]) == 0
    bad = dict(demo_fixture("scalar"))
    bad["T"] = [[[2.0, 0.0]]]
    badp = write(tmp_path, "bad.json", bad)
    assert main(["check", "--scenario", badp]) == 2
    missing = str(tmp_path / "missing.json")
    assert main(["check", "--scenario", missing]) == 2


def test_cli_clause_failure_exit_code(tmp_path):
    data = demo_fixture("tower")
    # irrational defect directions leave machine-noise residuals, and a valid
    # but unreachable tolerance turns those into clause failures
    data["pair"] = {"scale": 0.9, "u": [[0.6, 0], [0.8, 0]], "v": [[0.6, 0], [0, 0.8]]}
    data["tolerances"] = {"rank_eps": 1e-18, "residual_tol": 1e-17, "psd_floor": 1e-18}
    path = write(tmp_path, "tight.json", data)
    assert main(["check", "--scenario", path, "--out", str(tmp_path / "r.json")]) == 1


def test_cli_invalid_tol_override_is_validation_error(tmp_path):
    good = write(tmp_path, "good.json", demo_fixture("scalar"))
    # residual_tol below rank_eps violates the tolerance invariant
    assert main(["check", "--scenario", good, "--tol", "1e-12"]) == 2


def test_cli_byte_identical_reports(tmp_path):
    good = write(tmp_path, "good.json", demo_fixture("tower"))
    out1 = tmp_path / "r1.json"
    out2 = tmp_path / "r2.json"
    assert main(["extend", "--scenario", good, "--out", str(out1)]) == 0
    assert main(["extend", "--scenario", good, "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_cli_overrides(tmp_path):
    good = write(tmp_path, "good.json", demo_fixture("scalar"))
    out = tmp_path / "r.json"
    assert main(["extend", "--scenario", good, "--levels", "2",
                 "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["scenario"]["levels"] == 2
    assert len(report["dimensions"]["blocks"]) == 3


def test_every_clause_has_residual_and_nothing_silent():
    for name in DEMO_NAMES:
        sc = build_scenario(demo_fixture(name))
        for command in ("check", "extend", "dilate", "unitary", "matricial"):
            report = run(sc, command)
            assert report["clauses"], (name, command)
            for cl in report["clauses"]:
                assert isinstance(cl["residual"], float)
                assert isinstance(cl["threshold"], float)
                assert isinstance(cl["passed"], bool)
            assert report["passed"], (name, command)


def test_report_rendering_is_sorted_json():
    sc = build_scenario(demo_fixture("scalar"))
    report = run(sc, "check")
    text = render_report(report)
    parsed = json.loads(text)
    assert parsed == json.loads(render_report(parsed))
    assert text.endswith("\n")


def test_timing_flag_adds_field():
    sc = build_scenario(demo_fixture("scalar"))
    assert "timing_ms" not in run(sc, "check")
    assert "timing_ms" in run(sc, "check", with_timing=True)
