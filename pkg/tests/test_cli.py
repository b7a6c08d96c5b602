"""Command-line front end: tasks, configs, exit codes, reproducibility."""

import filecmp
import json
import subprocess
import sys
from fractions import Fraction as F

import pytest

from torusdyn.cli import main
from torusdyn.lift import MapLift, Term, rigid_lift, sine_product_lift, skew_lift, save_map
from torusdyn.lines import PqPolyline, brouwer_check, free_curve_check, load_line, save_line


def vertical(c):
    c = F(c)
    return PqPolyline((0, 1), ((c, F(0)), (c, F(1))))


@pytest.fixture()
def work(tmp_path):
    maps = {
        "skew": skew_lift(0.25, 0.1),
        "rigid_q": rigid_lift(0.25, 0.0),
        "rigid_irr": rigid_lift(0.3, 0.7),
        "sineprod": sine_product_lift(0.1),
        "crit": MapLift(0.3, 0.0, p_terms=(Term(0, 1, amp_sin=0.05),)),
    }
    for name, f in maps.items():
        save_map(f, tmp_path / f"{name}.json")
    save_line(vertical(0), tmp_path / "v0.json")
    save_line(vertical(F(1, 10)), tmp_path / "va.json")
    save_line(vertical(F(3, 10)), tmp_path / "vb.json")
    return tmp_path


def run(work, *args):
    return main([str(a) for a in args])


# ---------------------------------------------------------------------------
# argument and config handling


def test_unknown_task_fails(work, capsys):
    with pytest.raises(SystemExit) as err:
        run(work, "polish", "--map", work / "skew.json")
    assert err.value.code == 2
    assert "invalid choice" in capsys.readouterr().err


def test_missing_map_file(work, capsys):
    code = run(work, "estimate-rot", "--map", work / "nope.json",
               "--out", work / "o")
    assert code == 1
    assert "nope.json" in capsys.readouterr().err


def test_broken_map_json(work, capsys):
    bad = work / "bad.json"
    bad.write_text("{not json")
    code = run(work, "estimate-rot", "--map", bad, "--out", work / "o")
    assert code == 1
    assert "bad.json" in capsys.readouterr().err


def test_config_file_supplies_defaults(work):
    cfg = work / "cfg.json"
    cfg.write_text(json.dumps({
        "task": "estimate-rot",
        "map": "rigid_irr.json",
        "n": 100,
        "grid": 8,
        "out": str(work / "from_cfg"),
    }))
    assert run(work, "--config", cfg) == 0
    data = json.loads((work / "from_cfg" / "estimate-rot.json").read_text())
    assert data["estimate"]["n"] == 100 and data["estimate"]["grid"] == 8


def test_flags_override_config(work):
    cfg = work / "cfg.json"
    cfg.write_text(json.dumps({
        "task": "estimate-rot",
        "map": "rigid_irr.json",
        "n": 100,
        "grid": 8,
        "out": str(work / "cfg_out"),
    }))
    assert run(work, "--config", cfg, "--n", 64, "--out", work / "ovr") == 0
    data = json.loads((work / "ovr" / "estimate-rot.json").read_text())
    assert data["estimate"]["n"] == 64 and data["estimate"]["grid"] == 8


def test_config_rejects_unknown_keys(work, capsys):
    cfg = work / "cfg.json"
    cfg.write_text(json.dumps({"task": "estimate-rot", "mapfile": "x.json"}))
    assert run(work, "--config", cfg) == 1
    assert "mapfile" in capsys.readouterr().err


def test_wrong_line_count(work, capsys):
    assert run(work, "wedge", "--line", work / "va.json",
               "--out", work / "o") == 1
    assert "exactly 2" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# tasks


def test_estimate_rot_outputs(work):
    out = work / "est"
    assert run(work, "estimate-rot", "--map", work / "skew.json",
               "--n", 300, "--grid", 50, "--out", out) == 0
    data = json.loads((out / "estimate-rot.json").read_text())
    est = data["estimate"]
    assert set(est) >= {"outer_hull", "inner_hull", "n", "grid", "gap"}
    assert "workers" not in est and "workers" not in data
    assert (out / "hull.tsv").read_text().startswith("region\tx\ty")
    svg = (out / "estimate-rot.svg").read_text()
    assert svg.startswith("<svg") and "polygon" in svg
    assert (out / "estimate-rot.txt").exists()


def test_estimate_rot_worker_independence(work):
    a, b = work / "w1", work / "w4"
    for out, workers in ((a, 1), (b, 4)):
        assert run(work, "estimate-rot", "--map", work / "skew.json",
                   "--n", 300, "--grid", 50, "--workers", workers,
                   "--out", out) == 0
    match, mismatch, errors = filecmp.cmpfiles(
        a, b, ["estimate-rot.json", "hull.tsv", "estimate-rot.svg"],
        shallow=False)
    assert mismatch == [] and errors == []


def test_classify_skew(work):
    out = work / "cls"
    assert run(work, "classify", "--map", work / "skew.json",
               "--n", 500, "--grid", 80, "--out", out) == 0
    data = json.loads((out / "classify.json").read_text())
    assert data["class"]["kind"] == "SegmentRationalSlope"
    assert data["class"]["direction"] == [0, 1]
    crits = {c["axis"]: c for c in data["criteria"]}
    assert crits[2]["farey_interval"] == [[0, 1], [1, 2]]
    assert crits[2]["disjoint_iterates"] == 2


def test_normalize_rational_point(work):
    out = work / "nrm"
    assert run(work, "normalize", "--map", work / "rigid_q.json",
               "--n", 200, "--grid", 16, "--out", out) == 0
    data = json.loads((out / "normalize.json").read_text())
    assert data["mode"] == "rational-point"
    assert data["vector"] == {"p1": 1, "p2": 0, "q": 4}


def test_wedge_of_verticals_returns_left_file(work):
    out = work / "wdg"
    assert run(work, "wedge", "--line", work / "va.json",
               "--line", work / "vb.json", "--out", out) == 0
    assert (out / "wedge.json").read_bytes() == (work / "va.json").read_bytes()
    assert (out / "wedge.svg").exists()


def test_wedge_rejects_mismatched_periods(work, capsys):
    horiz = PqPolyline((1, 0), ((F(0), F(0)), (F(1), F(0))))
    save_line(horiz, work / "h.json")
    code = run(work, "wedge", "--line", work / "va.json",
               "--line", work / "h.json", "--out", work / "o")
    assert code == 1


def test_brouwer_descend_criterion_map(work):
    out = work / "bd"
    assert run(work, "brouwer-descend", "--map", work / "crit.json",
               "--line", work / "v0.json", "--n", 2,
               "--chord-tol", 1e-4, "--out", out) == 0
    data = json.loads((out / "brouwer-descend.json").read_text())
    assert data["final_check"]["kind"] == "Yes"
    gamma = load_line(out / "descended-line.json")
    f = MapLift(0.3, 0.0, p_terms=(Term(0, 1, amp_sin=0.05),))
    assert brouwer_check(f, gamma, chord_tol=1e-4).kind == "Yes"


def test_brouwer_descend_failure_exit(work):
    f = rigid_lift(0.0, 0.7)
    save_map(f, work / "updrift.json")
    out = work / "bdf"
    code = run(work, "brouwer-descend", "--map", work / "updrift.json",
               "--line", work / "v0.json", "--n", 2,
               "--out", out)
    assert code == 2
    data = json.loads((out / "brouwer-descend.json").read_text())
    assert data["outcome"] == "failed"


def test_descend_free_curve(work):
    out = work / "dfc"
    assert run(work, "descend-free-curve", "--map", work / "crit.json",
               "--line", work / "v0.json", "--n", 2,
               "--chord-tol", 1e-4, "--out", out) == 0
    gamma = load_line(out / "free-curve.json")
    f = MapLift(0.3, 0.0, p_terms=(Term(0, 1, amp_sin=0.05),))
    assert free_curve_check(f, gamma, chord_tol=1e-4).kind == "Yes"


def test_free_curve_check_task(work):
    out = work / "fcc"
    assert run(work, "free-curve-check", "--map", work / "rigid_q.json",
               "--line", work / "v0.json", "--out", out) == 0
    data = json.loads((out / "free-curve-check.json").read_text())
    assert data["kind"] == "Yes"


def test_find_periodic_certificates(work):
    out = work / "fp"
    assert run(work, "find-periodic", "--map", work / "sineprod.json",
               "--n", 200, "--grid", 16, "--out", out) == 0
    data = json.loads((out / "find-periodic.json").read_text())
    assert len(data["certificates"]) == 4
    assert (out / "certificates.txt").read_text().count(
        "periodic point certificate") == 4
    tsv = (out / "displacement.tsv").read_text()
    assert tsv.splitlines()[0] == "x\ty\tdx\tdy"
    assert (out / "find-periodic.svg").exists()


def test_find_periodic_candidates_exit_two(work):
    f = MapLift(0.0, 0.0, p_terms=(Term(0, 1, amp_sin=0.1),))
    save_map(f, work / "ribbon.json")
    out = work / "fpc"
    code = run(work, "find-periodic", "--map", work / "ribbon.json",
               "--n", 100, "--grid", 8, "--min-box", 1e-2, "--out", out)
    assert code == 2
    data = json.loads((out / "find-periodic.json").read_text())
    assert data["certificates"] == [] and len(data["candidates"]) > 0


def test_find_periodic_worker_independence(work):
    a, b = work / "fp1", work / "fp4"
    for out, workers in ((a, 1), (b, 4)):
        assert run(work, "find-periodic", "--map", work / "sineprod.json",
                   "--n", 200, "--grid", 16, "--workers", workers,
                   "--out", out) == 0
    names = ["find-periodic.json", "displacement.tsv", "certificates.txt",
             "find-periodic.svg", "find-periodic.txt"]
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert mismatch == [] and errors == []


# ---------------------------------------------------------------------------
# the report task


def test_report_requires_prior_results(work, capsys):
    assert run(work, "report", "--out", work / "empty") == 1
    assert "estimate-rot" in capsys.readouterr().err


def test_report_collects_results(work):
    out = work / "rpt"
    assert run(work, "classify", "--map", work / "skew.json",
               "--n", 500, "--grid", 80, "--out", out) == 0
    assert run(work, "find-periodic", "--map", work / "sineprod.json",
               "--n", 200, "--grid", 16, "--out", out) == 0
    assert run(work, "report", "--out", out) == 0
    md = (out / "report.md").read_text()
    assert md.startswith("# ")
    assert "SegmentRationalSlope" in md
    assert "certified" in md
    data = json.loads((out / "report.json").read_text())
    assert data["missing"]
    assert not data["inconclusive"]


def test_report_propagates_inconclusive(work):
    out = work / "rpt2"
    f = MapLift(0.0, 0.0, p_terms=(Term(0, 1, amp_sin=0.1),))
    save_map(f, work / "ribbon.json")
    assert run(work, "find-periodic", "--map", work / "ribbon.json",
               "--n", 100, "--grid", 8, "--min-box", 1e-2,
               "--out", out) == 2
    assert run(work, "report", "--out", out) == 2
    data = json.loads((out / "report.json").read_text())
    assert any("periodic" in item for item in data["inconclusive"])


# ---------------------------------------------------------------------------
# packaging


def test_module_entry_point(work):
    proc = subprocess.run(
        [sys.executable, "-m", "torusdyn", "estimate-rot",
         "--map", str(work / "rigid_irr.json"), "--n", "50", "--grid", "8",
         "--out", str(work / "sub")],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert (work / "sub" / "estimate-rot.json").exists()
