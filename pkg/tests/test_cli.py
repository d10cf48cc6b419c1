import json
import shutil
from pathlib import Path

import pytest

from araproto.cli import main
from araproto.spec_model import EXAMPLE_SPEC_XML

from conftest import make_spec_xml


@pytest.fixture
def spec_file(tmp_path):
    p = tmp_path / "spec.xml"
    p.write_text(EXAMPLE_SPEC_XML)
    return p


def test_synth_example(spec_file, tmp_path, capsys):
    out = tmp_path / "topo.json"
    assert main(["synth", "--spec", str(spec_file), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "buffer demand: 26" in text and "cross points: 59" in text and "feasible: yes" in text
    doc = json.loads(out.read_text())
    assert doc["buffer_demand"] == 26 and doc["cross_points"] == 59 and doc["feasible"]


def test_synth_minimal(tmp_path, capsys):
    p = tmp_path / "min.xml"
    p.write_text(make_spec_xml([("a", 1, 1)], buffers=1, dmacs=1))
    assert main(["synth", "--spec", str(p)]) == 0
    assert "cross points: 1" in capsys.readouterr().out


def test_synth_capacity_failure(tmp_path, capsys):
    p = tmp_path / "bad.xml"
    p.write_text(make_spec_xml([("a", 2, 1)], buffers=1, dmacs=1, connectivity=2))
    assert main(["synth", "--spec", str(p)]) == 1
    captured = capsys.readouterr()
    assert "demand is 2" in captured.err and captured.out == ""


def test_sim_empty_trace(spec_file, tmp_path, capsys):
    trace = tmp_path / "empty.trace"
    trace.write_text("# nothing\n")
    assert main(["sim", "--spec", str(spec_file), "--trace", str(trace)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["total_cycles"] == 0 and rep["total_bytes"] == 0


def test_sim_all_parallel_writes_json_and_csv(spec_file, tmp_path):
    topo = tmp_path / "topo.json"
    main(["synth", "--spec", str(spec_file), "--out", str(topo)])
    out = tmp_path / "rep.json"
    args = ["sim", "--spec", str(spec_file), "--topology", str(topo), "--pattern", "all_parallel", "--out", str(out)]
    assert main(args) == 0
    rep = json.loads(out.read_text())
    assert len(rep["instances"]) == 5
    first = (out.read_bytes(), (tmp_path / "rep.csv").read_bytes())
    assert main(args) == 0
    assert (out.read_bytes(), (tmp_path / "rep.csv").read_bytes()) == first


def test_sim_unknown_kernel(spec_file, tmp_path, capsys):
    trace = tmp_path / "t.trace"
    trace.write_text("0 a run nosuch\n")
    assert main(["sim", "--spec", str(spec_file), "--trace", str(trace)]) == 1
    assert "nosuch" in capsys.readouterr().err


def test_sim_platform_override(spec_file, capsys):
    main(["sim", "--spec", str(spec_file), "--pattern", "single:gaussian"])
    base = json.loads(capsys.readouterr().out)["total_cycles"]
    main(["sim", "--spec", str(spec_file), "--pattern", "single:gaussian", "--set", "dram_latency_cycles=0"])
    assert json.loads(capsys.readouterr().out)["total_cycles"] < base


def test_sim_bad_override(spec_file, capsys):
    assert main(["sim", "--spec", str(spec_file), "--pattern", "single:gaussian", "--set", "warp=9"]) == 1
    assert "warp" in capsys.readouterr().err


def test_sweep_and_report(spec_file, tmp_path, capsys):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"spec": "spec.xml", "workload": {"pattern": "all_parallel"},
                                "axes": {"buffers": ["shared", "private"]}}))
    table = tmp_path / "b.csv"
    assert main(["sweep", "--plan", str(plan), "--out", str(table)]) == 0
    summary = tmp_path / "b.json"
    assert main(["report", str(table), "--scenario", "buffers", "--out", str(summary)]) == 0
    text = capsys.readouterr().out
    assert "private banks 37 vs shared (c=3) 26, saving 29.7%" in text
    assert json.loads(summary.read_text())["comparisons"][0]["bank_saving_pct"] == 29.7


def test_report_malformed_csv(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    assert main(["report", str(bad), "--scenario", "tlb"]) == 1
    assert "not a sweep table" in capsys.readouterr().err


def test_shipped_plans_run(tmp_path):
    root = Path(__file__).resolve().parents[1] / "specs"
    for name in ("medical_imaging.xml", "plan_buffers.json"):
        shutil.copy(root / name, tmp_path / name)
    assert main(["sweep", "--plan", str(tmp_path / "plan_buffers.json")]) == 0
    assert (tmp_path / "buffers.csv").exists()
