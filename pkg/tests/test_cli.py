from __future__ import annotations

import hashlib
import json

import pytest
from click.testing import CliRunner

from speca import bundled
from speca.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def _pipeline(runner, tmp_path, run_id="t1"):
    root = str(tmp_path / "runs")
    corpus = bundled.corpus_root()
    impls = [f"{p.name}={p}" for p in sorted(corpus.iterdir()) if p.is_dir()]
    steps = [
        ["extract", "--runs-root", root, "--run", run_id,
         "--spec", str(bundled.minispec_path()), "--doc-id", "EIP7594"],
        ["index", "--runs-root", root, "--run", run_id,
         "--impl", impls[0], "--impl", impls[1], "--impl", impls[2]],
        ["map", "--runs-root", root, "--run", run_id],
        ["checklist", "--runs-root", root, "--run", run_id],
        ["audit", "--runs-root", root, "--run", run_id, "--threat-model",
         str(bundled.fixtures_root() / "trustmodel_fusaka.json")],
    ]
    for step in steps:
        result = runner.invoke(main, step)
        assert result.exit_code == 0, f"{step}: {result.output}"
    return root


def test_extract_empty_file_exits_2(runner, tmp_path):
    empty = tmp_path / "empty.md"
    empty.write_text("", "utf-8")
    result = runner.invoke(main, ["extract", "--runs-root",
                                  str(tmp_path / "runs"), "--run", "x",
                                  "--spec", str(empty), "--doc-id", "X1"])
    assert result.exit_code == 2
    assert "EmptyDocument" in result.output


def test_audit_refuses_before_map(runner, tmp_path):
    root = str(tmp_path / "runs")
    result = runner.invoke(main, [
        "extract", "--runs-root", root, "--run", "t1",
        "--spec", str(bundled.minispec_path()), "--doc-id", "EIP7594"])
    assert result.exit_code == 0
    result = runner.invoke(main, ["audit", "--runs-root", root, "--run", "t1"])
    assert result.exit_code == 2
    assert "audit_map.jsonl" in result.output


def test_map_refuses_before_index(runner, tmp_path):
    root = str(tmp_path / "runs")
    runner.invoke(main, ["extract", "--runs-root", root, "--run", "t1",
                         "--spec", str(bundled.minispec_path()),
                         "--doc-id", "EIP7594"])
    result = runner.invoke(main, ["map", "--runs-root", root, "--run", "t1"])
    assert result.exit_code == 2
    assert "index" in result.output


def test_full_pipeline_summaries(runner, tmp_path):
    root = _pipeline(runner, tmp_path)
    summary = json.loads((tmp_path / "runs/t1/run_summary.json").read_text())
    assert summary["survivors"] == 3
    assert summary["boundary_plans"] == 5
    assert (tmp_path / "runs/t1/findings.jsonl").exists()
    assert (tmp_path / "runs/t1/checklist.jsonl").exists()
    assert (tmp_path / "runs/t1/audit_map.jsonl").exists()
    assert (tmp_path / "runs/t1/program_graphs.jsonl").exists()


def test_audit_rerun_is_byte_identical(runner, tmp_path):
    root = _pipeline(runner, tmp_path)
    findings = tmp_path / "runs/t1/findings.jsonl"
    first = hashlib.sha256(findings.read_bytes()).hexdigest()
    result = runner.invoke(main, ["audit", "--runs-root", root, "--run", "t1"])
    assert result.exit_code == 0
    assert hashlib.sha256(findings.read_bytes()).hexdigest() == first


def test_triage_then_propagate_flow(runner, tmp_path):
    root = _pipeline(runner, tmp_path)
    result = runner.invoke(main, [
        "triage", "--runs-root", root, "--run", "t1",
        "--finding", "F-t1-0001", "--verdict", "VALID", "--poc"])
    assert result.exit_code == 0
    result = runner.invoke(main, [
        "propagate", "--runs-root", root, "--run", "t1",
        "--finding", "F-t1-0001"])
    assert result.exit_code == 0
    assert "created" in result.output


def test_sarif_export(runner, tmp_path):
    root = _pipeline(runner, tmp_path)
    sarif = tmp_path / "report.sarif"
    result = runner.invoke(main, ["audit", "--runs-root", root, "--run", "t1",
                                  "--sarif", str(sarif)])
    assert result.exit_code == 0
    body = json.loads(sarif.read_text())
    assert body["version"] == "2.1.0"
    assert len(body["runs"][0]["results"]) == 3


def test_demo_prints_headline_tables(runner, tmp_path):
    result = runner.invoke(main, ["demo", "--runs-root", str(tmp_path / "runs")])
    assert result.exit_code == 0
    assert "31.5%" in result.output
    assert "27.6%" in result.output
    assert "76.5%" in result.output
    assert "56.8%" in result.output
    assert "27.3%" in result.output
    assert "9 of 11" in result.output


def test_unknown_run_eval_exits_2(runner, tmp_path):
    result = runner.invoke(main, ["eval", "--runs-root", str(tmp_path / "runs"),
                                  "--run", "ghost"])
    assert result.exit_code == 2


def test_extract_lenient_modals_flag(runner, tmp_path):
    spec = tmp_path / "soft.md"
    spec.write_text("## Area\nNodes must verify the digest.\n", "utf-8")
    root = str(tmp_path / "runs")
    strict = runner.invoke(main, ["extract", "--runs-root", root, "--run", "s",
                                  "--spec", str(spec), "--doc-id", "SOFT"])
    assert json.loads(strict.output)["requirements"] == 0
    lenient = runner.invoke(main, ["extract", "--runs-root", root, "--run", "l",
                                   "--spec", str(spec), "--doc-id", "SOFT",
                                   "--lenient-modals"])
    assert json.loads(lenient.output)["requirements"] == 1
