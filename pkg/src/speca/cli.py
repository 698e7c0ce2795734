"""speca command line: the two-phase audit pipeline end to end.

    extract -> index -> map -> checklist -> audit -> triage/propagate -> eval

Exit codes: 0 success, 1 degraded run (analyzer fallbacks occurred),
2 error. `speca demo` reproduces the bundled fixture tables in one command.
"""
from __future__ import annotations

import json
import re
import sys
from pathlib import Path

import click
from filelock import FileLock, Timeout

from . import bundled, pipeline
from .audit_engine import Finding, findings_to_sarif
from .errors import SpecaError
from .evaluation import (
    attribution_table,
    contest_summary,
    fp_distribution,
    miss_category_table,
    recall_by_severity,
    render_table,
)
from .records import read_jsonl
from .runstore import RunStore, list_runs


def _store(runs_root: str, run: str) -> RunStore:
    return RunStore(runs_root, run)


def _lock(store: RunStore):
    store.root.mkdir(parents=True, exist_ok=True)
    return FileLock(str(store.root / ".lock"), timeout=0.5)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


runs_root_option = click.option(
    "--runs-root", default="runs", show_default=True,
    help="Directory holding run subdirectories.")
run_option = click.option("--run", "run_id", required=True, help="Run identifier.")
backend_option = click.option(
    "--backend", type=click.Choice(["deterministic", "remote"]),
    default="deterministic", show_default=True)


@click.group()
def main() -> None:
    """Specification-to-checklist auditing over multiple implementations."""


@main.command()
@runs_root_option
@run_option
@click.option("--spec", "spec_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--doc-id", default=None,
              help="Uppercase document id; defaults to the filename stem.")
@click.option("--lenient-modals", is_flag=True, default=False,
              help="Case-insensitive modal matching.")
def extract(runs_root, run_id, spec_path, doc_id, lenient_modals):
    """Parse a specification and extract normative requirements."""
    if doc_id is None:
        doc_id = re.sub(r"[^A-Z0-9]", "", Path(spec_path).stem.upper()) or "SPEC"
    store = _store(runs_root, run_id)
    try:
        with _lock(store):
            summary = pipeline.run_extract(store, spec_path, doc_id, lenient_modals)
    except Timeout:
        _fail(f"run {run_id} is locked by another process")
    except SpecaError as exc:
        _fail(f"{type(exc).__name__}: {exc}")
    click.echo(json.dumps(summary, sort_keys=True))


@main.command()
@runs_root_option
@run_option
@click.option("--impl", "impls", multiple=True, required=True,
              help="Implementation as id=path (repeatable).")
@click.option("--layer", default="other", help="Layer tag for all given impls.")
def index(runs_root, run_id, impls, layer):
    """Index implementation source trees."""
    specs = []
    for item in impls:
        if "=" not in item:
            _fail(f"--impl must be id=path, got {item!r}")
        impl_id, _, path = item.partition("=")
        specs.append((impl_id, path, layer))
    store = _store(runs_root, run_id)
    try:
        with _lock(store):
            summary = pipeline.run_index(store, specs)
    except Timeout:
        _fail(f"run {run_id} is locked by another process")
    except SpecaError as exc:
        _fail(f"{type(exc).__name__}: {exc}")
    click.echo(json.dumps(summary, sort_keys=True))


@main.command("map")
@runs_root_option
@run_option
@backend_option
@click.option("--map-threshold", default=0.5, show_default=True)
@click.option("--top-k", default=20, show_default=True,
              help="Keyword-phase candidates per (requirement, implementation).")
def map_cmd(runs_root, run_id, backend, map_threshold, top_k):
    """Build the audit map (keyword prune + semantic refinement)."""
    store = _store(runs_root, run_id)
    try:
        with _lock(store):
            summary = pipeline.run_map(store, backend, map_threshold, top_k)
    except Timeout:
        _fail(f"run {run_id} is locked by another process")
    except SpecaError as exc:
        _fail(f"{type(exc).__name__}: {exc}")
    click.echo(json.dumps(summary, sort_keys=True))


@main.command()
@runs_root_option
@run_option
def checklist(runs_root, run_id):
    """Expand requirements into the property checklist."""
    store = _store(runs_root, run_id)
    try:
        with _lock(store):
            summary = pipeline.run_checklist(store)
    except Timeout:
        _fail(f"run {run_id} is locked by another process")
    except SpecaError as exc:
        _fail(f"{type(exc).__name__}: {exc}")
    click.echo(json.dumps(summary, sort_keys=True))


@main.command()
@runs_root_option
@run_option
@backend_option
@click.option("--threat-model", "threat_model_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Threat-model JSON copied into the run before auditing.")
@click.option("--shares", "shares_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Client share map (impl_id -> network fraction).")
@click.option("--pattern-db", "pattern_db_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--map-threshold", default=0.5, show_default=True)
@click.option("--week", default=1, show_default=True)
@click.option("--sarif", "sarif_path", default=None, type=click.Path(dir_okay=False),
              help="Also export findings as a SARIF report.")
def audit(runs_root, run_id, backend, threat_model_path, shares_path,
          pattern_db_path, map_threshold, week, sarif_path):
    """Run the static audit (strategy A) plus boundary-test planning."""
    store = _store(runs_root, run_id)
    try:
        with _lock(store):
            summary = pipeline.run_audit(
                store, backend, threat_model_path, shares_path,
                pattern_db_path, map_threshold, week)
    except Timeout:
        _fail(f"run {run_id} is locked by another process")
    except SpecaError as exc:
        _fail(f"{type(exc).__name__}: {exc}")
    if sarif_path:
        findings = store.state.ordered_findings()
        Path(sarif_path).write_text(
            json.dumps(findings_to_sarif(findings), indent=2) + "\n", "utf-8")
    click.echo(json.dumps(summary, sort_keys=True))
    if summary["degraded"]:
        sys.exit(1)


@main.command()
@runs_root_option
@run_option
@click.option("--finding", "finding_id", required=True)
@backend_option
@click.option("--per-impl-k", default=5, show_default=True)
def propagate(runs_root, run_id, finding_id, backend, per_impl_k):
    """Sweep a validated finding across the other implementations."""
    store = _store(runs_root, run_id)
    try:
        with _lock(store):
            new = pipeline.run_propagate(store, finding_id, backend, per_impl_k)
    except Timeout:
        _fail(f"run {run_id} is locked by another process")
    except SpecaError as exc:
        _fail(f"{type(exc).__name__}: {exc}")
    click.echo(json.dumps({"created": [f.finding_id for f in new]}))


@main.command()
@runs_root_option
@run_option
@click.option("--finding", "finding_id", required=True)
@click.option("--verdict", type=click.Choice(["VALID", "INVALID"]), required=True)
@click.option("--fp-category", default=None)
@click.option("--poc/--no-poc", "poc_attached", default=False)
@click.option("--actor", default="auditor", show_default=True)
def triage(runs_root, run_id, finding_id, verdict, fp_category, poc_attached, actor):
    """Record a human verification verdict."""
    store = _store(runs_root, run_id)
    try:
        with _lock(store):
            finding = pipeline.run_triage(store, finding_id, verdict,
                                          fp_category, poc_attached, actor)
    except Timeout:
        _fail(f"run {run_id} is locked by another process")
    except SpecaError as exc:
        _fail(f"{type(exc).__name__}: {exc}")
    click.echo(json.dumps({"finding_id": finding.finding_id,
                           "status": finding.status}))


@main.command()
@runs_root_option
@run_option
@click.option("--findings", "findings_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--pretriage", is_flag=True, default=False,
              help="Reset statuses to NEEDS_HUMAN_VERIFICATION.")
@click.option("--threat-model", "threat_model_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
def seed(runs_root, run_id, findings_path, pretriage, threat_model_path):
    """Materialize a run from an existing findings file (fixture plumbing)."""
    store = _store(runs_root, run_id)
    try:
        with _lock(store):
            findings = [Finding.from_record(r) for r in read_jsonl(findings_path)]
            count = pipeline.seed_run_from_findings(store, findings, pretriage)
            if threat_model_path:
                from .threat_model import ThreatModel
                store.save_threat_model(ThreatModel.from_record(
                    json.loads(Path(threat_model_path).read_text("utf-8"))))
    except Timeout:
        _fail(f"run {run_id} is locked by another process")
    except SpecaError as exc:
        _fail(f"{type(exc).__name__}: {exc}")
    click.echo(json.dumps({"seeded": count, "pretriage": pretriage}))


def _print_reports(findings, ground_truth, missed_issues, stats, clients):
    valid = [f for f in findings if f.status == "VALID"]
    invalid = [f for f in findings if f.status == "INVALID"]

    summary = contest_summary(findings, stats, clients)
    rows = [["Total submissions", summary["total_submissions"], "100%"],
            ["Valid submissions", summary["valid"], f"{summary['valid_rate_pct']}%"],
            ["Invalid submissions", summary["invalid"],
             f"{round(100 - summary['valid_rate_pct'], 1)}%"]]
    click.echo(render_table(["Metric", "Count", "Percentage"], rows,
                            title="Overall submission outcomes"))
    if "contest_average_pct" in summary:
        click.echo(f"Contest average valid rate: {summary['contest_average_pct']}% "
                   f"({summary['contest_totals']['valid']}/"
                   f"{summary['contest_totals']['submissions']})")

    att = attribution_table(valid)
    click.echo("")
    click.echo(render_table(
        ["Strategy", "Findings", "%"],
        [[r["label"], r["count"], f"{r['pct']}%"] for r in att["rows"]],
        title="Strategy attribution for valid findings"))

    fp = fp_distribution(invalid)
    click.echo("")
    click.echo(render_table(
        ["Root Cause", "Cnt", "%"],
        [[r["label"], r["count"], f"{r['pct']}%"] for r in fp["rows"]],
        title="False positive root cause distribution"))

    click.echo("")
    click.echo(render_table(
        ["Client", "Valid", "Invalid"],
        [[r["client"], r["valid"], r["invalid"]] for r in summary["per_client"]],
        title="Findings by client"))
    click.echo(f"Client coverage: {summary['clients_with_valid']} of "
               f"{summary['clients_total']}")

    click.echo("")
    click.echo(render_table(
        ["Severity", "Total", "Found", "Missed", "Rate"],
        [[r["severity"], r["total_in_contest"], r["found"], r["missed"],
          f"{r['discovery_rate_pct']}%"] for r in summary["miss_table"]],
        title="Miss rate by severity"))

    if missed_issues:
        mc = miss_category_table(missed_issues)
        click.echo("")
        click.echo(render_table(
            ["Failure Category", "Cnt", "%"],
            [[r["category"], r["count"], f"{r['pct']}%"] for r in mc["rows"]],
            title="Miss categories (High/Medium)"))

    if ground_truth:
        v2 = bundled.load_v2_findings()
        recall = recall_by_severity(ground_truth, v2)
        click.echo("")
        click.echo(render_table(
            ["Severity", "Ground Truth", "Matched", "Missed", "Recall"],
            [[r["severity"], r["ground_truth_count"], r["matched"], r["missed"],
              f"{r['recall_pct']}%"] for r in recall.rows]
            + [["Total", recall.total["ground_truth_count"], recall.total["matched"],
                recall.total["missed"], f"{recall.total['recall_pct']}%"]],
            title="V2 strict recall on CL-client issues"))
        click.echo(f"Matched issue ids: {recall.matched_issue_ids}")


@main.command("eval")
@runs_root_option
@run_option
@click.option("--ground-truth", "ground_truth_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
def eval_cmd(runs_root, run_id, ground_truth_path):
    """Score a run's findings against a ground-truth issue database."""
    store = _store(runs_root, run_id)
    if not store.exists():
        _fail(f"run {run_id} not found under {runs_root}")
    findings = store.state.ordered_findings()
    if not findings:
        _fail(f"run {run_id} has no findings (run `speca audit` first)")
    from .evaluation import load_ground_truth
    issues = (load_ground_truth(ground_truth_path) if ground_truth_path
              else bundled.load_ground_truth())
    recall = recall_by_severity(issues, findings)
    click.echo(render_table(
        ["Severity", "Ground Truth", "Matched", "Missed", "Recall"],
        [[r["severity"], r["ground_truth_count"], r["matched"], r["missed"],
          f"{r['recall_pct']}%"] for r in recall.rows]
        + [["Total", recall.total["ground_truth_count"], recall.total["matched"],
            recall.total["missed"], f"{recall.total['recall_pct']}%"]],
        title=f"Strict recall for run {run_id}"))
    click.echo(json.dumps(recall.to_record()["total"], sort_keys=True))


@main.command()
@runs_root_option
@backend_option
def demo(runs_root, backend):
    """Run the bundled fixture corpus end to end and print the audit tables."""
    try:
        stages = pipeline.build_demo_runs(runs_root, backend)
    except SpecaError as exc:
        _fail(f"{type(exc).__name__}: {exc}")
    click.echo("Pipeline on the bundled three-implementation corpus:")
    for stage, summary in stages.items():
        click.echo(f"  {stage}: {json.dumps(summary, sort_keys=True)}")
    click.echo("")
    _print_reports(
        bundled.load_v1_findings(),
        bundled.load_ground_truth(),
        bundled.load_missed_v1_issues(),
        bundled.load_contest_stats(),
        [c["impl_id"] for c in bundled.load_clients()],
    )
    if stages["audit"]["degraded"]:
        sys.exit(1)


@main.command()
@runs_root_option
@click.option("--port", default=8321, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(runs_root, port, host):
    """Serve the triage/reporting HTTP API."""
    import uvicorn

    from .service_api import build_app

    app = build_app(runs_root)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except OSError as exc:
        _fail(f"StartupFailure: {exc}")


@main.command("runs")
@runs_root_option
def runs_cmd(runs_root):
    """List runs."""
    for run_id in list_runs(runs_root):
        click.echo(run_id)


if __name__ == "__main__":
    main()
