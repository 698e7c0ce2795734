"""Orchestration layer shared by the CLI and the HTTP service.

Each stage reads its inputs from the run directory, does the work through
the core modules, appends events, and rewrites the materialized snapshots.
"""
from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

from . import bundled
from .analyzer import AnalyzerHandle
from .audit_engine import (
    AuditConfig,
    Finding,
    FindingIdAllocator,
    generate_boundary_tests,
    propagate_cross_impl,
    run_static_audit,
    uniform_shares,
)
from .checklist import Checklist, generate_checklist
from .code_index import ImplementationRef, build_index, load_index, save_index
from .errors import NoBoundaries, NotFound, SpecaError
from .pattern_db import PatternDatabase
from .records import write_jsonl
from .runstore import RunStore
from .spec_extract import (
    MUST_FAMILY,
    build_program_graph,
    export_requirements,
    extract_requirements,
    parse_spec_doc,
)
from .spec_map import build_audit_map, coverage_report
from .threat_model import ThreatModel, validate_model


def make_analyzer(store: RunStore, backend: str = "deterministic",
                  map_threshold: float = 0.5) -> AnalyzerHandle:
    return AnalyzerHandle(backend=backend, map_threshold=map_threshold,
                          cache_dir=store.path("analyzer_cache"))


def run_extract(store: RunStore, spec_path: str | Path, doc_id: str,
                lenient_modals: bool = False) -> dict:
    raw = Path(spec_path).read_text("utf-8")
    doc = parse_spec_doc(raw, doc_id)
    reqs = extract_requirements(doc, lenient_modals=lenient_modals)
    store.create()
    export_requirements(reqs, store.path("requirements.jsonl"))

    # Program graphs for every section that carries a pseudocode fence,
    # sourced from the section's MUST-family requirements.
    graphs = []
    for n, section in enumerate(doc.sections, start=1):
        section_reqs = [r.id for r in reqs
                        if r.source.section_slug == section.slug
                        and r.modality in MUST_FAMILY]
        if not section_reqs:
            continue
        try:
            graphs.append(build_program_graph(doc, section_reqs, graph_number=n,
                                              lenient_modals=lenient_modals))
        except SpecaError:
            continue
    write_jsonl((g.to_record() for g in graphs), store.path("program_graphs.jsonl"))

    store.append_event("requirements_extracted",
                       {"doc_id": doc_id, "count": len(reqs), "graphs": len(graphs)})
    by_modality: dict[str, int] = {}
    for r in reqs:
        by_modality[r.modality] = by_modality.get(r.modality, 0) + 1
    return {"requirements": len(reqs), "by_modality": by_modality,
            "sections": len(doc.sections), "program_graphs": len(graphs)}


def run_index(store: RunStore, impl_specs: list[tuple[str, str, str]]) -> dict:
    refs = [ImplementationRef(impl_id=i, root_path=p, layer=layer)
            for i, p, layer in impl_specs]
    index = build_index(refs)
    store.create()
    store.index_path.parent.mkdir(parents=True, exist_ok=True)
    save_index(index, store.index_path)
    store.append_event("index_built", {
        "implementations": [r.impl_id for r in refs],
        "file_count": index.file_count,
        "token_count": index.token_count,
    })
    return {"implementations": len(refs), "file_count": index.file_count,
            "token_count": index.token_count}


def run_map(store: RunStore, backend: str = "deterministic",
            map_threshold: float = 0.5, top_k: int = 20) -> dict:
    reqs = store.load_requirements()
    if not store.index_path.exists():
        raise NotFound(f"run {store.run_id}: index/index.json missing "
                       "(run `speca index` first)")
    index = load_index(store.index_path)
    analyzer = make_analyzer(store, backend, map_threshold)
    audit_map = build_audit_map(reqs, index, analyzer, top_k=top_k)
    write_jsonl((e.to_record() for e in audit_map), store.path("audit_map.jsonl"))
    report = coverage_report(audit_map)
    store.append_event("map_built", {"entries": len(audit_map),
                                     "unmapped": report["unmapped"]})
    return report | {"entries": len(audit_map)}


def run_checklist(store: RunStore) -> dict:
    reqs = store.load_requirements()
    if not store.index_path.exists():
        raise NotFound(f"run {store.run_id}: index/index.json missing "
                       "(run `speca index` first)")
    index = load_index(store.index_path)
    items = generate_checklist(reqs, impl_ids=index.impl_ids())
    checklist = Checklist(items, impl_ids=index.impl_ids())
    store.write_checklist_snapshot(checklist)
    store.append_event("checklist_generated",
                       {"items": [item.to_record() for item in items]})
    return {"items": len(items)}


def _load_shares(path: str | None, impl_ids: list[str]) -> dict[str, float]:
    if path is None:
        return uniform_shares(impl_ids)
    return json.loads(Path(path).read_text("utf-8"))


def run_audit(
    store: RunStore,
    backend: str = "deterministic",
    threat_model_path: str | None = None,
    shares_path: str | None = None,
    pattern_db_path: str | None = None,
    map_threshold: float = 0.5,
    week: int = 1,
) -> dict:
    reqs = store.load_requirements()
    audit_map = store.load_audit_map()
    checklist = store.load_checklist()
    index = load_index(store.index_path)

    if threat_model_path:
        model = ThreatModel.from_record(
            json.loads(Path(threat_model_path).read_text("utf-8")))
        store.save_threat_model(model)
    model = store.load_threat_model()
    warnings = validate_model(model)

    pattern_db = (PatternDatabase.load(pattern_db_path) if pattern_db_path
                  else PatternDatabase.seed())
    analyzer = make_analyzer(store, backend, map_threshold)
    config = AuditConfig(client_shares=_load_shares(shares_path, index.impl_ids()),
                         discovered_week=week)

    # Fresh audit: reset findings state, then regenerate deterministically.
    store.append_event("audit_reset", {})
    # Checklist statuses restart from PENDING alongside.
    checklist = store.load_checklist()
    for item in checklist.items():
        for impl in checklist.impl_ids:
            item.status[impl] = "PENDING"

    allocator = FindingIdAllocator(store.run_id)
    result = run_static_audit(checklist, audit_map, analyzer, model, index,
                              pattern_db, reqs, allocator, config)
    for finding in result.findings:
        store.append_event("finding_created", finding.to_record())
    for item in checklist.items():
        for impl, status in sorted(item.status.items()):
            if status != "PENDING":
                store.append_event("checklist_status", {
                    "item_id": item.item_id, "impl_id": impl, "status": status})
    if result.degraded:
        store.append_event("degraded", {"count": result.degraded})

    # Strategy C plans: one per requirement with extractable numeric bounds,
    # anchored at its best-mapped location.
    plans = []
    entries = {(e.req_id, e.impl_id): e for e in audit_map}
    items_by_req = {}
    for item in checklist.items():
        if item.kind == "correctness":
            items_by_req[item.req_id] = item
    for req in sorted(reqs, key=lambda r: r.id):
        best = None
        for impl in sorted(index.impl_ids()):
            entry = entries.get((req.id, impl))
            if entry and entry.locations:
                loc, conf = entry.locations[0]
                if best is None or conf > best[1]:
                    best = (loc, conf)
        if best is None or req.id not in items_by_req:
            continue
        try:
            plans.append(generate_boundary_tests(items_by_req[req.id], req, best[0]))
        except NoBoundaries:
            continue
    write_jsonl((p.to_record() for p in plans), store.path("boundary_tests.jsonl"))

    pattern_db.save(store.path("patterns.jsonl"))
    store.write_findings_snapshot()
    store.write_checklist_snapshot(checklist)

    summary = {
        "findings": len(result.findings),
        "survivors": sum(1 for f in result.findings
                         if f.status == "NEEDS_HUMAN_VERIFICATION"),
        "filtered": sum(1 for f in result.findings if f.status == "FILTERED"),
        "degraded": result.degraded,
        "boundary_plans": len(plans),
        "model_warnings": warnings,
    }
    (store.path("run_summary.json")).write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", "utf-8")
    return summary


def run_propagate(store: RunStore, finding_id: str,
                  backend: str = "deterministic", per_impl_k: int = 5,
                  pattern_db_path: str | None = None) -> list[Finding]:
    finding = store.state.findings.get(finding_id)
    if finding is None:
        raise NotFound(f"finding {finding_id} not found in run {store.run_id}")
    reqs = {r.id: r for r in store.load_requirements()}
    requirement = reqs.get(finding.req_id)
    if requirement is None:
        raise NotFound(f"requirement {finding.req_id} missing from run artifacts")
    index = load_index(store.index_path)
    db_path = store.path("patterns.jsonl")
    pattern_db = (PatternDatabase.load(pattern_db_path or db_path)
                  if (pattern_db_path or db_path.exists()) else PatternDatabase.seed())
    analyzer = make_analyzer(store, backend)
    checklist = store.load_checklist()
    model = store.load_threat_model()
    allocator = FindingIdAllocator(store.run_id, start=len(store.state.findings) + 1)

    new_findings = propagate_cross_impl(
        finding, requirement, index, pattern_db, analyzer, model, allocator,
        per_impl_k=per_impl_k, checklist=checklist,
        config=AuditConfig(client_shares=uniform_shares(index.impl_ids())))
    for f in new_findings:
        store.append_event("finding_created", f.to_record())
    store.append_event("propagation", {
        "source_finding_id": finding_id,
        "created": [f.finding_id for f in new_findings]})
    pattern_db.save(db_path)
    store.write_findings_snapshot()
    store.write_checklist_snapshot(checklist)
    return new_findings


def run_triage(store: RunStore, finding_id: str, verdict: str,
               fp_category: str | None = None, poc_attached: bool = False,
               actor: str = "auditor", idempotency_key: str | None = None) -> Finding:
    if idempotency_key and idempotency_key in store.state.idempotency:
        return store.state.findings[store.state.idempotency[idempotency_key]]
    finding = store.state.findings.get(finding_id)
    if finding is None:
        raise NotFound(f"finding {finding_id} not found in run {store.run_id}")
    # Validation errors must not dirty the log: dry-run the transition first.
    from .audit_engine import triage_finding
    triage_finding(finding, verdict, fp_category, poc_attached, actor)
    payload = {"finding_id": finding_id, "verdict": verdict,
               "fp_category": fp_category, "poc_attached": poc_attached,
               "actor": actor}
    if idempotency_key:
        payload["idempotency_key"] = idempotency_key
    store.append_event("triage", payload)
    store.write_findings_snapshot()
    return store.state.findings[finding_id]


def seed_run_from_findings(store: RunStore, findings: list[Finding],
                           pretriage: bool = False) -> int:
    """Materialize a run directory from an existing finding set.

    Finding ids are re-keyed onto the target run (the F-{run}-{NNNN}
    contract routes service calls by id), keeping their ordinal suffixes
    and remapping cross-references. With ``pretriage`` every finding is
    reset to NEEDS_HUMAN_VERIFICATION, the state the triage queue starts
    from.
    """
    from .audit_engine import validate_finding

    for finding in findings:
        validate_finding(finding)
    store.create()
    store.append_event("audit_reset", {})
    id_map = {}
    for finding in findings:
        suffix = finding.finding_id.rsplit("-", 1)[-1]
        id_map[finding.finding_id] = f"F-{store.run_id}-{suffix}"
    for finding in findings:
        finding = replace(
            finding,
            finding_id=id_map[finding.finding_id],
            source_finding_id=id_map.get(finding.source_finding_id,
                                         finding.source_finding_id),
            location=finding.location)
        if pretriage and finding.status in ("VALID", "INVALID"):
            finding = replace(finding, status="NEEDS_HUMAN_VERIFICATION",
                              fp_category=None, triaged_at=None, triaged_by=None,
                              poc_attached=False)
        store.append_event("finding_created", finding.to_record())
    store.write_findings_snapshot()
    return len(findings)


def demo_run_ids() -> dict[str, str]:
    return {"pipeline": "demo", "v1": "v1", "v1_queue": "v1-queue"}


def build_demo_runs(runs_root: str | Path, backend: str = "deterministic") -> dict:
    """End-to-end pipeline on the bundled fixture corpus plus seeded
    contest-fixture runs; returns the stage summaries."""
    ids = demo_run_ids()
    pipeline_store = RunStore(runs_root, ids["pipeline"])
    pipeline_store.create()
    out: dict = {}
    out["extract"] = run_extract(pipeline_store, bundled.minispec_path(), "EIP7594")
    corpus = bundled.corpus_root()
    impls = [(p.name, str(p), "CL") for p in sorted(corpus.iterdir()) if p.is_dir()]
    out["index"] = run_index(pipeline_store, impls)
    out["map"] = run_map(pipeline_store, backend)
    out["checklist"] = run_checklist(pipeline_store)

    model_path = bundled.fixtures_root() / "trustmodel_fusaka.json"
    out["audit"] = run_audit(pipeline_store, backend,
                             threat_model_path=str(model_path))

    v1_store = RunStore(runs_root, ids["v1"])
    seed_run_from_findings(v1_store, bundled.load_v1_findings(), pretriage=False)
    v1_store.save_threat_model(bundled.load_trust_model())

    queue_store = RunStore(runs_root, ids["v1_queue"])
    seed_run_from_findings(queue_store, bundled.load_v1_findings(), pretriage=True)
    queue_store.save_threat_model(bundled.load_trust_model())
    return out
