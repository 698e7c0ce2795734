"""HTTP/JSON facade over runs, findings, triage, propagation and reports.

The contract the triage console and CI scripts consume. Mutations append
to the run event log; GETs are pure views. Errors use problem-details
style JSON bodies. Versioned under /v1.
"""
from __future__ import annotations

import threading
from pathlib import Path

from fastapi import Body, FastAPI, Header, Request
from fastapi.responses import JSONResponse

from . import bundled, pipeline
from .code_index import load_index, excerpt
from .errors import (
    DanglingEdge,
    DuplicateActor,
    IllegalTransition,
    InvalidCategory,
    NotFound,
    NotValidated,
    PoCRequired,
    SpecaError,
    UnknownActor,
)
from .evaluation import (
    attribution_table,
    contest_summary,
    fp_distribution,
    recall_by_severity,
)
from .runstore import RunStore, list_runs
from .threat_model import ThreatModel, validate_model

_STATUS_FOR = {
    NotFound: 404,
    IllegalTransition: 409,
    PoCRequired: 422,
    InvalidCategory: 422,
    NotValidated: 409,
    DanglingEdge: 422,
    DuplicateActor: 422,
    UnknownActor: 422,
}


def _problem(status: int, title: str, detail: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"type": "about:blank", "title": title,
                 "status": status, "detail": detail},
        media_type="application/problem+json",
    )


def _run_of_finding(finding_id: str) -> str:
    # F-{run}-{NNNN}: the run id may itself contain dashes.
    if not finding_id.startswith("F-") or finding_id.count("-") < 2:
        raise NotFound(f"malformed finding id {finding_id!r}")
    return finding_id[2:].rsplit("-", 1)[0]


class ServiceState:
    def __init__(self, runs_root: str | Path):
        self.runs_root = Path(runs_root)
        self._stores: dict[str, RunStore] = {}
        self._lock = threading.Lock()

    def store(self, run_id: str) -> RunStore:
        with self._lock:
            if run_id not in self._stores:
                store = RunStore(self.runs_root, run_id)
                if not store.exists():
                    raise NotFound(f"run {run_id!r} not found")
                self._stores[run_id] = store
            return self._stores[run_id]


def build_app(runs_root: str | Path) -> FastAPI:
    state = ServiceState(runs_root)
    app = FastAPI(title="speca service", version="1")

    @app.exception_handler(SpecaError)
    async def handle_speca_error(request: Request, exc: SpecaError):
        status = _STATUS_FOR.get(type(exc), 400)
        return _problem(status, type(exc).__name__, str(exc))

    @app.get("/v1/runs")
    def get_runs():
        return [state.store(rid).run_record() for rid in list_runs(state.runs_root)]

    @app.get("/v1/runs/{run_id}")
    def get_run(run_id: str):
        return state.store(run_id).run_record()

    @app.get("/v1/runs/{run_id}/findings")
    def get_findings(run_id: str, status: str | None = None):
        store = state.store(run_id)
        findings = store.state.ordered_findings()
        if status:
            findings = [f for f in findings if f.status == status]
        req_text: dict[str, str] = {}
        req_source: dict[str, dict] = {}
        try:
            for req in store.load_requirements():
                req_text[req.id] = req.text
                req_source[req.id] = req.source.to_record()
        except SpecaError:
            pass
        index = None
        if store.index_path.exists():
            index = load_index(store.index_path)
        out = []
        for f in findings:
            record = f.to_record()
            record["requirement_text"] = req_text.get(f.req_id)
            record["requirement_source"] = req_source.get(f.req_id)
            snippet = None
            if index is not None and f.location.path:
                try:
                    snippet = excerpt(index, f.location)
                except KeyError:
                    snippet = None
            record["excerpt"] = snippet
            out.append(record)
        return out

    @app.post("/v1/findings/{finding_id}/triage")
    def post_triage(finding_id: str,
                    body: dict = Body(...),
                    idempotency_key: str | None = Header(default=None)):
        store = state.store(_run_of_finding(finding_id))
        verdict = body.get("verdict", "")
        finding = pipeline.run_triage(
            store, finding_id, verdict,
            fp_category=body.get("fp_category"),
            poc_attached=bool(body.get("poc_attached", False)),
            actor=body.get("actor", "auditor"),
            idempotency_key=idempotency_key,
        )
        return finding.to_record()

    @app.post("/v1/findings/{finding_id}/propagate", status_code=202)
    def post_propagate(finding_id: str):
        store = state.store(_run_of_finding(finding_id))
        finding = store.state.findings.get(finding_id)
        if finding is None:
            raise NotFound(f"finding {finding_id} not found")
        if finding.status != "VALID":
            raise NotValidated(
                f"finding {finding_id} has status {finding.status}; only VALID "
                "findings propagate")
        created = pipeline.run_propagate(store, finding_id)
        return {"source_finding_id": finding_id,
                "created": [f.finding_id for f in created]}

    @app.get("/v1/runs/{run_id}/threat-model")
    def get_threat_model(run_id: str):
        return state.store(run_id).load_threat_model().to_record()

    @app.put("/v1/runs/{run_id}/threat-model")
    def put_threat_model(run_id: str, body: dict = Body(...)):
        store = state.store(run_id)
        model = ThreatModel.from_record(body)
        warnings = validate_model(model)
        store.save_threat_model(model)
        return {"model": model.to_record(), "warnings": warnings}

    @app.get("/v1/runs/{run_id}/reports/{kind}")
    def get_report(run_id: str, kind: str):
        store = state.store(run_id)
        findings = store.state.ordered_findings()
        if kind == "attribution":
            return attribution_table([f for f in findings if f.status == "VALID"])
        if kind == "fp":
            return fp_distribution([f for f in findings if f.status == "INVALID"])
        if kind == "recall":
            issues = bundled.load_ground_truth()
            return recall_by_severity(issues, findings).to_record()
        if kind == "summary":
            stats = bundled.load_contest_stats()
            clients = [c["impl_id"] for c in bundled.load_clients()]
            impl_ids = {f.impl_id for f in findings}
            all_clients = clients if impl_ids <= set(clients) else sorted(impl_ids)
            return contest_summary(findings, stats, all_clients)
        raise NotFound(f"unknown report kind {kind!r}")

    return app
