"""Run directories, the append-only event log, and materialized snapshots.

Layout per run (the CLI contract):

    runs/<id>/
      requirements.jsonl   audit_map.jsonl   checklist.jsonl
      findings.jsonl       trustmodel.json   program_graphs.jsonl
      boundary_tests.jsonl patterns.jsonl    run_summary.json
      index/index.json     analyzer_cache/   events.log

Findings and checklist statuses are event-sourced: every mutation appends
to events.log and the JSONL snapshots are rebuilt from the folded state,
so replaying the log reproduces the materialized state hash-identically.
"""
from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .audit_engine import Finding, triage_finding
from .checklist import Checklist, ChecklistItem
from .errors import NotFound
from .records import dump_record, read_jsonl, write_jsonl
from .spec_extract import Requirement, import_requirements
from .spec_map import AuditMapEntry
from .threat_model import ThreatModel

EVENT_LOG = "events.log"
FINDINGS_SNAPSHOT = "findings.jsonl"
CHECKLIST_SNAPSHOT = "checklist.jsonl"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunState:
    """Materialized view folded from the event log."""

    run_id: str
    findings: dict[str, Finding] = field(default_factory=dict)
    checklist_status: dict[str, dict[str, str]] = field(default_factory=dict)
    threat_model: dict | None = None
    idempotency: dict[str, str] = field(default_factory=dict)  # key -> finding_id
    degraded: int = 0

    def ordered_findings(self) -> list[Finding]:
        return [self.findings[k] for k in sorted(self.findings)]

    def state_hash(self) -> str:
        blob = "\n".join(dump_record(f.to_record()) for f in self.ordered_findings())
        blob += "\n" + json.dumps(self.checklist_status, sort_keys=True)
        blob += "\n" + json.dumps(self.threat_model, sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def apply_event(state: RunState, event: dict) -> None:
    kind = event["kind"]
    payload = event.get("payload", {})
    if kind == "audit_reset":
        state.findings.clear()
        for statuses in state.checklist_status.values():
            for impl in statuses:
                statuses[impl] = "PENDING"
    elif kind == "finding_created":
        finding = Finding.from_record(payload)
        state.findings[finding.finding_id] = finding
    elif kind == "checklist_status":
        state.checklist_status.setdefault(payload["item_id"], {})[
            payload["impl_id"]] = payload["status"]
    elif kind == "checklist_generated":
        state.checklist_status = {
            item["item_id"]: dict(item.get("status", {})) for item in payload["items"]}
    elif kind == "triage":
        finding = state.findings[payload["finding_id"]]
        state.findings[finding.finding_id] = triage_finding(
            finding,
            verdict=payload["verdict"],
            fp_category=payload.get("fp_category"),
            poc_attached=payload.get("poc_attached", False),
            actor=payload.get("actor", "auditor"),
            timestamp=event.get("ts"),
        )
        if payload.get("idempotency_key"):
            state.idempotency[payload["idempotency_key"]] = payload["finding_id"]
    elif kind == "threat_model_updated":
        state.threat_model = payload
    elif kind == "degraded":
        state.degraded += int(payload.get("count", 1))
    # Other kinds (run_created, map_built, ...) are informational markers.


class RunStore:
    """Single run directory with serialized mutations.

    Writes go through one lock (single-writer contract); reads are plain
    file/state reads and may happen concurrently.
    """

    def __init__(self, runs_root: str | Path, run_id: str):
        self.run_id = run_id
        self.root = Path(runs_root) / run_id
        self._lock = threading.Lock()
        self._seq = 0
        self.state = RunState(run_id=run_id)
        if self.events_path.exists():
            self.state = self.replay()
            self._seq = sum(1 for _ in read_jsonl(self.events_path))

    # --- paths ---

    @property
    def events_path(self) -> Path:
        return self.root / EVENT_LOG

    def path(self, name: str) -> Path:
        return self.root / name

    @property
    def index_path(self) -> Path:
        return self.root / "index" / "index.json"

    def exists(self) -> bool:
        return self.root.is_dir()

    def create(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "index").mkdir(exist_ok=True)
        (self.root / "analyzer_cache").mkdir(exist_ok=True)
        if not self.events_path.exists():
            self.append_event("run_created", {"run_id": self.run_id})

    # --- event log ---

    def append_event(self, kind: str, payload: dict) -> dict:
        with self._lock:
            self._seq += 1
            event = {"seq": self._seq, "ts": _now(), "kind": kind, "payload": payload}
            self.root.mkdir(parents=True, exist_ok=True)
            with self.events_path.open("a", encoding="utf-8") as fh:
                fh.write(dump_record(event) + "\n")
            apply_event(self.state, event)
            return event

    def replay(self) -> RunState:
        """Fold the event log from scratch into a fresh state."""
        state = RunState(run_id=self.run_id)
        if self.events_path.exists():
            for event in read_jsonl(self.events_path):
                apply_event(state, event)
        return state

    # --- snapshots ---

    def write_findings_snapshot(self) -> None:
        write_jsonl((f.to_record() for f in self.state.ordered_findings()),
                    self.path(FINDINGS_SNAPSHOT))

    def write_checklist_snapshot(self, checklist: Checklist) -> None:
        write_jsonl((item.to_record() for item in checklist.items()),
                    self.path(CHECKLIST_SNAPSHOT))

    # --- artifact accessors ---

    def load_requirements(self) -> list[Requirement]:
        path = self.path("requirements.jsonl")
        if not path.exists():
            raise NotFound(f"run {self.run_id}: requirements.jsonl missing "
                           "(run `speca extract` first)")
        return import_requirements(path)

    def load_audit_map(self) -> list[AuditMapEntry]:
        path = self.path("audit_map.jsonl")
        if not path.exists():
            raise NotFound(f"run {self.run_id}: audit_map.jsonl missing "
                           "(run `speca map` first)")
        return [AuditMapEntry.from_record(rec) for rec in read_jsonl(path)]

    def load_checklist(self) -> Checklist:
        path = self.path(CHECKLIST_SNAPSHOT)
        if not path.exists():
            raise NotFound(f"run {self.run_id}: checklist.jsonl missing "
                           "(run `speca checklist` first)")
        items = [ChecklistItem.from_record(rec) for rec in read_jsonl(path)]
        # Event-sourced statuses override the snapshot on replayed stores.
        for item in items:
            stored = self.state.checklist_status.get(item.item_id)
            if stored:
                item.status.update(stored)
        return Checklist(items)

    def load_threat_model(self) -> ThreatModel:
        path = self.path("trustmodel.json")
        if not path.exists():
            raise NotFound(f"run {self.run_id}: trustmodel.json missing "
                           "(provide one via `speca audit --threat-model` or the API)")
        return ThreatModel.from_record(json.loads(path.read_text("utf-8")))

    def save_threat_model(self, model: ThreatModel) -> None:
        self.path("trustmodel.json").write_text(
            json.dumps(model.to_record(), indent=2, sort_keys=True) + "\n", "utf-8")
        self.append_event("threat_model_updated", model.to_record())

    # --- state summary ---

    def stage(self) -> str:
        if self.path(FINDINGS_SNAPSHOT).exists() or self.state.findings:
            return "AUDITED"
        if self.path("audit_map.jsonl").exists():
            return "MAPPED"
        return "INDEXED"

    def run_record(self) -> dict:
        findings = self.state.ordered_findings()
        by_status: dict[str, int] = {}
        for f in findings:
            by_status[f.status] = by_status.get(f.status, 0) + 1
        requirements = 0
        if self.path("requirements.jsonl").exists():
            requirements = sum(1 for _ in read_jsonl(self.path("requirements.jsonl")))
        items = 0
        if self.path(CHECKLIST_SNAPSHOT).exists():
            items = sum(1 for _ in read_jsonl(self.path(CHECKLIST_SNAPSHOT)))
        created = None
        if self.events_path.exists():
            for event in read_jsonl(self.events_path):
                created = event["ts"]
                break
        return {
            "run_id": self.run_id,
            "created_at": created,
            "state": self.stage(),
            "counters": {
                "requirements": requirements,
                "checklist_items": items,
                "findings_total": len(findings),
                "findings_by_status": dict(sorted(by_status.items())),
            },
        }


def list_runs(runs_root: str | Path) -> list[str]:
    root = Path(runs_root)
    if not root.is_dir():
        return []
    return sorted(p.name for p in root.iterdir() if (p / EVENT_LOG).exists())
