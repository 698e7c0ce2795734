"""Accessors for the bundled fixture data (demo corpus and contest tables)."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .audit_engine import Finding
from .evaluation import GroundTruthIssue
from .records import read_jsonl
from .threat_model import ThreatModel


def fixtures_root() -> Path:
    return Path(str(resources.files("speca").joinpath("fixtures")))


def minispec_path() -> Path:
    return fixtures_root() / "minispec.md"


def corpus_root() -> Path:
    return fixtures_root() / "corpus"


def load_v1_findings() -> list[Finding]:
    return [Finding.from_record(r) for r in read_jsonl(fixtures_root() / "v1_findings.jsonl")]


def load_v2_findings() -> list[Finding]:
    return [Finding.from_record(r) for r in read_jsonl(fixtures_root() / "v2_findings.jsonl")]


def load_ground_truth() -> list[GroundTruthIssue]:
    return [GroundTruthIssue.from_record(r)
            for r in read_jsonl(fixtures_root() / "ground_truth_cl.jsonl")]


def load_missed_v1_issues() -> list[GroundTruthIssue]:
    return [GroundTruthIssue.from_record(r)
            for r in read_jsonl(fixtures_root() / "v1_missed_issues.jsonl")]


def load_trust_model() -> ThreatModel:
    raw = json.loads((fixtures_root() / "trustmodel_fusaka.json").read_text("utf-8"))
    return ThreatModel.from_record(raw)


def load_contest_stats() -> dict:
    return json.loads((fixtures_root() / "contest_stats.json").read_text("utf-8"))


def load_clients() -> list[dict]:
    return json.loads((fixtures_root() / "clients.json").read_text("utf-8"))["clients"]
