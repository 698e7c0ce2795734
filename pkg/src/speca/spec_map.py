"""Requirement-to-code mapping: keyword pruning, then semantic refinement.

Phase 1 prunes the search space with the corpus keyword index (top 20
candidate lines per implementation); phase 2 asks the analyzer which
candidates genuinely address the requirement. Analyzer trouble degrades to
the raw keyword scores; it never aborts the pipeline.
"""
from __future__ import annotations

from dataclasses import dataclass

from .analyzer import AnalyzerHandle
from .code_index import CodeLocation, CorpusIndex, excerpt, search
from .errors import BackendUnavailable
from .spec_extract import Requirement

UNMAPPED_NO_HITS = "no keyword hits"
KEYWORD_TOP_K = 20


@dataclass
class AuditMapEntry:
    req_id: str
    impl_id: str
    locations: list[tuple[CodeLocation, float]]  # sorted by confidence desc
    method: str  # keyword | semantic
    unmapped_reason: str | None = None

    @property
    def mapped(self) -> bool:
        return bool(self.locations)

    def to_record(self) -> dict:
        return {
            "req_id": self.req_id,
            "impl_id": self.impl_id,
            "locations": [
                {"location": loc.to_record(), "confidence": conf}
                for loc, conf in self.locations
            ],
            "method": self.method,
            "unmapped_reason": self.unmapped_reason,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "AuditMapEntry":
        return cls(
            req_id=rec["req_id"],
            impl_id=rec["impl_id"],
            locations=[
                (CodeLocation.from_record(item["location"]), item["confidence"])
                for item in rec.get("locations", [])
            ],
            method=rec.get("method", "keyword"),
            unmapped_reason=rec.get("unmapped_reason"),
        )


def map_requirement(
    req: Requirement,
    impl_id: str,
    index: CorpusIndex,
    analyzer: AnalyzerHandle,
    top_k: int = KEYWORD_TOP_K,
) -> AuditMapEntry:
    """Bind one requirement to candidate locations in one implementation."""
    hits = search(index, req.keywords, impl_filter=impl_id, top_k=top_k)
    if not hits:
        return AuditMapEntry(req_id=req.id, impl_id=impl_id, locations=[],
                             method="keyword", unmapped_reason=UNMAPPED_NO_HITS)
    # The analyzer accepts at most 20 refinement candidates.
    candidates = [(loc, excerpt(index, loc)) for loc, _score in hits[:20]]
    try:
        refined = analyzer.refine_mapping(req, candidates)
    except BackendUnavailable:
        refined = []
    if refined:
        return AuditMapEntry(req_id=req.id, impl_id=impl_id,
                             locations=refined, method="semantic")
    # Degradation contract: keep the raw keyword scores rather than losing
    # the binding entirely.
    return AuditMapEntry(req_id=req.id, impl_id=impl_id,
                         locations=list(hits), method="keyword")


def build_audit_map(
    reqs: list[Requirement],
    index: CorpusIndex,
    analyzer: AnalyzerHandle,
    top_k: int = KEYWORD_TOP_K,
) -> list[AuditMapEntry]:
    """One entry per (requirement, implementation) pair, sorted for determinism."""
    entries = []
    for req in sorted(reqs, key=lambda r: r.id):
        for impl_id in sorted(index.impl_ids()):
            entries.append(map_requirement(req, impl_id, index, analyzer, top_k))
    return entries


def coverage_report(audit_map: list[AuditMapEntry]) -> dict:
    """Per-implementation mapped/unmapped counts plus mean top confidence."""
    per_impl: dict[str, dict] = {}
    confidences = []
    for entry in audit_map:
        stats = per_impl.setdefault(entry.impl_id, {"mapped": 0, "unmapped": 0})
        if entry.mapped:
            stats["mapped"] += 1
            confidences.append(entry.locations[0][1])
        else:
            stats["unmapped"] += 1
    mean_conf = (sum(confidences) / len(confidences)) if confidences else None
    return {
        "per_impl": dict(sorted(per_impl.items())),
        "mapped": sum(s["mapped"] for s in per_impl.values()),
        "unmapped": sum(s["unmapped"] for s in per_impl.values()),
        "mean_top_confidence": mean_conf,
    }
