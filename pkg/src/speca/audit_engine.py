"""Audit strategies, finding lifecycle, severity and contest scoring.

Three complementary strategies produce findings:

  A_static      evaluate every checklist item against its mapped location
  B_cross_impl  abstract a validated finding into a pattern and sweep the
                analogous locations of every other implementation
  C_dynamic     emit boundary-condition test plans (never executes target
                code in-process; outcomes are recorded externally)

Every machine-produced candidate passes through the threat-model filter
and, if kept, waits in NEEDS_HUMAN_VERIFICATION: machine output is never
auto-valid.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .checklist import Checklist, ChecklistItem
from .code_index import CodeLocation, CorpusIndex, analogous_locations, excerpt
from .errors import (
    IllegalTransition,
    InvalidCategory,
    InvalidImpact,
    NoBoundaries,
    NotValidated,
    PoCRequired,
    UnknownShare,
)
from .pattern_db import PatternDatabase, abstract_pattern_from_finding
from .spec_extract import MUST_FAMILY, Requirement, stopwords
from .threat_model import CapabilityDemand, ThreatModel, filter_finding

SEVERITIES = ("Informational", "Low", "Medium", "High", "Critical")
_SEVERITY_RANK = {name: i for i, name in enumerate(SEVERITIES)}

STRATEGIES = ("A_static", "B_cross_impl", "C_dynamic")

FP_CATEGORIES = (
    "threat_model_misalignment",
    "already_known_duplicate",
    "incorrect_analysis",
    "out_of_scope",
)

DEFAULT_BASE_POINTS = {
    "Critical": 1000, "High": 500, "Medium": 100, "Low": 10, "Informational": 1,
}

_WEEK_MULTIPLIERS = {1: 2.0, 2: 1.5}


def severity_rank(severity: str) -> int:
    return _SEVERITY_RANK[severity]


def classify_severity(impact_fraction: float) -> str:
    """Map a network-impact fraction onto a severity label.

    Thresholds are strict inequalities: >0.50 Critical, >0.33 High,
    >0.05 Medium, >0.0001 Low, otherwise Informational.
    """
    if not 0.0 <= impact_fraction <= 1.0:
        raise InvalidImpact(f"impact fraction {impact_fraction} outside [0,1]")
    if impact_fraction > 0.50:
        return "Critical"
    if impact_fraction > 0.33:
        return "High"
    if impact_fraction > 0.05:
        return "Medium"
    if impact_fraction > 0.0001:
        return "Low"
    return "Informational"


@dataclass(frozen=True)
class Finding:
    finding_id: str
    req_id: str
    item_id: str
    impl_id: str
    location: CodeLocation
    violation: str
    strategy: str
    capability: CapabilityDemand
    severity: str
    impact_fraction: float
    status: str = "CANDIDATE"
    fp_category: str | None = None      # set when status INVALID
    filter_reason: str | None = None    # set when status FILTERED
    poc_attached: bool = False
    discovered_week: int = 1
    source_finding_id: str | None = None  # set for strategy B
    bug_class: str | None = None
    root_cause: str | None = None
    confidence_penalty: bool = False
    triaged_at: str | None = None
    triaged_by: str | None = None

    def to_record(self) -> dict:
        return {
            "finding_id": self.finding_id,
            "req_id": self.req_id,
            "item_id": self.item_id,
            "impl_id": self.impl_id,
            "location": self.location.to_record(),
            "violation": self.violation,
            "strategy": self.strategy,
            "capability": self.capability.to_record(),
            "severity": self.severity,
            "impact_fraction": self.impact_fraction,
            "status": self.status,
            "fp_category": self.fp_category,
            "filter_reason": self.filter_reason,
            "poc_attached": self.poc_attached,
            "discovered_week": self.discovered_week,
            "source_finding_id": self.source_finding_id,
            "bug_class": self.bug_class,
            "root_cause": self.root_cause,
            "confidence_penalty": self.confidence_penalty,
            "triaged_at": self.triaged_at,
            "triaged_by": self.triaged_by,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Finding":
        return cls(
            finding_id=rec["finding_id"],
            req_id=rec["req_id"],
            item_id=rec["item_id"],
            impl_id=rec["impl_id"],
            location=CodeLocation.from_record(rec["location"]),
            violation=rec["violation"],
            strategy=rec["strategy"],
            capability=CapabilityDemand.from_record(rec["capability"]),
            severity=rec["severity"],
            impact_fraction=rec["impact_fraction"],
            status=rec.get("status", "CANDIDATE"),
            fp_category=rec.get("fp_category"),
            filter_reason=rec.get("filter_reason"),
            poc_attached=rec.get("poc_attached", False),
            discovered_week=rec.get("discovered_week", 1),
            source_finding_id=rec.get("source_finding_id"),
            bug_class=rec.get("bug_class"),
            root_cause=rec.get("root_cause"),
            confidence_penalty=rec.get("confidence_penalty", False),
            triaged_at=rec.get("triaged_at"),
            triaged_by=rec.get("triaged_by"),
        )


@dataclass
class BoundaryTestPlan:
    plan_id: str
    item_id: str
    impl_id: str
    boundary_values: list[tuple[str, float, str]]  # (parameter, value, rationale)
    skeleton_text: str
    executed: bool = False
    observed: str | None = None

    def to_record(self) -> dict:
        return {
            "plan_id": self.plan_id,
            "item_id": self.item_id,
            "impl_id": self.impl_id,
            "boundary_values": [
                {"parameter": p, "value": v, "rationale": r}
                for p, v, r in self.boundary_values
            ],
            "skeleton_text": self.skeleton_text,
            "executed": self.executed,
            "observed": self.observed,
        }


@dataclass
class AuditConfig:
    """Knobs for one audit run; everything has a documented default."""

    default_actor: str = "external_peer"
    default_required_trust: str = "UNTRUSTED"
    actor_overrides: dict[str, str] = field(default_factory=dict)  # section_slug -> actor
    client_shares: dict[str, float] | None = None  # None -> uniform 1/N
    discovered_week: int = 1
    per_impl_k: int = 5
    relevant_pattern_limit: int = 5
    # Sections whose requirements only bind one client layer: items for
    # implementations on other layers are SKIPPED instead of evaluated.
    section_layers: dict[str, str] = field(default_factory=dict)


def capability_for(req: Requirement, config: AuditConfig) -> CapabilityDemand:
    """Derive the attacker capability a finding on this requirement implies."""
    section = req.source.section_slug
    actor = config.actor_overrides.get(section, config.default_actor)
    return CapabilityDemand(
        acting_actor=actor,
        required_trust=config.default_required_trust,
        scope_tag=section.lower(),
    )


def impact_of(
    finding: Finding,
    client_shares: dict[str, float],
    affected: list[str] | None = None,
) -> float:
    """Network-impact fraction: the affected implementations' share sum.

    Single-implementation findings use their own client's share; a
    multi-implementation finding sums the affected shares, capped at 1.0.
    """
    if sum(client_shares.values()) > 1.0 + 1e-9:
        raise UnknownShare("client shares sum above 1.0")
    targets = affected if affected else [finding.impl_id]
    total = 0.0
    for impl in targets:
        if impl not in client_shares:
            raise UnknownShare(f"no share recorded for implementation {impl!r}")
        total += client_shares[impl]
    return min(total, 1.0)


def uniform_shares(impl_ids: list[str]) -> dict[str, float]:
    n = len(impl_ids)
    return {impl: 1.0 / n for impl in impl_ids}


def score_finding(finding: Finding, base_points: dict[str, int] | None = None) -> float:
    """Contest points: base points for the severity times the week multiplier."""
    if finding.discovered_week < 1:
        raise ValueError("discovered_week must be >= 1")
    points = (base_points or DEFAULT_BASE_POINTS)[finding.severity]
    return points * _WEEK_MULTIPLIERS.get(finding.discovered_week, 1.0)


def triage_finding(
    finding: Finding,
    verdict: str,
    fp_category: str | None = None,
    poc_attached: bool = False,
    actor: str = "auditor",
    timestamp: str | None = None,
) -> Finding:
    """Apply a human triage verdict to a finding awaiting verification.

    VALID verdicts on non-informational findings require an executable PoC;
    INVALID verdicts require a false-positive category from the closed set.
    """
    if finding.status != "NEEDS_HUMAN_VERIFICATION":
        raise IllegalTransition(
            f"finding {finding.finding_id} has status {finding.status}; "
            "only NEEDS_HUMAN_VERIFICATION findings can be triaged")
    if verdict == "VALID":
        if severity_rank(finding.severity) >= severity_rank("Low") and not poc_attached:
            raise PoCRequired(
                f"{finding.finding_id}: severity {finding.severity} requires an executable PoC")
        return replace(finding, status="VALID", poc_attached=poc_attached,
                       triaged_at=timestamp, triaged_by=actor)
    if verdict == "INVALID":
        if fp_category not in FP_CATEGORIES:
            raise InvalidCategory(f"fp_category {fp_category!r} not in {FP_CATEGORIES}")
        return replace(finding, status="INVALID", fp_category=fp_category,
                       poc_attached=poc_attached, triaged_at=timestamp, triaged_by=actor)
    raise InvalidCategory(f"verdict must be VALID or INVALID, got {verdict!r}")


def validate_finding(finding: Finding, resolver: dict[str, Finding] | None = None) -> None:
    """Check the finding-type invariants; raises on violation.

    With a ``resolver`` (finding_id -> Finding) the strategy-B source
    reference is also resolved and checked against its implementation.
    """
    if finding.status not in ("CANDIDATE", "NEEDS_HUMAN_VERIFICATION", "VALID",
                              "INVALID", "FILTERED"):
        raise InvalidCategory(f"{finding.finding_id}: unknown status {finding.status}")
    if finding.strategy not in STRATEGIES:
        raise InvalidCategory(f"{finding.finding_id}: unknown strategy {finding.strategy}")
    if classify_severity(finding.impact_fraction) != finding.severity:
        raise InvalidImpact(
            f"{finding.finding_id}: severity {finding.severity} inconsistent with "
            f"impact {finding.impact_fraction}")
    if (finding.status == "VALID"
            and severity_rank(finding.severity) >= severity_rank("Low")
            and not finding.poc_attached):
        raise PoCRequired(f"{finding.finding_id}: VALID at {finding.severity} without PoC")
    if finding.status == "INVALID" and finding.fp_category not in FP_CATEGORIES:
        raise InvalidCategory(f"{finding.finding_id}: INVALID without a category")
    if finding.strategy == "B_cross_impl":
        if not finding.source_finding_id:
            raise InvalidCategory(
                f"{finding.finding_id}: strategy B requires source_finding_id")
        if resolver is not None:
            source = resolver.get(finding.source_finding_id)
            if source is None:
                raise InvalidCategory(
                    f"{finding.finding_id}: source {finding.source_finding_id} unresolved")
            if source.impl_id == finding.impl_id:
                raise InvalidCategory(
                    f"{finding.finding_id}: source lives in the same implementation")


class FindingIdAllocator:
    """Sequential F-{run}-{NNNN} ids, serialized through the run log."""

    def __init__(self, run_id: str, start: int = 1):
        self.run_id = run_id
        self._next = start

    def next_id(self) -> str:
        fid = f"F-{self.run_id}-{self._next:04d}"
        self._next += 1
        return fid


def _apply_threat_filter(finding: Finding, model: ThreatModel) -> Finding:
    verdict = filter_finding(model, finding.capability)
    if verdict.keep:
        return replace(finding, status="NEEDS_HUMAN_VERIFICATION",
                       confidence_penalty=verdict.confidence_penalty)
    return replace(finding, status="FILTERED", filter_reason=verdict.reason)


@dataclass
class StaticAuditResult:
    findings: list[Finding]
    skipped_items: list[tuple[str, str]]          # (item_id, impl_id) left PENDING
    degraded: int = 0                             # analyzer failures


def run_static_audit(
    checklist: Checklist,
    audit_map: list,
    analyzer,
    model: ThreatModel,
    index: CorpusIndex,
    pattern_db: PatternDatabase,
    requirements: list[Requirement],
    allocator: FindingIdAllocator,
    config: AuditConfig | None = None,
) -> StaticAuditResult:
    """Strategy A: check every (item, implementation) pair.

    Unmapped MUST-family presence items become candidate presence
    violations; mapped items go through the analyzer. Candidates pass the
    threat-model filter; survivors wait for human verification. Analyzer
    failure leaves the item PENDING and counts as a degradation, so the
    audit is resumable.
    """
    config = config or AuditConfig()
    reqs = {r.id: r for r in requirements}
    entries = {(e.req_id, e.impl_id): e for e in audit_map}
    impl_ids = index.impl_ids()
    layers = {ref.impl_id: ref.layer for ref in index.implementations}
    shares = config.client_shares or uniform_shares(impl_ids)

    findings: list[Finding] = []
    skipped: list[tuple[str, str]] = []
    degraded = 0

    for item in checklist.items():
        req = reqs.get(item.req_id)
        if req is None:
            continue
        required_layer = config.section_layers.get(req.source.section_slug)
        for impl_id in impl_ids:
            if required_layer and layers.get(impl_id, "other") != required_layer:
                checklist.set_status(item.item_id, impl_id, "SKIPPED")
                continue
            entry = entries.get((item.req_id, impl_id))
            if entry is None or not entry.locations:
                if item.kind == "presence" and req.modality in MUST_FAMILY:
                    checklist.set_status(item.item_id, impl_id, "FLAG")
                    location = CodeLocation(impl_id=impl_id, path="", line_start=1,
                                            line_end=1, symbol="")
                    finding = Finding(
                        finding_id=allocator.next_id(),
                        req_id=req.id,
                        item_id=item.item_id,
                        impl_id=impl_id,
                        location=location,
                        violation=("presence violation: no code location maps to this "
                                   "requirement (no keyword hits)"),
                        strategy="A_static",
                        capability=capability_for(req, config),
                        severity=classify_severity(shares[impl_id]),
                        impact_fraction=shares[impl_id],
                        discovered_week=config.discovered_week,
                    )
                    findings.append(_apply_threat_filter(finding, model))
                else:
                    checklist.set_status(item.item_id, impl_id, "SKIPPED")
                continue

            top_location = entry.locations[0][0]
            text = excerpt(index, top_location)
            relevant = [p for p, _ in pattern_db.query_patterns(req.keywords)]
            relevant = relevant[:config.relevant_pattern_limit]
            try:
                verdict = analyzer.evaluate_check(item, req, text, relevant)
            except Exception:
                skipped.append((item.item_id, impl_id))
                degraded += 1
                continue
            if verdict.verdict == "PASS":
                checklist.set_status(item.item_id, impl_id, "PASS")
                continue
            checklist.set_status(item.item_id, impl_id, "FLAG")
            impact = shares[impl_id]
            finding = Finding(
                finding_id=allocator.next_id(),
                req_id=req.id,
                item_id=item.item_id,
                impl_id=impl_id,
                location=top_location,
                violation=f"{item.kind} violation: {verdict.rationale}",
                strategy="A_static",
                capability=capability_for(req, config),
                severity=classify_severity(impact),
                impact_fraction=impact,
                discovered_week=config.discovered_week,
            )
            findings.append(_apply_threat_filter(finding, model))

    return StaticAuditResult(findings=findings, skipped_items=skipped, degraded=degraded)


def propagate_cross_impl(
    valid_finding: Finding,
    requirement: Requirement,
    index: CorpusIndex,
    pattern_db: PatternDatabase,
    analyzer,
    model: ThreatModel,
    allocator: FindingIdAllocator,
    per_impl_k: int = 5,
    checklist: Checklist | None = None,
    config: AuditConfig | None = None,
) -> list[Finding]:
    """Strategy B: the 1->N sweep from one validated finding.

    (1) abstract a generalizable pattern, (2) find analogous locations in
    every other implementation, (3) check each location, (4) emit flagged
    locations as candidates for human verification, threat-filtered like
    strategy A. The source implementation is never swept.
    """
    if valid_finding.status != "VALID":
        raise NotValidated(f"finding {valid_finding.finding_id} is not VALID")
    config = config or AuditConfig()
    pattern = abstract_pattern_from_finding(valid_finding, requirement)
    try:
        pattern_db.add_pattern(pattern)
    except Exception:
        # Same (category, keywords) already recorded: reuse, do not fail.
        pass

    sweep = analogous_locations(index, pattern, exclude_impl=valid_finding.impl_id,
                                per_impl_k=per_impl_k)
    shares = config.client_shares or uniform_shares(index.impl_ids())
    item = checklist.get(valid_finding.item_id) if checklist else ChecklistItem(
        item_id=valid_finding.item_id,
        req_id=requirement.id,
        kind=valid_finding.item_id.rsplit("/", 1)[-1].lower(),
        predicate_text=requirement.text,
    )

    findings: list[Finding] = []
    for impl_id in sorted(sweep):
        for location in sweep[impl_id]:
            text = excerpt(index, location)
            if not text:
                continue
            verdict = analyzer.evaluate_check(item, requirement, text, [pattern])
            if verdict.verdict != "FLAG":
                continue
            if checklist is not None:
                try:
                    checklist.set_status(item.item_id, impl_id, "FLAG")
                except IllegalTransition:
                    pass  # already flagged or resolved for this implementation
            impact = shares.get(impl_id, 0.0)
            finding = Finding(
                finding_id=allocator.next_id(),
                req_id=requirement.id,
                item_id=valid_finding.item_id,
                impl_id=impl_id,
                location=location,
                violation=(f"cross-implementation candidate from "
                           f"{valid_finding.finding_id}: {verdict.rationale}"),
                strategy="B_cross_impl",
                capability=capability_for(requirement, config),
                severity=classify_severity(impact),
                impact_fraction=impact,
                discovered_week=config.discovered_week,
                source_finding_id=valid_finding.finding_id,
            )
            findings.append(_apply_threat_filter(finding, model))
    return findings


_NUMBER_RE = re.compile(r"\b\d+(?:\.\d+)?\b")
_WORD_RE = re.compile(r"[A-Za-z]+")


def generate_boundary_tests(
    item: ChecklistItem,
    requirement: Requirement,
    location: CodeLocation,
) -> BoundaryTestPlan:
    """Strategy C: derive boundary values from the requirement's numeric bounds.

    Every numeric literal yields value-1, value, value+1. The plan is a
    scaffold: it embeds the location and predicate but is never executed
    in-process.
    """
    numbers = _NUMBER_RE.findall(requirement.text)
    if not numbers:
        raise NoBoundaries(f"requirement {requirement.id} has no numeric bounds")

    stop = stopwords()
    values: list[tuple[str, float, str]] = []
    for literal in numbers:
        value = float(literal) if "." in literal else int(literal)
        tail = requirement.text.split(literal, 1)[1]
        words = [w.lower() for w in _WORD_RE.findall(tail)]
        parameter = next((w for w in words if len(w) >= 3 and w not in stop), "value")
        values.extend([
            (parameter, value - 1, f"just below the stated bound {literal}"),
            (parameter, value, f"exactly the stated bound {literal}"),
            (parameter, value + 1, f"just above the stated bound {literal}"),
        ])

    anchor = f"{location.path}:{location.line_start}" if location.path else location.impl_id
    lines = [
        f"# boundary test plan for {item.item_id} on {location.impl_id}",
        f"# target: {anchor} ({location.symbol or 'unknown symbol'})",
        f"# predicate: {item.predicate_text}",
    ]
    for parameter, value, rationale in values:
        lines.append(f"run_case({parameter}={value})  # {rationale}")
    return BoundaryTestPlan(
        plan_id=f"BT-{item.item_id}@{location.impl_id}",
        item_id=item.item_id,
        impl_id=location.impl_id,
        boundary_values=values,
        skeleton_text="\n".join(lines),
    )


def record_boundary_outcome(plan: BoundaryTestPlan, observed: str) -> BoundaryTestPlan:
    """Attach an externally observed outcome to a boundary-test plan.

    Plans are never executed in-process; whoever ran the scaffold against a
    real target reports back here.
    """
    if plan.executed:
        raise IllegalTransition(f"plan {plan.plan_id} already has an outcome")
    if not observed:
        raise ValueError("observed outcome must be non-empty")
    plan.executed = True
    plan.observed = observed
    return plan


def findings_to_sarif(findings: list[Finding], tool_name: str = "speca") -> dict:
    """Render findings as a SARIF 2.1.0 report, one result per finding."""
    level_for = {
        "Critical": "error", "High": "error", "Medium": "warning",
        "Low": "warning", "Informational": "note",
    }
    results = []
    for f in sorted(findings, key=lambda f: f.finding_id):
        result = {
            "ruleId": f.item_id,
            "level": level_for[f.severity],
            "message": {"text": f"[{f.finding_id}] {f.violation}"},
            "properties": {
                "strategy": f.strategy,
                "status": f.status,
                "impl_id": f.impl_id,
                "severity": f.severity,
            },
        }
        if f.location.path:
            result["locations"] = [{
                "physicalLocation": {
                    "artifactLocation": {"uri": f.location.path},
                    "region": {"startLine": f.location.line_start,
                               "endLine": f.location.line_end},
                }
            }]
        results.append(result)
    return {
        "$schema": "https://json.schemastore.org/sarif-2.1.0.json",
        "version": "2.1.0",
        "runs": [{
            "tool": {"driver": {"name": tool_name, "informationUri": ""}},
            "results": results,
        }],
    }
