"""Strict-recall matching against ground truth and the headline audit tables.

A ground-truth issue is matched only when a finding agrees on all three of
bug class, code region and root cause; partial overlaps never count. The
deterministic comparator works on closed tag vocabularies; a semantic
comparator may substitute judgment per criterion, but the three-way trace
is always recorded.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .audit_engine import Finding, severity_rank
from .errors import InvalidInput
from .records import read_jsonl

STRATEGY_LABELS = {
    "B_cross_impl": "Cross-Implementation Checks",
    "A_static": "Specification-based static audit",
    "C_dynamic": "Dynamic test generation",
}

FP_LABELS = {
    "threat_model_misalignment": "Threat model misalignment",
    "already_known_duplicate": "Already known / duplicate",
    "incorrect_analysis": "Incorrect analysis",
    "out_of_scope": "Out of scope",
}

MISS_CATEGORIES = (
    "spec_details_implicit_assumptions",
    "timing_concurrency_issues",
    "external_library_dependencies",
)


def _pct(numerator: int, denominator: int) -> float:
    return round(100.0 * numerator / denominator, 1) if denominator else 0.0


@dataclass(frozen=True)
class GroundTruthIssue:
    issue_id: int
    severity: str
    title: str
    client: str
    bug_class: str
    code_region: tuple[str, str | None]  # (path prefix, optional symbol)
    root_cause: str
    layer: str = "CL"
    miss_category: str | None = None  # fixture-assigned, reported not inferred

    def to_record(self) -> dict:
        return {
            "issue_id": self.issue_id,
            "severity": self.severity,
            "title": self.title,
            "client": self.client,
            "bug_class": self.bug_class,
            "code_region": {"path_prefix": self.code_region[0],
                            "symbol": self.code_region[1]},
            "root_cause": self.root_cause,
            "layer": self.layer,
            "miss_category": self.miss_category,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "GroundTruthIssue":
        region = rec["code_region"]
        return cls(
            issue_id=rec["issue_id"],
            severity=rec["severity"],
            title=rec["title"],
            client=rec["client"],
            bug_class=rec["bug_class"],
            code_region=(region["path_prefix"], region.get("symbol")),
            root_cause=rec["root_cause"],
            layer=rec.get("layer", "CL"),
            miss_category=rec.get("miss_category"),
        )


@dataclass
class MatchResult:
    issue_id: int
    matched: bool
    matched_finding_id: str | None
    criterion_trace: dict[str, bool]  # bug_class / code_region / root_cause

    def to_record(self) -> dict:
        return {
            "issue_id": self.issue_id,
            "matched": self.matched,
            "matched_finding_id": self.matched_finding_id,
            "criterion_trace": self.criterion_trace,
        }


def load_ground_truth(source) -> list[GroundTruthIssue]:
    return [GroundTruthIssue.from_record(rec) for rec in read_jsonl(source)]


def _region_overlap(issue: GroundTruthIssue, finding: Finding) -> bool:
    prefix, symbol = issue.code_region
    if not finding.location.path:
        return False
    if symbol:
        return (finding.location.path.startswith(prefix)
                and finding.location.symbol == symbol)
    return finding.location.path.startswith(prefix)


def _eligible(findings: list[Finding]) -> list[Finding]:
    # Filtered and invalidated findings never count toward recall.
    return [f for f in findings if f.status not in ("FILTERED", "INVALID")]


def match_issue(
    issue: GroundTruthIssue,
    findings: list[Finding],
    comparator=None,
) -> MatchResult:
    """Strict three-criterion match; any failed criterion means no match.

    The first qualifying finding in finding_id order wins; later qualifying
    findings never inflate recall. ``comparator`` may be an AnalyzerHandle
    whose compare_semantic substitutes judgment per criterion.
    """
    candidates = sorted(
        (f for f in _eligible(findings) if f.impl_id == issue.client),
        key=lambda f: f.finding_id)
    best_trace = {"bug_class": False, "code_region": False, "root_cause": False}

    def agree(a: str | None, b: str, criterion: str) -> bool:
        if not a:
            return False
        if comparator is not None:
            same, _rationale = comparator.compare_semantic(a, b, criterion)
            return same
        return a == b

    for finding in candidates:
        trace = {
            "bug_class": agree(finding.bug_class, issue.bug_class, "bug_class"),
            "code_region": _region_overlap(issue, finding),
            "root_cause": agree(finding.root_cause, issue.root_cause, "root_cause"),
        }
        if sum(trace.values()) > sum(best_trace.values()):
            best_trace = trace
        if all(trace.values()):
            return MatchResult(issue.issue_id, True, finding.finding_id, trace)
    return MatchResult(issue.issue_id, False, None, best_trace)


@dataclass
class RecallReport:
    rows: list[dict]               # per-severity rows, severity descending
    total: dict
    matched_issue_ids: list[int]
    missed_issue_ids: list[int]
    miss_category_histogram: dict[str, int]
    match_results: list[MatchResult] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "rows": self.rows,
            "total": self.total,
            "matched_issue_ids": self.matched_issue_ids,
            "missed_issue_ids": self.missed_issue_ids,
            "miss_category_histogram": self.miss_category_histogram,
            "matches": [m.to_record() for m in self.match_results],
        }


def recall_by_severity(
    issues: list[GroundTruthIssue],
    findings: list[Finding],
    comparator=None,
) -> RecallReport:
    """Group issues by severity and apply the strict matcher to each."""
    results = [match_issue(issue, findings, comparator) for issue in issues]
    by_id = {r.issue_id: r for r in results}

    rows = []
    for severity in sorted({i.severity for i in issues},
                           key=severity_rank, reverse=True):
        group = [i for i in issues if i.severity == severity]
        matched = sum(1 for i in group if by_id[i.issue_id].matched)
        rows.append({
            "severity": severity,
            "ground_truth_count": len(group),
            "matched": matched,
            "missed": len(group) - matched,
            "recall_pct": _pct(matched, len(group)),
        })
    matched_ids = sorted(i.issue_id for i in issues if by_id[i.issue_id].matched)
    missed_ids = sorted(i.issue_id for i in issues if not by_id[i.issue_id].matched)
    histogram: dict[str, int] = {}
    for issue in issues:
        if not by_id[issue.issue_id].matched and issue.miss_category:
            histogram[issue.miss_category] = histogram.get(issue.miss_category, 0) + 1
    total_matched = len(matched_ids)
    return RecallReport(
        rows=rows,
        total={
            "ground_truth_count": len(issues),
            "matched": total_matched,
            "missed": len(issues) - total_matched,
            "recall_pct": _pct(total_matched, len(issues)),
        },
        matched_issue_ids=matched_ids,
        missed_issue_ids=missed_ids,
        miss_category_histogram=dict(sorted(histogram.items())),
        match_results=results,
    )


def attribution_table(valid_findings: list[Finding]) -> dict:
    """Per-strategy counts over valid findings, percentages to one decimal."""
    for finding in valid_findings:
        if finding.status != "VALID":
            raise InvalidInput(f"{finding.finding_id} has status {finding.status}, "
                               "attribution covers VALID findings only")
    total = len(valid_findings)
    rows = []
    for strategy in ("B_cross_impl", "A_static", "C_dynamic"):
        count = sum(1 for f in valid_findings if f.strategy == strategy)
        if total == 0 and count == 0:
            continue
        rows.append({
            "strategy": strategy,
            "label": STRATEGY_LABELS[strategy],
            "count": count,
            "pct": _pct(count, total),
        })
    return {"rows": rows, "total": total}


def fp_distribution(invalid_findings: list[Finding]) -> dict:
    """Histogram of false-positive root causes over invalid findings."""
    for finding in invalid_findings:
        if finding.status != "INVALID" or not finding.fp_category:
            raise InvalidInput(f"{finding.finding_id} is not an INVALID finding "
                               "with a category")
    total = len(invalid_findings)
    rows = []
    for category in FP_LABELS:
        count = sum(1 for f in invalid_findings if f.fp_category == category)
        rows.append({
            "category": category,
            "label": FP_LABELS[category],
            "count": count,
            "pct": _pct(count, total),
        })
    return {"rows": rows, "total": total}


def contest_summary(
    findings: list[Finding],
    contest_stats: dict | None = None,
    all_clients: list[str] | None = None,
) -> dict:
    """Valid rate, per-client table and the miss table.

    ``contest_stats`` supplies the contest-wide baseline (total submissions
    and valid issues across all participants) plus the ground-truth
    severity census the miss table is computed against.
    """
    stats = contest_stats or {}
    valid = [f for f in findings if f.status == "VALID"]
    invalid = [f for f in findings if f.status == "INVALID"]
    judged = len(valid) + len(invalid)

    clients = sorted({f.impl_id for f in findings} | set(all_clients or []))
    per_client = []
    for client in clients:
        per_client.append({
            "client": client,
            "valid": sum(1 for f in valid if f.impl_id == client),
            "invalid": sum(1 for f in invalid if f.impl_id == client),
        })
    # Table ordering: valid desc, invalid desc, then name.
    per_client.sort(key=lambda row: (-row["valid"], -row["invalid"], row["client"]))
    covered = sum(1 for row in per_client if row["valid"] > 0)

    census = stats.get("severity_census", {})
    miss_rows = []
    for severity in ("High", "Medium", "Low"):
        total_gt = census.get(severity, 0)
        found = sum(1 for f in valid if f.severity == severity)
        found = min(found, total_gt) if total_gt else found
        miss_rows.append({
            "severity": severity,
            "total_in_contest": total_gt,
            "found": found,
            "missed": max(total_gt - found, 0),
            "discovery_rate_pct": _pct(found, total_gt),
        })

    summary = {
        "total_submissions": len(findings),
        "valid": len(valid),
        "invalid": len(invalid),
        "valid_rate_pct": _pct(len(valid), judged),
        "per_client": per_client,
        "clients_total": len(per_client),
        "clients_with_valid": covered,
        "miss_table": miss_rows,
    }
    if stats.get("total_submissions_all"):
        summary["contest_average_pct"] = _pct(
            stats.get("total_valid_all", 0), stats["total_submissions_all"])
        summary["contest_totals"] = {
            "submissions": stats["total_submissions_all"],
            "valid": stats.get("total_valid_all", 0),
        }
    return summary


def miss_category_table(missed_issues: list[GroundTruthIssue]) -> dict:
    """Failure-category distribution for missed issues (fixture-coded)."""
    total = len(missed_issues)
    rows = []
    for category in MISS_CATEGORIES:
        count = sum(1 for i in missed_issues if i.miss_category == category)
        rows.append({"category": category, "count": count, "pct": _pct(count, total)})
    return {"rows": rows, "total": total}


# --- plain-text rendering ---

def render_table(headers: list[str], rows: list[list], title: str = "") -> str:
    """Align a small table for terminal output."""
    cells = [[str(c) for c in row] for row in rows]
    widths = [max(len(headers[i]), *(len(r[i]) for r in cells)) if cells else len(headers[i])
              for i in range(len(headers))]
    lines = []
    if title:
        lines.append(title)
    lines.append("  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)))
    lines.append("  ".join("-" * w for w in widths))
    for row in cells:
        lines.append("  ".join(row[i].ljust(widths[i]) for i in range(len(row))))
    return "\n".join(lines)
