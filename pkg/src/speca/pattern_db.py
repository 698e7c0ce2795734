"""Vulnerability-pattern database: curated entries plus patterns abstracted
from validated findings (the first step of the cross-implementation sweep).

Entries are matched by Jaccard similarity over lowercase keyword sets; the
ranking is deterministic so identical database + query always produce the
same ordered result.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import DuplicatePattern, InvalidCategory, NotValidated
from .records import read_jsonl, write_jsonl

CATEGORIES = (
    "boundary_validation",
    "guard_omission",
    "state_transition",
    "crypto_misuse",
    "resource_management",
    "other",
)

# Keywords that mark a requirement as range/limit flavored; used by the
# category inference table below.
RANGE_LEXICON = frozenset({
    "range", "ranges", "bound", "bounds", "limit", "limits", "cap", "caps",
    "max", "maximum", "min", "minimum", "upper", "lower", "exceed",
    "exceeds", "greater", "less", "threshold",
})


@dataclass
class PatternEntry:
    pattern_id: str
    category: str
    description: str
    signature_keywords: frozenset[str]
    structural_hint: str | None = None
    origin: str | None = None

    def validate(self) -> None:
        if self.category not in CATEGORIES:
            raise InvalidCategory(f"category {self.category!r} not in {CATEGORIES}")
        if not self.signature_keywords:
            raise InvalidCategory("signature_keywords must be non-empty")

    def to_record(self) -> dict:
        return {
            "pattern_id": self.pattern_id,
            "category": self.category,
            "description": self.description,
            "signature_keywords": sorted(self.signature_keywords),
            "structural_hint": self.structural_hint,
            "origin": self.origin,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "PatternEntry":
        return cls(
            pattern_id=rec["pattern_id"],
            category=rec["category"],
            description=rec["description"],
            signature_keywords=frozenset(rec["signature_keywords"]),
            structural_hint=rec.get("structural_hint"),
            origin=rec.get("origin"),
        )


class PatternDatabase:
    """In-memory store with JSONL persistence.

    Reads are safe to share; writes are serialized by the caller
    (single-writer contract).
    """

    def __init__(self, entries: list[PatternEntry] | None = None):
        self._entries: dict[str, PatternEntry] = {}
        for entry in entries or []:
            self.add_pattern(entry)

    def __len__(self) -> int:
        return len(self._entries)

    def entries(self) -> list[PatternEntry]:
        return [self._entries[k] for k in sorted(self._entries)]

    def get(self, pattern_id: str) -> PatternEntry | None:
        return self._entries.get(pattern_id)

    def _next_id(self) -> str:
        n = 0
        for pid in self._entries:
            if pid.startswith("PAT-"):
                try:
                    n = max(n, int(pid.split("-")[1]))
                except ValueError:
                    pass
        return f"PAT-{n + 1:03d}"

    def add_pattern(self, entry: PatternEntry) -> str:
        entry.validate()
        for existing in self._entries.values():
            if (existing.category == entry.category
                    and existing.signature_keywords == entry.signature_keywords):
                raise DuplicatePattern(
                    f"{existing.pattern_id} already covers "
                    f"({entry.category}, {sorted(entry.signature_keywords)})"
                )
        if not entry.pattern_id:
            entry.pattern_id = self._next_id()
        elif entry.pattern_id in self._entries:
            raise DuplicatePattern(f"pattern id {entry.pattern_id} already present")
        self._entries[entry.pattern_id] = entry
        return entry.pattern_id

    def query_patterns(
        self, keywords: frozenset[str] | set[str], category: str | None = None
    ) -> list[tuple[PatternEntry, float]]:
        """Rank entries by Jaccard similarity of keyword sets, descending.

        Zero-score entries are excluded; ties break by pattern_id ascending.
        """
        if not keywords:
            raise ValueError("keywords must be non-empty")
        query = set(keywords)
        scored = []
        for entry in self._entries.values():
            if category is not None and entry.category != category:
                continue
            inter = len(query & entry.signature_keywords)
            if inter == 0:
                continue
            union = len(query | entry.signature_keywords)
            scored.append((entry, inter / union))
        scored.sort(key=lambda pair: (-pair[1], pair[0].pattern_id))
        return scored

    def save(self, destination: str | Path) -> None:
        write_jsonl((e.to_record() for e in self.entries()), destination)

    @classmethod
    def load(cls, source: str | Path) -> "PatternDatabase":
        db = cls()
        for rec in read_jsonl(source):
            db.add_pattern(PatternEntry.from_record(rec))
        return db

    @classmethod
    def seed(cls) -> "PatternDatabase":
        """The bundled seed database (12 entries over the five core categories)."""
        path = resources.files("speca.data").joinpath("seed_patterns.jsonl")
        db = cls()
        for line in path.read_text("utf-8").splitlines():
            if line.strip():
                import json

                db.add_pattern(PatternEntry.from_record(json.loads(line)))
        return db


def abstract_pattern_from_finding(finding, requirement) -> PatternEntry:
    """Generalize a validated finding into a reusable pattern.

    Signature keywords combine the requirement's keywords with the
    identifier tokens of the finding's enclosing symbol. Category follows
    a fixed decision table:
      1. missing-presence violation of a MUST-family requirement -> guard_omission
      2. requirement keywords touch the range/limit lexicon -> boundary_validation
      3. otherwise -> other
    """
    from .code_index import tokenize_identifier  # local import avoids a cycle

    if finding.status != "VALID":
        raise NotValidated(f"finding {finding.finding_id} has status {finding.status}")

    symbol_tokens = frozenset(tokenize_identifier(finding.location.symbol or ""))
    keywords = frozenset(requirement.keywords) | symbol_tokens

    from .spec_extract import MUST_FAMILY

    kind = finding.item_id.rsplit("/", 1)[-1].lower()
    if kind == "presence" and requirement.modality in MUST_FAMILY:
        category = "guard_omission"
    elif requirement.keywords & RANGE_LEXICON:
        category = "boundary_validation"
    else:
        category = "other"

    return PatternEntry(
        pattern_id="",
        category=category,
        description=f"Abstracted from {finding.finding_id}: {finding.violation}",
        signature_keywords=keywords,
        structural_hint=None,
        origin=finding.finding_id,
    )
