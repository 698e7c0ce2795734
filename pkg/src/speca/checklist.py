"""Property-based checklist expansion and per-implementation status tracking.

Each requirement expands along up to three axes:

    presence      is there code addressing this requirement?
    correctness   does the code correctly implement it?
    completeness  are all conditions and edge cases handled?

MUST-family requirements get all three, SHOULD-family two (presence and
correctness), MAY only correctness: a MAY carries no presence obligation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import IllegalTransition, NotFound
from .spec_extract import MUST_FAMILY, SHOULD_FAMILY, Requirement

KINDS = ("presence", "correctness", "completeness")
STATUSES = ("PENDING", "PASS", "FLAG", "SKIPPED")

# Status transitions form a DAG; nothing ever returns to PENDING.
_ALLOWED_TRANSITIONS = {
    ("PENDING", "PASS"),
    ("PENDING", "FLAG"),
    ("PENDING", "SKIPPED"),
    ("FLAG", "PASS"),  # human overturn
}

_TEMPLATES = {
    "presence": "Implementation contains code addressing: {text}",
    "correctness": "Code correctly implements: {text}",
    "completeness": "All conditions and edge cases are handled for: {text}",
}


def kinds_for(modality: str) -> tuple[str, ...]:
    if modality in MUST_FAMILY:
        return ("presence", "correctness", "completeness")
    if modality in SHOULD_FAMILY:
        return ("presence", "correctness")
    return ("correctness",)  # MAY


@dataclass
class ChecklistItem:
    item_id: str
    req_id: str
    kind: str
    predicate_text: str
    status: dict[str, str] = field(default_factory=dict)  # impl_id -> status

    def to_record(self) -> dict:
        return {
            "item_id": self.item_id,
            "req_id": self.req_id,
            "kind": self.kind,
            "predicate_text": self.predicate_text,
            "status": dict(sorted(self.status.items())),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ChecklistItem":
        return cls(rec["item_id"], rec["req_id"], rec["kind"],
                   rec["predicate_text"], dict(rec.get("status", {})))


def generate_checklist(
    reqs: list[Requirement], impl_ids: tuple[str, ...] | list[str] = ()
) -> list[ChecklistItem]:
    """Expand requirements into checklist items, all statuses PENDING."""
    items = []
    for req in reqs:
        for kind in kinds_for(req.modality):
            items.append(ChecklistItem(
                item_id=f"{req.id}/{kind.upper()}",
                req_id=req.id,
                kind=kind,
                predicate_text=_TEMPLATES[kind].format(text=req.text),
                status={impl: "PENDING" for impl in impl_ids},
            ))
    return items


class Checklist:
    """Run-scoped checklist state: single writer, concurrent readers."""

    def __init__(self, items: list[ChecklistItem], impl_ids: list[str] | None = None):
        self._items: dict[str, ChecklistItem] = {}
        for item in items:
            self._items[item.item_id] = item
        self.impl_ids = list(impl_ids) if impl_ids is not None else sorted(
            {impl for item in items for impl in item.status})

    def __len__(self) -> int:
        return len(self._items)

    def items(self) -> list[ChecklistItem]:
        return list(self._items.values())

    def get(self, item_id: str) -> ChecklistItem:
        try:
            return self._items[item_id]
        except KeyError:
            raise NotFound(f"checklist item {item_id!r} not found") from None

    def set_status(self, item_id: str, impl_id: str, status: str) -> ChecklistItem:
        item = self.get(item_id)
        if impl_id not in item.status:
            if self.impl_ids and impl_id not in self.impl_ids:
                raise NotFound(f"implementation {impl_id!r} unknown to this checklist")
            item.status[impl_id] = "PENDING"
        current = item.status[impl_id]
        if (current, status) not in _ALLOWED_TRANSITIONS:
            raise IllegalTransition(
                f"{item_id}[{impl_id}]: {current} -> {status} not allowed")
        item.status[impl_id] = status
        return item
