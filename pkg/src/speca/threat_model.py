"""Structured threat-model artifact and the capability filter.

The model is a per-run input authored by humans: actors with trust levels
plus boundary edges, with a flat set of in-scope feature tags. Findings
whose capability demand contradicts the model are filtered before they
ever reach human triage.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import DanglingEdge, DuplicateActor, UnknownActor

TRUST_LEVELS = ("TRUSTED", "SEMI_TRUSTED", "UNTRUSTED")

REASON_MISALIGNMENT = "threat_model_misalignment"
REASON_OUT_OF_SCOPE = "out_of_scope"


@dataclass(frozen=True)
class Actor:
    actor_id: str
    trust: str


@dataclass(frozen=True)
class BoundaryEdge:
    from_actor: str
    to_actor: str
    channel: str
    crossing_trust: str  # trust attributed to traffic on this edge


@dataclass
class ThreatModel:
    actors: list[Actor]
    edges: list[BoundaryEdge]
    scope_tags: frozenset[str]

    def trust_of(self, actor_id: str) -> str | None:
        for actor in self.actors:
            if actor.actor_id == actor_id:
                return actor.trust
        return None

    def edge(self, from_actor: str, to_actor: str) -> BoundaryEdge | None:
        for e in self.edges:
            if e.from_actor == from_actor and e.to_actor == to_actor:
                return e
        return None

    def to_record(self) -> dict:
        return {
            "actors": [{"actor_id": a.actor_id, "trust": a.trust} for a in self.actors],
            "edges": [
                {"from_actor": e.from_actor, "to_actor": e.to_actor,
                 "channel": e.channel, "crossing_trust": e.crossing_trust}
                for e in self.edges
            ],
            "scope_tags": sorted(self.scope_tags),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ThreatModel":
        return cls(
            actors=[Actor(a["actor_id"], a["trust"]) for a in rec.get("actors", [])],
            edges=[
                BoundaryEdge(e["from_actor"], e["to_actor"], e.get("channel", ""),
                             e.get("crossing_trust", "UNTRUSTED"))
                for e in rec.get("edges", [])
            ],
            scope_tags=frozenset(rec.get("scope_tags", [])),
        )


@dataclass(frozen=True)
class CapabilityDemand:
    """What an attacker must be able to do for a finding to be real."""

    acting_actor: str
    required_trust: str
    scope_tag: str
    via_edge: tuple[str, str] | None = None

    def to_record(self) -> dict:
        return {
            "acting_actor": self.acting_actor,
            "required_trust": self.required_trust,
            "scope_tag": self.scope_tag,
            "via_edge": list(self.via_edge) if self.via_edge else None,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "CapabilityDemand":
        via = rec.get("via_edge")
        return cls(
            acting_actor=rec["acting_actor"],
            required_trust=rec.get("required_trust", "UNTRUSTED"),
            scope_tag=rec.get("scope_tag", ""),
            via_edge=(via[0], via[1]) if via else None,
        )


@dataclass(frozen=True)
class FilterVerdict:
    keep: bool
    reason: str | None = None
    confidence_penalty: bool = False  # SEMI_TRUSTED actors survive but flagged

    @property
    def label(self) -> str:
        return "KEEP" if self.keep else f"FILTER({self.reason})"


def validate_model(model: ThreatModel) -> list[str]:
    """Check structural invariants; returns warnings (errors raise)."""
    seen: set[str] = set()
    for actor in model.actors:
        if actor.actor_id in seen:
            raise DuplicateActor(f"actor {actor.actor_id!r} declared twice")
        if actor.trust not in TRUST_LEVELS:
            raise DuplicateActor(f"actor {actor.actor_id!r} has unknown trust {actor.trust!r}")
        seen.add(actor.actor_id)
    for edge in model.edges:
        for endpoint in (edge.from_actor, edge.to_actor):
            if endpoint not in seen:
                raise DanglingEdge(f"edge references undeclared actor {endpoint!r}")
        if edge.crossing_trust not in TRUST_LEVELS:
            raise DanglingEdge(f"edge {edge.from_actor}->{edge.to_actor} has unknown "
                               f"crossing_trust {edge.crossing_trust!r}")
    warnings = []
    if not any(a.trust == "UNTRUSTED" for a in model.actors):
        warnings.append("VacuousModel: no UNTRUSTED actor declared; every finding "
                        "demanding attacker capability will be filtered")
    return warnings


def filter_finding(model: ThreatModel, demand: CapabilityDemand) -> FilterVerdict:
    """Apply the capability filter. Rules, in order:

    a. the acting actor is declared TRUSTED          -> FILTER(misalignment)
    b. the demand crosses a TRUSTED edge while the
       attacker must be UNTRUSTED                    -> FILTER(misalignment)
    c. the finding's scope tag is not in scope       -> FILTER(out_of_scope)

    SEMI_TRUSTED actors are attacker-reachable: the finding is kept with a
    confidence penalty flag.
    """
    trust = model.trust_of(demand.acting_actor)
    if trust is None:
        raise UnknownActor(f"actor {demand.acting_actor!r} not declared in the model")
    if trust == "TRUSTED":
        return FilterVerdict(keep=False, reason=REASON_MISALIGNMENT)
    if demand.via_edge is not None:
        edge = model.edge(*demand.via_edge)
        if edge is None:
            raise UnknownActor(f"edge {demand.via_edge} not declared in the model")
        if edge.crossing_trust == "TRUSTED" and demand.required_trust == "UNTRUSTED":
            return FilterVerdict(keep=False, reason=REASON_MISALIGNMENT)
    if demand.scope_tag not in model.scope_tags:
        return FilterVerdict(keep=False, reason=REASON_OUT_OF_SCOPE)
    return FilterVerdict(keep=True, confidence_penalty=(trust == "SEMI_TRUSTED"))
