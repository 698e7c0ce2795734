from __future__ import annotations

import random

import pytest

from speca import bundled
from speca.errors import DanglingEdge, DuplicateActor, UnknownActor
from speca.threat_model import (
    Actor,
    BoundaryEdge,
    CapabilityDemand,
    ThreatModel,
    filter_finding,
    validate_model,
)


def fusaka_model():
    return bundled.load_trust_model()


def test_fixture_model_validates_clean():
    assert validate_model(fusaka_model()) == []


def test_dangling_edge_rejected():
    model = ThreatModel(
        actors=[Actor("a", "UNTRUSTED")],
        edges=[BoundaryEdge("a", "ghost", "x", "UNTRUSTED")],
        scope_tags=frozenset({"x"}))
    with pytest.raises(DanglingEdge):
        validate_model(model)


def test_duplicate_actor_rejected():
    model = ThreatModel(
        actors=[Actor("a", "UNTRUSTED"), Actor("a", "TRUSTED")],
        edges=[], scope_tags=frozenset())
    with pytest.raises(DuplicateActor):
        validate_model(model)


def test_vacuous_model_warns_not_errors():
    model = ThreatModel(actors=[Actor("a", "TRUSTED")], edges=[],
                        scope_tags=frozenset())
    warnings = validate_model(model)
    assert warnings and "VacuousModel" in warnings[0]


def test_trusted_actor_filtered_as_misalignment():
    verdict = filter_finding(fusaka_model(), CapabilityDemand(
        acting_actor="el_client", required_trust="UNTRUSTED",
        scope_tag="networking"))
    assert not verdict.keep
    assert verdict.reason == "threat_model_misalignment"


def test_untrusted_peer_in_scope_kept():
    verdict = filter_finding(fusaka_model(), CapabilityDemand(
        acting_actor="external_peer", required_trust="UNTRUSTED",
        scope_tag="custody", via_edge=("external_peer", "cl_client")))
    assert verdict.keep and not verdict.confidence_penalty


def test_out_of_scope_tag_filtered():
    verdict = filter_finding(fusaka_model(), CapabilityDemand(
        acting_actor="external_peer", required_trust="UNTRUSTED",
        scope_tag="prehistory"))
    assert not verdict.keep
    assert verdict.reason == "out_of_scope"


def test_trusted_edge_with_untrusted_requirement_filtered():
    verdict = filter_finding(fusaka_model(), CapabilityDemand(
        acting_actor="external_peer", required_trust="UNTRUSTED",
        scope_tag="custody", via_edge=("el_client", "cl_client")))
    assert not verdict.keep
    assert verdict.reason == "threat_model_misalignment"


def test_semi_trusted_actor_kept_with_penalty():
    verdict = filter_finding(fusaka_model(), CapabilityDemand(
        acting_actor="validator", required_trust="UNTRUSTED",
        scope_tag="validator_duties"))
    assert verdict.keep and verdict.confidence_penalty


def test_unknown_actor_raises():
    with pytest.raises(UnknownActor):
        filter_finding(fusaka_model(), CapabilityDemand(
            acting_actor="martian", required_trust="UNTRUSTED", scope_tag="custody"))


def test_filter_is_deterministic():
    demand = CapabilityDemand("external_peer", "UNTRUSTED", "custody")
    model = fusaka_model()
    assert filter_finding(model, demand) == filter_finding(model, demand)


def test_fixture_model_filters_exactly_the_21_misalignment_records():
    # Oracle: the bundled contest findings carry their human fp coding;
    # the model must filter exactly the threat-model-misalignment ones.
    model = fusaka_model()
    findings = bundled.load_v1_findings()
    filtered = {f.finding_id for f in findings
                if not filter_finding(model, f.capability).keep}
    coded = {f.finding_id for f in findings
             if f.fp_category == "threat_model_misalignment"}
    assert len(coded) == 21
    assert filtered == coded


def _random_model(rng: random.Random):
    n_actors = rng.randint(1, 6)
    actors = [Actor(f"a{i}", rng.choice(["TRUSTED", "SEMI_TRUSTED", "UNTRUSTED"]))
              for i in range(n_actors)]
    edges = []
    for _ in range(rng.randint(0, 6)):
        edges.append(BoundaryEdge(
            rng.choice(actors).actor_id, rng.choice(actors).actor_id,
            "ch", rng.choice(["TRUSTED", "SEMI_TRUSTED", "UNTRUSTED"])))
    tags = frozenset(rng.sample(["s1", "s2", "s3", "s4"], rng.randint(0, 4)))
    return ThreatModel(actors=actors, edges=edges, scope_tags=tags)


def _random_demand(rng: random.Random, model: ThreatModel):
    actor = rng.choice(model.actors).actor_id
    via = None
    if model.edges and rng.random() < 0.5:
        edge = rng.choice(model.edges)
        via = (edge.from_actor, edge.to_actor)
    return CapabilityDemand(
        acting_actor=actor,
        required_trust=rng.choice(["TRUSTED", "SEMI_TRUSTED", "UNTRUSTED"]),
        scope_tag=rng.choice(["s1", "s2", "s3", "s4", "s5"]),
        via_edge=via)


def _relax(model: ThreatModel) -> ThreatModel:
    """Flip every TRUSTED annotation to UNTRUSTED."""
    return ThreatModel(
        actors=[Actor(a.actor_id, "UNTRUSTED" if a.trust == "TRUSTED" else a.trust)
                for a in model.actors],
        edges=[BoundaryEdge(e.from_actor, e.to_actor, e.channel,
                            "UNTRUSTED" if e.crossing_trust == "TRUSTED"
                            else e.crossing_trust)
               for e in model.edges],
        scope_tags=model.scope_tags)


def test_monotonicity_relaxing_trust_never_filters_a_keep():
    rng = random.Random(1215)
    checked = 0
    for _ in range(500):
        model = _random_model(rng)
        demand = _random_demand(rng, model)
        before = filter_finding(model, demand)
        after = filter_finding(_relax(model), demand)
        if before.keep:
            assert after.keep, (model, demand)
        checked += 1
    assert checked == 500
