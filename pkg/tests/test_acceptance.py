"""Acceptance gate: every criterion as one test, at its stated tolerance.

Percentage tolerances are ±0.1 points on rounded values. A conftest hook
prints one PASS/FAIL line per criterion at the end of the session.
"""
from __future__ import annotations

import hashlib
import random
import re
import shutil
import time

import pytest
from click.testing import CliRunner

from speca import bundled, pipeline
from speca.audit_engine import classify_severity
from speca.checklist import generate_checklist
from speca.cli import main as speca_cli
from speca.evaluation import (
    attribution_table,
    contest_summary,
    fp_distribution,
    recall_by_severity,
)
from speca.runstore import RunStore
from speca.spec_extract import extract_requirements, parse_spec_doc
from speca.threat_model import filter_finding

from oracles import oracle_modal_sentences

PCT = 0.1  # percentage-point tolerance on rounded percentages


# ---------------------------------------------------------------------------
# Contest outcome tables from the bundled fixtures
# ---------------------------------------------------------------------------

def test_accept_valid_rate_and_contest_average():
    summary = contest_summary(
        bundled.load_v1_findings(), bundled.load_contest_stats(),
        [c["impl_id"] for c in bundled.load_clients()])
    assert summary["valid"] == 17 and summary["total_submissions"] == 54
    assert summary["valid_rate_pct"] == pytest.approx(31.5, abs=PCT)
    assert summary["contest_totals"] == {"submissions": 366, "valid": 101}
    assert summary["contest_average_pct"] == pytest.approx(27.6, abs=PCT)


def test_accept_strategy_attribution():
    valid = [f for f in bundled.load_v1_findings() if f.status == "VALID"]
    rows = {r["strategy"]: r for r in attribution_table(valid)["rows"]}
    assert rows["B_cross_impl"]["count"] == 13
    assert rows["B_cross_impl"]["pct"] == pytest.approx(76.5, abs=PCT)
    assert rows["A_static"]["count"] == 3
    assert rows["A_static"]["pct"] == pytest.approx(17.6, abs=PCT)
    assert rows["C_dynamic"]["count"] == 1
    assert rows["C_dynamic"]["pct"] == pytest.approx(5.9, abs=PCT)


def test_accept_fp_distribution():
    invalid = [f for f in bundled.load_v1_findings() if f.status == "INVALID"]
    rows = {r["category"]: r for r in fp_distribution(invalid)["rows"]}
    expectations = {
        "threat_model_misalignment": (21, 56.8),
        "already_known_duplicate": (8, 21.6),
        "incorrect_analysis": (5, 13.5),
        "out_of_scope": (3, 8.1),
    }
    for category, (count, pct) in expectations.items():
        assert rows[category]["count"] == count
        assert rows[category]["pct"] == pytest.approx(pct, abs=PCT)


def test_accept_per_client_table_and_coverage():
    summary = contest_summary(
        bundled.load_v1_findings(), bundled.load_contest_stats(),
        [c["impl_id"] for c in bundled.load_clients()])
    table = [(r["client"], r["valid"], r["invalid"]) for r in summary["per_client"]]
    assert table == [
        ("nimbus", 6, 8), ("grandine", 3, 1), ("erigon", 2, 1),
        ("besu", 1, 5), ("lodestar", 1, 5), ("nethermind", 1, 4),
        ("teku", 1, 4), ("prysm", 1, 1), ("reth", 1, 1),
        ("lighthouse", 0, 4), ("geth", 0, 3),
    ]
    assert summary["clients_with_valid"] == 9
    assert summary["clients_total"] == 11


def test_accept_miss_table():
    summary = contest_summary(
        bundled.load_v1_findings(), bundled.load_contest_stats(),
        [c["impl_id"] for c in bundled.load_clients()])
    rows = {r["severity"]: r for r in summary["miss_table"]}
    assert (rows["High"]["found"], rows["High"]["total_in_contest"]) == (0, 5)
    assert (rows["Medium"]["found"], rows["Medium"]["total_in_contest"]) == (0, 2)
    assert (rows["Low"]["found"], rows["Low"]["total_in_contest"]) == (1, 8)
    assert rows["Low"]["discovery_rate_pct"] == pytest.approx(12.5, abs=PCT)


def test_accept_v2_strict_recall():
    report = recall_by_severity(bundled.load_ground_truth(),
                                bundled.load_v2_findings())
    rows = {r["severity"]: r for r in report.rows}
    assert (rows["High"]["matched"], rows["High"]["ground_truth_count"]) == (2, 3)
    assert rows["High"]["recall_pct"] == pytest.approx(66.7, abs=PCT)
    assert (rows["Medium"]["matched"], rows["Medium"]["ground_truth_count"]) == (0, 2)
    assert (rows["Low"]["matched"], rows["Low"]["ground_truth_count"]) == (1, 6)
    assert rows["Low"]["recall_pct"] == pytest.approx(16.7, abs=PCT)
    assert (report.total["matched"], report.total["ground_truth_count"]) == (3, 11)
    assert report.total["recall_pct"] == pytest.approx(27.3, abs=PCT)
    assert report.matched_issue_ids == [40, 203, 381]
    assert report.missed_issue_ids == [15, 48, 109, 190, 216, 319, 343, 376]


# ---------------------------------------------------------------------------
# Property suites
# ---------------------------------------------------------------------------

_NOUNS = ["node", "peer", "column", "proof", "sample", "record", "window",
          "bucket", "field", "header"]
_VERBS = ["verify", "store", "announce", "rotate", "prune", "export", "merge"]
_MODALS = ["MUST", "MUST NOT", "SHOULD", "SHOULD NOT", "MAY", "SHALL",
           "SHALL NOT"]


def _generate_document(rng: random.Random) -> tuple[str, int, int]:
    """Random spec document; returns (text, normative count, MUST NOT count)."""
    lines = []
    normative = 0
    negated_must = 0
    for s in range(rng.randint(1, 4)):
        lines.append(f"## Section{s}")
        for _ in range(rng.randint(1, 10)):
            subject = rng.choice(_NOUNS)
            tail = f"{rng.choice(_VERBS)} the {rng.choice(_NOUNS)} data"
            if rng.random() < 0.55:
                modal = rng.choice(_MODALS)
                normative += 1
                if modal == "MUST NOT":
                    negated_must += 1
                lines.append(f"The {subject} {modal} {tail}.")
            else:
                lines.append(f"The {subject} quietly {tail}s.")
    return "\n".join(lines) + "\n", normative, negated_must


def test_accept_extraction_invariants_on_200_documents():
    rng = random.Random(7594)
    start = time.monotonic()
    for n in range(200):
        text, expected, negated_must = _generate_document(rng)
        doc = parse_spec_doc(text, f"GEN{n}")
        reqs = extract_requirements(doc)
        # Count invariant against the independent regex oracle.
        oracle = oracle_modal_sentences(text)
        assert len(reqs) == len(oracle) == expected
        # ID stability: identical bytes, identical ids and hashes.
        again = extract_requirements(parse_spec_doc(text, f"GEN{n}"))
        assert [(r.id, r.content_hash) for r in reqs] == \
               [(r.id, r.content_hash) for r in again]
        assert len({r.id for r in reqs}) == len(reqs)
        # Negation precedence: MUST NOT sentences never classify as MUST.
        for req in reqs:
            if "MUST NOT" in req.text:
                assert req.modality == "MUST_NOT"
        assert sum(1 for r in reqs if r.modality == "MUST_NOT") == negated_must
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"property suite took {elapsed:.1f}s"


def _oracle_severity(impact: float) -> str:
    table = [(0.50, "Critical"), (0.33, "High"), (0.05, "Medium"),
             (0.0001, "Low")]
    for threshold, label in table:
        if impact > threshold:
            return label
    return "Informational"


def test_accept_severity_sweep_matches_brute_force():
    points = [i / 10000 for i in range(10001)]
    points += [0.50, 0.33, 0.05, 0.0001, 0.0, 1.0,
               0.50 + 1e-12, 0.33 + 1e-12, 0.05 + 1e-12, 0.0001 + 1e-12]
    for impact in points:
        assert classify_severity(impact) == _oracle_severity(impact), impact
    assert classify_severity(0.50) == "High"
    assert classify_severity(0.33) == "Medium"
    assert classify_severity(0.05) == "Low"
    assert classify_severity(0.0001) == "Informational"


_BAD_SUBSCRIBE_PY = '''def subscribe_column_subnet(store, subnet_id):
    # subscribing peers to the data column subnet topic for distribution
    topic = f"column_subnet_{subnet_id}"
    store.groups[topic] = subnet_id
    return topic


def mesh_join_order(topics):
    return sorted(topics)


def mesh_backlog_span(span):
    floor = span * 2
    return floor
'''

_BAD_SUBSCRIBE_RS = '''pub fn subscribe_column_subnet(store: &mut Store, subnet_id: usize) -> String {
    // subscribing peers to the data column subnet topic for distribution
    let topic = format!("data_column_subnet_{}", subnet_id);
    store.groups.push(subnet_id);
    topic
}

fn mesh_join_order(topics: &mut Vec<String>) {
    topics.sort();
}

fn mesh_backlog_span(span: usize) -> usize {
    span * 2
}
'''


def _inject_correlated_violation(corpus_root) -> None:
    """Drop the custody-count check from alpha and gamma (beta already lacks it)."""
    alpha = corpus_root / "alpha/custody.py"
    text = re.sub(
        r"def subscribe_column_subnet.*?def subnet_count_limit\(store\):"
        r"\n    return store\.advertised_count \* 2\n",
        _BAD_SUBSCRIBE_PY, alpha.read_text("utf-8"), flags=re.DOTALL)
    assert "validate the declared custody count limit" not in text
    alpha.write_text(text, "utf-8")

    gamma = corpus_root / "gamma/custody.rs"
    text = re.sub(
        r"pub fn subscribe_column_subnet.*?fn subnet_count_limit"
        r"\(store: &Store\) -> usize \{\n    store\.advertised \* 2\n\}\n",
        _BAD_SUBSCRIBE_RS, gamma.read_text("utf-8"), flags=re.DOTALL)
    assert "validate the declared custody count limit" not in text
    gamma.write_text(text, "utf-8")


def test_accept_planted_bug_one_to_n_sweep(tmp_path):
    corpus = tmp_path / "corpus"
    shutil.copytree(bundled.corpus_root(), corpus)
    _inject_correlated_violation(corpus)

    store = RunStore(tmp_path / "runs", "inj")
    store.create()
    pipeline.run_extract(store, bundled.minispec_path(), "EIP7594")
    impls = [(p.name, str(p), "CL") for p in sorted(corpus.iterdir()) if p.is_dir()]
    pipeline.run_index(store, impls)
    pipeline.run_map(store)
    pipeline.run_checklist(store)
    pipeline.run_audit(store, threat_model_path=str(
        bundled.fixtures_root() / "trustmodel_fusaka.json"))

    correlated = [f for f in store.state.ordered_findings()
                  if f.item_id == "EIP7594-CUSTODY-003/CORRECTNESS"]
    assert {f.impl_id for f in correlated} == {"alpha", "beta", "gamma"}

    source = next(f for f in correlated if f.impl_id == "beta")
    pipeline.run_triage(store, source.finding_id, "VALID", poc_attached=True)
    created = pipeline.run_propagate(store, source.finding_id)

    impls_hit = {f.impl_id for f in created}
    assert impls_hit == {"alpha", "gamma"}, "candidates in both other impls"
    assert "beta" not in impls_hit, "never the source implementation"
    for f in created:
        assert f.strategy == "B_cross_impl"
        assert f.source_finding_id == source.finding_id


def test_accept_demo_under_60s_and_rerun_byte_identical(tmp_path):
    runner = CliRunner()
    start = time.monotonic()
    first = runner.invoke(speca_cli, ["demo", "--runs-root",
                                      str(tmp_path / "runs_a")])
    elapsed = time.monotonic() - start
    assert first.exit_code == 0, first.output
    assert elapsed < 60.0, f"demo took {elapsed:.1f}s"

    second = runner.invoke(speca_cli, ["demo", "--runs-root",
                                       str(tmp_path / "runs_b")])
    assert second.exit_code == 0

    def digest(root):
        return hashlib.sha256(
            (root / "demo/findings.jsonl").read_bytes()).hexdigest()

    assert digest(tmp_path / "runs_a") == digest(tmp_path / "runs_b")
    # and a rerun of the audit stage inside the same run directory
    rerun = runner.invoke(speca_cli, [
        "audit", "--runs-root", str(tmp_path / "runs_a"), "--run", "demo"])
    assert rerun.exit_code == 0
    assert digest(tmp_path / "runs_a") == digest(tmp_path / "runs_b")


def test_accept_threat_model_monotonicity_500_cases():
    from test_threat_model import _random_demand, _random_model, _relax
    rng = random.Random(99)
    for _ in range(500):
        model = _random_model(rng)
        demand = _random_demand(rng, model)
        before = filter_finding(model, demand)
        if before.keep:
            assert filter_finding(_relax(model), demand).keep


def test_accept_checklist_formula_1000_multisets():
    rng = random.Random(32)
    must_family = {"MUST", "MUST_NOT", "SHALL", "SHALL_NOT"}
    should_family = {"SHOULD", "SHOULD_NOT"}
    for _ in range(1000):
        modalities = [rng.choice(_MODALS).replace(" ", "_")
                      for _ in range(rng.randint(0, 40))]
        sentences = [f"The node {m.replace('_', ' ')} handle case {i}."
                     for i, m in enumerate(modalities)]
        raw = "## Gen\n" + "\n".join(sentences) + "\n"
        reqs = (extract_requirements(parse_spec_doc(raw, "GEN")) if sentences
                else [])
        items = generate_checklist(reqs)
        expected = (3 * sum(1 for m in modalities if m in must_family)
                    + 2 * sum(1 for m in modalities if m in should_family)
                    + 1 * sum(1 for m in modalities if m == "MAY"))
        assert len(items) == expected


def test_accept_event_log_replay_after_100_mutations(tmp_path):
    store = RunStore(tmp_path / "runs", "replay")
    pipeline.seed_run_from_findings(store, bundled.load_v1_findings(),
                                    pretriage=True)
    store.save_threat_model(bundled.load_trust_model())
    ids = [f.finding_id for f in store.state.ordered_findings()]
    rng = random.Random(2026)
    applied = 0
    for _ in range(100):
        fid = rng.choice(ids)
        try:
            if rng.random() < 0.5:
                pipeline.run_triage(store, fid, "VALID",
                                    poc_attached=rng.random() < 0.8)
            else:
                pipeline.run_triage(store, fid, "INVALID", fp_category=rng.choice(
                    ["threat_model_misalignment", "already_known_duplicate",
                     "incorrect_analysis", "out_of_scope"]))
            applied += 1
        except Exception:
            continue  # conflicts and PoC rejections never reach the log
    assert applied >= 40
    live = store.state.state_hash()
    assert store.replay().state_hash() == live
    reopened = RunStore(tmp_path / "runs", "replay")
    assert reopened.state.state_hash() == live
