from __future__ import annotations

import pytest

from speca.code_index import (
    ImplementationRef,
    analogous_locations,
    build_index,
    excerpt,
    load_index,
    save_index,
    search,
    tokenize_identifier,
)
from speca.errors import IndexFailure, UnknownImplementation
from speca.pattern_db import PatternEntry


@pytest.mark.parametrize("ident,expected", [
    ("verifyCellKzgProofBatch", ["verify", "cell", "kzg", "proof", "batch"]),
    ("verify_cell_kzg_proof_batch", ["verify", "cell", "kzg", "proof", "batch"]),
    ("", []),
    ("c-kzg-4844", ["c", "kzg", "4844"]),
    ("4844proof", ["4844", "proof"]),
])
def test_tokenize_identifier(ident, expected):
    assert tokenize_identifier(ident) == expected


def test_empty_directory_yields_empty_index(tmp_path):
    (tmp_path / "empty").mkdir()
    index = build_index([ImplementationRef("e", str(tmp_path / "empty"))])
    assert index.file_count == 0
    assert index.postings == {}


def test_unreadable_root_raises(tmp_path):
    with pytest.raises(IndexFailure):
        build_index([ImplementationRef("x", str(tmp_path / "missing"))])


def test_fixture_corpus_file_count(corpus_index):
    assert corpus_index.file_count == 9
    assert sorted(corpus_index.impl_ids()) == ["alpha", "beta", "gamma"]


def test_postings_sorted(corpus_index):
    for bucket in corpus_index.postings.values():
        keys = [(i, p, l) for i, p, l, _tf in bucket]
        assert keys == sorted(keys)


def test_index_serialization_deterministic(tmp_path, corpus_index):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_index(corpus_index, a)
    save_index(corpus_index, b)
    assert a.read_bytes() == b.read_bytes()
    again = load_index(a)
    c = tmp_path / "c.json"
    save_index(again, c)
    assert c.read_bytes() == a.read_bytes()
    # searches agree after the round trip
    q = frozenset({"custody", "columns"})
    assert [(l.to_record(), s) for l, s in search(corpus_index, q, top_k=5)] == \
           [(l.to_record(), s) for l, s in search(again, q, top_k=5)]


def test_search_planted_tokens_rank_first(tmp_path):
    root = tmp_path / "impl"
    root.mkdir()
    (root / "mod.py").write_text(
        "def noise():\n    return 0\n\n\n\n\n\n\n"
        "def planted():\n    # alpha bravo charlie delta\n    return 1\n",
        "utf-8")
    index = build_index([ImplementationRef("impl", str(root))])
    hits = search(index, frozenset({"alpha", "bravo", "charlie", "delta"}), top_k=5)
    assert hits
    top, score = hits[0]
    assert score == pytest.approx(1.0)
    assert top.symbol == "planted" or top.line_start >= 4


def test_search_no_occurrences_empty(corpus_index):
    assert search(corpus_index, frozenset({"zzzznothing"}), top_k=3) == []


def test_search_score_positive_and_filter_respected(corpus_index):
    hits = search(corpus_index, frozenset({"custody", "group"}),
                  impl_filter="beta", top_k=50)
    assert hits
    for loc, score in hits:
        assert loc.impl_id == "beta"
        assert score > 0


def test_search_ranking_total_order(corpus_index):
    hits = search(corpus_index, frozenset({"sample", "slot", "column"}), top_k=50)
    keys = [(-s, l.path, l.line_start, l.impl_id) for l, s in hits]
    assert keys == sorted(keys)


def test_analogous_locations_excludes_source(corpus_index):
    pattern = PatternEntry("PAT-X", "guard_omission", "t",
                           frozenset({"custody", "columns"}))
    sweep = analogous_locations(corpus_index, pattern, exclude_impl="alpha")
    assert set(sweep) == {"beta", "gamma"}
    for impl, locations in sweep.items():
        for loc in locations:
            assert loc.impl_id == impl


def test_analogous_locations_single_impl_empty_map(tmp_path):
    root = tmp_path / "only"
    root.mkdir()
    (root / "a.py").write_text("def f():\n    return 1\n", "utf-8")
    index = build_index([ImplementationRef("only", str(root))])
    pattern = PatternEntry("PAT-X", "other", "t", frozenset({"return"}))
    assert analogous_locations(index, pattern, exclude_impl="only") == {}


def test_analogous_locations_unknown_impl(corpus_index):
    pattern = PatternEntry("PAT-X", "other", "t", frozenset({"custody"}))
    with pytest.raises(UnknownImplementation):
        analogous_locations(corpus_index, pattern, exclude_impl="delta")


def test_analogous_locations_absent_keywords_empty_lists(corpus_index):
    pattern = PatternEntry("PAT-X", "other", "t", frozenset({"zzzznothing"}))
    sweep = analogous_locations(corpus_index, pattern, exclude_impl="alpha")
    assert sweep == {"beta": [], "gamma": []}


def test_planted_copy_found_in_both_other_impls(tmp_path):
    # The same buggy function copied into two implementations: a pattern
    # abstracted from the first must hit analogous spots in both others.
    bug = "def rotate():\n    # zebra yak xenon walrus\n    return 2\n"
    for name in ("one", "two", "three"):
        root = tmp_path / name
        root.mkdir()
        (root / "m.py").write_text(bug if name != "one" else bug + "\n# extra\n",
                                   "utf-8")
    index = build_index([ImplementationRef(n, str(tmp_path / n))
                         for n in ("one", "two", "three")])
    pattern = PatternEntry("PAT-X", "other", "t",
                           frozenset({"zebra", "yak", "xenon", "walrus"}))
    sweep = analogous_locations(index, pattern, exclude_impl="one")
    assert sweep["two"] and sweep["three"]


def test_excerpt_matches_window(corpus_index):
    hits = search(corpus_index, frozenset({"advertised", "custody"}),
                  impl_filter="alpha", top_k=1)
    loc = hits[0][0]
    text = excerpt(corpus_index, loc)
    assert "custody" in text.lower()


# property coverage for the tokenizer contract

from hypothesis import given, strategies as st

_ident_chars = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-",
    max_size=40)


@given(_ident_chars)
def test_tokenizer_output_is_lowercase_and_separator_free(ident):
    tokens = tokenize_identifier(ident)
    for tok in tokens:
        assert tok == tok.lower()
        assert tok
        assert "_" not in tok and "-" not in tok


@given(_ident_chars)
def test_tokenizer_preserves_characters(ident):
    # concatenated tokens equal the lowercased identifier minus separators
    tokens = tokenize_identifier(ident)
    assert "".join(tokens) == ident.lower().replace("_", "").replace("-", "")
