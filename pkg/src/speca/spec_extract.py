"""Specification parsing and normative requirement extraction.

Turns a markdown-ish specification document into:
  * a sectioned ``SpecDocument`` whose body lines keep their original
    1-based line numbers,
  * a list of ``Requirement`` records, one per sentence carrying an
    uppercase RFC 2119 modal verb, each with a stable traceability id
    ("{doc_id}-{TOPIC}-{NNN}"),
  * optional ``ProgramGraph`` artifacts built from fenced pseudocode.

Everything here is a pure function over immutable inputs: extracting the
same bytes twice yields identical ids and hashes.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import EmptyDocument, InvalidDocId, NoPseudocode
from .records import read_jsonl, write_jsonl

_DOC_ID_RE = re.compile(r"^[A-Z0-9]+$")
_HEADING_RE = re.compile(r"^(#{1,6})\s+(.*\S)\s*$")
_FENCE_RE = re.compile(r"^\s*```")

# Negated forms listed first so they win the alternation at equal positions.
_MODAL_PATTERN = (
    r"MUST NOT|SHALL NOT|SHOULD NOT|NOT RECOMMENDED"
    r"|MUST|SHALL|SHOULD|MAY|REQUIRED|RECOMMENDED|OPTIONAL"
)
_MODAL_RE_STRICT = re.compile(rf"\b({_MODAL_PATTERN})\b")
_MODAL_RE_LENIENT = re.compile(rf"\b({_MODAL_PATTERN})\b", re.IGNORECASE)

# RFC 2119 synonyms normalize onto the core modalities.
_MODALITY_FOR = {
    "MUST": "MUST",
    "MUST NOT": "MUST_NOT",
    "SHALL": "SHALL",
    "SHALL NOT": "SHALL_NOT",
    "SHOULD": "SHOULD",
    "SHOULD NOT": "SHOULD_NOT",
    "MAY": "MAY",
    "REQUIRED": "MUST",
    "RECOMMENDED": "SHOULD",
    "NOT RECOMMENDED": "SHOULD_NOT",
    "OPTIONAL": "MAY",
}

MODALITIES = ("MUST", "MUST_NOT", "SHOULD", "SHOULD_NOT", "MAY", "SHALL", "SHALL_NOT")
MUST_FAMILY = frozenset({"MUST", "MUST_NOT", "SHALL", "SHALL_NOT"})
SHOULD_FAMILY = frozenset({"SHOULD", "SHOULD_NOT"})

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?;])\s+")

_stopwords_cache: frozenset[str] | None = None


def stopwords() -> frozenset[str]:
    """Bundled stopword list used by keyword extraction."""
    global _stopwords_cache
    if _stopwords_cache is None:
        raw = resources.files("speca.data").joinpath("stopwords.txt").read_text("utf-8")
        words = {w.strip() for w in raw.splitlines() if w.strip() and not w.startswith("#")}
        _stopwords_cache = frozenset(words)
    return _stopwords_cache


def text_tokens(text: str) -> list[str]:
    """Lowercase alphanumeric tokens of length >= 3, in order."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= 3]


def keyword_set(text: str) -> frozenset[str]:
    """Keyword set for a sentence: tokens minus stopwords.

    Falls back to the unfiltered token set when everything is a stopword,
    so any sentence with a modal verb keeps a non-empty keyword set.
    """
    tokens = set(text_tokens(text))
    keywords = tokens - stopwords()
    return frozenset(keywords or tokens)


@dataclass(frozen=True)
class SourceRef:
    doc_id: str
    section_slug: str
    line_start: int
    line_end: int

    def to_record(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "section_slug": self.section_slug,
            "line_start": self.line_start,
            "line_end": self.line_end,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "SourceRef":
        return cls(rec["doc_id"], rec["section_slug"], rec["line_start"], rec["line_end"])


@dataclass
class SpecSection:
    slug: str
    heading: str
    lines: list[tuple[int, str]]  # (original 1-based line number, text)


@dataclass
class SpecDocument:
    doc_id: str
    title: str
    sections: list[SpecSection]

    def section(self, slug: str) -> SpecSection:
        for sec in self.sections:
            if sec.slug == slug:
                return sec
        raise KeyError(slug)

    @property
    def line_count(self) -> int:
        last = 0
        for sec in self.sections:
            if sec.lines:
                last = max(last, sec.lines[-1][0])
        return last


@dataclass(frozen=True)
class Requirement:
    id: str
    modality: str
    text: str
    source: SourceRef
    keywords: frozenset[str]
    content_hash: str

    def to_record(self) -> dict:
        # Key order is the record contract: id, modality, text, source,
        # keywords, content_hash. Keywords sorted for byte-stable output.
        return {
            "id": self.id,
            "modality": self.modality,
            "text": self.text,
            "source": self.source.to_record(),
            "keywords": sorted(self.keywords),
            "content_hash": self.content_hash,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Requirement":
        return cls(
            id=rec["id"],
            modality=rec["modality"],
            text=rec["text"],
            source=SourceRef.from_record(rec["source"]),
            keywords=frozenset(rec["keywords"]),
            content_hash=rec["content_hash"],
        )


@dataclass
class ProgramGraph:
    graph_id: str
    source_requirement_ids: list[str]
    nodes: list[tuple[str, str]]  # (step_id, description)
    edges: list[tuple[str, str, str]]  # (from_step, to_step, kind)
    invariant_annotations: list[tuple[str, str, str]]  # (inv_id, text, step_id)

    def to_record(self) -> dict:
        return {
            "graph_id": self.graph_id,
            "source_requirement_ids": list(self.source_requirement_ids),
            "nodes": [{"step_id": s, "description": d} for s, d in self.nodes],
            "edges": [{"from_step": a, "to_step": b, "kind": k} for a, b, k in self.edges],
            "invariant_annotations": [
                {"inv_id": i, "text": t, "step_id": s} for i, t, s in self.invariant_annotations
            ],
        }


def _slugify(heading: str) -> str:
    slug = re.sub(r"[^A-Z0-9]", "", heading.upper())
    return slug or "SECTION"


def parse_spec_doc(raw: str, doc_id: str) -> SpecDocument:
    """Split a specification document into sections with line numbers."""
    if not _DOC_ID_RE.match(doc_id or ""):
        raise InvalidDocId(f"doc_id {doc_id!r} must match [A-Z0-9]+")
    if not raw or not raw.strip():
        raise EmptyDocument(f"document {doc_id} is empty")

    sections: list[SpecSection] = []
    seen_slugs: dict[str, int] = {}
    current: SpecSection | None = None
    title = ""

    for lineno, line in enumerate(raw.splitlines(), start=1):
        m = _HEADING_RE.match(line)
        if m:
            heading = m.group(2)
            if not title:
                title = heading
            slug = _slugify(heading)
            seen_slugs[slug] = seen_slugs.get(slug, 0) + 1
            if seen_slugs[slug] > 1:
                slug = f"{slug}-{seen_slugs[slug]}"
            current = SpecSection(slug=slug, heading=heading, lines=[])
            sections.append(current)
        else:
            if current is None:
                current = SpecSection(slug="BODY", heading="", lines=[])
                sections.append(current)
            current.lines.append((lineno, line))

    if not sections:
        # A heading-only document still parses; body-less sections remain.
        sections.append(SpecSection(slug="BODY", heading="", lines=[]))
    if not title:
        title = doc_id
    return SpecDocument(doc_id=doc_id, title=title, sections=sections)


def _strip_fenced_blocks(lines: list[tuple[int, str]]) -> list[tuple[int, str]]:
    kept = []
    in_fence = False
    for lineno, text in lines:
        if _FENCE_RE.match(text):
            in_fence = not in_fence
            continue
        if not in_fence:
            kept.append((lineno, text))
    return kept


def _sentences_with_lines(lines: list[tuple[int, str]]) -> list[tuple[str, int, int]]:
    """Split section body into sentences, tracking source line spans."""
    if not lines:
        return []
    # Join with newlines and keep a char-offset -> line-number map.
    offsets: list[tuple[int, int]] = []  # (start_offset, lineno)
    parts: list[str] = []
    pos = 0
    for lineno, text in lines:
        offsets.append((pos, lineno))
        parts.append(text)
        pos += len(text) + 1
    blob = "\n".join(parts)

    def line_at(offset: int) -> int:
        lineno = offsets[0][1]
        for start, ln in offsets:
            if start <= offset:
                lineno = ln
            else:
                break
        return lineno

    results = []
    start = 0
    for match in _SENTENCE_SPLIT_RE.finditer(blob):
        chunk = blob[start:match.start()]
        if chunk.strip():
            results.append((chunk, start, match.start()))
        start = match.end()
    tail = blob[start:]
    if tail.strip():
        results.append((tail, start, len(blob)))

    out = []
    for chunk, s, e in results:
        lstrip = len(chunk) - len(chunk.lstrip())
        text = re.sub(r"\s+", " ", chunk).strip()
        out.append((text, line_at(s + lstrip), line_at(max(s, e - 1))))
    return out


def _detect_modality(sentence: str, lenient: bool) -> str | None:
    regex = _MODAL_RE_LENIENT if lenient else _MODAL_RE_STRICT
    m = regex.search(sentence)
    if not m:
        return None
    modality = _MODALITY_FOR[m.group(1).upper()]
    # Negation precedence: a later "X NOT" of the same verb overrides the
    # bare form, so "MUST ... MUST NOT ..." never classifies as MUST.
    if modality in ("MUST", "SHALL", "SHOULD"):
        verb = m.group(1).upper()
        negated = re.compile(rf"\b{verb} NOT\b", re.IGNORECASE if lenient else 0)
        if negated.search(sentence):
            modality = f"{modality}_NOT"
    return modality


def _topic_map(doc: SpecDocument) -> dict[str, str]:
    """Section slug -> TOPIC (12-char prefix, de-collided in document order)."""
    topics: dict[str, str] = {}
    used: dict[str, int] = {}
    for sec in doc.sections:
        topic = sec.slug[:12]
        used[topic] = used.get(topic, 0) + 1
        if used[topic] > 1:
            topic = f"{topic}-{used[topic]}"
        topics[sec.slug] = topic
    return topics


def extract_requirements(doc: SpecDocument, lenient_modals: bool = False) -> list[Requirement]:
    """One Requirement per sentence containing an RFC 2119 modal verb.

    Fenced code blocks are excluded from sentence scanning; they feed
    program graphs instead. Ids number per (doc_id, TOPIC) in source order.
    """
    topics = _topic_map(doc)
    counters: dict[str, int] = {}
    requirements: list[Requirement] = []
    for sec in doc.sections:
        body = _strip_fenced_blocks(sec.lines)
        for text, line_start, line_end in _sentences_with_lines(body):
            modality = _detect_modality(text, lenient_modals)
            if modality is None:
                continue
            topic = topics[sec.slug]
            counters[topic] = counters.get(topic, 0) + 1
            req_id = f"{doc.doc_id}-{topic}-{counters[topic]:03d}"
            requirements.append(
                Requirement(
                    id=req_id,
                    modality=modality,
                    text=text,
                    source=SourceRef(doc.doc_id, sec.slug, line_start, line_end),
                    keywords=keyword_set(text),
                    content_hash=hashlib.sha256(text.encode("utf-8")).hexdigest()[:16],
                )
            )
    return requirements


def governing_object_tokens(req: Requirement) -> frozenset[str]:
    """Tokens of the obligation clause (text after the modal verb).

    These name what the implementation is obliged to do; the analyzer's
    correctness rule treats their absence near a pattern match as a flag.
    """
    m = _MODAL_RE_STRICT.search(req.text) or _MODAL_RE_LENIENT.search(req.text)
    if not m:
        return frozenset()
    tail = req.text[m.end():]
    return frozenset(t for t in text_tokens(tail) if t not in stopwords())


def enumerated_condition_tokens(req: Requirement) -> frozenset[str]:
    """Enumerated items in the obligation clause ("A, B and C" lists).

    Returns the final word of each comma/'and' fragment; empty when the
    clause carries no enumeration.
    """
    m = _MODAL_RE_STRICT.search(req.text) or _MODAL_RE_LENIENT.search(req.text)
    if not m:
        return frozenset()
    tail = req.text[m.end():].rstrip(".!?;")
    if "," not in tail and " and " not in tail:
        return frozenset()
    fragments = re.split(r",| and ", tail)
    if len(fragments) < 2:
        return frozenset()
    items = set()
    for frag in fragments:
        words = text_tokens(frag)
        if words:
            items.add(words[-1])
    items -= stopwords()
    return frozenset(items)


# --- program graphs ---

_LOOP_RE = re.compile(r"^\s*(for|while|loop|repeat)\b")
_BRANCH_RE = re.compile(r"^\s*(if|else|elif|match)\b")


def _first_fenced_block(section: SpecSection) -> list[str] | None:
    block: list[str] | None = None
    in_fence = False
    for _, text in section.lines:
        if _FENCE_RE.match(text):
            if in_fence:
                return block
            in_fence = True
            block = []
            continue
        if in_fence:
            block.append(text)
    return None


def build_program_graph(
    doc: SpecDocument,
    requirement_ids: list[str],
    graph_number: int = 1,
    lenient_modals: bool = False,
) -> ProgramGraph:
    """Build a step graph from the pseudocode block of the requirements' section."""
    reqs = [r for r in extract_requirements(doc, lenient_modals) if r.id in set(requirement_ids)]
    missing = set(requirement_ids) - {r.id for r in reqs}
    if missing:
        raise KeyError(f"unknown requirement ids: {sorted(missing)}")
    section = doc.section(reqs[0].source.section_slug) if reqs else doc.sections[0]

    block = _first_fenced_block(section)
    if block is None:
        raise NoPseudocode(f"section {section.slug} has no fenced pseudocode block")
    statements = [(line, len(line) - len(line.lstrip())) for line in block if line.strip()]
    if not statements:
        raise NoPseudocode(f"section {section.slug} pseudocode block is empty")

    nodes: list[tuple[str, str]] = []
    edges: list[tuple[str, str, str]] = []
    loop_stack: list[tuple[str, int, str]] = []  # (head step, head indent, last body step)

    for i, (line, indent) in enumerate(statements):
        step_id = f"S{i + 1}"
        nodes.append((step_id, line.strip()))
        # Close loops whose body ended at this dedent.
        while loop_stack and indent <= loop_stack[-1][1]:
            head, _, last = loop_stack.pop()
            if last != head:
                edges.append((last, head, "loop"))
        if i > 0:
            prev_id = f"S{i}"
            kind = "branch" if _BRANCH_RE.match(statements[i - 1][0]) else "seq"
            edges.append((prev_id, step_id, kind))
        if loop_stack and indent > loop_stack[-1][1]:
            head, head_indent, _ = loop_stack[-1]
            loop_stack[-1] = (head, head_indent, step_id)
        if _LOOP_RE.match(line):
            loop_stack.append((step_id, indent, step_id))
    while loop_stack:
        head, _, last = loop_stack.pop()
        if last != head:
            edges.append((last, head, "loop"))

    # Invariants: MUST requirements whose keywords overlap the block text,
    # attached to the step with the strongest token overlap.
    block_tokens = [set(text_tokens(line)) for line, _ in statements]
    annotations: list[tuple[str, str, str]] = []
    inv_n = 0
    all_tokens = set().union(*block_tokens)
    for req in reqs:
        if req.modality not in MUST_FAMILY:
            continue
        if not (req.keywords & all_tokens):
            continue
        best_i = max(range(len(statements)), key=lambda i: len(req.keywords & block_tokens[i]))
        inv_n += 1
        annotations.append((f"INV-{inv_n:03d}", req.text, f"S{best_i + 1}"))

    return ProgramGraph(
        graph_id=f"SG-{graph_number:03d}",
        source_requirement_ids=list(requirement_ids),
        nodes=nodes,
        edges=edges,
        invariant_annotations=annotations,
    )


# --- persistence ---

def export_requirements(reqs: list[Requirement], destination: str | Path) -> None:
    """Write requirements as JSONL, one record per line, in source order."""
    write_jsonl((r.to_record() for r in reqs), destination)


def import_requirements(source: str | Path) -> list[Requirement]:
    return [Requirement.from_record(rec) for rec in read_jsonl(source)]
