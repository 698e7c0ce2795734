"""Keyword index over N implementation source trees.

The index is line-granular: every source line becomes a searchable
location tagged with its enclosing symbol (best-effort, via per-language
header regexes shipped as data). Search scores count how many distinct
query tokens occur within a 10-line window (five lines either side)
around a candidate line, normalized by query size.

No AST parsing, no data flow: keyword + window semantics only.
"""
from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import IndexFailure, UnknownImplementation

WINDOW_RADIUS = 5  # 10-line window around a location

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|[0-9]+")
_CAMEL_RE = re.compile(r"(?<=[a-z])(?=[A-Z])")
_DIGIT_LETTER_RE = re.compile(r"(?<=[0-9])(?=[A-Za-z])")


def tokenize_identifier(ident: str) -> list[str]:
    """Split an identifier into lowercase tokens.

    Splits on underscores, hyphens, digit-to-letter boundaries and
    lowercase-to-uppercase camel boundaries.
    """
    if not ident:
        return []
    tokens: list[str] = []
    for part in re.split(r"[_\-]+", ident):
        if not part:
            continue
        part = _CAMEL_RE.sub(" ", part)
        part = _DIGIT_LETTER_RE.sub(" ", part)
        tokens.extend(p.lower() for p in part.split() if p)
    return tokens


def line_tokens(line: str) -> list[str]:
    """All index tokens on one source line (identifiers split, length >= 2)."""
    out: list[str] = []
    for word in _IDENT_RE.findall(line):
        for tok in tokenize_identifier(word):
            if len(tok) >= 2:
                out.append(tok)
    return out


@dataclass(frozen=True)
class ImplementationRef:
    impl_id: str
    root_path: str
    layer: str = "other"  # CL | EL | other
    display_name: str = ""

    def to_record(self) -> dict:
        return {
            "impl_id": self.impl_id,
            "root_path": self.root_path,
            "layer": self.layer,
            "display_name": self.display_name or self.impl_id,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ImplementationRef":
        return cls(rec["impl_id"], rec["root_path"], rec.get("layer", "other"),
                   rec.get("display_name", ""))


@dataclass(frozen=True)
class CodeLocation:
    impl_id: str
    path: str
    line_start: int
    line_end: int
    symbol: str = ""

    def to_record(self) -> dict:
        return {
            "impl_id": self.impl_id,
            "path": self.path,
            "line_start": self.line_start,
            "line_end": self.line_end,
            "symbol": self.symbol,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "CodeLocation":
        return cls(rec["impl_id"], rec["path"], rec["line_start"],
                   rec["line_end"], rec.get("symbol", ""))


def _load_profiles() -> dict:
    raw = resources.files("speca.data").joinpath("language_profiles.json").read_text("utf-8")
    return json.loads(raw)


class CorpusIndex:
    """Immutable (after build) keyword index over a set of implementations."""

    FORMAT_VERSION = 1

    def __init__(self, implementations: list[ImplementationRef]):
        self.implementations = list(implementations)
        self.files: dict[str, dict[str, list[str]]] = {}  # impl_id -> path -> lines
        self.symbols: dict[str, dict[str, list[str]]] = {}  # enclosing symbol per line
        self.postings: dict[str, list[tuple[str, str, int, int]]] = {}
        self.file_count = 0
        self.token_count = 0
        self._window_cache: dict[tuple[str, str, int], frozenset[str]] = {}

    def impl_ids(self) -> list[str]:
        return [ref.impl_id for ref in self.implementations]

    # --- construction ---

    @staticmethod
    def _file_symbols(lines: list[str], patterns: list[re.Pattern]) -> list[str]:
        symbols = []
        current = ""
        for line in lines:
            for pat in patterns:
                m = pat.match(line)
                if m:
                    current = m.group(1)
                    break
            symbols.append(current)
        return symbols

    def _index_file(self, impl_id: str, root: Path, path: Path, patterns) -> tuple:
        rel = path.relative_to(root).as_posix()
        text = path.read_text("utf-8", errors="replace")
        lines = text.splitlines()
        symbols = self._file_symbols(lines, patterns)
        per_token: dict[str, list[tuple[int, int]]] = {}
        n_tokens = 0
        for lineno, line in enumerate(lines, start=1):
            counts: dict[str, int] = {}
            for tok in line_tokens(line):
                counts[tok] = counts.get(tok, 0) + 1
                n_tokens += 1
            for tok, tf in counts.items():
                per_token.setdefault(tok, []).append((lineno, tf))
        return impl_id, rel, lines, symbols, per_token, n_tokens


def build_index(
    implementations: list[ImplementationRef],
    file_globs: list[str] | None = None,
    exclude_globs: list[str] | None = None,
    max_workers: int = 8,
) -> CorpusIndex:
    """Index every matching source file under every implementation root.

    Deterministic for identical inputs: files are gathered in sorted order
    and postings sorted by (impl_id, path, line_start) after the parallel
    scan.
    """
    profiles = _load_profiles()
    include = file_globs or profiles["default_include_globs"]
    exclude = exclude_globs or profiles["default_exclude_globs"]
    pattern_for_ext: dict[str, list[re.Pattern]] = {}
    for prof in profiles["profiles"]:
        compiled = [re.compile(p) for p in prof["symbol_patterns"]]
        for ext in prof["extensions"]:
            pattern_for_ext[ext] = compiled

    index = CorpusIndex(implementations)
    jobs = []
    for ref in implementations:
        root = Path(ref.root_path)
        if not root.is_dir():
            raise IndexFailure(ref.impl_id, f"root {root} is not a readable directory")
        selected: set[Path] = set()
        for glob in include:
            selected.update(p for p in root.glob(glob) if p.is_file())
        for glob in exclude:
            selected -= set(root.glob(glob))
        for path in sorted(selected):
            jobs.append((ref.impl_id, root, path))

    def run(job):
        impl_id, root, path = job
        patterns = pattern_for_ext.get(path.suffix, [])
        try:
            return index._index_file(impl_id, root, path, patterns)
        except OSError as exc:
            raise IndexFailure(impl_id, f"cannot read {path}: {exc}") from exc

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = list(pool.map(run, jobs))

    for impl_id, rel, lines, symbols, per_token, n_tokens in results:
        index.files.setdefault(impl_id, {})[rel] = lines
        index.symbols.setdefault(impl_id, {})[rel] = symbols
        index.file_count += 1
        index.token_count += n_tokens
        for tok, hits in per_token.items():
            bucket = index.postings.setdefault(tok, [])
            for lineno, tf in hits:
                bucket.append((impl_id, rel, lineno, tf))
    for bucket in index.postings.values():
        bucket.sort(key=lambda t: (t[0], t[1], t[2]))
    return index


# --- queries ---

def _window_tokens(index: CorpusIndex, impl_id: str, path: str, line: int) -> frozenset[str]:
    key = (impl_id, path, line)
    cached = index._window_cache.get(key)
    if cached is not None:
        return cached
    lines = index.files[impl_id][path]
    lo = max(0, line - 1 - WINDOW_RADIUS)
    hi = min(len(lines), line + WINDOW_RADIUS)
    toks = set()
    for text in lines[lo:hi]:
        toks.update(line_tokens(text))
    frozen = frozenset(toks)
    index._window_cache[key] = frozen
    return frozen


def _location_at(index: CorpusIndex, impl_id: str, path: str, line: int) -> CodeLocation:
    symbol = index.symbols[impl_id][path][line - 1] if line - 1 < len(index.symbols[impl_id][path]) else ""
    return CodeLocation(impl_id=impl_id, path=path, line_start=line, line_end=line, symbol=symbol)


def search(
    index: CorpusIndex,
    keywords: frozenset[str] | set[str],
    impl_filter: str | None = None,
    top_k: int = 20,
) -> list[tuple[CodeLocation, float]]:
    """Rank candidate lines by query-token coverage in their window.

    Score = distinct query tokens present within the 10-line window around
    the line, divided by |keywords|. Zero-score candidates never appear.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    query = {k.lower() for k in keywords}
    if not query:
        return []
    candidates: set[tuple[str, str, int]] = set()
    for tok in query:
        for impl_id, path, line, _tf in index.postings.get(tok, ()):
            if impl_filter is not None and impl_id != impl_filter:
                continue
            candidates.add((impl_id, path, line))
    scored = []
    for impl_id, path, line in candidates:
        window = _window_tokens(index, impl_id, path, line)
        hit = len(query & window)
        if hit == 0:
            continue
        scored.append((_location_at(index, impl_id, path, line), hit / len(query)))
    scored.sort(key=lambda pair: (-pair[1], pair[0].path, pair[0].line_start, pair[0].impl_id))
    return scored[:top_k]


def analogous_locations(
    index: CorpusIndex,
    pattern,
    exclude_impl: str,
    per_impl_k: int = 5,
) -> dict[str, list[CodeLocation]]:
    """Per-implementation analogous-location sweep for a pattern.

    Runs the keyword search in every implementation except ``exclude_impl``
    with the pattern's signature keywords. Line hits collapse to one
    location per code site: a hit within one window span of an
    already-kept location in the same file, or sharing its enclosing
    symbol, counts as the same site.
    """
    ids = index.impl_ids()
    if exclude_impl not in ids:
        raise UnknownImplementation(exclude_impl)
    result: dict[str, list[CodeLocation]] = {}
    for impl_id in ids:
        if impl_id == exclude_impl:
            continue
        hits = search(index, pattern.signature_keywords, impl_filter=impl_id, top_k=200)
        best: list[CodeLocation] = []
        seen_symbols: set[tuple[str, str]] = set()
        for loc, _score in hits:
            if loc.symbol and (loc.path, loc.symbol) in seen_symbols:
                continue
            if any(kept.path == loc.path
                   and abs(kept.line_start - loc.line_start) <= 2 * WINDOW_RADIUS
                   for kept in best):
                continue
            if loc.symbol:
                seen_symbols.add((loc.path, loc.symbol))
            best.append(loc)
            if len(best) >= per_impl_k:
                break
        result[impl_id] = best
    return result


def excerpt(index: CorpusIndex, location: CodeLocation, radius: int = WINDOW_RADIUS) -> str:
    """Source text around a location (the same window the scorer uses)."""
    lines = index.files[location.impl_id][location.path]
    lo = max(0, location.line_start - 1 - radius)
    hi = min(len(lines), location.line_end + radius)
    return "\n".join(lines[lo:hi])


def excerpt_tokens(index: CorpusIndex, location: CodeLocation) -> frozenset[str]:
    return _window_tokens(index, location.impl_id, location.path, location.line_start)


# --- persistence ---

def save_index(index: CorpusIndex, destination: str | Path) -> None:
    """Persist the index as a versioned JSON artifact.

    Postings are derived data and are rebuilt on load; the artifact stores
    the scanned lines so excerpt extraction never needs the original tree.
    """
    payload = {
        "format_version": CorpusIndex.FORMAT_VERSION,
        "implementations": [ref.to_record() for ref in index.implementations],
        "files": {impl: dict(sorted(paths.items())) for impl, paths in sorted(index.files.items())},
        "stats": {"file_count": index.file_count, "token_count": index.token_count},
    }
    Path(destination).write_text(
        json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1) + "\n", "utf-8"
    )


def load_index(source: str | Path) -> CorpusIndex:
    payload = json.loads(Path(source).read_text("utf-8"))
    if payload.get("format_version") != CorpusIndex.FORMAT_VERSION:
        raise ValueError(f"unsupported index format: {payload.get('format_version')}")
    profiles = _load_profiles()
    pattern_for_ext: dict[str, list[re.Pattern]] = {}
    for prof in profiles["profiles"]:
        compiled = [re.compile(p) for p in prof["symbol_patterns"]]
        for ext in prof["extensions"]:
            pattern_for_ext[ext] = compiled

    index = CorpusIndex([ImplementationRef.from_record(r) for r in payload["implementations"]])
    for impl_id, paths in payload["files"].items():
        for rel, lines in paths.items():
            patterns = pattern_for_ext.get(Path(rel).suffix, [])
            symbols = CorpusIndex._file_symbols(lines, patterns)
            index.files.setdefault(impl_id, {})[rel] = lines
            index.symbols.setdefault(impl_id, {})[rel] = symbols
            index.file_count += 1
            for lineno, line in enumerate(lines, start=1):
                counts: dict[str, int] = {}
                for tok in line_tokens(line):
                    counts[tok] = counts.get(tok, 0) + 1
                    index.token_count += 1
                for tok, tf in counts.items():
                    index.postings.setdefault(tok, []).append((impl_id, rel, lineno, tf))
    for bucket in index.postings.values():
        bucket.sort(key=lambda t: (t[0], t[1], t[2]))
    return index
