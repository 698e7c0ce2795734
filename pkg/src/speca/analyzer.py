"""Semantic-judgment boundary: one interface, two backends.

The deterministic backend is a rule table over token sets, so the whole
pipeline is reproducible bit-for-bit and every CI test runs without
network access or keys. The remote backend fills prompt templates and
calls a chat-completion-style HTTPS endpoint; its responses are parsed
into the same shapes and cached alongside.

Backend selection, the request cache and the rate limiter all live on the
shared ``AnalyzerHandle``; callers may fan out concurrently.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .code_index import CodeLocation, line_tokens
from .errors import BackendUnavailable
from .spec_extract import (
    Requirement,
    enumerated_condition_tokens,
    governing_object_tokens,
)

ENV_URL = "SPECA_ANALYZER_URL"
ENV_KEY = "SPECA_ANALYZER_KEY"

DEFAULT_MAP_THRESHOLD = 0.5
PRESENCE_COVERAGE_THRESHOLD = 0.5


@dataclass
class CheckVerdict:
    verdict: str  # PASS | FLAG
    confidence: float
    rationale: str

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} out of [0,1]")


class RateLimiter:
    """Sliding-window limiter: at most ``per_minute`` grants in any 60s span."""

    def __init__(self, per_minute: int, clock=time.monotonic, sleeper=time.sleep):
        self.per_minute = per_minute
        self._clock = clock
        self._sleep = sleeper
        self._grants: list[float] = []
        self._lock = threading.Lock()

    def acquire_delay(self) -> float:
        """Record a grant; return how long the caller must wait before acting."""
        with self._lock:
            now = self._clock()
            horizon = now - 60.0
            self._grants = [t for t in self._grants if t > horizon]
            if len(self._grants) < self.per_minute:
                self._grants.append(now)
                return 0.0
            wait = self._grants[0] + 60.0 - now
            granted_at = now + wait
            self._grants = self._grants[1:] + [granted_at]
            return max(wait, 0.0)

    def acquire(self) -> None:
        delay = self.acquire_delay()
        if delay > 0:
            self._sleep(delay)


def _load_templates() -> dict[str, str]:
    templates = {}
    root = resources.files("speca.data.prompts")
    for entry in root.iterdir():
        if entry.name.endswith(".txt"):
            templates[entry.name[:-4]] = entry.read_text("utf-8")
    return templates


class RemoteBackend:
    """Chat-completion-style JSON endpoint client with retries."""

    def __init__(self, base_url: str | None = None, api_key: str | None = None,
                 retries: int = 3, timeout: float = 30.0):
        self.base_url = base_url or os.environ.get(ENV_URL, "")
        self.api_key = api_key or os.environ.get(ENV_KEY, "")
        self.retries = retries
        self.timeout = timeout

    def complete(self, prompt: str) -> str:
        if not self.base_url:
            raise BackendUnavailable(f"{ENV_URL} is not configured")
        import httpx

        payload = {"messages": [{"role": "user", "content": prompt}]}
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        delay = 1.0
        last_error: Exception | None = None
        for _ in range(self.retries):
            try:
                resp = httpx.post(self.base_url, json=payload, headers=headers,
                                  timeout=self.timeout)
                resp.raise_for_status()
                body = resp.json()
                return body["choices"][0]["message"]["content"]
            except Exception as exc:  # transport or schema failure: retry
                last_error = exc
                time.sleep(delay)
                delay *= 2
        raise BackendUnavailable(f"remote analyzer failed after {self.retries} retries: {last_error}")


def _extract_json(text: str):
    """Pull the first JSON value out of a model response; None if unparseable."""
    text = text.strip()
    m = re.search(r"```(?:json)?\s*(.*?)```", text, re.DOTALL)
    if m:
        text = m.group(1).strip()
    start = min((i for i in (text.find("["), text.find("{")) if i >= 0), default=-1)
    if start == -1:
        return None
    try:
        return json.loads(text[start:])
    except json.JSONDecodeError:
        return None


class AnalyzerHandle:
    """Shareable analyzer with request caching and rate limiting.

    ``backend`` is "deterministic" or "remote". Cache keys cover the
    template name, the filled inputs and the backend identity, so two
    identical requests in one run hit the backend once.
    """

    def __init__(self, backend: str = "deterministic",
                 rate_limit_per_minute: int = 60,
                 cache_dir: str | Path | None = None,
                 remote: RemoteBackend | None = None,
                 map_threshold: float = DEFAULT_MAP_THRESHOLD,
                 clock=time.monotonic, sleeper=time.sleep):
        if backend not in ("deterministic", "remote"):
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend
        self.map_threshold = map_threshold
        self.rate_limiter = RateLimiter(rate_limit_per_minute, clock=clock, sleeper=sleeper)
        self.prompt_templates = _load_templates()
        self.cache: dict[str, str] = {}
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.backend_calls = 0
        self._lock = threading.Lock()
        self._remote = remote or RemoteBackend()

    # --- caching plumbing ---

    def _request_hash(self, template: str, fields: dict) -> str:
        blob = json.dumps({"template": template, "fields": fields, "backend": self.backend},
                          sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def _cache_get(self, key: str) -> str | None:
        with self._lock:
            if key in self.cache:
                return self.cache[key]
        if self.cache_dir:
            path = self.cache_dir / f"{key}.json"
            if path.exists():
                value = path.read_text("utf-8")
                with self._lock:
                    self.cache[key] = value
                return value
        return None

    def _cache_put(self, key: str, value: str) -> None:
        with self._lock:
            self.cache[key] = value
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
            (self.cache_dir / f"{key}.json").write_text(value, "utf-8")

    def _call_remote(self, template_name: str, fields: dict) -> str:
        key = self._request_hash(template_name, fields)
        cached = self._cache_get(key)
        if cached is not None:
            return cached
        self.rate_limiter.acquire()
        prompt = self.prompt_templates[template_name].format(**fields)
        with self._lock:
            self.backend_calls += 1
        response = self._remote.complete(prompt)
        self._cache_put(key, response)
        return response

    # --- operations ---

    def refine_mapping(
        self, req: Requirement, candidates: list[tuple[CodeLocation, str]]
    ) -> list[tuple[CodeLocation, float]]:
        """Judge which candidate excerpts genuinely address the requirement.

        Deterministic rule: confidence is the fraction of requirement
        keywords present in the excerpt; candidates below the map threshold
        are dropped. A malformed remote response yields an empty list,
        which callers treat as a degradation signal.
        """
        if len(candidates) > 20:
            raise ValueError("refine_mapping accepts at most 20 candidates")
        if self.backend == "deterministic":
            kept = []
            for loc, text in candidates:
                toks = set(line_tokens(text))
                coverage = len(req.keywords & toks) / len(req.keywords) if req.keywords else 0.0
                if coverage >= self.map_threshold:
                    kept.append((loc, coverage))
            kept.sort(key=lambda p: (-p[1], p[0].path, p[0].line_start))
            return kept

        fields = {
            "requirement": req.text,
            "candidates": json.dumps(
                [{"n": i, "path": loc.path, "line": loc.line_start, "excerpt": text}
                 for i, (loc, text) in enumerate(candidates)],
                ensure_ascii=False),
        }
        parsed = _extract_json(self._call_remote("map_refine", fields))
        if not isinstance(parsed, list):
            return []
        kept = []
        for item in parsed:
            try:
                loc = candidates[int(item["n"])][0]
                conf = float(item["confidence"])
            except (KeyError, ValueError, TypeError, IndexError):
                continue
            if 0.0 <= conf <= 1.0 and conf >= self.map_threshold:
                kept.append((loc, conf))
        kept.sort(key=lambda p: (-p[1], p[0].path, p[0].line_start))
        return kept

    def evaluate_check(self, item, req: Requirement, excerpt_text: str,
                       patterns: list) -> CheckVerdict:
        """Evaluate one checklist item against a code excerpt.

        Deterministic rule table, keyed by the item kind:
          presence      PASS iff keyword coverage >= 0.5
          correctness   FLAG iff a pattern's context keywords (signature
                        minus the requirement's obligation tokens) all occur
                        in the excerpt while none of the obligation tokens do
          completeness  FLAG iff the requirement enumerates conditions and
                        the excerpt misses at least one of them
        """
        if not excerpt_text:
            raise ValueError("excerpt must be non-empty")
        if self.backend == "remote":
            return self._evaluate_remote(item, req, excerpt_text, patterns)

        toks = set(line_tokens(excerpt_text))
        coverage = len(req.keywords & toks) / len(req.keywords) if req.keywords else 0.0
        kind = item.kind

        if kind == "presence":
            if coverage >= PRESENCE_COVERAGE_THRESHOLD:
                return CheckVerdict("PASS", coverage, "keyword coverage meets presence bar")
            return CheckVerdict("FLAG", 1.0 - coverage,
                                f"coverage {coverage:.2f} below presence bar")

        if kind == "correctness":
            objects = governing_object_tokens(req)
            if objects and not (objects & toks):
                for pattern in patterns:
                    context = pattern.signature_keywords - objects
                    if context and context <= toks:
                        return CheckVerdict(
                            "FLAG", 0.8,
                            f"pattern {pattern.pattern_id or pattern.description!r} context "
                            f"present but obligation tokens {sorted(objects)} absent")
            return CheckVerdict("PASS", max(coverage, 0.5), "no pattern context without obligation")

        if kind == "completeness":
            conditions = enumerated_condition_tokens(req)
            missing = sorted(conditions - toks)
            if missing:
                return CheckVerdict("FLAG", 0.8, f"enumerated conditions missing: {missing}")
            return CheckVerdict("PASS", max(coverage, 0.5),
                                "all enumerated conditions present" if conditions
                                else "no enumerated conditions to check")

        raise ValueError(f"unknown checklist kind {kind!r}")

    def _evaluate_remote(self, item, req, excerpt_text, patterns) -> CheckVerdict:
        fields = {
            "kind": item.kind,
            "requirement": req.text,
            "excerpt": excerpt_text,
            "patterns": json.dumps([p.description for p in patterns], ensure_ascii=False),
        }
        parsed = _extract_json(self._call_remote("check_eval", fields))
        if not isinstance(parsed, dict) or parsed.get("verdict") not in ("PASS", "FLAG"):
            # Unusable judgment: fail open to PASS with zero confidence so the
            # caller can notice the degradation.
            return CheckVerdict("PASS", 0.0, "remote response unparseable")
        conf = parsed.get("confidence", 0.5)
        try:
            conf = min(max(float(conf), 0.0), 1.0)
        except (TypeError, ValueError):
            conf = 0.5
        return CheckVerdict(parsed["verdict"], conf, str(parsed.get("rationale", "")))

    def compare_semantic(self, a: str, b: str, criterion: str) -> tuple[bool, str]:
        """Judge whether two descriptions agree on the given criterion.

        The deterministic backend answers exact-tag equality; the remote
        backend is the best-effort semantic judge.
        """
        if not a or not b:
            raise ValueError("both texts must be non-empty")
        if self.backend == "deterministic":
            same = a.strip() == b.strip()
            return same, f"exact {criterion} comparison: {'equal' if same else 'different'}"
        parsed = _extract_json(self._call_remote(
            "semantic_compare", {"a": a, "b": b, "criterion": criterion}))
        if not isinstance(parsed, dict) or "match" not in parsed:
            raise BackendUnavailable("semantic comparison response unparseable")
        return bool(parsed["match"]), str(parsed.get("rationale", ""))
