"""Newline-delimited JSON record helpers.

All pipeline artifacts are JSONL files: one UTF-8 JSON object per line,
field order fixed by the writer so identical inputs produce byte-identical
files.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import WriteFailed


def dump_record(record: dict[str, Any]) -> str:
    """Serialize one record, preserving key insertion order."""
    return json.dumps(record, ensure_ascii=False, separators=(", ", ": "))


def write_jsonl(records: Iterable[dict[str, Any]], destination: str | Path) -> None:
    path = Path(destination)
    try:
        with path.open("w", encoding="utf-8") as fh:
            for record in records:
                fh.write(dump_record(record))
                fh.write("\n")
    except OSError as exc:
        raise WriteFailed(f"cannot write {path}: {exc}") from exc


def read_jsonl(source: str | Path) -> Iterator[dict[str, Any]]:
    path = Path(source)
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)
