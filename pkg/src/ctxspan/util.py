"""Small shared helpers: canonical JSON, config hashing, jsonl I/O."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import DataError, StoreError

FORMAT_VERSIONS = {
    "chunk-store": 1,
    "bm25-index": 1,
    "predictions": 1,
    "report": 1,
    "sweep": 1,
}


def canonical_json(obj: Any) -> str:
    """Serialize deterministically: sorted keys, compact, raw unicode."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def config_hash(params: dict) -> str:
    """Stable 16-hex-digit fingerprint of a resolved parameter set."""
    digest = hashlib.sha256(canonical_json(params).encode("utf-8")).hexdigest()
    return digest[:16]


def read_jsonl(path: str | Path) -> Iterator[dict]:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    except OSError as exc:
        raise StoreError(f"cannot read {path}: {exc}") from exc


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    """Write records atomically; either the full file lands or nothing does."""
    text = "".join(canonical_json(rec) + "\n" for rec in records)
    atomic_write_text(path, text)


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            os.chmod(tmp, 0o644)  # mkstemp defaults to 0600
            os.replace(tmp, path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise
    except OSError as exc:
        raise StoreError(f"cannot write {path}: {exc}") from exc
