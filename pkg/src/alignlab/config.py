"""Plain ``key = value`` config files and run manifests."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Mapping

from .errors import FormatError


def read_config(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines. ``#`` starts a comment; keys may use ``-`` or ``_``."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise FormatError(f"{path}:{lineno}: empty key")
            out[key.replace("-", "_")] = value
    return out


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def path_digests(paths: Iterable[str | Path]) -> dict[str, str]:
    """sha256 per input; directories contribute every regular file inside them."""
    out: dict[str, str] = {}
    for p in paths:
        p = Path(p)
        if p.is_dir():
            for f in sorted(q for q in p.rglob("*") if q.is_file() and q.name != "run_manifest.json"):
                out[str(f)] = file_digest(f)
        elif p.is_file():
            out[str(p)] = file_digest(p)
    return out


def write_manifest(path: str | Path, command: str, config: Mapping[str, object],
                   inputs: Iterable[str | Path]) -> None:
    """Record the resolved configuration and input digests. No timestamps, so reruns match."""
    doc = {
        "command": command,
        "config": {k: config[k] for k in sorted(config)},
        "inputs": path_digests(inputs),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
