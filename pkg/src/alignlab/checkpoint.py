"""Checkpoint files.

Layout::

    ALIGNLAB-CKPT v1
    meta <key> <value>                      (zero or more)
    tensor <name> float32 <d0,d1,...> <byte offset>
    ...
    end
    <raw float32 little-endian row-major payloads>

Offsets are relative to the first payload byte.
"""
from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import FormatError

HEADER = "ALIGNLAB-CKPT v1"


def save_checkpoint(path: str | Path, tensors: Mapping[str, np.ndarray], meta: Mapping[str, object]) -> None:
    lines = [HEADER]
    for key, value in meta.items():
        if " " in str(key) or "\n" in str(value):
            raise ValueError(f"bad meta entry {key!r}")
        lines.append(f"meta {key} {value}")
    offset = 0
    blobs = []
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        dims = ",".join(str(d) for d in arr.shape)
        lines.append(f"tensor {name} float32 {dims} {offset}")
        blob = arr.tobytes()
        blobs.append(blob)
        offset += len(blob)
    lines.append("end")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    meta: dict[str, str] = {}
    entries = []
    pos = 0
    first = True
    while True:
        nl = raw.find(b"\n", pos)
        if nl < 0:
            raise FormatError(f"{path}: truncated manifest")
        line = raw[pos:nl].decode("ascii", errors="replace")
        pos = nl + 1
        if first:
            if line != HEADER:
                raise FormatError(f"{path}: not an {HEADER} file")
            first = False
            continue
        if line == "end":
            break
        parts = line.split(" ")
        if parts[0] == "meta" and len(parts) >= 3:
            meta[parts[1]] = " ".join(parts[2:])
        elif parts[0] == "tensor" and len(parts) == 5 and parts[2] == "float32":
            shape = tuple(int(d) for d in parts[3].split(",")) if parts[3] else ()
            entries.append((parts[1], shape, int(parts[4])))
        else:
            raise FormatError(f"{path}: bad manifest line {line!r}")
    payload = raw[pos:]
    tensors = {}
    for name, shape, off in entries:
        n = int(np.prod(shape)) * 4
        if off + n > len(payload):
            raise FormatError(f"{path}: tensor {name} runs past end of file")
        tensors[name] = np.frombuffer(payload, dtype="<f4", count=n // 4, offset=off).reshape(shape).astype(np.float32)
    return meta, tensors
