"""Run artifacts: atomic JSON reports, manifests, and dense-matrix CSV.

Every CLI run leaves a ``manifest.json`` next to its outputs recording the
command, configuration, seeds, input digests, and produced files, so a result
can be traced back to exactly what made it.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import tempfile
from datetime import datetime, timezone

import numpy as np

MANIFEST_SCHEMA_VERSION = 1
MATRIX_SCHEMA_VERSION = 1


def write_json_atomic(path, payload: dict) -> None:
    """Serialize ``payload`` to ``path`` via a same-directory temp file + rename.

    A crash mid-write leaves either the old file or nothing, never a torn one.
    """
    directory = os.path.dirname(os.path.abspath(path)) or "."
    text = json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n"
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return _plain(dataclasses.asdict(value))
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def build_manifest(command: str, config: dict, seeds: dict | None = None,
                   inputs: dict | None = None, outputs: list | None = None,
                   extra: dict | None = None) -> dict:
    """Assemble a manifest dict; ``inputs`` maps labels to existing file paths."""
    from . import __version__

    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "tool": "topotrack",
        "tool_version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "command": command,
        "config": _plain(config),
        "seeds": _plain(seeds or {}),
        "inputs": {label: {"path": str(p), "sha256": file_sha256(p)}
                   for label, p in (inputs or {}).items()},
        "outputs": [str(p) for p in (outputs or [])],
    }
    if extra:
        manifest["extra"] = _plain(extra)
    return manifest


def write_manifest(path, command: str, config: dict, **kwargs) -> dict:
    manifest = build_manifest(command, config, **kwargs)
    write_json_atomic(path, manifest)
    return manifest


def save_matrix_csv(path, matrix: np.ndarray) -> None:
    """Write a dense matrix as CSV with full-precision floats."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ValueError(f"dimension error: expected a 2-d matrix, got {matrix.ndim}-d")
    lines = [f"# topotrack matrix v{MATRIX_SCHEMA_VERSION} shape={matrix.shape[0]}x{matrix.shape[1]}"]
    for row in matrix:
        lines.append(",".join(repr(float(x)) for x in row))
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    """Read a matrix written by :func:`save_matrix_csv`."""
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(cell) for cell in line.split(",")])
            except ValueError:
                raise ValueError(f"data error: non-numeric matrix row in {path}: {line!r}") from None
    if not rows:
        raise ValueError(f"data error: no matrix rows in {path}")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"data error: ragged matrix rows in {path} (widths {sorted(widths)})")
    return np.asarray(rows, dtype=float)
