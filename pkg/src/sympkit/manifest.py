"""Run manifests: content hashes for a stage's inputs and outputs.

Manifests record file basenames and SHA-256 digests only, never
absolute paths or timestamps, so the same pipeline run in two different
directories produces byte-identical manifest files.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Mapping

from . import __version__

_CHUNK = 1 << 20


def file_digest(path: str | Path) -> str:
    """Streaming SHA-256 hex digest of a file."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        while chunk := handle.read(_CHUNK):
            digest.update(chunk)
    return digest.hexdigest()


def _describe(files: Mapping[str, str | Path]) -> dict[str, dict[str, str]]:
    return {
        name: {"file": Path(p).name, "sha256": file_digest(p)}
        for name, p in sorted(files.items())
    }


def write_manifest(
    path: str | Path,
    stage: str,
    inputs: Mapping[str, str | Path],
    outputs: Mapping[str, str | Path],
    seeds: Mapping[str, int] | None = None,
) -> dict:
    """Write and return the manifest for one pipeline stage."""
    payload = {
        "stage": stage,
        "version": __version__,
        "inputs": _describe(inputs),
        "outputs": _describe(outputs),
        "seeds": {k: int(v) for k, v in sorted((seeds or {}).items())},
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return payload
