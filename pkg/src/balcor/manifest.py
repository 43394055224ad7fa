"""Run manifests: every CLI stage records what went in and what came out.

A manifest pins the stage name, the exact config (and its hash), and
sha256 digests of all input and output files, which is enough to check
that a re-run reproduced a stage byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Mapping


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config: Mapping) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(stage: str, config: Mapping, inputs: Mapping[str, str],
                   outputs: Mapping[str, str], manifest_path=None) -> str:
    """Write ``<first output>.manifest.json`` (or ``manifest_path``)."""
    if manifest_path is None:
        first = next(iter(outputs.values()))
        manifest_path = f"{first}.manifest.json"
    doc = {
        "stage": stage,
        "config": dict(config),
        "config_hash": config_hash(config),
        "inputs": {name: {"path": str(p), "sha256": sha256_file(p)}
                   for name, p in inputs.items()},
        "outputs": {name: {"path": str(p), "sha256": sha256_file(p)}
                    for name, p in outputs.items()},
    }
    Path(manifest_path).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return str(manifest_path)
