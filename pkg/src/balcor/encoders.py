"""Pluggable text encoders.

The pipeline treats encoding as a black box: ``encode(text)`` returns a
fixed-length float vector, deterministically. Transformer models plug in
behind the same protocol; the package itself ships a dependency-free
feature-hashing encoder so the full pipeline is testable offline.
"""

from __future__ import annotations

import hashlib
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import BackendFailure


@runtime_checkable
class EncoderBackend(Protocol):
    identifier: str

    def encode(self, text: str) -> np.ndarray: ...

    def dim(self) -> int: ...


class HashingEncoder:
    """Signed feature-hashed bag of words, L2-normalized.

    Tokens are whitespace-split (optionally lowercased) and hashed with
    blake2b, which is stable across processes — Python's built-in hash()
    is randomized and would break run-to-run determinism.
    """

    def __init__(self, dim: int = 256, salt: str = "", lowercase: bool = True):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self._dim = dim
        self.salt = salt
        self.lowercase = lowercase
        self.identifier = f"hashing-bow-{dim}"
        self._memo: dict[str, tuple[int, float]] = {}

    def dim(self) -> int:
        return self._dim

    def _slot(self, token: str) -> tuple[int, float]:
        cached = self._memo.get(token)
        if cached is None:
            h = hashlib.blake2b((self.salt + token).encode("utf-8"), digest_size=8)
            v = int.from_bytes(h.digest(), "big")
            cached = (v % self._dim, 1.0 if v & (1 << 63) else -1.0)
            self._memo[token] = cached
        return cached

    def encode(self, text: str) -> np.ndarray:
        vec = np.zeros(self._dim)
        tokens = text.lower().split() if self.lowercase else text.split()
        for token in tokens:
            bucket, sign = self._slot(token)
            vec[bucket] += sign
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec

    def config(self) -> dict:
        return {"kind": "hashing", "dim": self._dim, "salt": self.salt,
                "lowercase": self.lowercase}


class CallableEncoder:
    """Adapter turning any ``text -> vector`` function into a backend."""

    def __init__(self, fn: Callable[[str], np.ndarray], dim: int, identifier: str):
        self._fn = fn
        self._dim = dim
        self.identifier = identifier

    def dim(self) -> int:
        return self._dim

    def encode(self, text: str) -> np.ndarray:
        return np.asarray(self._fn(text), dtype=float)

    def config(self) -> dict:
        raise BackendFailure(
            f"encoder {self.identifier!r} is not serializable; wrap it in a "
            "registered backend to checkpoint models"
        )


def encode(backend: EncoderBackend, text: str) -> np.ndarray:
    """Encode one text, validating the backend's output contract."""
    try:
        vec = np.asarray(backend.encode(text), dtype=float)
    except Exception as exc:
        raise BackendFailure(f"encoder {backend.identifier!r} failed: {exc}") from exc
    if vec.ndim != 1 or vec.shape[0] != backend.dim():
        raise BackendFailure(
            f"encoder {backend.identifier!r} returned shape {vec.shape}, "
            f"expected ({backend.dim()},)"
        )
    if not np.all(np.isfinite(vec)):
        raise BackendFailure(f"encoder {backend.identifier!r} returned non-finite values")
    return vec


def encode_batch(backend: EncoderBackend, texts: Sequence[str]) -> np.ndarray:
    if not texts:
        return np.zeros((0, backend.dim()))
    return np.stack([encode(backend, t) for t in texts])


def encoder_from_config(cfg: dict) -> EncoderBackend:
    kind = cfg.get("kind")
    if kind == "hashing":
        return HashingEncoder(dim=int(cfg["dim"]), salt=cfg.get("salt", ""),
                              lowercase=bool(cfg.get("lowercase", True)))
    raise BackendFailure(f"unknown encoder kind {kind!r}")


def make_encoder(spec: str) -> EncoderBackend:
    """Parse a CLI encoder spec like ``hashing:256``."""
    kind, _, arg = spec.partition(":")
    if kind == "hashing":
        return HashingEncoder(dim=int(arg) if arg else 256)
    raise BackendFailure(f"unknown encoder spec {spec!r}")
