"""Exact 2-D stochastic neighbor embedding for class-separation diagnostics.

Input affinities are Gaussian with per-point bandwidths binary-searched
to a target perplexity; output affinities are Student-t; optimization
is gradient descent with momentum (0.5, then 0.8 after the early
exaggeration phase). Everything is deterministic per seed, with the
per-point initialization keyed to a point's identity so permuting the
input permutes the output.

The O(n^2) kernels come in two interchangeable flavors: a compiled
Cython module (used when built) and a pure-numpy fallback. Set
BALCOR_PROJECTION_BACKEND=numpy|compiled to force one; see
benchmarks/bench_projection.py for the speed comparison.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import DimensionMismatch, IoError, PerplexityTooLarge
from . import _kernels_np


def _load_compiled():
    from . import _kernels_cy  # noqa: F401 -- import fails if not built
    return _kernels_cy


def get_kernels(name: Optional[str] = None):
    """Kernel module by name; default honors the env override."""
    if name is None:
        name = os.environ.get("BALCOR_PROJECTION_BACKEND", "").strip() or None
    if name == "numpy":
        return _kernels_np
    if name == "compiled":
        return _load_compiled()
    if name is None:
        try:
            return _load_compiled()
        except ImportError:
            return _kernels_np
    raise ValueError(f"unknown projection backend {name!r}")


_kernels = get_kernels()
BACKEND = _kernels.NAME

P_FLOOR = 1e-12  # keeps zero-distance duplicates out of log()/division


@dataclass(frozen=True)
class ProjectionConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    learning_rate: float = 200.0
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    momentum_switch: int = 250
    seed: int = 0
    bandwidth_tol: float = 1e-5
    bandwidth_max_iter: int = 50

    def __post_init__(self):
        if self.perplexity < 1:
            raise PerplexityTooLarge("perplexity must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")


@dataclass(frozen=True)
class TsneResult:
    coords: np.ndarray  # (n, 2)
    kl_initial: float
    kl_final: float
    effective_perplexity: float
    backend: str


def joint_affinities(X: np.ndarray, perplexity: float, tol: float = 1e-5,
                     max_iter: int = 50, kernels=None) -> np.ndarray:
    """Symmetrized, floored, normalized input affinity matrix."""
    kern = kernels or _kernels
    D2 = kern.pairwise_sq_dists(np.ascontiguousarray(X, dtype=float))
    cond, _ = kern.conditional_affinities(D2, float(np.log(perplexity)), tol, max_iter)
    P = (cond + cond.T) / (2.0 * X.shape[0])
    off_diag = ~np.eye(X.shape[0], dtype=bool)
    P[off_diag] = np.maximum(P[off_diag], P_FLOOR)
    return P / P.sum()


def _seeded_init(n: int, seed: int, init_keys: Optional[Sequence[int]]) -> np.ndarray:
    """sigma=1e-4 Gaussian start, one RNG stream per point identity."""
    keys = range(n) if init_keys is None else init_keys
    if init_keys is not None and len(init_keys) != n:
        raise DimensionMismatch(f"{len(init_keys)} init keys for {n} points")
    Y = np.empty((n, 2))
    base = seed & 0xFFFFFFFFFFFFFFFF
    for i, key in enumerate(keys):
        rng = np.random.default_rng([base, int(key) & 0xFFFFFFFFFFFFFFFF])
        Y[i] = rng.normal(0.0, 1e-4, size=2)
    return Y


def tsne(embeddings, config: ProjectionConfig = ProjectionConfig(),
         init_keys: Optional[Sequence[int]] = None) -> TsneResult:
    """Project n embeddings to n x 2 coordinates.

    ``init_keys`` optionally names each point for the initialization
    stream (defaults to input position); passing stable keys makes the
    projection equivariant under input reordering.
    """
    try:
        X = np.asarray(embeddings, dtype=float)
    except ValueError as exc:  # ragged input
        raise DimensionMismatch(f"embeddings have inconsistent dimensions: {exc}")
    if X.ndim != 2:
        raise DimensionMismatch(f"embeddings must be 2-D, got shape {X.shape}")
    n = X.shape[0]
    if n == 0:
        raise DimensionMismatch("need at least one embedding")
    if n == 1:
        return TsneResult(coords=np.zeros((1, 2)), kl_initial=0.0, kl_final=0.0,
                          effective_perplexity=config.perplexity, backend=BACKEND)

    perplexity = min(config.perplexity, (n - 1) / 3.0)
    if perplexity < 1.0:
        raise PerplexityTooLarge(
            f"{n} points support a perplexity of at most {(n - 1) / 3.0:.2f}")

    P = joint_affinities(X, perplexity, config.bandwidth_tol, config.bandwidth_max_iter)
    Y = _seeded_init(n, config.seed, init_keys)
    kl_initial = float(_kernels.kl_divergence(P, Y, P_FLOOR))

    velocity = np.zeros_like(Y)
    for it in range(config.iterations):
        exaggerate = it < config.exaggeration_iters
        P_eff = P * config.early_exaggeration if exaggerate else P
        grad = np.asarray(_kernels.gradient(P_eff, Y))
        momentum = (config.momentum_early if it < config.momentum_switch
                    else config.momentum_late)
        velocity = momentum * velocity - config.learning_rate * grad
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)

    if not np.all(np.isfinite(Y)):
        raise IoError("projection produced non-finite coordinates")
    kl_final = float(_kernels.kl_divergence(P, Y, P_FLOOR)) if config.iterations else kl_initial
    return TsneResult(coords=Y, kl_initial=kl_initial, kl_final=kl_final,
                      effective_perplexity=perplexity, backend=BACKEND)


def export_scatter(coords, path_base, labels: Optional[Sequence[int]] = None,
                   ids: Optional[Sequence[str]] = None,
                   label_names: Optional[dict] = None) -> tuple[str, str]:
    """Write ``<path_base>.json`` and ``<path_base>.svg``.

    The JSON carries one {"id", "x", "y", "label"} entry per point; the
    SVG is a color-per-label scatter with a legend (single color and no
    legend when labels are absent). Non-finite coordinates are rejected
    before anything is written.
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise IoError(f"coords must be (n, 2), got {coords.shape}")
    if not np.all(np.isfinite(coords)):
        raise IoError("coords contain non-finite values")
    n = coords.shape[0]
    if labels is not None and len(labels) != n:
        raise IoError(f"{len(labels)} labels for {n} points")
    if ids is None:
        ids = [str(i) for i in range(n)]

    points = []
    for i in range(n):
        points.append({
            "id": str(ids[i]),
            "x": float(coords[i, 0]),
            "y": float(coords[i, 1]),
            "label": None if labels is None else int(labels[i]),
        })
    json_path = f"{path_base}.json"
    svg_path = f"{path_base}.svg"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump({"points": points}, fh)
        fh.write("\n")

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "balcor"  # deterministic svg ids
    fig, ax = plt.subplots(figsize=(6, 6))
    if labels is None:
        ax.scatter(coords[:, 0], coords[:, 1], s=12)
    else:
        for lab in sorted(set(int(l) for l in labels)):
            mask = np.array([int(l) == lab for l in labels])
            name = str(label_names.get(lab, lab)) if label_names else str(lab)
            ax.scatter(coords[mask, 0], coords[mask, 1], s=12, label=name)
        ax.legend(loc="best")
    ax.set_xticks([])
    ax.set_yticks([])
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return json_path, svg_path
