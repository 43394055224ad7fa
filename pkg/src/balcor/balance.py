"""Minority-class augmentation plus resampling to exactly equal class counts.

Augmentation is four lexicon-driven token operations (synonym replace,
swap, delete, insert) over a whitespace tokenization. Each operation
touches a bounded number of positions derived from ``per_op_prob`` so
variants stay close to the original. All randomness is derived from
(seed, example id, variant index), which makes output independent of
processing order.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .corpus import Dataset, LabeledExample, Post, class_histogram
from .errors import (
    ConfigError,
    EmptyClass,
    EmptyText,
    InsufficientAugmentation,
)

AUG_OPS = ("synonym_replace", "random_swap", "random_delete", "random_insert")


def _stream(*parts) -> random.Random:
    """Deterministic RNG keyed to an arbitrary tuple of values.

    Built on blake2b rather than hash() so streams are stable across
    processes and Python versions.
    """
    h = hashlib.blake2b("\x1f".join(str(p) for p in parts).encode("utf-8"),
                        digest_size=8)
    return random.Random(int.from_bytes(h.digest(), "big"))


def load_lexicon(path) -> dict[str, list[str]]:
    """Read a synonym lexicon: JSONL of {"word": str, "synonyms": [str]}."""
    lex: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            syns = [s for s in rec.get("synonyms", []) if s]
            if syns:
                lex[str(rec["word"])] = syns
    return lex


@dataclass(frozen=True)
class AugmentationConfig:
    ops: tuple[str, ...] = AUG_OPS
    per_op_prob: float = 0.1
    transforms_per_example: int = 4
    lexicon: Mapping[str, Sequence[str]] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            if op not in AUG_OPS:
                raise ConfigError(f"unknown augmentation op {op!r}")
        if not 0.0 <= self.per_op_prob <= 1.0:
            raise ConfigError(f"per_op_prob must be in [0, 1], got {self.per_op_prob}")
        if self.transforms_per_example < 1:
            raise ConfigError("transforms_per_example must be >= 1")
        needs_lexicon = {"synonym_replace", "random_insert"} & set(self.ops)
        if needs_lexicon and self.per_op_prob > 0 and not self.lexicon:
            raise ConfigError(
                f"ops {sorted(needs_lexicon)} need a nonempty lexicon"
            )


@dataclass(frozen=True)
class BalanceConfig:
    """``target`` is "max", "min", or a fixed positive count."""

    target: Union[str, int] = "max"
    augmentation: AugmentationConfig = field(default_factory=AugmentationConfig)
    allow_duplication: bool = True
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.target, str):
            if self.target not in ("max", "min"):
                raise ConfigError(f"target must be 'max', 'min', or an int, got {self.target!r}")
        elif self.target < 1:
            raise ConfigError("fixed target must be >= 1")


def _budget(prob: float, n_tokens: int) -> int:
    if prob <= 0.0 or n_tokens == 0:
        return 0
    return math.ceil(prob * n_tokens)


def _lookup(lexicon: Mapping[str, Sequence[str]], token: str) -> Optional[Sequence[str]]:
    if token in lexicon:
        return lexicon[token]
    return lexicon.get(token.lower())


def _synonym_replace(tokens, rng, cfg):
    n = _budget(cfg.per_op_prob, len(tokens))
    eligible = [i for i, t in enumerate(tokens) if _lookup(cfg.lexicon, t)]
    rng.shuffle(eligible)
    for i in eligible[:n]:
        tokens[i] = rng.choice(list(_lookup(cfg.lexicon, tokens[i])))
    return tokens


def _random_swap(tokens, rng, cfg):
    n = _budget(cfg.per_op_prob, len(tokens))
    if n == 0 or len(tokens) < 2:
        return tokens
    # each swap touches two positions; halve the budget to stay bounded
    for _ in range(max(1, n // 2)):
        i, j = rng.sample(range(len(tokens)), 2)
        tokens[i], tokens[j] = tokens[j], tokens[i]
    return tokens


def _random_delete(tokens, rng, cfg):
    n = _budget(cfg.per_op_prob, len(tokens))
    n = min(n, len(tokens) - 1)  # never delete the whole text
    for _ in range(n):
        del tokens[rng.randrange(len(tokens))]
    return tokens


def _random_insert(tokens, rng, cfg):
    n = _budget(cfg.per_op_prob, len(tokens))
    for _ in range(n):
        eligible = [t for t in tokens if _lookup(cfg.lexicon, t)]
        if not eligible:
            break
        word = rng.choice(eligible)
        syn = rng.choice(list(_lookup(cfg.lexicon, word)))
        tokens.insert(rng.randrange(len(tokens) + 1), syn)
    return tokens


_OP_FUNCS = {
    "synonym_replace": _synonym_replace,
    "random_swap": _random_swap,
    "random_delete": _random_delete,
    "random_insert": _random_insert,
}


def augment_text(text: str, config: AugmentationConfig,
                 stream_key: Optional[str] = None) -> list[str]:
    """Produce exactly ``transforms_per_example`` variants of ``text``.

    Deterministic for a given (text, config). ``stream_key`` substitutes
    for the text in the RNG derivation so callers can key randomness to
    an example id instead.
    """
    if not text or not text.strip():
        raise EmptyText("cannot augment empty text")
    key = stream_key if stream_key is not None else text
    variants = []
    for k in range(config.transforms_per_example):
        rng = _stream("aug", config.seed, key, k)
        tokens = text.split()
        for op in AUG_OPS:  # fixed application order
            if op in config.ops:
                tokens = _OP_FUNCS[op](tokens, rng, config)
        variants.append(" ".join(tokens))
    return variants


def resolve_target(histogram: Mapping[int, int], target: Union[str, int]) -> int:
    if target == "max":
        return max(histogram.values())
    if target == "min":
        return min(histogram.values())
    return int(target)


def balance(dataset: Dataset, config: BalanceConfig, force: bool = False) -> Dataset:
    """Return a dataset where every class has exactly the target count.

    Minority classes are filled first with augmentation variants (ids
    ``<orig>#aug<k>``), then with verbatim duplicates when allowed.
    Majority classes are reduced by seeded uniform undersampling.
    Balancing evaluation splits leaks augmented near-duplicates into the
    metrics, so those splits are rejected unless ``force`` is set.
    """
    if dataset.split in ("validation", "test") and not force:
        raise ConfigError(
            f"refusing to balance the {dataset.split!r} split (use force=True to override)"
        )
    hist = class_histogram(dataset)
    for label in dataset.task.labels:
        if hist.get(label, 0) == 0:
            raise EmptyClass(f"class {label} has no examples")
    target = resolve_target(hist, config.target)

    by_class: dict[int, list[int]] = {label: [] for label in dataset.task.labels}
    for idx, ex in enumerate(dataset):
        by_class[ex.label].append(idx)

    kept: list[int] = []
    synthetic: list[LabeledExample] = []
    for label in dataset.task.labels:
        idxs = by_class[label]
        if len(idxs) > target:
            rng = np.random.default_rng(
                _stream("under", config.seed, label).getrandbits(64))
            chosen = rng.choice(len(idxs), size=target, replace=False)
            kept.extend(idxs[i] for i in sorted(chosen))
            continue
        kept.extend(idxs)
        deficit = target - len(idxs)
        if deficit == 0:
            continue
        originals = [dataset.examples[i] for i in idxs]
        variants = {
            ex.id: augment_text(ex.text, config.augmentation, stream_key=ex.id)
            for ex in originals
        }
        counters = {ex.id: 0 for ex in originals}

        def take(ex, text):
            counters[ex.id] += 1
            synthetic.append(LabeledExample(
                post=Post(
                    id=f"{ex.id}#aug{counters[ex.id]}",
                    text=text,
                    source=ex.post.source,
                    meta=ex.post.meta,
                ),
                label=ex.label,
            ))

        made = 0
        for round_i in range(config.augmentation.transforms_per_example):
            for ex in originals:
                if made == deficit:
                    break
                take(ex, variants[ex.id][round_i])
                made += 1
            if made == deficit:
                break
        if made < deficit:
            if not config.allow_duplication:
                raise InsufficientAugmentation(
                    f"class {label}: need {deficit} synthetic examples but augmentation "
                    f"can yield only {made}; enable allow_duplication or raise "
                    f"transforms_per_example"
                )
            i = 0
            while made < deficit:
                take(originals[i % len(originals)], originals[i % len(originals)].text)
                made += 1
                i += 1

    examples = [dataset.examples[i] for i in sorted(kept)] + synthetic
    return dataset.with_examples(examples)
