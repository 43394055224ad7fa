"""Dataset schema, ingestion, splitting, and class-distribution inspection.

The interchange format is JSON Lines with keys ``id``/``text``/``label``
(``label`` may be absent for inference-only data). CSV and TSV are
accepted on ingest only; everything downstream reads and writes JSONL.
Text is preserved verbatim: no lowercasing, no URL stripping — encoder
preprocessing is the encoder's business.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from .errors import (
    BadRatios,
    DuplicateId,
    MalformedRecord,
    UnknownLabel,
    UnlabeledDataset,
)

SOURCES = frozenset({"twitter", "reddit", "other"})
SPLITS = ("train", "validation", "test", "unsplit")
CORRECTION_MODES = ("flip_binary", "to_majority")


@dataclass(frozen=True)
class Post:
    """One social-media post. ``text`` is raw unicode, kept verbatim."""

    id: str
    text: str
    source: str = "other"
    meta: Optional[Mapping[str, str]] = None

    def __post_init__(self):
        if not self.id:
            raise MalformedRecord("<memory>", 0, "post id must be nonempty")
        if not self.text.strip():
            raise MalformedRecord("<memory>", 0, f"post {self.id!r}: empty text")
        if self.source not in SOURCES:
            raise MalformedRecord(
                "<memory>", 0, f"post {self.id!r}: unknown source {self.source!r}"
            )


@dataclass(frozen=True)
class TaskSpec:
    """Label set plus verification-scope and correction-target rules.

    ``report_label`` is the class whose F1 is the headline number for
    binary tasks. ``verify_scope`` is the set of predicted labels the
    verdict stage is allowed to examine; predictions outside it are
    never sent to the verifier. ``correction_mode`` decides what a
    "false" verdict does: flip to the other label (binary only) or
    convert to ``majority_label``.
    """

    task_id: str
    labels: tuple[int, ...]
    report_label: int = 1
    verify_scope: frozenset[int] = frozenset()
    correction_mode: str = "flip_binary"
    majority_label: Optional[int] = None
    label_names: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "verify_scope", frozenset(self.verify_scope))
        if len(set(labels)) != len(labels) or not labels:
            raise ValueError(f"task {self.task_id!r}: labels must be nonempty and unique")
        if self.report_label not in labels:
            raise ValueError(f"report_label {self.report_label} not in labels {labels}")
        if not self.verify_scope <= set(labels):
            raise ValueError(f"verify_scope {set(self.verify_scope)} not within labels")
        if self.correction_mode not in CORRECTION_MODES:
            raise ValueError(f"unknown correction_mode {self.correction_mode!r}")
        if self.correction_mode == "flip_binary" and len(labels) != 2:
            raise ValueError("flip_binary requires exactly two labels")
        if self.correction_mode == "to_majority":
            if self.majority_label is None or self.majority_label not in labels:
                raise ValueError("to_majority requires majority_label in labels")
            if self.majority_label in self.verify_scope:
                raise ValueError("majority_label must not be in verify_scope")

    @property
    def n_classes(self) -> int:
        return len(self.labels)

    def label_index(self, label: int) -> int:
        return self.labels.index(label)

    def label_name(self, label: int) -> str:
        return str(self.label_names.get(label, label))

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "labels": [
                {"id": lab, "name": self.label_name(lab)} for lab in self.labels
            ],
            "report_label": self.report_label,
            "verify_scope": sorted(self.verify_scope),
            "correction_mode": self.correction_mode,
            "majority_label": self.majority_label,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TaskSpec":
        raw_labels = d["labels"]
        ids, names = [], {}
        for entry in raw_labels:
            if isinstance(entry, Mapping):
                ids.append(int(entry["id"]))
                if "name" in entry:
                    names[int(entry["id"])] = str(entry["name"])
            else:
                ids.append(int(entry))
        return cls(
            task_id=str(d["task_id"]),
            labels=tuple(ids),
            report_label=int(d.get("report_label", ids[-1])),
            verify_scope=frozenset(int(x) for x in d.get("verify_scope", ())),
            correction_mode=d.get("correction_mode", "flip_binary"),
            majority_label=(
                None if d.get("majority_label") is None else int(d["majority_label"])
            ),
            label_names=names,
        )

    @classmethod
    def from_file(cls, path) -> "TaskSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class LabeledExample:
    post: Post
    label: Optional[int] = None

    @property
    def id(self) -> str:
        return self.post.id

    @property
    def text(self) -> str:
        return self.post.text


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of examples under one TaskSpec."""

    task: TaskSpec
    examples: tuple[LabeledExample, ...]
    split: str = "unsplit"

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        seen = set()
        valid = set(self.task.labels)
        for ex in self.examples:
            if ex.id in seen:
                raise DuplicateId(f"duplicate example id {ex.id!r}")
            seen.add(ex.id)
            if ex.label is not None and ex.label not in valid:
                raise UnknownLabel(
                    f"example {ex.id!r}: label {ex.label} not in task labels {self.task.labels}"
                )

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self) -> Iterator[LabeledExample]:
        return iter(self.examples)

    @property
    def is_labeled(self) -> bool:
        return all(ex.label is not None for ex in self.examples)

    def labels_array(self) -> np.ndarray:
        if not self.is_labeled:
            raise UnlabeledDataset("dataset has unlabeled examples")
        return np.array([ex.label for ex in self.examples], dtype=np.int64)

    def with_examples(self, examples: Iterable[LabeledExample], split=None) -> "Dataset":
        return Dataset(self.task, tuple(examples), split or self.split)


def _record_to_example(rec: Mapping, task: TaskSpec, path, line_no) -> LabeledExample:
    if "id" not in rec or "text" not in rec:
        raise MalformedRecord(path, line_no, "record needs 'id' and 'text'")
    rid = str(rec["id"])
    text = rec["text"]
    if not isinstance(text, str) or not text.strip():
        raise MalformedRecord(path, line_no, f"record {rid!r}: empty or non-string text")
    label = rec.get("label")
    if label is not None:
        try:
            label = int(label)
        except (TypeError, ValueError):
            raise MalformedRecord(path, line_no, f"record {rid!r}: non-integer label {label!r}")
        if label not in task.labels:
            raise UnknownLabel(
                f"{path}:{line_no}: label {label} not in task labels {task.labels}"
            )
    meta = rec.get("meta")
    post = Post(
        id=rid,
        text=text,
        source=rec.get("source", "other"),
        meta=dict(meta) if meta else None,
    )
    return LabeledExample(post=post, label=label)


def load_dataset(path, task: TaskSpec, format: Optional[str] = None,
                 split: str = "unsplit") -> Dataset:
    """Read a dataset file. ``format`` is inferred from the suffix if omitted.

    Raises MalformedRecord / UnknownLabel / DuplicateId with the
    offending line number in the message. Row order is preserved.
    """
    path = Path(path)
    if format is None:
        format = {".jsonl": "jsonl", ".json": "jsonl", ".csv": "csv", ".tsv": "tsv"}.get(
            path.suffix.lower(), "jsonl"
        )
    if format not in ("jsonl", "csv", "tsv"):
        raise ValueError(f"unknown format {format!r}")

    examples: list[LabeledExample] = []
    seen: set[str] = set()

    def add(rec, line_no):
        ex = _record_to_example(rec, task, path, line_no)
        if ex.id in seen:
            raise DuplicateId(f"{path}:{line_no}: duplicate id {ex.id!r}")
        seen.add(ex.id)
        examples.append(ex)

    with open(path, encoding="utf-8", newline="") as fh:
        if format == "jsonl":
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise MalformedRecord(path, line_no, f"invalid JSON: {exc.msg}")
                if not isinstance(rec, dict):
                    raise MalformedRecord(path, line_no, "JSONL record is not an object")
                add(rec, line_no)
        else:
            delim = "," if format == "csv" else "\t"
            reader = csv.DictReader(fh, delimiter=delim)
            if reader.fieldnames is None or "id" not in reader.fieldnames:
                raise MalformedRecord(path, 1, "header row with an 'id' column required")
            for line_no, row in enumerate(reader, start=2):
                rec = {k: v for k, v in row.items() if v not in (None, "")}
                add(rec, line_no)

    return Dataset(task=task, examples=tuple(examples), split=split)


def save_dataset(dataset: Dataset, path) -> None:
    """Write JSONL with stable key order; round-trips (id, text, label)."""
    with open(path, "w", encoding="utf-8") as fh:
        for ex in dataset:
            rec: dict = {"id": ex.id, "text": ex.text}
            if ex.label is not None:
                rec["label"] = ex.label
            if ex.post.source != "other":
                rec["source"] = ex.post.source
            if ex.post.meta:
                rec["meta"] = dict(ex.post.meta)
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def class_histogram(dataset: Dataset) -> dict[int, int]:
    """Label -> count over the dataset. Values sum to ``len(dataset)``."""
    if not dataset.is_labeled:
        raise UnlabeledDataset("class_histogram needs a fully labeled dataset")
    counts: dict[int, int] = {}
    for ex in dataset:
        counts[ex.label] = counts.get(ex.label, 0) + 1
    return counts


def stratified_split(dataset: Dataset, ratios: Sequence[float], seed: int,
                     split_names: Optional[Sequence[str]] = None) -> list[Dataset]:
    """Partition into len(ratios) disjoint datasets, stratified by class.

    Per-class allocation uses largest-remainder rounding, so every class
    count in every part is within one example of the exact proportion.
    Deterministic for a given seed.
    """
    if any(r <= 0 for r in ratios):
        raise BadRatios(f"ratios must be positive, got {list(ratios)}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatios(f"ratios must sum to 1, got sum {sum(ratios)!r}")
    if not dataset.is_labeled:
        raise UnlabeledDataset("stratified_split needs labels")
    k = len(ratios)
    if split_names is None:
        split_names = {
            1: ("unsplit",),
            2: ("train", "test"),
            3: ("train", "validation", "test"),
        }.get(k, tuple("unsplit" for _ in range(k)))
    if len(split_names) != k:
        raise BadRatios("split_names length must match ratios length")

    rng = np.random.default_rng(seed)
    by_class: dict[int, list[int]] = {}
    for idx, ex in enumerate(dataset):
        by_class.setdefault(ex.label, []).append(idx)

    parts: list[list[int]] = [[] for _ in range(k)]
    for label in sorted(by_class):
        idxs = np.array(by_class[label])
        rng.shuffle(idxs)
        n = len(idxs)
        exact = [r * n for r in ratios]
        base = [int(np.floor(e)) for e in exact]
        remainder = n - sum(base)
        # hand leftover examples to the largest fractional parts
        order = sorted(range(k), key=lambda i: (exact[i] - base[i], -i), reverse=True)
        for i in order[:remainder]:
            base[i] += 1
        start = 0
        for part_i, cnt in enumerate(base):
            parts[part_i].extend(idxs[start:start + cnt].tolist())
            start += cnt

    out = []
    for part_i, name in enumerate(split_names):
        chosen = sorted(parts[part_i])
        out.append(dataset.with_examples(
            (dataset.examples[i] for i in chosen), split=name))
    return out
