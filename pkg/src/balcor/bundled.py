"""Accessors for the synthetic corpora and starter templates shipped
inside the package. These exist so the test suite and CLI walkthroughs
run offline with no external datasets."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .corpus import Dataset, TaskSpec, load_dataset


def data_path(name: str) -> Path:
    path = Path(str(resources.files("balcor") / "data" / name))
    if not path.exists():
        raise FileNotFoundError(f"no bundled file {name!r}")
    return path


def load_task(name: str) -> TaskSpec:
    return TaskSpec.from_file(data_path(name))


def load(dataset_name: str, task: TaskSpec, split: str = "unsplit") -> Dataset:
    return load_dataset(data_path(dataset_name), task, split=split)
