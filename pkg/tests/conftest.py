import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from balcor.corpus import Dataset, LabeledExample, Post, TaskSpec


@pytest.fixture
def binary_task():
    return TaskSpec(
        task_id="binary-demo",
        labels=(0, 1),
        report_label=1,
        verify_scope=frozenset({1}),
        correction_mode="flip_binary",
        label_names={0: "unrelated", 1: "reports-positive"},
    )


@pytest.fixture
def three_class_task():
    return TaskSpec(
        task_id="tri-demo",
        labels=(0, 1, 2),
        report_label=1,
        verify_scope=frozenset({0}),
        correction_mode="to_majority",
        majority_label=1,
        label_names={0: "negative", 1: "neutral", 2: "positive"},
    )


def build_dataset(task, triples, split="unsplit"):
    """triples: (id, text, label) with label possibly None."""
    examples = tuple(
        LabeledExample(post=Post(id=i, text=t), label=l) for i, t, l in triples
    )
    return Dataset(task=task, examples=examples, split=split)


@pytest.fixture
def make_dataset():
    return build_dataset
