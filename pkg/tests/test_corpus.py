import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from balcor.corpus import (
    TaskSpec,
    class_histogram,
    load_dataset,
    save_dataset,
    stratified_split,
)
from balcor.errors import (
    BadRatios,
    DuplicateId,
    MalformedRecord,
    UnknownLabel,
    UnlabeledDataset,
)
from conftest import build_dataset
from oracles import brute_histogram


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestLoadDataset:
    def test_single_jsonl_line(self, tmp_path, binary_task):
        p = tmp_path / "d.jsonl"
        write_lines(p, ['{"id":"1","text":"I tested positive","label":1}'])
        ds = load_dataset(p, binary_task)
        assert len(ds) == 1
        assert ds.examples[0].label == 1
        assert ds.examples[0].text == "I tested positive"

    def test_unknown_label_names_line(self, tmp_path, binary_task):
        p = tmp_path / "d.jsonl"
        write_lines(p, ['{"id":"1","text":"hello there","label":5}'])
        with pytest.raises(UnknownLabel) as err:
            load_dataset(p, binary_task)
        assert ":1:" in str(err.value)

    def test_tsv_against_hand_count(self, tmp_path, binary_task):
        p = tmp_path / "d.tsv"
        rows = ["id\ttext\tlabel", "a\tfirst post\t0", "b\tsecond post\t1",
                "c\tthird post\t0"]
        write_lines(p, rows)
        ds = load_dataset(p, binary_task, format="tsv")
        # independent line parser: count non-header, non-blank rows
        expected = sum(1 for line in p.read_text().splitlines()[1:] if line.strip())
        assert len(ds) == expected == 3
        assert [ex.id for ex in ds] == ["a", "b", "c"]

    def test_csv(self, tmp_path, binary_task):
        p = tmp_path / "d.csv"
        write_lines(p, ["id,text,label", 'x,"a post, with comma",1'])
        ds = load_dataset(p, binary_task)
        assert ds.examples[0].text == "a post, with comma"

    def test_duplicate_id(self, tmp_path, binary_task):
        p = tmp_path / "d.jsonl"
        write_lines(p, ['{"id":"1","text":"a b","label":0}',
                        '{"id":"1","text":"c d","label":1}'])
        with pytest.raises(DuplicateId):
            load_dataset(p, binary_task)

    def test_malformed_json_reports_line(self, tmp_path, binary_task):
        p = tmp_path / "d.jsonl"
        write_lines(p, ['{"id":"1","text":"ok","label":0}', "{nope"])
        with pytest.raises(MalformedRecord) as err:
            load_dataset(p, binary_task)
        assert err.value.line_no == 2

    def test_empty_text_rejected(self, tmp_path, binary_task):
        p = tmp_path / "d.jsonl"
        write_lines(p, ['{"id":"1","text":"   ","label":0}'])
        with pytest.raises(MalformedRecord):
            load_dataset(p, binary_task)

    def test_unlabeled_inference_file(self, tmp_path, binary_task):
        p = tmp_path / "d.jsonl"
        write_lines(p, ['{"id":"1","text":"no label here"}'])
        ds = load_dataset(p, binary_task)
        assert not ds.is_labeled
        with pytest.raises(UnlabeledDataset):
            class_histogram(ds)

    def test_row_order_preserved(self, tmp_path, binary_task):
        p = tmp_path / "d.jsonl"
        write_lines(p, [json.dumps({"id": str(i), "text": f"post {i}", "label": i % 2})
                        for i in range(20)])
        ds = load_dataset(p, binary_task)
        assert [ex.id for ex in ds] == [str(i) for i in range(20)]


@st.composite
def example_triples(draw):
    n = draw(st.integers(min_value=1, max_value=12))
    texts = st.text(
        alphabet=st.characters(blacklist_categories=("Cs", "Cc")),
        min_size=1, max_size=40,
    ).filter(lambda s: s.strip())
    ids = draw(st.lists(st.text(st.characters(blacklist_categories=("Cs", "Cc")),
                                min_size=1, max_size=10),
                        min_size=n, max_size=n, unique=True))
    return [(ids[i], draw(texts), draw(st.sampled_from([0, 1])))
            for i in range(n)]


class TestRoundTrip:
    @given(triples=example_triples())
    @settings(max_examples=40, deadline=None)
    def test_save_load_identity(self, tmp_path_factory, triples):
        task = TaskSpec(task_id="t", labels=(0, 1))
        ds = build_dataset(task, triples)
        path = tmp_path_factory.mktemp("rt") / "d.jsonl"
        save_dataset(ds, path)
        again = load_dataset(path, task)
        assert [(e.id, e.text, e.label) for e in again] == \
            [(e.id, e.text, e.label) for e in ds]

    def test_unicode_preserved_verbatim(self, tmp_path, binary_task):
        text = "Café \U0001f637 tested POSITIVE https://x.co/a?b=1  —ok"
        ds = build_dataset(binary_task, [("u1", text, 1)])
        path = tmp_path / "d.jsonl"
        save_dataset(ds, path)
        assert load_dataset(path, binary_task).examples[0].text == text


class TestClassHistogram:
    def test_small(self, binary_task, make_dataset):
        ds = make_dataset(binary_task, [("a", "x y", 0), ("b", "x y", 0), ("c", "x y", 1)])
        assert class_histogram(ds) == {0: 2, 1: 1}

    def test_empty(self, binary_task, make_dataset):
        ds = make_dataset(binary_task, [])
        hist = class_histogram(ds)
        assert hist == {} and sum(hist.values()) == 0

    def test_matches_brute_tally(self, three_class_task, make_dataset):
        rng = np.random.default_rng(0)
        labels = rng.integers(0, 3, size=1000).tolist()
        ds = make_dataset(three_class_task,
                          [(str(i), f"post {i}", lab) for i, lab in enumerate(labels)])
        hist = class_histogram(ds)
        assert hist == brute_histogram(labels)
        assert sum(hist.values()) == len(ds)


class TestStratifiedSplit:
    def test_basic_sizes(self, binary_task, make_dataset):
        ds = make_dataset(binary_task,
                          [(str(i), f"p {i}", i % 2) for i in range(10)])
        parts = stratified_split(ds, [0.8, 0.2], seed=1)
        assert [len(p) for p in parts] == [8, 2]
        ids = [e.id for p in parts for e in p]
        assert len(set(ids)) == 10

    def test_per_class_proportions(self, binary_task, make_dataset):
        triples = [(f"a{i}", "x", 0) for i in range(50)] + \
                  [(f"b{i}", "x", 1) for i in range(10)]
        ds = make_dataset(binary_task, triples)
        parts = stratified_split(ds, [0.5, 0.5], seed=3)
        for part in parts:
            hist = brute_histogram([e.label for e in part])
            assert abs(hist.get(0, 0) - 25) <= 1
            assert abs(hist.get(1, 0) - 5) <= 1

    def test_bad_ratios(self, binary_task, make_dataset):
        ds = make_dataset(binary_task, [("a", "x", 0)])
        with pytest.raises(BadRatios):
            stratified_split(ds, [0.5, 0.6], seed=1)
        with pytest.raises(BadRatios):
            stratified_split(ds, [1.2, -0.2], seed=1)

    def test_deterministic_per_seed(self, binary_task, make_dataset):
        ds = make_dataset(binary_task,
                          [(str(i), f"p {i}", i % 2) for i in range(30)])
        a = stratified_split(ds, [0.7, 0.3], seed=9)
        b = stratified_split(ds, [0.7, 0.3], seed=9)
        assert [[e.id for e in p] for p in a] == [[e.id for e in p] for p in b]

    def test_different_seeds_preserve_counts(self, binary_task, make_dataset):
        ds = make_dataset(binary_task,
                          [(str(i), f"p {i}", i % 2) for i in range(40)])
        a = stratified_split(ds, [0.5, 0.5], seed=1)
        b = stratified_split(ds, [0.5, 0.5], seed=2)
        assert [[e.id for e in p] for p in a] != [[e.id for e in p] for p in b]
        for pa, pb in zip(a, b):
            ha = brute_histogram([e.label for e in pa])
            hb = brute_histogram([e.label for e in pb])
            for lab in (0, 1):
                assert abs(ha.get(lab, 0) - hb.get(lab, 0)) <= 1

    def test_union_is_input(self, binary_task, make_dataset):
        ds = make_dataset(binary_task,
                          [(str(i), f"p {i}", i % 2) for i in range(23)])
        parts = stratified_split(ds, [0.4, 0.3, 0.3], seed=5)
        all_ids = sorted(e.id for p in parts for e in p)
        assert all_ids == sorted(e.id for e in ds)


class TestTaskSpec:
    def test_invariants(self):
        with pytest.raises(ValueError):
            TaskSpec(task_id="t", labels=(0, 1), report_label=2)
        with pytest.raises(ValueError):
            TaskSpec(task_id="t", labels=(0, 1, 2), correction_mode="flip_binary")
        with pytest.raises(ValueError):
            TaskSpec(task_id="t", labels=(0, 1, 2), correction_mode="to_majority",
                     majority_label=1, verify_scope=frozenset({1}))

    def test_round_trip(self, three_class_task):
        again = TaskSpec.from_dict(three_class_task.to_dict())
        assert again == three_class_task
