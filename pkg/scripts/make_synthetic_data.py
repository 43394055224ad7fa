#!/usr/bin/env python3
"""Regenerate the bundled synthetic corpora under src/balcor/data/.

Three corpora, each with fixed properties the test suite depends on:

* separable: keyword-separable binary corpus (200 train / 100 test);
  a linear head over hashed bag-of-words reaches F1 ~1.0 in 6 epochs.
* imbalanced10to1: 10:1 class ratio with overlapping keyword signal, so
  the positive-class loss weight visibly moves label-1 recall.
* correction: binary corpus whose 500-example eval split contains
  "trap" negatives carrying strong positive keywords; a trained model
  produces well over 5 label-1 false positives on it.

The outputs are committed; this script only needs rerunning when the
recipes change, and it verifies the properties above before writing.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from balcor import classifier as clf
from balcor import metrics
from balcor.corpus import Dataset, LabeledExample, Post, TaskSpec
from balcor.encoders import HashingEncoder

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "balcor" / "data"

# deliberately small pool: every filler word appears many times in both
# classes, so no filler correlates with a label by chance
FILLER = """\
today morning coffee work bus friend weekend movie music lunch dinner
walk park rain happy busy meeting call photo dog cat book phone home
""".split()

POS_STRONG = ["positive", "diagnosed", "diagnosis", "tested", "symptoms",
              "quarantine", "infected", "fever"]
POS_WEAK = ["positive", "tested", "symptoms", "fever"]

SOURCES = ["twitter", "reddit", "other"]


def make_text(rng: random.Random, markers: list[str], n_markers: int) -> str:
    n_tokens = rng.randint(8, 15)
    tokens = [rng.choice(FILLER) for _ in range(n_tokens)]
    for marker in rng.sample(markers, k=min(n_markers, len(markers))):
        tokens.insert(rng.randrange(len(tokens) + 1), marker)
    return " ".join(tokens)


def make_example(rng, prefix, i, label, markers, n_markers) -> dict:
    return {
        "id": f"{prefix}-{i:04d}",
        "text": make_text(rng, markers, n_markers),
        "label": label,
        "source": rng.choice(SOURCES),
    }


def write_jsonl(path: Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    print(f"wrote {len(records):4d} records -> {path.name}")


def make_separable() -> None:
    rng = random.Random(101)
    train, test = [], []
    for i in range(100):
        train.append(make_example(rng, "sep-train", 2 * i, 0, [], 0))
        train.append(make_example(rng, "sep-train", 2 * i + 1, 1, POS_STRONG, 4))
    rng.shuffle(train)
    for i in range(50):
        test.append(make_example(rng, "sep-test", 2 * i, 0, [], 0))
        test.append(make_example(rng, "sep-test", 2 * i + 1, 1, POS_STRONG, 4))
    rng.shuffle(test)
    write_jsonl(DATA_DIR / "separable_train.jsonl", train)
    write_jsonl(DATA_DIR / "separable_test.jsonl", test)


def make_imbalanced() -> None:
    rng = random.Random(202)

    def block(prefix, n_majority, n_minority):
        records = []
        for i in range(n_majority):
            # 30% of negatives carry one weak positive keyword (noise)
            n_markers = 1 if rng.random() < 0.30 else 0
            records.append(make_example(rng, prefix, i, 0, POS_WEAK, n_markers))
        for i in range(n_minority):
            n_markers = rng.choice([1, 1, 2])
            records.append(make_example(rng, prefix, n_majority + i, 1,
                                        POS_WEAK, n_markers))
        rng.shuffle(records)
        return records

    write_jsonl(DATA_DIR / "imbalanced10to1_train.jsonl", block("imb-train", 500, 50))
    write_jsonl(DATA_DIR / "imbalanced10to1_test.jsonl", block("imb-test", 200, 20))


def make_correction() -> None:
    rng = random.Random(303)
    train = []
    for i in range(150):
        train.append(make_example(rng, "cor-train", 2 * i, 0, POS_WEAK,
                                  1 if rng.random() < 0.08 else 0))
        train.append(make_example(rng, "cor-train", 2 * i + 1, 1, POS_STRONG,
                                  rng.choice([2, 3])))
    rng.shuffle(train)
    evals = []
    for i in range(370):
        evals.append(make_example(rng, "cor-eval", i, 0, POS_WEAK,
                                  1 if rng.random() < 0.05 else 0))
    for i in range(30):  # trap negatives: strong positive wording, gold 0
        evals.append(make_example(rng, "cor-eval", 370 + i, 0, POS_STRONG,
                                  rng.choice([2, 3])))
    for i in range(100):
        evals.append(make_example(rng, "cor-eval", 400 + i, 1, POS_STRONG,
                                  rng.choice([2, 3])))
    rng.shuffle(evals)
    write_jsonl(DATA_DIR / "correction_train.jsonl", train)
    write_jsonl(DATA_DIR / "correction_eval.jsonl", evals)


def make_tasks_and_lexicon() -> None:
    binary = {
        "task_id": "report-positive",
        "labels": [{"id": 0, "name": "unrelated"}, {"id": 1, "name": "reports-positive"}],
        "report_label": 1,
        "verify_scope": [1],
        "correction_mode": "flip_binary",
        "majority_label": None,
    }
    (DATA_DIR / "binary_task.json").write_text(json.dumps(binary, indent=2) + "\n")

    sentiment = {
        "task_id": "therapy-sentiment",
        "labels": [{"id": 0, "name": "negative"}, {"id": 1, "name": "neutral"},
                   {"id": 2, "name": "positive"}],
        "report_label": 1,
        "verify_scope": [0],
        "correction_mode": "to_majority",
        "majority_label": 1,
    }
    (DATA_DIR / "sentiment_task.json").write_text(json.dumps(sentiment, indent=2) + "\n")

    lexicon_pairs = {
        "today": ["tonight", "tody"], "morning": ["am", "sunrise"],
        "coffee": ["espresso", "latte"], "work": ["job", "shift"],
        "friend": ["buddy", "mate"], "movie": ["film"], "music": ["tunes"],
        "lunch": ["meal"], "dinner": ["supper"], "walk": ["stroll"],
        "happy": ["glad", "cheerful"], "busy": ["swamped"],
        "photo": ["picture", "pic"], "dog": ["pup"], "cat": ["kitty"],
        "book": ["novel"], "phone": ["mobile"], "home": ["house"],
        "meeting": ["standup"], "rain": ["drizzle"], "bus": ["tram"],
    }
    with open(DATA_DIR / "lexicon.jsonl", "w", encoding="utf-8") as fh:
        for word, synonyms in lexicon_pairs.items():
            fh.write(json.dumps({"word": word, "synonyms": synonyms}) + "\n")
    print(f"wrote lexicon with {len(lexicon_pairs)} entries")


def make_templates() -> None:
    tmpl_dir = DATA_DIR / "templates"
    tmpl_dir.mkdir(exist_ok=True)
    prompt = {
        "_note": "Starter prompt; tune the rules and examples for your task.",
        "instructions": ("You check whether the assigned label of a social-media "
                         "post is supported by the post's text."),
        "rules": ("Label 'reports-positive' (1) requires the author to state a "
                  "personal positive test or diagnosis. Label 'unrelated' (0) "
                  "covers everything else, including other people's diagnoses."),
        "fewshot": [
            {"text": "just got my result back and i tested positive, staying in",
             "label": 1, "verdict": "true",
             "explanation": "The author reports their own positive test."},
            {"text": "my aunt tested positive last week, hope she recovers",
             "label": 1, "verdict": "false",
             "explanation": "Step 1: a positive test is mentioned. Step 2: it is "
                            "the aunt's, not the author's, so label 1 is wrong."},
        ],
    }
    (tmpl_dir / "binary_prompt.json").write_text(json.dumps(prompt, indent=2) + "\n")

    from balcor.verifier import DEFAULT_LAYOUT
    (tmpl_dir / "query_layout.txt").write_text(DEFAULT_LAYOUT)
    print("wrote starter templates")


def _train_eval(train_name, eval_name, task, lam, seed=7):
    from balcor.bundled import load

    train_set = load(train_name, task, split="train")
    eval_set = load(eval_name, task, split="test")
    backend = HashingEncoder(256)
    config = clf.TrainConfig(lambda_weight=lam, learning_rate=0.05,
                             batch_size=8, weight_decay=0.001, epochs=6, seed=seed)
    result = clf.fit(backend, train_set, config)
    _, pred, _ = clf.predict_dataset(backend, result.head, eval_set)
    report = metrics.evaluate(eval_set.labels_array(), pred, task)
    return report


def verify_properties() -> None:
    from balcor.bundled import load_task

    task = load_task("binary_task.json")

    rep = _train_eval("separable_train.jsonl", "separable_test.jsonl", task, 0.1)
    f1 = rep.per_label[1].f1
    print(f"separable: F1(1) = {f1:.4f}")
    assert f1 >= 0.95, "separable corpus is not separable enough"

    low = _train_eval("imbalanced10to1_train.jsonl", "imbalanced10to1_test.jsonl",
                      task, 0.1)
    high = _train_eval("imbalanced10to1_train.jsonl", "imbalanced10to1_test.jsonl",
                       task, 10.0)
    r_low, r_high = low.per_label[1].recall, high.per_label[1].recall
    print(f"imbalanced: recall(1) at lambda=0.1 -> {r_low:.4f}, "
          f"at lambda=10 -> {r_high:.4f}")
    assert r_high > r_low, "loss weight has no visible recall effect"

    rep = _train_eval("correction_train.jsonl", "correction_eval.jsonl", task, 1.0)
    fp = rep.confusion[0, 1]
    print(f"correction: label-1 false positives = {fp:.0f}, "
          f"F1(1) = {rep.per_label[1].f1:.4f}")
    assert fp >= 5, "correction eval split must produce at least 5 false positives"


def main() -> None:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    make_tasks_and_lexicon()
    make_templates()
    make_separable()
    make_imbalanced()
    make_correction()
    verify_properties()
    print("all corpus properties verified")


if __name__ == "__main__":
    main()
