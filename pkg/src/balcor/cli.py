"""Single command-line entry point wiring all pipeline stages.

    prepare -> balance -> train -> predict -> verify -> correct ->
    evaluate -> viz -> review serve / simulate / grid

Exit codes: 0 success, 1 usage problems, 2 bad data, 3 backend or
LLM-client failures. Every stage writes a manifest recording its config
hash and input/output digests.
"""

from __future__ import annotations

import csv
import itertools
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import click
import numpy as np

from . import balance as balance_mod
from . import classifier as clf
from . import correction as corr
from . import corpus, metrics, verifier
from .errors import BackendError, ConfigError, DataError
from .manifest import write_manifest


@click.group()
def cli():
    """Balanced training and verdict-based label correction for
    imbalanced text classification."""


def _load_task(path) -> corpus.TaskSpec:
    return corpus.TaskSpec.from_file(path)


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


@cli.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["jsonl", "csv", "tsv"]), default=None)
@click.option("--task", "task_path", required=True, type=click.Path(exists=True))
@click.option("--ratios", default="0.8,0.2", show_default=True)
@click.option("--names", default=None, help="comma-separated split names")
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--out-dir", required=True, type=click.Path())
def prepare(in_path, fmt, task_path, ratios, names, seed, out_dir):
    """Load a raw dataset and write stratified splits."""
    task = _load_task(task_path)
    dataset = corpus.load_dataset(in_path, task, format=fmt)
    ratio_values = _parse_floats(ratios)
    split_names = names.split(",") if names else None
    parts = corpus.stratified_split(dataset, ratio_values, seed, split_names)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = {}
    for part in parts:
        path = out_dir / f"{part.split}.jsonl"
        corpus.save_dataset(part, path)
        outputs[part.split] = str(path)
        click.echo(f"{part.split}: {len(part)} examples -> {path}")
    write_manifest("prepare", {"ratios": ratio_values, "seed": seed},
                   {"data": in_path, "task": task_path}, outputs,
                   manifest_path=out_dir / "prepare.manifest.json")


@cli.command("balance")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--task", "task_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--target", default="max", show_default=True,
              help="max, min, or a fixed count")
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--lexicon", "lexicon_path", default=None, type=click.Path(exists=True))
@click.option("--ops", default="synonym_replace,random_swap,random_delete,random_insert",
              show_default=True)
@click.option("--prob", default=0.1, show_default=True, type=float)
@click.option("--per-example", default=4, show_default=True, type=int)
@click.option("--allow-dup/--no-dup", default=True, show_default=True)
@click.option("--split", default="train", show_default=True,
              type=click.Choice(list(corpus.SPLITS)))
@click.option("--force", is_flag=True, help="balance a non-train split anyway")
def balance_cmd(in_path, task_path, out_path, target, seed, lexicon_path, ops,
                prob, per_example, allow_dup, split, force):
    """Augment and resample a split to exactly equal class counts."""
    task = _load_task(task_path)
    dataset = corpus.load_dataset(in_path, task, split=split)
    lexicon = balance_mod.load_lexicon(lexicon_path) if lexicon_path else {}
    op_list = tuple(o.strip() for o in ops.split(",") if o.strip())
    aug = balance_mod.AugmentationConfig(
        ops=op_list, per_op_prob=prob, transforms_per_example=per_example,
        lexicon=lexicon, seed=seed)
    target_value = target if target in ("max", "min") else int(target)
    config = balance_mod.BalanceConfig(target=target_value, augmentation=aug,
                                       allow_duplication=allow_dup, seed=seed)
    balanced = balance_mod.balance(dataset, config, force=force)
    corpus.save_dataset(balanced, out_path)
    hist = corpus.class_histogram(balanced)
    click.echo(f"balanced histogram: {dict(sorted(hist.items()))} -> {out_path}")
    write_manifest("balance",
                   {"target": target, "seed": seed, "ops": list(op_list),
                    "prob": prob, "per_example": per_example, "allow_dup": allow_dup},
                   {"data": in_path, "task": task_path}, {"balanced": out_path})


def _train_config_from_flags(preset, lr, batch, epochs, lam, wd, seed) -> clf.TrainConfig:
    config = clf.PRESETS.get(preset)
    if config is None:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(clf.PRESETS)}")
    overrides = {}
    if lr is not None:
        overrides["learning_rate"] = lr
    if batch is not None:
        overrides["batch_size"] = batch
    if epochs is not None:
        overrides["epochs"] = epochs
    if lam is not None:
        overrides["lambda_weight"] = lam
    if wd is not None:
        overrides["weight_decay"] = wd
    if seed is not None:
        overrides["seed"] = seed
    return replace(config, **overrides)


@cli.command()
@click.option("--train", "train_path", required=True, type=click.Path(exists=True))
@click.option("--task", "task_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--encoder", default="hashing:256", show_default=True)
@click.option("--preset", default="reference", show_default=True)
@click.option("--lr", type=float, default=None)
@click.option("--batch", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--lambda", "lam", type=float, default=None, help="positive-class loss weight")
@click.option("--wd", type=float, default=None, help="weight decay")
@click.option("--seed", type=int, default=None)
def train(train_path, task_path, out_path, encoder, preset, lr, batch, epochs,
          lam, wd, seed):
    """Fit the classifier head on a training split."""
    from .encoders import make_encoder

    task = _load_task(task_path)
    dataset = corpus.load_dataset(train_path, task, split="train")
    backend = make_encoder(encoder)
    config = _train_config_from_flags(preset, lr, batch, epochs, lam, wd, seed)
    result = clf.fit(backend, dataset, config)
    clf.save_model(out_path, backend, result.head, task, config)
    losses = ", ".join(f"{l:.4f}" for l in result.epoch_losses)
    click.echo(f"epoch losses: [{losses}]")
    click.echo(f"model -> {out_path}")
    write_manifest("train", asdict(config) | {"encoder": encoder},
                   {"train": train_path, "task": task_path}, {"model": out_path})


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def predict(model_path, data_path, out_path):
    """Write predictions JSONL for a dataset."""
    backend, head, task, _ = clf.load_model(model_path)
    dataset = corpus.load_dataset(data_path, task)
    ids, labels, probas = clf.predict_dataset(backend, head, dataset)
    clf.write_predictions(out_path, ids, labels, probas)
    click.echo(f"{len(ids)} predictions -> {out_path}")
    write_manifest("predict", {"model": str(model_path)},
                   {"model": model_path, "data": data_path}, {"predictions": out_path})


def _build_client(name, task, dataset, accuracy, seed, rules_path):
    if name == "mock-oracle":
        if not dataset.is_labeled:
            raise DataError("mock-oracle needs gold labels in --data")
        gold = {ex.text: ex.label for ex in dataset}
        return verifier.OracleClient(task, gold, accuracy=accuracy, seed=seed)
    if name == "mock-keyword":
        if not rules_path:
            raise ConfigError("mock-keyword needs --rules")
        with open(rules_path, encoding="utf-8") as fh:
            rules = {int(k): v for k, v in json.load(fh).items()}
        return verifier.KeywordRuleClient(task, rules)
    if name.startswith("openai"):
        _, _, model = name.partition(":")
        return verifier.OpenAIChatClient(model=model or "gpt-3.5-turbo")
    raise ConfigError(f"unknown client {name!r}")


@cli.command()
@click.option("--preds", "preds_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--task", "task_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--prompt", "prompt_path", default=None, type=click.Path(exists=True),
              help="JSON with instructions/rules/fewshot")
@click.option("--layout", "layout_path", default=None, type=click.Path(exists=True))
@click.option("--client", default="mock-oracle", show_default=True)
@click.option("--rules", "rules_path", default=None, type=click.Path(exists=True),
              help="per-label keyword rules for mock-keyword")
@click.option("--accuracy", default=1.0, show_default=True, type=float)
@click.option("--max-parallel", default=1, show_default=True, type=int)
@click.option("--max-attempts", default=3, show_default=True, type=int)
@click.option("--cache", "cache_path", default=None, type=click.Path())
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--live", is_flag=True,
              help="required before any paid client is contacted")
def verify(preds_path, data_path, task_path, out_path, prompt_path, layout_path,
           client, rules_path, accuracy, max_parallel, max_attempts, cache_path,
           seed, live):
    """Ask the verifier for a True/False verdict on in-scope predictions."""
    task = _load_task(task_path)
    if client.startswith("openai") and not live:
        raise ConfigError(
            f"client {client!r} costs money; pass --live to confirm")
    dataset = corpus.load_dataset(data_path, task)
    preds = clf.read_predictions(preds_path)
    if prompt_path:
        template = verifier.PromptTemplate.from_files(prompt_path, layout_path)
    else:
        template = _default_template(task)
    texts = {ex.id: ex.text for ex in dataset}
    items = [(rid, texts[rid], pred) for rid, pred in sorted(preds.items())
             if pred in task.verify_scope and rid in texts]
    requests = verifier.build_requests(template, task, items)
    llm = _build_client(client, task, dataset, accuracy, seed, rules_path)
    cache = verifier.ResponseCache(cache_path) if cache_path else None
    verdicts = verifier.verify_batch(
        requests, llm, max_parallel=max_parallel,
        retry=verifier.RetryPolicy(max_attempts=max_attempts), cache=cache)
    verifier.write_verdicts(out_path, verdicts)
    n_false = sum(1 for v in verdicts if v.supported == "false")
    click.echo(f"{len(verdicts)} verdicts ({n_false} false) -> {out_path}")
    write_manifest("verify",
                   {"client": client, "accuracy": accuracy, "seed": seed,
                    "max_parallel": max_parallel},
                   {"preds": preds_path, "data": data_path, "task": task_path},
                   {"verdicts": out_path})


def _default_template(task: corpus.TaskSpec) -> verifier.PromptTemplate:
    names = ", ".join(f"{lab} = {task.label_name(lab)}" for lab in task.labels)
    return verifier.PromptTemplate(
        instructions=("You check whether an assigned label is supported by a "
                      "social-media post."),
        labeling_rules=f"The labels are: {names}.",
    )


@cli.command()
@click.option("--preds", "preds_path", required=True, type=click.Path(exists=True))
@click.option("--verdicts", "verdicts_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--task", "task_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--queue", "queue_path", default=None, type=click.Path(exists=True),
              help="review queue with human decisions to merge")
@click.option("--queue-out", default=None, type=click.Path(),
              help="write the pending review queue here")
@click.option("--fallback", default="auto", show_default=True,
              type=click.Choice(["auto", "strict"]))
@click.option("--review-warn-threshold", default=200, show_default=True, type=int)
def correct(preds_path, verdicts_path, data_path, task_path, out_path,
            queue_path, queue_out, fallback, review_warn_threshold):
    """Turn predictions + verdicts into final labels."""
    task = _load_task(task_path)
    policy = corr.CorrectionPolicy(task=task, pending_fallback=fallback)
    preds = clf.read_predictions(preds_path)
    verdicts = verifier.read_verdicts(verdicts_path)
    dataset = corpus.load_dataset(data_path, task)
    texts = {ex.id: ex.text for ex in dataset}
    if queue_path:
        queue = corr.read_review_queue(queue_path)
    else:
        queue = corr.build_review_queue(preds, verdicts, texts, task)
    if queue_out:
        corr.write_review_queue(queue_out, queue)
        click.echo(f"{len(queue)} flagged cases -> {queue_out}")
    pending = sum(1 for it in queue if it.decision == "pending")
    if 0 < review_warn_threshold < pending:
        click.echo(f"note: {pending} pending cases exceed the review threshold "
                   f"({review_warn_threshold}); auto mode may be more practical",
                   err=True)
    final = corr.merge_decisions(preds, queue, policy)
    corr.write_final_labels(out_path, final)
    changed = sum(1 for f in final if f.provenance != "kept")
    click.echo(f"{len(final)} final labels ({changed} changed) -> {out_path}")
    write_manifest("correct", {"fallback": fallback},
                   {"preds": preds_path, "verdicts": verdicts_path,
                    "data": data_path, "task": task_path}, {"final": out_path})


@cli.command()
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--task", "task_path", required=True, type=click.Path(exists=True))
@click.option("--report", "report_path", default=None, type=click.Path())
def evaluate(gold_path, pred_path, task_path, report_path):
    """Score predictions (or final labels) against gold labels."""
    task = _load_task(task_path)
    dataset = corpus.load_dataset(gold_path, task)
    if not dataset.is_labeled:
        raise DataError(f"gold file {gold_path} has unlabeled examples")
    preds = clf.read_predictions(pred_path)
    missing = [ex.id for ex in dataset if ex.id not in preds]
    if missing:
        raise DataError(f"no prediction for ids: {missing[:5]} "
                        f"({len(missing)} missing)")
    gold = [ex.label for ex in dataset]
    pred = [preds[ex.id] for ex in dataset]
    report = metrics.evaluate(gold, pred, task)
    click.echo(metrics.render_table(report, task))
    name, value = metrics.headline(report, task)
    click.echo(f"headline {name} = {value:.4f}")
    if report_path:
        report.to_json(report_path)
        write_manifest("evaluate", {},
                       {"gold": gold_path, "pred": pred_path, "task": task_path},
                       {"report": report_path})


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--perplexity", default=30.0, show_default=True, type=float)
@click.option("--iterations", default=1000, show_default=True, type=int)
@click.option("--seed", default=7, show_default=True, type=int)
def viz(model_path, data_path, out_dir, perplexity, iterations, seed):
    """Project encoder embeddings to 2-D and write coords + scatter."""
    from . import projection
    from .encoders import encode_batch

    backend, _, task, _ = clf.load_model(model_path)
    dataset = corpus.load_dataset(data_path, task)
    E = encode_batch(backend, [ex.text for ex in dataset])
    config = projection.ProjectionConfig(perplexity=perplexity,
                                         iterations=iterations, seed=seed)
    result = projection.tsne(E, config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = [ex.label for ex in dataset] if dataset.is_labeled else None
    names = {lab: task.label_name(lab) for lab in task.labels}
    json_path, svg_path = projection.export_scatter(
        result.coords, out_dir / "embedding", labels=labels,
        ids=[ex.id for ex in dataset], label_names=names)
    click.echo(f"kl {result.kl_initial:.4f} -> {result.kl_final:.4f} "
               f"({result.backend} kernels)")
    click.echo(f"wrote {json_path} and {svg_path}")
    write_manifest("viz",
                   {"perplexity": perplexity, "iterations": iterations, "seed": seed},
                   {"model": model_path, "data": data_path},
                   {"coords": json_path, "plot": svg_path})


@cli.group()
def review():
    """Manual-review workflow."""


@review.command("serve")
@click.option("--queue", "queue_path", required=True, type=click.Path(exists=True))
@click.option("--predictions", "preds_path", required=True, type=click.Path(exists=True))
@click.option("--task", "task_path", required=True, type=click.Path(exists=True))
@click.option("--decisions", "decisions_path", default=None, type=click.Path())
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8808, show_default=True, type=int)
@click.option("--ui", "ui_dir", default=None, type=click.Path())
def review_serve(queue_path, preds_path, task_path, decisions_path, host, port, ui_dir):
    """Serve the review API (and the UI bundle when --ui is given)."""
    from .service import ReviewSession, serve

    task = _load_task(task_path)
    if decisions_path is None:
        decisions_path = str(Path(queue_path).with_suffix(".decisions.jsonl"))
    session = ReviewSession(queue_path, preds_path, task, decisions_path)
    click.echo(f"serving {session.progress()} on http://{host}:{port}")
    serve(session, host=host, port=port, ui_dir=ui_dir)


@cli.command()
@click.option("--task", "task_path", required=True, type=click.Path(exists=True))
@click.option("--priors", required=True, help="e.g. 0.8,0.2 in task label order")
@click.option("--confusion", required=True,
              help="rows P(pred|gold), e.g. '0.97,0.03;0.1,0.9'")
@click.option("--p-true-given-correct", default=1.0, show_default=True, type=float)
@click.option("--p-false-given-incorrect", default=1.0, show_default=True, type=float)
@click.option("--n", "n_mc", default=100000, show_default=True, type=int)
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--out", "out_path", default=None, type=click.Path())
def simulate(task_path, priors, confusion, p_true_given_correct,
             p_false_given_incorrect, n_mc, seed, out_path):
    """Predict what verdict-based correction does to the metrics."""
    task = _load_task(task_path)
    policy = corr.CorrectionPolicy(task=task)
    profile = corr.VerifierProfile(p_true_given_correct, p_false_given_incorrect)
    prior_values = _parse_floats(priors)
    rows = [_parse_floats(row) for row in confusion.split(";")]
    result = corr.simulate_correction(prior_values, rows, profile, policy,
                                      n_monte_carlo=n_mc, seed=seed)
    name, base_value = metrics.headline(result.base, task)
    _, expected_value = metrics.headline(result.expected, task)
    click.echo(f"base     {name} = {base_value:.4f}")
    click.echo(f"expected {name} = {expected_value:.4f} "
               f"({'gain' if expected_value >= base_value else 'drop'})")
    if result.empirical is not None:
        _, mc_value = metrics.headline(result.empirical, task)
        click.echo(f"monte-carlo {name} = {mc_value:.4f} (n={result.n_monte_carlo})")
    if out_path:
        doc = {"base": result.base.to_dict(), "expected": result.expected.to_dict()}
        if result.empirical is not None:
            doc["empirical"] = result.empirical.to_dict()
        Path(out_path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        click.echo(f"report -> {out_path}")
        write_manifest("simulate",
                       {"priors": priors, "confusion": confusion,
                        "p_true_given_correct": p_true_given_correct,
                        "p_false_given_incorrect": p_false_given_incorrect,
                        "n": n_mc, "seed": seed},
                       {"task": task_path}, {"report": out_path})


@cli.command()
@click.option("--train", "train_path", required=True, type=click.Path(exists=True))
@click.option("--val", "val_path", required=True, type=click.Path(exists=True))
@click.option("--task", "task_path", required=True, type=click.Path(exists=True))
@click.option("--encoder", default="hashing:256", show_default=True)
@click.option("--batch", default="4,8,16", show_default=True)
@click.option("--lr", default="2e-5,1e-4", show_default=True)
@click.option("--wd", default="0.001,0.005,0.01", show_default=True)
@click.option("--epochs", default="2,4,6,8,10,12,16,20", show_default=True)
@click.option("--lambda", "lam", default=0.1, show_default=True, type=float)
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
def grid(train_path, val_path, task_path, encoder, batch, lr, wd, epochs, lam,
         seed, out_path):
    """Train every grid cell and rank by validation headline metric."""
    from .encoders import make_encoder

    task = _load_task(task_path)
    train_set = corpus.load_dataset(train_path, task, split="train")
    val_set = corpus.load_dataset(val_path, task, split="validation")
    if not val_set.is_labeled:
        raise DataError("validation split must be labeled")
    cells = list(itertools.product(
        [int(b) for b in batch.split(",")],
        _parse_floats(lr),
        _parse_floats(wd),
        [int(e) for e in epochs.split(",")],
    ))
    if not cells:
        raise ConfigError("empty grid")
    backend = make_encoder(encoder)
    from .encoders import encode_batch
    E_train = encode_batch(backend, [ex.text for ex in train_set])
    rows = []
    metric_name = None
    for batch_size, lr_v, wd_v, epochs_v in cells:
        config = clf.TrainConfig(lambda_weight=lam, learning_rate=lr_v,
                                 batch_size=batch_size, weight_decay=wd_v,
                                 epochs=epochs_v, seed=seed)
        result = clf.fit(backend, train_set, config, embeddings=E_train)
        _, labels, _ = clf.predict_dataset(backend, result.head, val_set)
        report = metrics.evaluate(val_set.labels_array(), labels, task)
        metric_name, value = metrics.headline(report, task)
        rows.append({"batch": batch_size, "lr": lr_v, "wd": wd_v,
                     "epochs": epochs_v, metric_name: round(value, 6),
                     "accuracy": round(report.accuracy, 6)})
    rows.sort(key=lambda r: (-r[metric_name], r["batch"], r["lr"], r["wd"], r["epochs"]))
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    click.echo(f"{len(rows)} grid cells -> {out_path}")
    for row in rows[:5]:
        click.echo("  " + json.dumps(row))
    write_manifest("grid",
                   {"batch": batch, "lr": lr, "wd": wd, "epochs": epochs,
                    "lambda": lam, "seed": seed, "encoder": encoder},
                   {"train": train_path, "val": val_path, "task": task_path},
                   {"results": out_path})


def main(argv=None) -> None:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except (click.Abort, ConfigError) as exc:
        click.echo(f"usage error: {exc}", err=True)
        sys.exit(1)
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(2)
    except BackendError as exc:
        click.echo(f"backend error: {exc}", err=True)
        sys.exit(3)
    sys.exit(0)


if __name__ == "__main__":
    main()
