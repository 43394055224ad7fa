"""Verdict-driven label correction, review queues, and outcome simulation.

Policy: a prediction outside the task's verify scope is never touched.
Inside scope, "true" and "inconclusive" verdicts keep the label — we
never flip without explicit negative evidence — and a "false" verdict
either flips it (binary) or converts it to the designated majority
label. Instead of auto-correcting, flagged cases can be queued for a
human, whose keep/relabel decisions are merged back here.

``simulate_correction`` composes a base confusion matrix with a
verifier error profile to predict what correction will do to the
metrics before spending a single LLM call — including the regime where
an imperfect verifier makes a high-precision classifier worse.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .corpus import TaskSpec
from .errors import (
    IdMismatch,
    InvalidDistribution,
    PendingDecisions,
    PolicyMismatch,
)
from .metrics import EvalReport, report_from_confusion
from .verifier import Verdict

PROVENANCE_VALUES = ("kept", "auto_flip", "auto_majority", "human")


@dataclass(frozen=True)
class CorrectionPolicy:
    task: TaskSpec
    pending_fallback: str = "auto"  # "auto" | "strict"

    def __post_init__(self):
        if self.pending_fallback not in ("auto", "strict"):
            raise ValueError(f"unknown pending_fallback {self.pending_fallback!r}")

    def conversion_target(self, predicted_label: int) -> int:
        """Label a false verdict converts ``predicted_label`` into."""
        task = self.task
        if task.correction_mode == "flip_binary":
            if len(task.labels) != 2:
                raise PolicyMismatch("flip_binary needs exactly two labels")
            a, b = task.labels
            return b if predicted_label == a else a
        return task.majority_label


def apply_correction(predicted_label: int, verdict: Optional[Verdict],
                     policy: CorrectionPolicy) -> int:
    """Final label for one prediction under the automatic rule.

    Idempotent for scopes that exclude the conversion target: a
    converted label lands outside the verify scope and is never
    re-examined.
    """
    task = policy.task
    if predicted_label not in task.labels:
        raise PolicyMismatch(
            f"predicted label {predicted_label} not in task labels {task.labels}")
    if predicted_label not in task.verify_scope:
        return predicted_label
    if verdict is None or verdict.supported in ("true", "inconclusive"):
        return predicted_label
    return policy.conversion_target(predicted_label)


@dataclass(frozen=True)
class ReviewItem:
    example_id: str
    text: str
    predicted_label: int
    verdict: Verdict
    decision: str = "pending"  # "pending" | "keep" | "set_label"
    set_label: Optional[int] = None
    reviewer: Optional[str] = None
    decided_at: Optional[str] = None

    def __post_init__(self):
        if self.decision not in ("pending", "keep", "set_label"):
            raise ValueError(f"unknown decision {self.decision!r}")
        if self.decision == "set_label" and self.set_label is None:
            raise ValueError("set_label decision needs a label")

    def decided(self, decision: str, set_label: Optional[int] = None,
                reviewer: Optional[str] = None,
                decided_at: Optional[str] = None) -> "ReviewItem":
        if self.decision != "pending":
            raise ValueError(f"item {self.example_id} already decided")
        return replace(self, decision=decision, set_label=set_label,
                       reviewer=reviewer, decided_at=decided_at)

    def to_dict(self) -> dict:
        rec = {
            "id": self.example_id,
            "text": self.text,
            "predicted_label": self.predicted_label,
            "verdict": {
                "supported": self.verdict.supported,
                "explanation": self.verdict.explanation,
                "attempts": self.verdict.attempts,
            },
            "decision": self.decision,
        }
        if self.set_label is not None:
            rec["set_label"] = self.set_label
        if self.reviewer:
            rec["reviewer"] = self.reviewer
        if self.decided_at:
            rec["decided_at"] = self.decided_at
        return rec

    @classmethod
    def from_dict(cls, rec: Mapping) -> "ReviewItem":
        v = rec.get("verdict", {})
        return cls(
            example_id=str(rec["id"]),
            text=rec.get("text", ""),
            predicted_label=int(rec["predicted_label"]),
            verdict=Verdict(
                example_id=str(rec["id"]),
                supported=v.get("supported", "false"),
                explanation=v.get("explanation", ""),
                attempts=int(v.get("attempts", 1)),
            ),
            decision=rec.get("decision", "pending"),
            set_label=rec.get("set_label"),
            reviewer=rec.get("reviewer"),
            decided_at=rec.get("decided_at"),
        )


def write_review_queue(path, items: Sequence[ReviewItem]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item.to_dict(), ensure_ascii=False) + "\n")


def read_review_queue(path) -> list[ReviewItem]:
    items = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                items.append(ReviewItem.from_dict(json.loads(line)))
    return items


def build_review_queue(predictions: Mapping[str, int],
                       verdicts: Mapping[str, Verdict],
                       texts: Mapping[str, str],
                       task: TaskSpec) -> list[ReviewItem]:
    """Pending ReviewItems for every in-scope "false" prediction.

    Inputs are aligned by example id; a verdict or flagged item without
    a matching prediction/text is an IdMismatch.
    """
    unknown = set(verdicts) - set(predictions)
    if unknown:
        raise IdMismatch(f"verdicts for unknown prediction ids: {sorted(unknown)[:5]}")
    items = []
    for rid, verdict in verdicts.items():
        pred = predictions[rid]
        if pred not in task.verify_scope or verdict.supported != "false":
            continue
        if rid not in texts:
            raise IdMismatch(f"no text for flagged example {rid!r}")
        items.append(ReviewItem(example_id=rid, text=texts[rid],
                                predicted_label=pred, verdict=verdict))
    return sorted(items, key=lambda it: it.example_id)


@dataclass(frozen=True)
class FinalLabel:
    example_id: str
    final: int
    provenance: str

    def to_dict(self) -> dict:
        return {"id": self.example_id, "final": self.final,
                "provenance": self.provenance}


def merge_decisions(predictions: Mapping[str, int], queue: Sequence[ReviewItem],
                    policy: CorrectionPolicy) -> list[FinalLabel]:
    """Combine raw predictions with queue decisions into final labels.

    Output is sorted by example id. Pending items follow the automatic
    rule under the "auto" fallback; the "strict" fallback refuses to
    emit labels while any decision is outstanding.
    """
    by_id = {}
    pending = []
    for item in queue:
        if item.example_id not in predictions:
            raise IdMismatch(f"queue item {item.example_id!r} has no prediction")
        if item.decision == "pending":
            pending.append(item.example_id)
        by_id[item.example_id] = item
    if pending and policy.pending_fallback == "strict":
        raise PendingDecisions(sorted(pending))

    auto_provenance = ("auto_flip" if policy.task.correction_mode == "flip_binary"
                       else "auto_majority")
    out = []
    for rid in sorted(predictions):
        pred = predictions[rid]
        item = by_id.get(rid)
        if item is None:
            out.append(FinalLabel(rid, pred, "kept"))
        elif item.decision == "keep":
            out.append(FinalLabel(rid, pred, "human"))
        elif item.decision == "set_label":
            out.append(FinalLabel(rid, int(item.set_label), "human"))
        else:  # pending, fallback == auto
            final = apply_correction(pred, item.verdict, policy)
            out.append(FinalLabel(rid, final, auto_provenance if final != pred else "kept"))
    return out


def write_final_labels(path, labels: Sequence[FinalLabel]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(final_labels_bytes(labels).decode("utf-8"))


def final_labels_bytes(labels: Sequence[FinalLabel]) -> bytes:
    lines = [json.dumps(l.to_dict(), ensure_ascii=False) for l in labels]
    return ("\n".join(lines) + "\n" if lines else "").encode("utf-8")


@dataclass(frozen=True)
class VerifierProfile:
    """Verdict behavior as two conditional probabilities.

    ``p_true_given_correct``: chance the verifier answers "true" when
    the prediction matches gold. ``p_false_given_incorrect``: chance it
    answers "false" when the prediction is wrong. (1.0, 1.0) is a
    perfect oracle; (1.0, 0.0) never contradicts anything.
    """

    p_true_given_correct: float = 1.0
    p_false_given_incorrect: float = 1.0

    def __post_init__(self):
        for name in ("p_true_given_correct", "p_false_given_incorrect"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidDistribution(f"{name} must be in [0, 1], got {v}")


def _check_distribution(vec: np.ndarray, what: str) -> None:
    if np.any(vec < -1e-12) or abs(vec.sum() - 1.0) > 1e-9:
        raise InvalidDistribution(f"{what} must be a probability distribution, got {vec}")


def expected_confusion(class_priors: Sequence[float],
                       base_confusion: Sequence[Sequence[float]],
                       profile: VerifierProfile,
                       policy: CorrectionPolicy) -> np.ndarray:
    """Closed-form post-correction confusion as joint probabilities.

    ``base_confusion[g][p]`` is P(pred = p | gold = g) in task label
    order. For an in-scope prediction, probability mass
    P(false verdict | gold, pred) moves from column p to the policy's
    conversion target; the rest stays put.
    """
    task = policy.task
    k = task.n_classes
    priors = np.asarray(class_priors, dtype=float)
    base = np.asarray(base_confusion, dtype=float)
    if priors.shape != (k,) or base.shape != (k, k):
        raise InvalidDistribution(
            f"need priors ({k},) and confusion ({k}, {k}), got {priors.shape}, {base.shape}")
    _check_distribution(priors, "class_priors")
    for g in range(k):
        _check_distribution(base[g], f"base_confusion row {g}")

    joint = priors[:, None] * base  # P(gold = g, pred = p)
    out = np.zeros_like(joint)
    for p_idx, p_label in enumerate(task.labels):
        if p_label not in task.verify_scope:
            out[:, p_idx] += joint[:, p_idx]
            continue
        target_idx = task.label_index(policy.conversion_target(p_label))
        for g_idx in range(k):
            mass = joint[g_idx, p_idx]
            if mass == 0.0:
                continue
            correct = task.labels[g_idx] == p_label
            p_false = ((1.0 - profile.p_true_given_correct) if correct
                       else profile.p_false_given_incorrect)
            out[g_idx, p_idx] += mass * (1.0 - p_false)
            out[g_idx, target_idx] += mass * p_false
    return out


@dataclass(frozen=True)
class SimulationResult:
    base: EvalReport
    expected: EvalReport       # closed form
    empirical: Optional[EvalReport]  # Monte Carlo, None when n_monte_carlo == 0
    n_monte_carlo: int


def simulate_correction(class_priors: Sequence[float],
                        base_confusion: Sequence[Sequence[float]],
                        profile: VerifierProfile,
                        policy: CorrectionPolicy,
                        n_monte_carlo: int = 0,
                        seed: int = 0) -> SimulationResult:
    """Predict correction outcomes analytically and by sampling.

    The closed form composes the base confusion with the verdict
    probabilities and the policy map; the Monte Carlo run samples
    (gold, pred, verdict) triples and tallies the corrected confusion.
    Reports are built from probability mass (closed form) and counts
    (empirical).
    """
    if n_monte_carlo < 0:
        raise InvalidDistribution("n_monte_carlo must be >= 0")
    task = policy.task
    k = task.n_classes
    priors = np.asarray(class_priors, dtype=float)
    base = np.asarray(base_confusion, dtype=float)

    base_joint = priors[:, None] * base
    base_report = report_from_confusion(base_joint, task)
    expected = report_from_confusion(
        expected_confusion(priors, base, profile, policy), task)

    empirical = None
    if n_monte_carlo > 0:
        rng = np.random.default_rng(seed)
        gold_idx = rng.choice(k, size=n_monte_carlo, p=priors)
        pred_idx = np.empty(n_monte_carlo, dtype=np.int64)
        for g in range(k):
            mask = gold_idx == g
            pred_idx[mask] = rng.choice(k, size=int(mask.sum()), p=base[g])
        u = rng.random(n_monte_carlo)
        counts = np.zeros((k, k), dtype=float)
        scope_idx = {task.label_index(lab) for lab in task.verify_scope}
        targets = {
            task.label_index(lab): task.label_index(policy.conversion_target(lab))
            for lab in task.verify_scope
        }
        for g, p, x in zip(gold_idx.tolist(), pred_idx.tolist(), u.tolist()):
            final = p
            if p in scope_idx:
                p_false = ((1.0 - profile.p_true_given_correct) if g == p
                           else profile.p_false_given_incorrect)
                if x < p_false:
                    final = targets[p]
            counts[g, final] += 1
        empirical = report_from_confusion(counts, task)

    return SimulationResult(base=base_report, expected=expected,
                            empirical=empirical, n_monte_carlo=n_monte_carlo)
