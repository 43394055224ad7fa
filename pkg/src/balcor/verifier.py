"""LLM verdict stage: prompt construction, response parsing, batch calls.

A prompt is built from a layout file with literal slots
``{instructions} {rules} {examples} {text} {label}`` filled in a single
pass (slot-like strings inside post text are never re-substituted).
The model is asked to answer "True" when the text supports the
predicted label and "False" otherwise; anything unparseable becomes
"inconclusive", which downstream policy treats as keep.

Real LLMs are nondeterministic and networked, so two deterministic
mock clients ship for offline runs: a keyword-rule client and an
oracle client with ground-truth access and configurable accuracy.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Protocol, Sequence, Union, runtime_checkable

from .corpus import TaskSpec
from .errors import ConfigError, LabelOutOfTask

SUPPORTED_VALUES = ("true", "false", "inconclusive")

# canonical query markers; the starter layout and the mock clients agree
# on these so mocks can recover (text, label) from a rendered prompt
QUERY_TEXT_PREFIX = "Post: "
QUERY_LABEL_PREFIX = "Assigned label: "

DEFAULT_LAYOUT = """\
{instructions}

Labeling rules:
{rules}

{examples}Review this case.
Post: {text}
Assigned label: {label}
Does the post support the assigned label? Start your answer with "True" or "False", then give a short explanation.
"""

_SLOTS = ("instructions", "rules", "examples", "text", "label")
_SLOT_RE = re.compile(r"\{(" + "|".join(_SLOTS) + r")\}")


@dataclass(frozen=True)
class FewShot:
    text: str
    label: int
    verdict: str  # "true" | "false"
    explanation: str


@dataclass(frozen=True)
class PromptTemplate:
    instructions: str
    labeling_rules: str
    fewshot: tuple[FewShot, ...] = ()
    layout: str = DEFAULT_LAYOUT

    def __post_init__(self):
        object.__setattr__(self, "fewshot", tuple(self.fewshot))
        positions = {}
        for m in _SLOT_RE.finditer(self.layout):
            positions.setdefault(m.group(1), m.start())
        missing = [s for s in _SLOTS if s not in positions]
        if missing:
            raise ConfigError(f"layout is missing slots: {missing}")
        order = [positions[s] for s in ("instructions", "rules", "examples", "text")]
        if order != sorted(order):
            raise ConfigError(
                "layout slots must appear in order instructions, rules, examples, text")

    @classmethod
    def from_files(cls, prompt_path, layout_path=None) -> "PromptTemplate":
        """``prompt_path``: JSON with instructions/rules/fewshot.
        ``layout_path``: optional plain-text slot layout."""
        with open(prompt_path, encoding="utf-8") as fh:
            cfg = json.load(fh)
        layout = DEFAULT_LAYOUT
        if layout_path is not None:
            with open(layout_path, encoding="utf-8") as fh:
                layout = fh.read()
        fewshot = tuple(
            FewShot(text=str(e["text"]), label=int(e["label"]),
                    verdict=str(e["verdict"]).lower(),
                    explanation=str(e.get("explanation", "")))
            for e in cfg.get("fewshot", ())
        )
        return cls(
            instructions=cfg.get("instructions", ""),
            labeling_rules=cfg.get("rules", cfg.get("labeling_rules", "")),
            fewshot=fewshot,
            layout=layout,
        )


def _render_fewshot(fewshot: Sequence[FewShot], task: TaskSpec) -> str:
    if not fewshot:
        return ""
    lines = ["Examples:"]
    for ex in fewshot:
        answer = "True" if ex.verdict == "true" else "False"
        lines.append(f"{QUERY_TEXT_PREFIX}{ex.text}")
        lines.append(f"{QUERY_LABEL_PREFIX}{task.label_name(ex.label)}")
        lines.append(f"Answer: {answer}. {ex.explanation}".rstrip())
        lines.append("")
    return "\n".join(lines) + "\n"


def build_prompt(template: PromptTemplate, text: str, predicted_label: int,
                 task: TaskSpec) -> str:
    """Render the full prompt for one (text, predicted label) query."""
    if predicted_label not in task.labels:
        raise LabelOutOfTask(
            f"label {predicted_label} not in task labels {task.labels}")
    values = {
        "instructions": template.instructions,
        "rules": template.labeling_rules,
        "examples": _render_fewshot(template.fewshot, task),
        "text": text,
        "label": task.label_name(predicted_label),
    }
    # one pass: substituted values are never rescanned for slots
    return _SLOT_RE.sub(lambda m: values[m.group(1)], template.layout)


@dataclass(frozen=True)
class VerifierRequest:
    example_id: str
    text: str
    predicted_label: int
    rendered_prompt: str


def build_requests(template: PromptTemplate, task: TaskSpec,
                   items: Sequence[tuple[str, str, int]]) -> list[VerifierRequest]:
    """items: (example_id, text, predicted_label) triples."""
    return [
        VerifierRequest(example_id=rid, text=text, predicted_label=label,
                        rendered_prompt=build_prompt(template, text, label, task))
        for rid, text, label in items
    ]


@dataclass(frozen=True)
class Verdict:
    example_id: str
    supported: str  # "true" | "false" | "inconclusive"
    explanation: str
    raw_response: str = ""
    attempts: int = 1

    def __post_init__(self):
        if self.supported not in SUPPORTED_VALUES:
            raise ValueError(f"supported must be one of {SUPPORTED_VALUES}")


_LEAD_TOKEN_RE = re.compile(r"[\W_]*([A-Za-z]+)")
_SEPARATORS = " \t\r\n.:,;!?*_`\"'()[]—–-"


def parse_verdict(raw: str, example_id: str, attempts: int = 1) -> Verdict:
    """Total parser: any byte string maps to a Verdict, never raises.

    The leading word decides the verdict (case-insensitive, with any
    punctuation or markdown wrapping skipped); everything after it is
    the explanation. Anything else is inconclusive.
    """
    raw = raw if isinstance(raw, str) else str(raw)
    m = _LEAD_TOKEN_RE.match(raw)
    token = m.group(1).lower() if m else ""
    if token in ("true", "false"):
        remainder = raw[m.end(1):].lstrip(_SEPARATORS).strip()
        explanation = remainder if remainder else raw.strip()
        return Verdict(example_id=example_id, supported=token,
                       explanation=explanation, raw_response=raw, attempts=attempts)
    return Verdict(example_id=example_id, supported="inconclusive",
                   explanation=raw, raw_response=raw, attempts=attempts)


@runtime_checkable
class LLMClient(Protocol):
    identifier: str

    def complete(self, prompt: str) -> str: ...


def _query_fields(prompt: str) -> tuple[str, str]:
    """Recover (text, label name) from a canonically rendered prompt.

    Uses the last occurrence of the query markers, since few-shot
    examples repeat them earlier in the prompt.
    """
    text_at = prompt.rfind(QUERY_TEXT_PREFIX)
    label_at = prompt.rfind(QUERY_LABEL_PREFIX)
    if text_at < 0 or label_at < text_at:
        raise ValueError("prompt does not carry canonical query markers")
    text = prompt[text_at + len(QUERY_TEXT_PREFIX):prompt.index("\n", text_at)]
    label_end = prompt.find("\n", label_at)
    label_end = len(prompt) if label_end < 0 else label_end
    label = prompt[label_at + len(QUERY_LABEL_PREFIX):label_end]
    return text, label.strip()


class KeywordRuleClient:
    """Deterministic offline verifier driven by per-label keyword rules.

    ``rules`` maps a label value to the keywords that count as evidence
    for it. A queried label with no rule entry is accepted (kept).
    """

    def __init__(self, task: TaskSpec, rules: Mapping[int, Sequence[str]]):
        self.task = task
        self.rules = {int(k): tuple(v) for k, v in rules.items()}
        self._by_name = {task.label_name(lab): lab for lab in task.labels}
        self.identifier = "mock-keyword"

    def complete(self, prompt: str) -> str:
        text, label_name = _query_fields(prompt)
        label = self._by_name.get(label_name)
        keywords = self.rules.get(label, ())
        if not keywords:
            return "True. No rule for this label; keeping it."
        lowered = text.lower()
        hits = [kw for kw in keywords if kw.lower() in lowered]
        if hits:
            return f"True. The post contains {hits[0]!r}, which supports the label."
        return (f"False. Step 1: the label requires one of {list(keywords)}. "
                "Step 2: none of them appear in the post.")


class OracleClient:
    """Mock verifier with ground-truth access and tunable accuracy.

    accuracy may be a single float or a per-predicted-label mapping.
    At accuracy 1.0 it answers "True" exactly when the predicted label
    equals the gold label. Errors are sampled deterministically per
    (seed, text), so results are independent of call order.
    """

    def __init__(self, task: TaskSpec, gold_by_text: Mapping[str, int],
                 accuracy: Union[float, Mapping[int, float]] = 1.0, seed: int = 0):
        self.task = task
        self.gold_by_text = dict(gold_by_text)
        self.accuracy = accuracy
        self.seed = seed
        self._by_name = {task.label_name(lab): lab for lab in task.labels}
        self.identifier = "mock-oracle"

    def _accuracy_for(self, label: int) -> float:
        if isinstance(self.accuracy, Mapping):
            return float(self.accuracy.get(label, 1.0))
        return float(self.accuracy)

    def complete(self, prompt: str) -> str:
        text, label_name = _query_fields(prompt)
        if label_name not in self._by_name or text not in self.gold_by_text:
            return "I cannot judge this case."
        predicted = self._by_name[label_name]
        gold = self.gold_by_text[text]
        truthful = predicted == gold
        digest = hashlib.blake2b(f"{self.seed}|{text}".encode("utf-8"),
                                 digest_size=8).digest()
        u = int.from_bytes(digest, "big") / 2**64
        answer = truthful if u < self._accuracy_for(predicted) else not truthful
        if answer:
            return "True. The post is consistent with the assigned label."
        return ("False. Step 1: compare the post against the label definition. "
                "Step 2: the post does not support the assigned label.")


class OpenAIChatClient:
    """Minimal chat-completions client for live runs.

    The API key is read from the environment at call time and is never
    logged or echoed. Not exercised by the test suite.
    """

    def __init__(self, model: str = "gpt-3.5-turbo",
                 base_url: str = "https://api.openai.com/v1",
                 api_key_env: str = "BALCOR_LLM_API_KEY",
                 temperature: float = 0.0, timeout: float = 60.0):
        self.model = model
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.temperature = temperature
        self.timeout = timeout
        self.identifier = f"openai:{model}"

    def complete(self, prompt: str) -> str:
        import requests

        key = os.environ.get(self.api_key_env)
        if not key:
            raise ConfigError(f"environment variable {self.api_key_env} is not set")
        resp = requests.post(
            f"{self.base_url}/chat/completions",
            json={
                "model": self.model,
                "temperature": self.temperature,
                "messages": [{"role": "user", "content": prompt}],
            },
            headers={"Authorization": f"Bearer {key}"},
            timeout=self.timeout,
        )
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"]


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_seconds: float = 0.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be >= 1")


class ResponseCache:
    """Append-only JSONL response cache keyed by prompt content hash.

    Safe under concurrent use from verify_batch workers: reads hit an
    in-memory dict, writes serialize through one lock and are flushed
    line-atomically.
    """

    def __init__(self, path):
        self.path = str(path)
        self._lock = threading.Lock()
        self._entries: dict[str, str] = {}
        if os.path.exists(self.path):
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    rec = json.loads(line)
                    self._entries[rec["key"]] = rec["response"]

    @staticmethod
    def key_for(prompt: str) -> str:
        return hashlib.sha256(prompt.encode("utf-8")).hexdigest()

    def get(self, prompt: str) -> Optional[str]:
        return self._entries.get(self.key_for(prompt))

    def put(self, prompt: str, response: str) -> None:
        key = self.key_for(prompt)
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = response
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"key": key, "response": response}) + "\n")
                fh.flush()

    def __len__(self) -> int:
        return len(self._entries)


def _verify_one(request: VerifierRequest, client: LLMClient, retry: RetryPolicy,
                cache: Optional[ResponseCache]) -> Verdict:
    if cache is not None:
        hit = cache.get(request.rendered_prompt)
        if hit is not None:
            return parse_verdict(hit, request.example_id, attempts=0)
    last_error: Optional[Exception] = None
    for attempt in range(1, retry.max_attempts + 1):
        try:
            response = client.complete(request.rendered_prompt)
        except Exception as exc:
            last_error = exc
            if attempt < retry.max_attempts and retry.backoff_seconds > 0:
                time.sleep(retry.backoff_seconds * (2 ** (attempt - 1)))
            continue
        if cache is not None:
            cache.put(request.rendered_prompt, response)
        return parse_verdict(response, request.example_id, attempts=attempt)
    return Verdict(
        example_id=request.example_id,
        supported="inconclusive",
        explanation=f"client failed after {retry.max_attempts} attempts: {last_error}",
        raw_response="",
        attempts=retry.max_attempts,
    )


def verify_batch(requests: Sequence[VerifierRequest], client: LLMClient,
                 max_parallel: int = 1, retry: RetryPolicy = RetryPolicy(),
                 cache: Optional[ResponseCache] = None) -> list[Verdict]:
    """One Verdict per request, in request order.

    Failures are retried per policy; exhausted retries yield an
    inconclusive verdict rather than an exception, so one bad call
    never sinks a batch.
    """
    if max_parallel < 1:
        raise ConfigError(f"max_parallel must be >= 1, got {max_parallel}")
    if not requests:
        return []
    if max_parallel == 1:
        return [_verify_one(r, client, retry, cache) for r in requests]
    with ThreadPoolExecutor(max_workers=max_parallel) as pool:
        return list(pool.map(lambda r: _verify_one(r, client, retry, cache), requests))


def write_verdicts(path, verdicts: Sequence[Verdict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in verdicts:
            rec = {"id": v.example_id, "supported": v.supported,
                   "explanation": v.explanation, "attempts": v.attempts}
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_verdicts(path) -> dict[str, Verdict]:
    out: dict[str, Verdict] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            out[str(rec["id"])] = Verdict(
                example_id=str(rec["id"]),
                supported=rec["supported"],
                explanation=rec.get("explanation", ""),
                attempts=int(rec.get("attempts", 1)),
            )
    return out
