import json
import threading
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from balcor.errors import ConfigError, LabelOutOfTask
from balcor.verifier import (
    DEFAULT_LAYOUT,
    FewShot,
    KeywordRuleClient,
    OracleClient,
    PromptTemplate,
    ResponseCache,
    RetryPolicy,
    Verdict,
    VerifierRequest,
    build_prompt,
    build_requests,
    parse_verdict,
    read_verdicts,
    verify_batch,
    write_verdicts,
)

FIXTURES = Path(__file__).parent / "fixtures"


def simple_template(fewshot=()):
    return PromptTemplate(
        instructions="Check the assigned label.",
        labeling_rules="1 means a self-reported positive test; 0 anything else.",
        fewshot=tuple(fewshot),
    )


class TestBuildPrompt:
    def test_fewshot_precedes_query(self, binary_task):
        fewshot = [
            FewShot("example one text", 1, "true", "it is a self report"),
            FewShot("example two text", 1, "false", "it is about an aunt"),
        ]
        prompt = build_prompt(simple_template(fewshot), "the query post", 1, binary_task)
        a = prompt.index("example one text")
        b = prompt.index("example two text")
        q = prompt.index("the query post")
        assert a < b < q

    def test_empty_fewshot_omits_examples_section(self, binary_task):
        prompt = build_prompt(simple_template(), "just a post", 1, binary_task)
        assert "Examples:" not in prompt

    def test_text_slots_not_recursive(self, binary_task):
        text = "watch out for {label} and {rules} in posts"
        prompt = build_prompt(simple_template(), text, 0, binary_task)
        assert "{label}" in prompt and "{rules}" in prompt

    def test_query_text_appears_once(self, binary_task):
        prompt = build_prompt(simple_template(), "a unique query string", 1, binary_task)
        assert prompt.count("a unique query string") == 1
        assert binary_task.label_name(1) in prompt

    def test_label_out_of_task(self, binary_task):
        with pytest.raises(LabelOutOfTask):
            build_prompt(simple_template(), "post", 7, binary_task)

    def test_layout_order_enforced(self):
        bad = DEFAULT_LAYOUT.replace("{rules}", "").replace(
            "{instructions}", "{instructions}\n{rules}", 1)
        # rules now precede... actually appear before instructions? construct explicit
        with pytest.raises(ConfigError):
            PromptTemplate(instructions="i", labeling_rules="r",
                           layout="{rules}\n{instructions}\n{examples}\n{text}\n{label}")
        with pytest.raises(ConfigError):
            PromptTemplate(instructions="i", labeling_rules="r",
                           layout="{instructions}\n{rules}\n{text}\n{label}")

    @given(a=st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126),
                     min_size=1, max_size=30).filter(lambda s: s.strip()),
           b=st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126),
                     min_size=1, max_size=30).filter(lambda s: s.strip()))
    @settings(max_examples=60, deadline=None)
    def test_injective_in_text_and_label(self, a, b):
        from balcor.corpus import TaskSpec

        task = TaskSpec(task_id="t", labels=(0, 1))
        tmpl = simple_template()
        if a != b:
            assert build_prompt(tmpl, a, 0, task) != build_prompt(tmpl, b, 0, task)
        assert build_prompt(tmpl, a, 0, task) != build_prompt(tmpl, a, 1, task)

    def test_from_files(self, tmp_path, binary_task):
        prompt_cfg = {"instructions": "Check labels.", "rules": "Rule text.",
                      "fewshot": [{"text": "t1", "label": 1, "verdict": "true",
                                   "explanation": "e1"}]}
        p = tmp_path / "prompt.json"
        p.write_text(json.dumps(prompt_cfg))
        tmpl = PromptTemplate.from_files(p)
        rendered = build_prompt(tmpl, "query text", 1, binary_task)
        assert "Check labels." in rendered and "t1" in rendered


class TestParseVerdict:
    def test_plain_true(self):
        v = parse_verdict("True. The user explicitly reports a positive test.", "x")
        assert v.supported == "true"
        assert v.explanation == "The user explicitly reports a positive test."

    def test_cot_false(self):
        raw = "False. Step 1: the post describes a relative. Step 2: not a self-report."
        v = parse_verdict(raw, "x")
        assert v.supported == "false"
        assert v.explanation.startswith("Step 1:")
        assert "Step 2:" in v.explanation

    def test_fallback_inconclusive(self):
        v = parse_verdict("I'm not sure about this one", "x")
        assert v.supported == "inconclusive"
        assert v.explanation == "I'm not sure about this one"

    def test_fixture_file(self):
        rows = [json.loads(line) for line in
                (FIXTURES / "verdict_responses.jsonl").read_text().splitlines()]
        assert len(rows) == 20
        for i, row in enumerate(rows):
            v = parse_verdict(row["response"], f"fx{i}")
            assert v.supported == row["expected"], row["response"]

    def test_bare_token_keeps_nonempty_explanation(self):
        v = parse_verdict("TRUE", "x")
        assert v.supported == "true" and v.explanation == "TRUE"

    @given(raw=st.text(max_size=200))
    @settings(max_examples=200, deadline=None)
    def test_total_over_arbitrary_strings(self, raw):
        v = parse_verdict(raw, "x")
        assert v.supported in ("true", "false", "inconclusive")


class ScriptedClient:
    identifier = "scripted"

    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def complete(self, prompt):
        self.calls += 1
        return self.fn(prompt)


class FlakyClient:
    identifier = "flaky"

    def __init__(self, failures, response="True. fine."):
        self.failures = failures
        self.response = response
        self.calls = 0

    def complete(self, prompt):
        self.calls += 1
        if self.calls <= self.failures:
            raise RuntimeError(f"boom {self.calls}")
        return self.response


def requests_fixture(task, n=10):
    tmpl = simple_template()
    return build_requests(tmpl, task, [(f"id{i:02d}", f"post number {i}", 1)
                                       for i in range(n)])


class TestVerifyBatch:
    def test_order_alignment(self, binary_task):
        reqs = requests_fixture(binary_task, 10)
        client = ScriptedClient(lambda p: "True. ok.")
        verdicts = verify_batch(reqs, client, max_parallel=1)
        assert [v.example_id for v in verdicts] == [r.example_id for r in reqs]

    def test_order_alignment_parallel(self, binary_task):
        reqs = requests_fixture(binary_task, 16)
        client = ScriptedClient(lambda p: "False. nope.")
        verdicts = verify_batch(reqs, client, max_parallel=4)
        assert [v.example_id for v in verdicts] == [r.example_id for r in reqs]

    def test_retry_then_success(self, binary_task):
        reqs = requests_fixture(binary_task, 1)
        client = FlakyClient(failures=2)
        verdicts = verify_batch(reqs, client, retry=RetryPolicy(max_attempts=3))
        assert verdicts[0].supported == "true"
        assert verdicts[0].attempts == 3

    def test_retries_exhausted(self, binary_task):
        reqs = requests_fixture(binary_task, 1)
        client = FlakyClient(failures=5)
        verdicts = verify_batch(reqs, client, retry=RetryPolicy(max_attempts=3))
        assert verdicts[0].supported == "inconclusive"
        assert verdicts[0].attempts == 3

    def test_bad_max_parallel(self, binary_task):
        with pytest.raises(ConfigError):
            verify_batch(requests_fixture(binary_task, 1), ScriptedClient(lambda p: "x"),
                         max_parallel=0)

    def test_deterministic_runs(self, binary_task):
        reqs = requests_fixture(binary_task, 8)
        gold = {r.text: 1 for r in reqs}
        out = []
        for _ in range(2):
            client = OracleClient(binary_task, gold, accuracy=0.7, seed=11)
            out.append(verify_batch(reqs, client, max_parallel=1))
        assert out[0] == out[1]


class TestResponseCache:
    def test_cache_hits_skip_client(self, tmp_path, binary_task):
        reqs = requests_fixture(binary_task, 5)
        cache = ResponseCache(tmp_path / "cache.jsonl")
        client = ScriptedClient(lambda p: "True. cached soon.")
        first = verify_batch(reqs, client, cache=cache)
        assert client.calls == 5
        assert all(v.attempts == 1 for v in first)
        again = verify_batch(reqs, client, cache=ResponseCache(tmp_path / "cache.jsonl"))
        assert client.calls == 5  # untouched
        assert all(v.attempts == 0 for v in again)
        assert [v.supported for v in again] == [v.supported for v in first]

    def test_append_only_file(self, tmp_path, binary_task):
        path = tmp_path / "cache.jsonl"
        cache = ResponseCache(path)
        cache.put("prompt-a", "True. a")
        cache.put("prompt-a", "True. ignored duplicate")
        cache.put("prompt-b", "False. b")
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert ResponseCache(path).get("prompt-a") == "True. a"

    def test_concurrent_puts(self, tmp_path):
        cache = ResponseCache(tmp_path / "cache.jsonl")

        def worker(i):
            for j in range(20):
                cache.put(f"prompt-{j}", f"True. {j}")

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(cache) == 20
        reloaded = ResponseCache(tmp_path / "cache.jsonl")
        assert len(reloaded) == 20


class TestMockClients:
    def test_oracle_accuracy_one(self, binary_task):
        texts = [f"post {i}" for i in range(6)]
        gold = {t: i % 2 for i, t in enumerate(texts)}
        client = OracleClient(binary_task, gold, accuracy=1.0, seed=0)
        tmpl = simple_template()
        for text, g in gold.items():
            for pred in (0, 1):
                raw = client.complete(build_prompt(tmpl, text, pred, binary_task))
                v = parse_verdict(raw, "x")
                expected = "true" if pred == g else "false"
                assert v.supported == expected

    def test_keyword_client(self, binary_task):
        client = KeywordRuleClient(binary_task, {1: ["tested positive", "diagnosed"]})
        tmpl = simple_template()
        hit = client.complete(build_prompt(tmpl, "i was diagnosed today", 1, binary_task))
        miss = client.complete(build_prompt(tmpl, "nice walk in the park", 1, binary_task))
        no_rule = client.complete(build_prompt(tmpl, "anything", 0, binary_task))
        assert parse_verdict(hit, "x").supported == "true"
        assert parse_verdict(miss, "x").supported == "false"
        assert parse_verdict(no_rule, "x").supported == "true"


class TestVerdictIO:
    def test_round_trip(self, tmp_path):
        verdicts = [
            Verdict("a", "true", "fine", raw_response="True. fine", attempts=1),
            Verdict("b", "false", "Step 1: nope.", attempts=2),
            Verdict("c", "inconclusive", "???", attempts=3),
        ]
        path = tmp_path / "verdicts.jsonl"
        write_verdicts(path, verdicts)
        loaded = read_verdicts(path)
        assert set(loaded) == {"a", "b", "c"}
        assert loaded["b"].supported == "false"
        assert loaded["b"].explanation == "Step 1: nope."
        assert loaded["c"].attempts == 3
