"""Generation clients: an abstract interface, a deterministic table-backed
mock, and an HTTP completion-API adapter.

The mock stands in for a language model in tests and scenarios: given
evidence it echoes the applicable object (or a True/False verdict for
fact-check prompts); without evidence it answers from a fixed prior table,
playing the role of a stale model.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Protocol

from .errors import EmptyCompletion, ModelError
from .prompts import AssembledPrompt, task_instruction
from .ranking import contains_phrase, tokenize
from .sparqlio import TransportReply
from .triples import TaskKind

DISTRIBUTION_TOLERANCE = 1e-9

# function words carry no signal about which relation a query asks for
_STOPWORDS = frozenset(
    "a an and at by for in is of on or the to with".split())


@dataclass(frozen=True)
class ModelAnswer:
    """Generated text, an optional answer distribution, and the call latency."""

    text: str
    distribution: Optional[Mapping[str, float]] = None
    latency: float = 0.0

    def __post_init__(self):
        if self.distribution is not None:
            dist = dict(self.distribution)
            object.__setattr__(self, "distribution", dist)
            if any(p < 0 for p in dist.values()):
                raise ValueError("distribution entries must be non-negative")
            total = sum(dist.values())
            if abs(total - 1.0) > DISTRIBUTION_TOLERANCE:
                raise ValueError(f"distribution sums to {total}, expected 1")


class ModelClient(Protocol):
    supports_distribution: bool

    def generate(self, prompt: AssembledPrompt) -> ModelAnswer:
        ...

    def complete_text(self, text: str) -> str:
        """Raw text completion, for prompts outside the evidence layout
        (e.g. entity extraction)."""
        ...


class MockTableModel:
    """Deterministic mock: evidence echo, else prior-table lookup.

    The answer is the object of the first evidence triple whose relation
    tokens overlap the query; fact-check prompts instead yield True/False
    depending on whether that object appears in the proposition. With no
    applicable evidence the fixed prior table answers (default when the
    query is unknown). The emitted distribution puts mass 1 - epsilon on the
    answer and spreads epsilon uniformly over the candidate set.
    """

    supports_distribution = True

    def __init__(self, priors: Optional[Mapping[str, str]] = None,
                 default_answer: str = "I don't know",
                 epsilon: float = 0.01):
        if not 0 <= epsilon < 1:
            raise ValueError("epsilon must be in [0, 1)")
        self.priors = dict(priors or {})
        self.default_answer = default_answer
        self.epsilon = epsilon

    def generate(self, prompt: AssembledPrompt) -> ModelAnswer:
        start = time.perf_counter()
        applicable = self._applicable_triple(prompt)
        if applicable is not None:
            if prompt.task_instruction == task_instruction(TaskKind.FACT_CHECK):
                stated = contains_phrase(prompt.query,
                                         applicable.object_label)
                answer = "True" if stated else "False"
            else:
                answer = applicable.object_label
        else:
            answer = self.priors.get(prompt.query, self.default_answer)
        distribution = self._distribution(prompt, answer)
        return ModelAnswer(text=answer, distribution=distribution,
                           latency=time.perf_counter() - start)

    def complete_text(self, text: str) -> str:
        """Answer the last line of a raw prompt from the prior table."""
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            return self.default_answer
        return self.priors.get(lines[-1], self.default_answer)

    def _applicable_triple(self, prompt: AssembledPrompt):
        query_tokens = set(tokenize(prompt.query)) - _STOPWORDS
        for triple in prompt.evidence_triples:
            relation_tokens = set(tokenize(triple.relation_label)) - _STOPWORDS
            if relation_tokens & query_tokens:
                return triple
        return None

    def _distribution(self, prompt: AssembledPrompt,
                      answer: str) -> dict[str, float]:
        candidates = {answer, self.default_answer}
        candidates.update(self.priors.values())
        candidates.update(t.object_label for t in prompt.evidence_triples)
        ordered = sorted(candidates)
        share = self.epsilon / len(ordered)
        dist = {c: share for c in ordered}
        dist[answer] += 1.0 - self.epsilon
        return dist


PostTransport = Callable[[str, dict, Mapping[str, str]], TransportReply]


def requests_post_transport(url: str, payload: dict,
                            headers: Mapping[str, str]) -> TransportReply:
    import requests

    resp = requests.post(url, json=payload, headers=headers, timeout=120)
    return TransportReply(status=resp.status_code, text=resp.text,
                          headers=dict(resp.headers))


@dataclass
class HttpCompletionModel:
    """Adapter for a JSON completion endpoint.

    Request: {"prompt": str, "max_tokens": int}; response: {"text": str}.
    The answer is the trimmed first line of the completion. Generation is
    not idempotent, so the request is retried at most `retry_budget` extra
    times and the final error is surfaced verbatim.
    """

    endpoint: str
    api_key: Optional[str] = None
    max_tokens: int = 64
    retry_budget: int = 0
    transport: PostTransport = field(default=requests_post_transport)
    sleep: Callable[[float], None] = field(default=time.sleep)
    backoff_s: float = 0.25

    supports_distribution = False

    def generate(self, prompt: AssembledPrompt) -> ModelAnswer:
        start = time.perf_counter()
        text = self.complete_text(prompt.render())
        return ModelAnswer(text=text, distribution=None,
                           latency=time.perf_counter() - start)

    def complete_text(self, text: str) -> str:
        payload = {"prompt": text, "max_tokens": self.max_tokens}
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        attempts = self.retry_budget + 1
        delay = self.backoff_s
        last_error: Exception | None = None
        for attempt in range(attempts):
            try:
                return self._post_once(payload, headers)
            except ModelError as exc:
                last_error = exc
                if attempt + 1 < attempts:
                    self.sleep(delay)
                    delay *= 2
        raise last_error  # final error verbatim

    def _post_once(self, payload: dict, headers: Mapping[str, str]) -> str:
        try:
            reply = self.transport(self.endpoint, payload, headers)
        except Exception as exc:
            raise ModelError(f"completion request failed: {exc}") from exc
        if not 200 <= reply.status < 300:
            raise ModelError(
                f"completion endpoint returned HTTP {reply.status}: "
                f"{reply.text[:200]}")
        try:
            body = json.loads(reply.text)
            completion = body["text"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ModelError(f"malformed completion payload: {exc}") from exc
        first_line = completion.strip().splitlines()
        if not first_line or not first_line[0].strip():
            raise EmptyCompletion("completion endpoint returned empty text")
        return first_line[0].strip()
