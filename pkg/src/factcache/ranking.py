"""Evidence ranking: score candidate triples against a query, keep top-k.

The default scorer is a deterministic lexical one (cosine over lowercase
token-count vectors of the serialized triple vs. the query). An embedding
provider can be plugged in instead; the ranking logic is identical.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

from .triples import FactTriple, TripleSet

_TOKEN_RE = re.compile(r"[0-9a-z]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def token_cosine(a: str, b: str) -> float:
    """Cosine similarity of token-count vectors; 0 when either is empty."""
    ca, cb = Counter(tokenize(a)), Counter(tokenize(b))
    if not ca or not cb:
        return 0.0
    dot = sum(ca[t] * cb[t] for t in ca.keys() & cb.keys())
    norm = math.sqrt(sum(v * v for v in ca.values()))
    norm *= math.sqrt(sum(v * v for v in cb.values()))
    return dot / norm if norm else 0.0


def contains_phrase(text: str, phrase: str) -> bool:
    """Token-bounded containment; 'Mayor 1' must not match inside
    'Mayor 10'."""
    text_tokens = tokenize(text)
    phrase_tokens = tokenize(phrase)
    if not phrase_tokens:
        return False
    n = len(phrase_tokens)
    return any(text_tokens[i:i + n] == phrase_tokens
               for i in range(len(text_tokens) - n + 1))


class Scorer(Protocol):
    def score(self, query: str, candidates: Sequence[FactTriple]) -> list[float]:
        ...


class LexicalScorer:
    """Token-count cosine between the query and each serialized triple."""

    def score(self, query: str, candidates: Sequence[FactTriple]) -> list[float]:
        return [token_cosine(query, t.render()) for t in candidates]


class EmbeddingScorer:
    """Cosine over externally supplied vectors, clamped into [0, 1].

    `embed` maps a string to its vector; serialized triples and the query go
    through the same provider.
    """

    def __init__(self, embed: Callable[[str], Sequence[float]]):
        self.embed = embed

    def score(self, query: str, candidates: Sequence[FactTriple]) -> list[float]:
        q = self.embed(query)
        scores = []
        for t in candidates:
            v = self.embed(t.render())
            scores.append(max(0.0, min(1.0, _vector_cosine(q, v))))
        return scores


def _vector_cosine(a: Sequence[float], b: Sequence[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    norm = math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b))
    return dot / norm if norm else 0.0


@dataclass(frozen=True)
class RankedEvidence:
    """Top-k candidates with their scores, best first."""

    triples: tuple[tuple[FactTriple, float], ...]
    k: int

    def __post_init__(self):
        scores = [s for _, s in self.triples]
        if any(x < y for x, y in zip(scores, scores[1:])):
            raise ValueError("scores must be non-increasing")
        if len(self.triples) > self.k:
            raise ValueError("more evidence than the selection count")

    def __len__(self) -> int:
        return len(self.triples)

    def __bool__(self) -> bool:
        return bool(self.triples)

    @property
    def selected(self) -> tuple[FactTriple, ...]:
        return tuple(t for t, _ in self.triples)


def rank_triples(query: str, candidates: TripleSet, k: int = 1,
                 scorer: Scorer | None = None) -> RankedEvidence:
    """Score every candidate and keep the top k.

    Ties break on the (subject, relation, object) key, so identical inputs
    always select identical evidence.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scorer = scorer or LexicalScorer()
    ordered = list(candidates)
    scores = scorer.score(query, ordered)
    ranked = sorted(zip(ordered, scores), key=lambda ts: (-ts[1], ts[0].key))
    return RankedEvidence(triples=tuple(ranked[:k]), k=k)
