"""The edited-model pipeline: entity extraction, tiered retrieval, evidence
ranking, prompt assembly, and generation, plus multi-hop traversal.

Entity extraction discards task surface form, so the same fact feeds the
QA, cloze, and completion phrasings identically. The pipeline itself is
immutable configuration over a shared store; answering concurrently is
safe under the store's contract.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .cache import TieredFactStore
from .dataset import MultiHopItem, substitute_pronoun
from .errors import HopFailed
from .models import ModelAnswer, ModelClient
from .prompts import AssembledPrompt, assemble_prompt, build_extraction_prompt
from .ranking import RankedEvidence, Scorer, rank_triples, tokenize
from .triples import EntityRef, FactTriple, TaskKind, TripleSet


class ExtractorKind(enum.Enum):
    ALIAS_DICTIONARY = "alias_dictionary"
    MODEL_PROMPTED = "model_prompted"


class MultihopMode(enum.Enum):
    DIALOGUE = "dialogue"
    DECOMPOSE = "decompose"


@dataclass(frozen=True)
class AliasMatch:
    start: int      # token offset in the input
    length: int     # tokens covered
    entity_id: str


class AliasIndex:
    """Surface-form dictionary: token n-grams mapped to entity ids.

    Matching is case-insensitive on word boundaries. When one surface names
    several entities, the first registration wins (register in a
    deterministic order).
    """

    def __init__(self):
        self._by_tokens: dict[tuple[str, ...], str] = {}
        self._max_tokens = 0

    def __len__(self) -> int:
        return len(self._by_tokens)

    def add(self, surface: str, entity_id: str) -> None:
        tokens = tuple(tokenize(surface))
        if not tokens:
            return
        self._by_tokens.setdefault(tokens, entity_id)
        self._max_tokens = max(self._max_tokens, len(tokens))

    def add_entity(self, entity: EntityRef) -> None:
        for surface in sorted(entity.surface_forms):
            self.add(surface, entity.id)

    @classmethod
    def from_entities(cls, entities: Iterable[EntityRef]) -> "AliasIndex":
        index = cls()
        for e in entities:
            index.add_entity(e)
        return index

    @classmethod
    def from_triples(cls, triples: Iterable[FactTriple]) -> "AliasIndex":
        """Index subject and entity-object labels of a triple collection."""
        index = cls()
        for t in triples:
            index.add(t.subject_label, t.subject)
            if t.object_is_entity:
                index.add(t.object_label, t.obj)
        return index

    def merge(self, other: "AliasIndex") -> None:
        """Fold another index in; existing registrations keep priority."""
        for tokens, entity_id in other._by_tokens.items():
            self._by_tokens.setdefault(tokens, entity_id)
            self._max_tokens = max(self._max_tokens, len(tokens))

    def lookup(self, surface: str) -> Optional[str]:
        return self._by_tokens.get(tuple(tokenize(surface)))

    def matches(self, text: str) -> list[AliasMatch]:
        tokens = tokenize(text)
        found = []
        for start in range(len(tokens)):
            top = min(self._max_tokens, len(tokens) - start)
            for length in range(top, 0, -1):
                window = tuple(tokens[start:start + length])
                entity_id = self._by_tokens.get(window)
                if entity_id is not None:
                    found.append(AliasMatch(start, length, entity_id))
        return found


def aliases_for_items(items) -> AliasIndex:
    """Alias index covering every label a benchmark item set can mention:
    subjects, entity objects, and locality subjects/objects."""
    index = AliasIndex()
    for item in items:
        if isinstance(item, MultiHopItem):
            for t in item.chain:
                index.add(t.subject_label, t.subject)
                if t.object_is_entity:
                    index.add(t.object_label, t.obj)
            continue
        t = item.triple
        index.add(t.subject_label, t.subject)
        if t.object_is_entity:
            index.add(t.object_label, t.obj)
        index.add(item.locality_subject, item.locality_subject)
        index.add(item.locality_object, item.locality_object)
    return index


def longest_alias_match(index: AliasIndex, text: str) -> Optional[str]:
    """Longest alias substring match; ties go to the leftmost occurrence."""
    matches = index.matches(text)
    if not matches:
        return None
    best = max(matches, key=lambda m: (m.length, -m.start))
    return best.entity_id


def greedy_alias_matches(index: AliasIndex, text: str) -> list[str]:
    """Non-overlapping matches, longest span first, then leftmost; returned
    in reading order with duplicates removed."""
    chosen: list[AliasMatch] = []
    taken: set[int] = set()
    for m in sorted(index.matches(text), key=lambda m: (-m.length, m.start)):
        span = set(range(m.start, m.start + m.length))
        if span & taken:
            continue
        taken |= span
        chosen.append(m)
    seen = set()
    ordered = []
    for m in sorted(chosen, key=lambda m: m.start):
        if m.entity_id not in seen:
            seen.add(m.entity_id)
            ordered.append(m.entity_id)
    return ordered


@dataclass
class AnswerTrace:
    """Everything the pipeline did for one answer, for --trace output and
    multi-hop bookkeeping."""

    entities: tuple[str, ...]
    cache_hits: int
    cache_misses: int
    evidence: RankedEvidence
    prompt: AssembledPrompt
    latencies: dict[str, float] = field(default_factory=dict)


EMPTY_EVIDENCE = RankedEvidence(triples=(), k=1)


@dataclass
class Pipeline:
    """Composable answerer over a tiered store and an alias dictionary."""

    store: TieredFactStore
    aliases: AliasIndex = field(default_factory=AliasIndex)
    model: Optional[ModelClient] = None
    k: int = 1
    scorer: Optional[Scorer] = None
    extractor: ExtractorKind = ExtractorKind.ALIAS_DICTIONARY
    max_hops: int = 5

    # -- extraction -----------------------------------------------------------

    def extract_entity(self, text: str,
                       kind: Optional[ExtractorKind] = None,
                       model: Optional[ModelClient] = None) -> Optional[str]:
        """Primary entity id mentioned in `text`, or None when nothing
        resolves.

        ALIAS_DICTIONARY takes the longest alias match (ties: leftmost);
        MODEL_PROMPTED asks the model with the packaged few-shot prompt and
        maps the returned surface through the alias index.
        """
        if not text:
            raise ValueError("input must be non-empty")
        kind = kind or self.extractor
        if kind is ExtractorKind.ALIAS_DICTIONARY:
            return longest_alias_match(self.aliases, text)
        model = model or self.model
        if model is None or not hasattr(model, "complete_text"):
            raise ValueError(
                "model-prompted extraction needs a client with complete_text")
        surface = model.complete_text(build_extraction_prompt(text)).strip()
        return self.aliases.lookup(surface)

    def extract_entities(self, text: str) -> list[str]:
        """Every entity mentioned, primary first; retrieval unions them all."""
        if self.extractor is ExtractorKind.MODEL_PROMPTED:
            entity = self.extract_entity(text)
            return [entity] if entity is not None else []
        return greedy_alias_matches(self.aliases, text)

    # -- answering --------------------------------------------------------------

    def answer(self, query: str, task: TaskKind = TaskKind.QA,
               model: Optional[ModelClient] = None,
               use_evidence: bool = True) -> ModelAnswer:
        answer, _ = self.answer_traced(query, task, model, use_evidence)
        return answer

    def answer_traced(self, query: str, task: TaskKind = TaskKind.QA,
                      model: Optional[ModelClient] = None,
                      use_evidence: bool = True
                      ) -> tuple[ModelAnswer, AnswerTrace]:
        """extract -> retrieve -> rank -> assemble -> generate, with
        per-stage latencies.

        With use_evidence=False the retrieval stages are skipped entirely,
        which is the unedited-model baseline. A failed extraction degrades
        to an empty-evidence prompt.
        """
        model = model or self.model
        if model is None:
            raise ValueError("no model client configured")
        latencies: dict[str, float] = {}
        hits0 = self.store.stats.hits
        misses0 = self.store.stats.misses

        t = time.perf_counter()
        entities: tuple[str, ...] = ()
        if use_evidence:
            entities = tuple(self.extract_entities(query))
        latencies["extract"] = time.perf_counter() - t

        t = time.perf_counter()
        candidates = TripleSet()
        for entity in entities:
            candidates = candidates | self.store.retrieve(entity)
        latencies["retrieve"] = time.perf_counter() - t

        t = time.perf_counter()
        if use_evidence and len(candidates):
            evidence = rank_triples(query, candidates, self.k, self.scorer)
        else:
            evidence = EMPTY_EVIDENCE
        latencies["rank"] = time.perf_counter() - t

        t = time.perf_counter()
        prompt = assemble_prompt(task, evidence, query)
        latencies["assemble"] = time.perf_counter() - t

        t = time.perf_counter()
        answer = model.generate(prompt)  # ModelError propagates
        latencies["generate"] = time.perf_counter() - t

        trace = AnswerTrace(
            entities=entities,
            cache_hits=self.store.stats.hits - hits0,
            cache_misses=self.store.stats.misses - misses0,
            evidence=evidence,
            prompt=prompt,
            latencies=latencies,
        )
        return answer, trace

    # -- multi-hop ---------------------------------------------------------------

    def answer_multihop(self, item: MultiHopItem,
                        mode: MultihopMode = MultihopMode.DECOMPOSE,
                        model: Optional[ModelClient] = None) -> ModelAnswer:
        """Traverse a chain item turn by turn (DIALOGUE) or by hopping to
        each evidence object (DECOMPOSE); returns the final answer.

        Raises HopFailed(i) when hop i selects no evidence at all.
        """
        if mode is MultihopMode.DIALOGUE:
            return self._answer_dialogue(item, model)
        return self._answer_decompose(item, model)

    def _answer_dialogue(self, item: MultiHopItem,
                         model: Optional[ModelClient]) -> ModelAnswer:
        answer: Optional[ModelAnswer] = None
        for i, turn in enumerate(item.dialogue_turns):
            query = turn if i == 0 else substitute_pronoun(turn, answer.text)
            answer, trace = self.answer_traced(query, TaskKind.DIALOGUE, model)
            if not trace.evidence:
                raise HopFailed(i + 1)
        return answer

    def _answer_decompose(self, item: MultiHopItem,
                          model: Optional[ModelClient]) -> ModelAnswer:
        current = item.chain[0].subject_label
        answer: Optional[ModelAnswer] = None
        for i, (link, hop_query) in enumerate(zip(item.chain,
                                                  item.hop_queries)):
            # intermediate objects may have been edited since the item was
            # built; retarget the stored sub-question at the current entity
            query = hop_query
            if link.subject_label != current:
                query = hop_query.replace(link.subject_label, current)
            answer, trace = self.answer_traced(query, TaskKind.MULTI_HOP_QA,
                                               model)
            if not trace.evidence:
                raise HopFailed(i + 1)
            current = trace.evidence.selected[0].object_label
        return answer
