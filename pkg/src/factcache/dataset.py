"""Benchmark item construction from triples and templates, and loading /
validation / emission of benchmark files.

Files are JSON Lines, one item per line. Single-hop records carry the six
task queries plus a paired locality probe; multi-hop records carry the
per-hop questions and a nested question template whose single `{}` takes
the chain's first subject.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import (BadTemplate, BrokenChain, DistractorCollision, ParseError,
                     SchemaViolation)
from .ranking import contains_phrase
from .triples import EntityRef, FactTriple, RelationRef, Source, TaskKind

log = logging.getLogger(__name__)

CHOICE_LETTERS = ("A", "B", "C")

SINGLE_HOP_KEYS = (
    "subject_label", "relation_label", "object_label",
    "localitysubjectLabel", "localityobjectLabel",
    "qa_query", "fill_query", "completion_query", "choose_query",
    "FC_query", "locality_query",
)

FC_INSTRUCTION_PREFIX = "Determine whether the proposition is true.\nProposition:"


def fill_template(template: str, subject_label: str) -> str:
    """Replace the template's single `{}` placeholder with the subject."""
    if template.count("{}") != 1:
        raise BadTemplate(
            f"template must contain exactly one {{}} placeholder: {template!r}")
    return template.replace("{}", subject_label)


# --- pronouns for dialogue turns ---------------------------------------------

POSSESSIVE_PRONOUNS = ("his", "her", "its", "their")
OBJECTIVE_PRONOUNS = ("him", "her", "it", "them")


def pronoun_for(entity: Optional[EntityRef], possessive: bool) -> str:
    """Deterministic pronoun: person entities get his/her (their when gender
    is unknown); everything else, including untagged entities, gets its/it."""
    if entity is None or entity.kind != "person":
        return "its" if possessive else "it"
    if entity.gender == "male":
        return "his" if possessive else "him"
    if entity.gender == "female":
        return "her"
    return "their" if possessive else "them"


def dialogue_turn(query: str, subject_label: str,
                  entity: Optional[EntityRef] = None) -> str:
    """Rewrite a per-hop question with its subject replaced by a pronoun."""
    possessive = f"{subject_label}'s"
    if possessive in query:
        return query.replace(possessive, pronoun_for(entity, True), 1)
    return query.replace(subject_label, pronoun_for(entity, False), 1)


def substitute_pronoun(turn: str, answer: str) -> str:
    """Fill a dialogue turn's pronoun with the previous turn's answer.

    Possessive pronouns become ``answer's``; "her" counts as possessive only
    when a word follows it.
    """
    tokens = turn.split(" ")
    for i, token in enumerate(tokens):
        word = token.strip("?,.!;:")
        lower = word.lower()
        if lower in ("his", "its", "their"):
            replacement = f"{answer}'s"
        elif lower in ("him", "them", "it"):
            replacement = answer
        elif lower == "her":
            followed_by_word = (token == word) and i + 1 < len(tokens)
            replacement = f"{answer}'s" if followed_by_word else answer
        else:
            continue
        tokens[i] = token.replace(word, replacement, 1)
        return " ".join(tokens)
    return turn


# --- single-hop items ---------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkItem:
    """One single-hop task instance over a fact triple.

    queries maps each edit-facing task kind to the final query string; the
    CHOICE and FACT_CHECK entries embed their options / proposition, and the
    parsed forms are kept alongside for scoring.
    """

    triple: FactTriple
    queries: Mapping[TaskKind, str]
    gold: str
    choice_options: tuple[tuple[str, str], ...]  # (letter, option text)
    fc_truth: bool
    locality_subject: str
    locality_object: str
    locality_query: str

    def __post_init__(self):
        object.__setattr__(self, "queries", dict(self.queries))
        if self.gold != self.triple.object_label:
            raise SchemaViolation("gold answer must equal the object label")
        matches = sum(1 for _, text in self.choice_options if text == self.gold)
        if matches != 1:
            raise SchemaViolation(
                f"choice options must contain the gold exactly once, got {matches}")
        if self.locality_subject == self.triple.subject_label:
            raise SchemaViolation("locality probe must not share the subject")

    def gold_for(self, task: TaskKind) -> str:
        if task is TaskKind.FACT_CHECK:
            return "True" if self.fc_truth else "False"
        if task is TaskKind.LOCALITY:
            return self.locality_object
        return self.gold

    def option_map(self) -> dict[str, str]:
        return {letter.lower(): text for letter, text in self.choice_options}

    def to_record(self) -> dict:
        return {
            "subject_label": self.triple.subject_label,
            "relation_label": self.triple.relation_label,
            "object_label": self.triple.object_label,
            "localitysubjectLabel": self.locality_subject,
            "localityobjectLabel": self.locality_object,
            "qa_query": self.queries[TaskKind.QA],
            "fill_query": self.queries[TaskKind.CLOZE],
            "completion_query": self.queries[TaskKind.COMPLETION],
            "choose_query": self.queries[TaskKind.CHOICE],
            "FC_query": self.queries[TaskKind.FACT_CHECK],
            "locality_query": self.locality_query,
        }

    @classmethod
    def from_record(cls, record: Mapping, line: Optional[int] = None
                    ) -> "BenchmarkItem":
        missing = [k for k in SINGLE_HOP_KEYS if k not in record]
        if missing:
            raise SchemaViolation(f"missing keys: {', '.join(missing)}", line)
        empty = [k for k in SINGLE_HOP_KEYS if not isinstance(record[k], str)
                 or not record[k]]
        if empty:
            raise SchemaViolation(f"empty values: {', '.join(empty)}", line)
        options = _parse_choice_options(record["choose_query"], line)
        triple = FactTriple(
            subject=record["subject_label"],
            relation=record["relation_label"],
            obj=record["object_label"],
            source=Source.SYNTHETIC,
        )
        try:
            return cls(
                triple=triple,
                queries={
                    TaskKind.QA: record["qa_query"],
                    TaskKind.CLOZE: record["fill_query"],
                    TaskKind.COMPLETION: record["completion_query"],
                    TaskKind.CHOICE: record["choose_query"],
                    TaskKind.FACT_CHECK: record["FC_query"],
                },
                gold=record["object_label"],
                choice_options=options,
                fc_truth=_infer_fc_truth(record),
                locality_subject=record["localitysubjectLabel"],
                locality_object=record["localityobjectLabel"],
                locality_query=record["locality_query"],
            )
        except SchemaViolation as exc:
            raise SchemaViolation(str(exc), line) from exc


def _infer_fc_truth(record: Mapping) -> bool:
    """Truth is not serialized; a true proposition states the gold object.

    Generated propositions have the fixed shape instruction + completion
    query + stated option + period, so the stated option is recovered
    exactly; foreign shapes fall back to token-bounded containment.
    """
    fc = record["FC_query"]
    prefix = f"{FC_INSTRUCTION_PREFIX}{record['completion_query']} "
    if fc.startswith(prefix) and fc.endswith("."):
        return fc[len(prefix):-1] == record["object_label"]
    return contains_phrase(fc, record["object_label"])


def _parse_choice_options(choose_query: str, line: Optional[int] = None
                          ) -> tuple[tuple[str, str], ...]:
    head, sep, options_line = choose_query.rpartition("\n")
    if not sep or not options_line.startswith("A:"):
        raise SchemaViolation(
            f"choose_query has no options line: {choose_query!r}", line)
    try:
        a_rest = options_line[len("A:"):]
        a, b_rest = a_rest.split(" B:", 1)
        b, c = b_rest.split(" C:", 1)
    except ValueError as exc:
        raise SchemaViolation(
            f"options line not in 'A:.. B:.. C:..' form: {options_line!r}",
            line) from exc
    return (("A", a), ("B", b), ("C", c))


def build_item(triple: FactTriple, relation: RelationRef,
               distractors: Sequence[str], locality: FactTriple,
               rng: random.Random,
               fc_truth: Optional[bool] = None) -> BenchmarkItem:
    """Instantiate every single-hop task for one triple.

    Choice-letter assignment and the fact-check truth coin come from `rng`,
    so a fixed seed reproduces items byte-for-byte.
    """
    if len(distractors) != 2:
        raise DistractorCollision("exactly two distractors required")
    gold = triple.object_label
    if gold in distractors or distractors[0] == distractors[1]:
        raise DistractorCollision(
            f"distractors must be distinct from the gold answer: {distractors}")
    if locality.relation != triple.relation:
        raise SchemaViolation("locality probe must share the relation")
    if locality.subject == triple.subject:
        raise SchemaViolation("locality probe must not share the subject")

    subject = triple.subject_label
    qa = fill_template(relation.template(TaskKind.QA), subject)
    completion = fill_template(relation.template(TaskKind.COMPLETION), subject)
    cloze = fill_template(relation.template(TaskKind.CLOZE), subject)

    options = [gold, *distractors]
    rng.shuffle(options)
    options_line = " ".join(
        f"{letter}:{text}" for letter, text in zip(CHOICE_LETTERS, options))
    choose = (fill_template(relation.template(TaskKind.CHOICE), subject)
              + "\n" + options_line)

    truth = rng.random() < 0.5 if fc_truth is None else fc_truth
    stated = gold if truth else rng.choice(list(distractors))
    proposition = f"{completion} {stated}."
    fc = f"{FC_INSTRUCTION_PREFIX}{proposition}"

    locality_query = fill_template(relation.template(TaskKind.QA),
                                   locality.subject_label)
    return BenchmarkItem(
        triple=triple,
        queries={
            TaskKind.QA: qa,
            TaskKind.COMPLETION: completion,
            TaskKind.CLOZE: cloze,
            TaskKind.CHOICE: choose,
            TaskKind.FACT_CHECK: fc,
        },
        gold=gold,
        choice_options=tuple(zip(CHOICE_LETTERS, options)),
        fc_truth=truth,
        locality_subject=locality.subject_label,
        locality_object=locality.object_label,
        locality_query=locality_query,
    )


# --- multi-hop items ----------------------------------------------------------

@dataclass(frozen=True)
class MultiHopItem:
    """An ordered chain of triples with per-hop questions, one nested
    question template, and derived dialogue turns.

    The chain satisfies object(i) == subject(i+1); the answer to the whole
    item is the final object label.
    """

    chain: tuple[FactTriple, ...]
    hop_queries: tuple[str, ...]
    multihop_query: str
    dialogue_turns: tuple[str, ...]
    final_gold: str

    def __post_init__(self):
        if not 2 <= len(self.chain) <= 5:
            raise SchemaViolation(
                f"chain length must be 2..5, got {len(self.chain)}")
        for left, right in zip(self.chain, self.chain[1:]):
            if left.obj != right.subject:
                raise BrokenChain(
                    f"object {left.obj!r} does not match next subject "
                    f"{right.subject!r}")
        if len(self.hop_queries) != len(self.chain):
            raise SchemaViolation("one hop query required per chain link")
        if self.multihop_query.count("{}") != 1:
            raise SchemaViolation(
                "multihop query must keep exactly one {} placeholder")
        if self.final_gold != self.chain[-1].object_label:
            raise SchemaViolation("final gold must equal the last object label")

    @property
    def hops(self) -> int:
        return len(self.chain)

    def filled_multihop_query(self) -> str:
        return fill_template(self.multihop_query, self.chain[0].subject_label)

    def to_record(self) -> dict:
        record: dict = {"s1_label": self.chain[0].subject_label}
        for i, t in enumerate(self.chain, start=1):
            record[f"relation_label_{i}"] = t.relation_label
            record[f"o{i}_label"] = t.object_label
        for i, q in enumerate(self.hop_queries, start=1):
            record[f"qa_query_{i}"] = q
        record["MultihopQA_query"] = self.multihop_query
        return record

    @classmethod
    def from_record(cls, record: Mapping, line: Optional[int] = None,
                    entities: Optional[Mapping[str, EntityRef]] = None
                    ) -> "MultiHopItem":
        if "s1_label" not in record:
            raise SchemaViolation("missing key: s1_label", line)
        hops = 0
        while f"relation_label_{hops + 1}" in record:
            hops += 1
        if not 2 <= hops <= 5:
            raise SchemaViolation(f"chain length must be 2..5, got {hops}", line)
        required = ["s1_label", "MultihopQA_query"]
        for i in range(1, hops + 1):
            required += [f"relation_label_{i}", f"o{i}_label", f"qa_query_{i}"]
        missing = [k for k in required if not record.get(k)]
        if missing:
            raise SchemaViolation(f"missing keys: {', '.join(missing)}", line)

        subject = record["s1_label"]
        chain = []
        for i in range(1, hops + 1):
            obj = record[f"o{i}_label"]
            chain.append(FactTriple(
                subject=subject,
                relation=record[f"relation_label_{i}"],
                obj=obj,
                source=Source.SYNTHETIC,
            ))
            subject = obj
        hop_queries = tuple(record[f"qa_query_{i}"] for i in range(1, hops + 1))
        turns = _derive_dialogue_turns(chain, hop_queries, entities)
        try:
            return cls(
                chain=tuple(chain),
                hop_queries=hop_queries,
                multihop_query=record["MultihopQA_query"],
                dialogue_turns=turns,
                final_gold=chain[-1].object_label,
            )
        except (SchemaViolation, BrokenChain) as exc:
            raise SchemaViolation(str(exc), line) from exc


def _derive_dialogue_turns(
        chain: Sequence[FactTriple], hop_queries: Sequence[str],
        entities: Optional[Mapping[str, EntityRef]]) -> tuple[str, ...]:
    turns = [hop_queries[0]]
    for t, query in zip(chain[1:], hop_queries[1:]):
        entity = entities.get(t.subject) if entities else None
        turns.append(dialogue_turn(query, t.subject_label, entity))
    return tuple(turns)


def build_multihop(chain: Sequence[FactTriple],
                   relations: Mapping[str, RelationRef],
                   entities: Optional[Mapping[str, EntityRef]] = None
                   ) -> MultiHopItem:
    """Compose a chain of triples into one nested question plus dialogue.

    `relations` maps relation ids to their templates; every relation but the
    last needs a nesting phrase (MULTI_HOP_QA template), the last needs QA.
    """
    if not 2 <= len(chain) <= 5:
        raise BrokenChain(f"chain length must be 2..5, got {len(chain)}")
    for left, right in zip(chain, chain[1:]):
        if left.obj != right.subject:
            raise BrokenChain(
                f"object {left.obj!r} does not match next subject "
                f"{right.subject!r}")
    refs = []
    for t in chain:
        ref = relations.get(t.relation)
        if ref is None:
            raise BadTemplate(f"no templates registered for {t.relation!r}")
        refs.append(ref)

    hop_queries = tuple(
        fill_template(ref.template(TaskKind.QA), t.subject_label)
        for ref, t in zip(refs, chain))

    phrase = "{}"
    for ref in refs[:-1]:
        if TaskKind.MULTI_HOP_QA not in ref.task_templates:
            raise BadTemplate(f"relation {ref.id!r} has no nesting phrase")
        phrase = ref.template(TaskKind.MULTI_HOP_QA).replace("{}", phrase)
    multihop_query = refs[-1].template(TaskKind.QA).replace("{}", phrase)

    return MultiHopItem(
        chain=tuple(chain),
        hop_queries=hop_queries,
        multihop_query=multihop_query,
        dialogue_turns=_derive_dialogue_turns(chain, hop_queries, entities),
        final_gold=chain[-1].object_label,
    )


AnyItem = Union[BenchmarkItem, MultiHopItem]


# --- file I/O -----------------------------------------------------------------

def record_line(item: AnyItem) -> str:
    return json.dumps(item.to_record(), ensure_ascii=False)


def emit_benchmark(items: Iterable[AnyItem], path: str | Path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for item in items:
            f.write(record_line(item) + "\n")
            count += 1
    return count


def load_benchmark(path: str | Path, strict: bool = True,
                   entities: Optional[Mapping[str, EntityRef]] = None
                   ) -> list[AnyItem]:
    """Parse and validate a benchmark file.

    Invalid records raise (strict) or are reported with their line number
    and skipped (lenient). Multi-hop records are recognized by `s1_label`.
    """
    items: list[AnyItem] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except ValueError as exc:
                error: ParseError | SchemaViolation = ParseError(str(exc), lineno)
                if strict:
                    raise error from exc
                log.warning("skipping %s:%s: %s", path, lineno, error)
                continue
            try:
                if "s1_label" in record:
                    items.append(MultiHopItem.from_record(
                        record, lineno, entities))
                else:
                    items.append(BenchmarkItem.from_record(record, lineno))
            except (SchemaViolation, BrokenChain) as exc:
                if strict:
                    raise
                log.warning("skipping %s:%s: %s", path, lineno, exc)
    return items


# --- packaged relation templates ----------------------------------------------

def load_relation_templates(path: Optional[str | Path] = None
                            ) -> dict[str, RelationRef]:
    """Curated per-relation templates, keyed by both relation id and label."""
    if path is None:
        text = (resources.files("factcache.assets")
                / "relation_templates.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    out: dict[str, RelationRef] = {}
    for row in json.loads(text):
        ref = RelationRef(
            id=row["id"],
            label=row["label"],
            description=row.get("description", ""),
            task_templates={
                TaskKind.QA: tuple(row["qa"]),
                TaskKind.COMPLETION: tuple(row["completion"]),
                TaskKind.CLOZE: tuple(row["cloze"]),
                TaskKind.CHOICE: tuple(row["choice"]),
                TaskKind.MULTI_HOP_QA: tuple(row["nest"]),
            },
        )
        out[ref.id] = ref
        out[ref.label] = ref
    return out
