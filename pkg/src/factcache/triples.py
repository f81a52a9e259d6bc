"""Core fact-triple types: entities, relations, triples, and indexed triple sets.

A triple's identity is its (subject, relation, object) key. Provenance fields
(source, fetched_at, version) and display labels never affect set membership:
two triples asserting the same fact are one element of a TripleSet.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Iterator, Mapping

TripleKey = tuple[str, str, str]


class Source(enum.Enum):
    """Where a triple came from."""

    WIKIDATA = "wikidata"
    DBPEDIA = "dbpedia"
    MANUAL = "manual"
    SYNTHETIC = "synthetic"


class TaskKind(enum.Enum):
    """Task formats a fact can be probed with."""

    QA = "qa"
    COMPLETION = "completion"
    CLOZE = "cloze"
    CHOICE = "choice"
    FACT_CHECK = "fact_check"
    LOCALITY = "locality"
    MULTI_HOP_QA = "multi_hop_qa"
    DIALOGUE = "dialogue"


SINGLE_HOP_TASKS = (
    TaskKind.QA,
    TaskKind.COMPLETION,
    TaskKind.CLOZE,
    TaskKind.CHOICE,
    TaskKind.FACT_CHECK,
)


@dataclass(frozen=True)
class EntityRef:
    """A stable entity identifier with display label and surface aliases.

    `kind` and `gender` are optional tags consumed by pronoun selection when
    composing dialogue turns; both default to unknown.
    """

    id: str
    label: str = ""
    aliases: frozenset[str] = frozenset()
    kind: str = ""    # "person" or ""
    gender: str = ""  # "male", "female", or ""

    def __post_init__(self):
        if not self.id:
            raise ValueError("entity id must be non-empty")
        if not self.label:
            object.__setattr__(self, "label", self.id)
        if not isinstance(self.aliases, frozenset):
            object.__setattr__(self, "aliases", frozenset(self.aliases))
        if "" in self.aliases:
            raise ValueError("aliases must not contain the empty string")

    @property
    def surface_forms(self) -> frozenset[str]:
        """Label plus aliases; everything this entity can be called in text."""
        return self.aliases | {self.label}


@dataclass(frozen=True)
class RelationRef:
    """A relation with its per-task query templates.

    Every template contains exactly one `{}` placeholder for the subject
    label. The MULTI_HOP_QA entry is a noun phrase used to nest relations
    when composing multi-hop questions (e.g. "the spouse of {}").
    """

    id: str
    label: str = ""
    description: str = ""
    task_templates: Mapping[TaskKind, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise ValueError("relation id must be non-empty")
        if not self.label:
            object.__setattr__(self, "label", self.id)
        templates = {k: tuple(v) for k, v in self.task_templates.items()}
        object.__setattr__(self, "task_templates", templates)
        if TaskKind.QA not in templates or not templates[TaskKind.QA]:
            raise ValueError(f"relation {self.id!r} needs at least one QA template")
        for kind, variants in templates.items():
            for tpl in variants:
                if tpl.count("{}") != 1:
                    raise ValueError(
                        f"template {tpl!r} for {self.id}/{kind.value} must contain "
                        "exactly one {} placeholder"
                    )

    def template(self, kind: TaskKind, variant: int = 0) -> str:
        return self.task_templates[kind][variant]


@dataclass(frozen=True)
class FactTriple:
    """One (subject, relation, object) assertion with provenance.

    `obj` holds an entity id when `object_is_entity` is true, otherwise a
    literal string (literals have no outgoing edges). Labels default to the
    ids so desk-scale data can use labels directly as identifiers.
    """

    subject: str
    relation: str
    obj: str
    subject_label: str = ""
    relation_label: str = ""
    object_label: str = ""
    object_is_entity: bool = True
    source: Source = Source.MANUAL
    fetched_at: datetime | None = None
    version: int = 1

    def __post_init__(self):
        if not self.subject or not self.relation:
            raise ValueError("subject and relation must be non-empty")
        if self.version < 1:
            raise ValueError("version must be >= 1")
        if not self.subject_label:
            object.__setattr__(self, "subject_label", self.subject)
        if not self.relation_label:
            object.__setattr__(self, "relation_label", self.relation)
        if not self.object_label:
            object.__setattr__(self, "object_label", self.obj)

    @property
    def key(self) -> TripleKey:
        return (self.subject, self.relation, self.obj)

    def render(self) -> str:
        """Serialize as the ``(s, r, o)`` line used in prompts."""
        return f"({self.subject_label}, {self.relation_label}, {self.object_label})"


class TripleSet:
    """An immutable set of fact triples indexed by subject.

    Membership and equality are keyed on (subject, relation, object) only;
    when duplicates are supplied the first occurrence wins. Iteration order
    is sorted by key, so downstream output is deterministic.
    """

    __slots__ = ("_by_key", "_by_subject")

    def __init__(self, triples: Iterable[FactTriple] = ()):
        by_key: dict[TripleKey, FactTriple] = {}
        for t in triples:
            by_key.setdefault(t.key, t)
        self._by_key = dict(sorted(by_key.items()))
        by_subject: dict[str, list[FactTriple]] = {}
        for t in self._by_key.values():
            by_subject.setdefault(t.subject, []).append(t)
        self._by_subject = {s: tuple(ts) for s, ts in by_subject.items()}

    def __len__(self) -> int:
        return len(self._by_key)

    def __iter__(self) -> Iterator[FactTriple]:
        return iter(self._by_key.values())

    def __contains__(self, item) -> bool:
        key = item.key if isinstance(item, FactTriple) else tuple(item)
        return key in self._by_key

    def __eq__(self, other) -> bool:
        if not isinstance(other, TripleSet):
            return NotImplemented
        return self._by_key.keys() == other._by_key.keys()

    __hash__ = None  # mutable-free but identity is by key set; not hashable

    def __repr__(self) -> str:
        return f"TripleSet({len(self)} triples)"

    def __or__(self, other: "TripleSet") -> "TripleSet":
        return TripleSet([*self, *other])

    def __sub__(self, other: "TripleSet") -> "TripleSet":
        return TripleSet(t for t in self if t not in other)

    def keys(self) -> frozenset[TripleKey]:
        return frozenset(self._by_key)

    def by_subject(self, subject: str) -> tuple[FactTriple, ...]:
        return self._by_subject.get(subject, ())

    @property
    def subjects(self) -> frozenset[str]:
        return frozenset(self._by_subject)

    @property
    def objects(self) -> frozenset[str]:
        return frozenset(t.obj for t in self)


EMPTY_TRIPLES = TripleSet()
