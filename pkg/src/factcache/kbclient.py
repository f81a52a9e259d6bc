"""SPARQL clients for Wikidata and DBpedia: equivalent-property discovery,
paginated triple collection, and ambiguity filtering.

Query texts are loaded from text assets and substituted verbatim; the same
inputs always produce byte-identical query strings. Live endpoints are
rate-capped; tests run against recorded fixture responses via an injected
transport.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional

from .cache import utcnow
from .errors import MalformedResponse
from .sparqlio import Transport, exec_sparql, parse_bindings, uri_tail
from .triples import FactTriple, Source, TripleSet

WIKIDATA_ENDPOINT = "https://query.wikidata.org/sparql"
DBPEDIA_ENDPOINT = "https://dbpedia.org/sparql"

_PROPERTY_ID_RE = re.compile(r"^P\d+$")

# Relations whose objects are opaque identifiers carry no usable knowledge;
# airline designators are kept because they are real-world answerable facts.
DEFAULT_BLOCK_TOKENS = frozenset({"id", "code", "identifier"})
DEFAULT_ALLOW_TOKENS = frozenset({"iata", "icao"})


def _load_query(name: str) -> str:
    return (resources.files("factcache.assets.sparql") / name).read_text(
        encoding="utf-8")


def equivalent_properties_query() -> str:
    return _load_query("equivalent_properties.rq")


def wikidata_triples_query(property_id: str, limit: int, offset: int,
                           person_only: bool = False) -> str:
    """Fill the Wikidata collection template with {item}/{limit}/{offset}.

    person_only uncomments the template's instance-of-human restriction.
    """
    query = (_load_query("wikidata_triples.rq")
             .replace("{item}", property_id)
             .replace("{limit}", str(limit))
             .replace("{offset}", str(offset)))
    if person_only:
        query = query.replace("# ?subject wdt:P31 wd:Q5.",
                              "?subject wdt:P31 wd:Q5.")
    return query


def dbpedia_triples_query(property_url: str) -> str:
    """Fill the DBpedia collection template; it carries no pagination
    placeholders, so limit/offset are applied client-side."""
    return _load_query("dbpedia_triples.rq").replace("{property_url}",
                                                     property_url)


@dataclass(frozen=True)
class EquivalentPropertyPair:
    """A DBpedia property linked to its equivalent Wikidata property."""

    dbpedia_property: str
    wikidata_property: str
    label: str

    def __post_init__(self):
        if not _PROPERTY_ID_RE.match(self.wikidata_property):
            raise ValueError(
                f"not a Wikidata property id: {self.wikidata_property!r}")
        if not self.label:
            raise ValueError("label must be non-empty")


@dataclass(frozen=True)
class RawTripleRow:
    """One result row from a triple-collection query.

    relation_* and origin are stamped on by the fetching client so the rows
    stay self-describing through filtering.
    """

    subject_uri: str
    subject_label: str
    object_uri: Optional[str]
    object_label: str
    relation_count: Optional[int] = None  # Wikidata query only
    relation_id: str = ""
    relation_label: str = ""
    origin: Source = Source.WIKIDATA


class RateLimiter:
    """Simple requests-per-second cap shared by one client."""

    def __init__(self, per_second: float,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if per_second <= 0:
            raise ValueError("per_second must be positive")
        self.interval = 1.0 / per_second
        self.clock = clock
        self.sleep = sleep
        self._next_allowed = 0.0

    def wait(self) -> None:
        now = self.clock()
        if now < self._next_allowed:
            self.sleep(self._next_allowed - now)
            now = self._next_allowed
        self._next_allowed = now + self.interval


@dataclass
class KnowledgeBaseClient:
    """Stateless SPARQL request issuer for one endpoint.

    kind selects the query dialect: "wikidata" endpoints use the paginated
    collection query, "dbpedia" endpoints page client-side.
    """

    kind: str
    endpoint: str
    transport: Optional[Transport] = None
    requests_per_second: float = 5.0
    limiter: RateLimiter = field(init=False)

    def __post_init__(self):
        if self.kind not in ("wikidata", "dbpedia"):
            raise ValueError(f"unknown endpoint kind: {self.kind!r}")
        self.limiter = RateLimiter(self.requests_per_second)

    @property
    def source(self) -> Source:
        return Source.WIKIDATA if self.kind == "wikidata" else Source.DBPEDIA

    def _run(self, query: str) -> list[dict]:
        self.limiter.wait()
        return parse_bindings(exec_sparql(self.endpoint, query, self.transport))

    def fetch_equivalent_properties(
            self,
            block_tokens: frozenset[str] = DEFAULT_BLOCK_TOKENS,
            allow_tokens: frozenset[str] = DEFAULT_ALLOW_TOKENS,
    ) -> list[EquivalentPropertyPair]:
        """Properties shared by DBpedia and Wikidata, minus identifier-like
        relations (blocklist by label token, with an allowlist override)."""
        pairs = []
        for row in self._run(equivalent_properties_query()):
            dbp = row.get("DBpediaProp")
            label = row.get("itemLabel")
            wd_uri = row.get("WikidataProp")
            if not dbp or not label or not wd_uri:
                raise MalformedResponse(f"incomplete property row: {row}")
            wd_id = uri_tail(wd_uri)
            if not _PROPERTY_ID_RE.match(wd_id):
                continue
            if _identifier_like(label, block_tokens, allow_tokens):
                continue
            pairs.append(EquivalentPropertyPair(
                dbpedia_property=dbp, wikidata_property=wd_id, label=label))
        return pairs

    def fetch_triples(self, relation: str, limit: int, offset: int = 0,
                      relation_label: str = "",
                      person_only: bool = False) -> list[RawTripleRow]:
        """Up to `limit` (subject, object) rows for one relation.

        `relation` is a Wikidata property id (P-number) or a DBpedia
        property URL, depending on the endpoint kind.
        """
        if limit < 0 or offset < 0:
            raise ValueError("limit and offset must be non-negative")
        if limit == 0:
            return []
        if self.kind == "wikidata":
            query = wikidata_triples_query(relation, limit, offset,
                                           person_only=person_only)
            rows = self._run(query)
        else:
            query = dbpedia_triples_query(relation)
            rows = self._run(query)[offset:offset + limit]
        out = []
        for row in rows:
            subject_uri = row.get("subject")
            subject_label = row.get("subjectLabel")
            if not subject_uri or not subject_label:
                continue
            count = row.get("relationCount")
            out.append(RawTripleRow(
                subject_uri=subject_uri,
                subject_label=subject_label,
                object_uri=row.get("object"),
                object_label=row.get("objectLabel") or row.get("object") or "",
                relation_count=int(count) if count is not None else None,
                relation_id=relation if self.kind == "wikidata"
                else uri_tail(relation),
                relation_label=relation_label or uri_tail(relation),
                origin=self.source,
            ))
        return out


def _identifier_like(label: str, block_tokens: frozenset[str],
                     allow_tokens: frozenset[str]) -> bool:
    tokens = {t for t in re.split(r"[^0-9A-Za-z]+", label.lower()) if t}
    if tokens & allow_tokens:
        return False
    return bool(tokens & block_tokens)


def filter_ambiguous(rows: list[RawTripleRow]) -> TripleSet:
    """Drop rows that would make a question ambiguous, then build triples.

    Within the batch (which must cover a single relation per grouping):
    (a) a subject label naming more than one subject URI is dropped entirely,
    (b) a (subject, relation) with more than one object is dropped entirely.
    """
    # exact duplicate rows collapse first so they do not fake a conflict
    unique: dict[tuple, RawTripleRow] = {}
    for row in rows:
        unique.setdefault((row.subject_uri, row.relation_id,
                           row.object_uri, row.object_label), row)
    deduped = list(unique.values())

    uris_per_label: dict[tuple[str, str], set[str]] = {}
    objects_per_subject: dict[tuple[str, str], set[tuple]] = {}
    for row in deduped:
        uris_per_label.setdefault(
            (row.relation_id, row.subject_label), set()).add(row.subject_uri)
        objects_per_subject.setdefault(
            (row.relation_id, row.subject_uri), set()).add(
            (row.object_uri, row.object_label))

    fetched_at = utcnow()
    kept = []
    for row in deduped:
        if len(uris_per_label[(row.relation_id, row.subject_label)]) > 1:
            continue
        if len(objects_per_subject[(row.relation_id, row.subject_uri)]) > 1:
            continue
        is_entity = row.object_uri is not None
        obj_id = uri_tail(row.object_uri) if is_entity else row.object_label
        kept.append(FactTriple(
            subject=uri_tail(row.subject_uri),
            relation=row.relation_id,
            obj=obj_id,
            subject_label=row.subject_label,
            relation_label=row.relation_label,
            object_label=row.object_label or obj_id,
            object_is_entity=is_entity,
            source=row.origin,
            fetched_at=fetched_at,
        ))
    return TripleSet(kept)
