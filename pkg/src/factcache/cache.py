"""The two-tier fact store: a fast local table read-through to a slow source.

The fast table is an indexed, mutable snapshot of whatever the slow source
(an external KB dump or endpoint) has served, plus edits injected directly.
Reads hit the fast table first; a miss fetches from the slow source, stores
the result, and optionally prefetches the neighbors of what was fetched.
Updates replace the object under a (subject, relation) key, so repeated
edits to the same fact converge to the last value written.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Optional, Protocol

from .errors import SlowUnreachable
from .sparqlio import Transport, exec_sparql, parse_bindings, uri_tail
from .triples import FactTriple, Source, TripleSet

log = logging.getLogger(__name__)


def parse_rfc3339(text: str) -> datetime:
    # Python 3.10 fromisoformat rejects a trailing Z
    return datetime.fromisoformat(text.replace("Z", "+00:00"))


def format_rfc3339(dt: datetime) -> str:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.isoformat()


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


class UpdateOutcome(enum.Enum):
    REPLACED = "replaced"
    INSERTED = "inserted"


@dataclass
class CacheStats:
    """Monotone counters for cache behavior.

    hits + misses equals the number of retrieve calls that completed;
    slow_fetches counts only miss-driven read-through fetches, so it equals
    misses whenever the slow source is reachable. Prefetch and sync traffic
    is tracked separately so that equality stays exact.
    """

    hits: int = 0
    misses: int = 0
    slow_fetches: int = 0
    updates_applied: int = 0
    replacements: int = 0
    prefetch_fetches: int = 0
    evictions: int = 0

    def snapshot(self) -> dict[str, int]:
        return {
            "hits": self.hits,
            "misses": self.misses,
            "slow_fetches": self.slow_fetches,
            "updates_applied": self.updates_applied,
            "replacements": self.replacements,
            "prefetch_fetches": self.prefetch_fetches,
            "evictions": self.evictions,
        }


@dataclass(frozen=True)
class EditRequest:
    """One requested fact update: set (subject, relation) to new_object."""

    subject: str
    relation: str
    new_object: str
    issued_at: datetime = field(default_factory=utcnow)
    subject_label: str = ""
    relation_label: str = ""
    object_label: str = ""
    object_is_entity: bool = True

    def __post_init__(self):
        if not self.subject or not self.relation:
            raise ValueError("subject and relation must be non-empty")


class SlowSource(Protocol):
    """The slow tier: an authoritative source of triples, fetched by subject."""

    snapshot_at: Optional[datetime]

    def fetch_subject(self, entity: str) -> list[FactTriple]:
        ...


# --- dump file format -------------------------------------------------------
#
# One JSON object per line with keys subject_id, subject_label, relation_id,
# relation_label, object_id (null for literals), object_label, source,
# fetched_at (RFC 3339). The first record is a sidecar {"snapshot_at": ...}.

def triple_to_row(t: FactTriple) -> dict:
    return {
        "subject_id": t.subject,
        "subject_label": t.subject_label,
        "relation_id": t.relation,
        "relation_label": t.relation_label,
        "object_id": t.obj if t.object_is_entity else None,
        "object_label": t.object_label,
        "source": t.source.value,
        "fetched_at": format_rfc3339(t.fetched_at) if t.fetched_at else None,
    }


def row_to_triple(row: dict) -> FactTriple:
    object_id = row.get("object_id")
    fetched = row.get("fetched_at")
    return FactTriple(
        subject=row["subject_id"],
        relation=row["relation_id"],
        obj=object_id if object_id is not None else row["object_label"],
        subject_label=row.get("subject_label", ""),
        relation_label=row.get("relation_label", ""),
        object_label=row["object_label"],
        object_is_entity=object_id is not None,
        source=Source(row.get("source", "manual")),
        fetched_at=parse_rfc3339(fetched) if fetched else None,
    )


def read_dump(path: str | Path) -> tuple[Optional[datetime], list[FactTriple]]:
    snapshot_at = None
    triples = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if "snapshot_at" in record and "subject_id" not in record:
                snapshot_at = parse_rfc3339(record["snapshot_at"])
                continue
            try:
                triples.append(row_to_triple(record))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad dump row: {exc}") from exc
    return snapshot_at, triples


def write_dump(path: str | Path, triples: Iterable[FactTriple],
               snapshot_at: Optional[datetime] = None) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        if snapshot_at is not None:
            f.write(json.dumps({"snapshot_at": format_rfc3339(snapshot_at)}) + "\n")
        for t in triples:
            f.write(json.dumps(triple_to_row(t), ensure_ascii=False) + "\n")
            count += 1
    return count


# --- slow sources -----------------------------------------------------------

class LocalDumpSource:
    """Slow tier backed by a triple dump file on disk."""

    kind = "local_dump"

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.snapshot_at: Optional[datetime] = None
        self._by_subject: dict[str, list[FactTriple]] = {}
        self.reload()

    def reload(self) -> None:
        """Re-read the dump; lets tests and sync observe file changes."""
        self.snapshot_at, triples = read_dump(self.path)
        by_subject: dict[str, list[FactTriple]] = {}
        for t in triples:
            by_subject.setdefault(t.subject, []).append(t)
        self._by_subject = by_subject

    def fetch_subject(self, entity: str) -> list[FactTriple]:
        return list(self._by_subject.get(entity, ()))


class InMemorySlowSource:
    """Dict-backed slow tier for tests and synthetic scenarios.

    Set `unreachable` to make every fetch raise SlowUnreachable.
    """

    kind = "memory"

    def __init__(self, triples: Iterable[FactTriple] = (),
                 snapshot_at: Optional[datetime] = None):
        self.snapshot_at = snapshot_at
        self.unreachable = False
        self.fetch_log: list[str] = []
        self._by_subject: dict[str, dict[tuple[str, str], FactTriple]] = {}
        for t in triples:
            self.put(t)

    def put(self, triple: FactTriple) -> None:
        self._by_subject.setdefault(triple.subject, {})[
            (triple.subject, triple.relation)] = triple

    def remove(self, subject: str, relation: str) -> None:
        self._by_subject.get(subject, {}).pop((subject, relation), None)

    def fetch_subject(self, entity: str) -> list[FactTriple]:
        if self.unreachable:
            raise SlowUnreachable("in-memory source marked unreachable")
        self.fetch_log.append(entity)
        return list(self._by_subject.get(entity, {}).values())


# Default by-subject query for Wikidata-style endpoints; {subject} is the
# only placeholder. Overridable for other endpoint schemas.
DEFAULT_SUBJECT_QUERY = """\
SELECT ?relation ?relationLabel ?object ?objectLabel WHERE {
  wd:{subject} ?p ?object .
  ?relation wikibase:directClaim ?p .
  SERVICE wikibase:label { bd:serviceParam wikibase:language "en" . }
}"""


class RemoteSparqlSource:
    """Slow tier backed by a public SPARQL endpoint.

    Retries transient failures with exponential backoff (3 attempts starting
    at 250 ms) before raising SlowUnreachable; public endpoints rate-limit.
    """

    kind = "remote_sparql"

    def __init__(self, endpoint: str,
                 query_template: str = DEFAULT_SUBJECT_QUERY,
                 source: Source = Source.WIKIDATA,
                 transport: Optional[Transport] = None,
                 attempts: int = 3,
                 backoff_s: float = 0.25,
                 sleep: Callable[[float], None] = time.sleep,
                 snapshot_at: Optional[datetime] = None):
        if not endpoint:
            raise ValueError("endpoint must be non-empty")
        self.endpoint = endpoint
        self.query_template = query_template
        self.source = source
        self.transport = transport
        self.attempts = attempts
        self.backoff_s = backoff_s
        self.sleep = sleep
        self.snapshot_at = snapshot_at

    def fetch_subject(self, entity: str) -> list[FactTriple]:
        query = self.query_template.replace("{subject}", entity)
        delay = self.backoff_s
        last_error: Exception | None = None
        for attempt in range(self.attempts):
            try:
                payload = exec_sparql(self.endpoint, query, self.transport)
                return self._rows_to_triples(entity, parse_bindings(payload))
            except Exception as exc:
                last_error = exc
                if attempt + 1 < self.attempts:
                    self.sleep(delay)
                    delay *= 2
        raise SlowUnreachable(
            f"slow source {self.endpoint} failed after "
            f"{self.attempts} attempts: {last_error}") from last_error

    def _rows_to_triples(self, entity: str,
                         rows: list[dict]) -> list[FactTriple]:
        fetched_at = utcnow()
        triples = []
        for row in rows:
            relation_uri = row.get("relation")
            obj = row.get("object")
            if not relation_uri or obj is None:
                continue
            is_entity = obj.startswith("http://") or obj.startswith("https://")
            triples.append(FactTriple(
                subject=entity,
                relation=uri_tail(relation_uri),
                obj=uri_tail(obj) if is_entity else obj,
                relation_label=row.get("relationLabel") or "",
                object_label=row.get("objectLabel") or "",
                object_is_entity=is_entity,
                source=self.source,
                fetched_at=fetched_at,
            ))
        return triples


# --- the store --------------------------------------------------------------

@dataclass
class _Entry:
    triple: FactTriple
    edited: bool
    last_access: int


class TieredFactStore:
    """Fast table over a slow source, with stats, prefetch, and eviction.

    The fast table maps each (subject, relation) to at most one triple.
    Structural access goes through one short-held lock; read-through fetches
    run unlocked and insert idempotently, so two concurrent misses on the
    same entity converge to a single stored copy (both fetches are counted).
    Updates and sync additionally serialize against each other on a writer
    mutex, which sync holds across its whole fetch-then-apply cycle so an
    interleaved edit can never be clobbered by stale slow data. Edited
    triples (apply_update / inject_manual) are never evicted.
    """

    def __init__(self, slow: Optional[SlowSource] = None,
                 capacity: Optional[int] = None,
                 prefetch_depth: int = 1):
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be >= 1 when set")
        if prefetch_depth < 0:
            raise ValueError("prefetch_depth must be >= 0")
        self.slow = slow if slow is not None else InMemorySlowSource()
        self.capacity = capacity
        self.prefetch_depth = prefetch_depth
        self.stats = CacheStats()
        self._entries: dict[tuple[str, str], _Entry] = {}
        self._subject_keys: dict[str, set[tuple[str, str]]] = {}
        self._tick = 0
        self._lock = threading.RLock()
        self._write_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    # -- reads ---------------------------------------------------------------

    def retrieve(self, entity: str) -> TripleSet:
        """All fast-table triples with the given subject, reading through to
        the slow source on a miss (and prefetching neighbors)."""
        if not entity:
            raise ValueError("entity must be non-empty")
        with self._lock:
            hit = self._serve_fast(entity)
            if hit is not None:
                self.stats.hits += 1
                return hit
        fetched = self.slow.fetch_subject(entity)  # may raise SlowUnreachable
        with self._lock:
            self.stats.misses += 1
            self.stats.slow_fetches += 1
            already = self._serve_fast(entity)
            if already is not None:
                # a concurrent miss stored its copy first; serve that one
                return already
            protect = set()
            for t in fetched:
                self._insert_readonly(t)
                protect.add((t.subject, t.relation))
            self._evict_if_needed(protect)
        if fetched and self.prefetch_depth > 0:
            try:
                self.prefetch_neighbors(TripleSet(fetched))
            except SlowUnreachable as exc:
                log.warning("prefetch after retrieve(%s) incomplete: %s",
                            entity, exc)
        return TripleSet(fetched)

    def get(self, subject: str, relation: str) -> Optional[FactTriple]:
        """Fast-table lookup without read-through; no counters touched."""
        with self._lock:
            entry = self._entries.get((subject, relation))
            return entry.triple if entry else None

    def fast_snapshot(self) -> TripleSet:
        with self._lock:
            return TripleSet(e.triple for e in self._entries.values())

    def bulk_load(self, triples: Iterable[FactTriple]) -> int:
        """Warm the fast table with read-only triples; existing (subject,
        relation) keys are left untouched. Returns the number inserted."""
        added = 0
        with self._write_lock, self._lock:
            for t in triples:
                if self._insert_readonly(t):
                    added += 1
            self._evict_if_needed(set())
        return added

    def _serve_fast(self, entity: str) -> Optional[TripleSet]:
        keys = self._subject_keys.get(entity)
        if not keys:
            return None
        triples = []
        for key in sorted(keys):
            entry = self._entries[key]
            entry.last_access = self._next_tick()
            triples.append(entry.triple)
        return TripleSet(triples)

    # -- prefetch -------------------------------------------------------------

    def prefetch_neighbors(self, seeds: TripleSet) -> int:
        """Fetch the subjects reachable from seed objects, up to
        prefetch_depth hops, and insert them as read-only triples.

        Returns the number of newly inserted triples. On SlowUnreachable the
        partial prefetch already inserted is kept and the error raised.
        """
        if self.prefetch_depth == 0:
            return 0
        protect = {(t.subject, t.relation) for t in seeds}
        seen: set[str] = set()
        level = list(seeds)
        added = 0
        for _ in range(self.prefetch_depth):
            targets = []
            for t in level:
                if not t.object_is_entity or t.obj in seen:
                    continue
                seen.add(t.obj)
                with self._lock:
                    if t.obj in self._subject_keys:
                        continue
                targets.append(t.obj)
            next_level: list[FactTriple] = []
            for entity in sorted(targets):
                fetched = self.slow.fetch_subject(entity)  # may raise
                with self._lock:
                    self.stats.prefetch_fetches += 1
                    for t in fetched:
                        if self._insert_readonly(t):
                            added += 1
                        next_level.append(t)
                        protect.add((t.subject, t.relation))
                    self._evict_if_needed(protect)
            if not next_level:
                break
            level = next_level
        return added

    # -- writes ---------------------------------------------------------------

    def apply_update(self, edit: EditRequest,
                     source: Source = Source.SYNTHETIC) -> UpdateOutcome:
        """Replace the object under (subject, relation), or insert the fact.

        Re-applying the current object is a no-op reported as REPLACED with
        no version bump. The (subject, relation) key stays unique.
        """
        with self._write_lock, self._lock:
            outcome, _ = self._upsert(
                subject=edit.subject,
                relation=edit.relation,
                obj=edit.new_object,
                subject_label=edit.subject_label,
                relation_label=edit.relation_label,
                object_label=edit.object_label,
                object_is_entity=edit.object_is_entity,
                source=source,
                fetched_at=edit.issued_at,
                edited=True,
            )
            return outcome

    def inject_manual(self, edit: EditRequest) -> UpdateOutcome:
        """apply_update with MANUAL provenance: a real-world fact injected
        directly, ahead of the slow source absorbing it."""
        return self.apply_update(edit, source=Source.MANUAL)

    def _upsert(self, *, subject: str, relation: str, obj: str,
                subject_label: str, relation_label: str, object_label: str,
                object_is_entity: bool, source: Source,
                fetched_at: Optional[datetime],
                edited: bool) -> tuple[UpdateOutcome, bool]:
        key = (subject, relation)
        existing = self._entries.get(key)
        self.stats.updates_applied += 1
        if existing is not None and existing.triple.obj == obj:
            if edited and not existing.edited:
                existing.edited = True  # an edit pins the fact against eviction
            existing.last_access = self._next_tick()
            return UpdateOutcome.REPLACED, False
        version = existing.triple.version + 1 if existing is not None else 1
        triple = FactTriple(
            subject=subject,
            relation=relation,
            obj=obj,
            subject_label=subject_label,
            relation_label=relation_label,
            object_label=object_label,
            object_is_entity=object_is_entity,
            source=source,
            fetched_at=fetched_at,
            version=version,
        )
        self._store(triple, edited=edited)
        if existing is not None:
            self.stats.replacements += 1
            return UpdateOutcome.REPLACED, True
        self._evict_if_needed({key})
        return UpdateOutcome.INSERTED, True

    # -- sync ------------------------------------------------------------------

    def sync(self) -> int:
        """Re-fetch every fast-table subject from the slow source and apply
        update semantics per triple; returns replacements + insertions.

        Manual triples issued after the slow snapshot timestamp are
        preserved. All subjects are fetched before anything is applied, so a
        SlowUnreachable leaves the fast table untouched; the writer mutex is
        held throughout, so no update can interleave with the cycle.
        """
        with self._write_lock:
            with self._lock:
                subjects = sorted(self._subject_keys)
            fetched: dict[str, list[FactTriple]] = {}
            for subject in subjects:
                fetched[subject] = self.slow.fetch_subject(subject)  # may raise
            changed = 0
            with self._lock:
                snapshot_at = getattr(self.slow, "snapshot_at", None)
                for subject in subjects:
                    for t in fetched[subject]:
                        if self._manual_wins(t, snapshot_at):
                            continue
                        _, did_change = self._upsert(
                            subject=t.subject,
                            relation=t.relation,
                            obj=t.obj,
                            subject_label=t.subject_label,
                            relation_label=t.relation_label,
                            object_label=t.object_label,
                            object_is_entity=t.object_is_entity,
                            source=t.source,
                            fetched_at=t.fetched_at,
                            edited=False,
                        )
                        if did_change:
                            changed += 1
        return changed

    def _manual_wins(self, incoming: FactTriple,
                     snapshot_at: Optional[datetime]) -> bool:
        entry = self._entries.get((incoming.subject, incoming.relation))
        if entry is None or entry.triple.source is not Source.MANUAL:
            return False
        issued = entry.triple.fetched_at
        if issued is None:
            return False
        if snapshot_at is None:
            return True  # snapshot age unknown: never clobber a manual edit
        return issued > snapshot_at

    # -- internals --------------------------------------------------------------

    def _next_tick(self) -> int:
        self._tick += 1
        return self._tick

    def _store(self, triple: FactTriple, edited: bool) -> None:
        key = (triple.subject, triple.relation)
        self._entries[key] = _Entry(triple, edited, self._next_tick())
        self._subject_keys.setdefault(triple.subject, set()).add(key)

    def _insert_readonly(self, triple: FactTriple) -> bool:
        key = (triple.subject, triple.relation)
        if key in self._entries:
            return False
        self._store(triple, edited=False)
        return True

    def _remove(self, key: tuple[str, str]) -> None:
        entry = self._entries.pop(key, None)
        if entry is None:
            return
        subject_keys = self._subject_keys.get(entry.triple.subject)
        if subject_keys is not None:
            subject_keys.discard(key)
            if not subject_keys:
                del self._subject_keys[entry.triple.subject]

    def _evict_if_needed(self, protect: set[tuple[str, str]]) -> None:
        if self.capacity is None:
            return
        while len(self._entries) > self.capacity:
            victims = [
                (entry.last_access, key)
                for key, entry in self._entries.items()
                if not entry.edited and key not in protect
            ]
            if not victims:
                break  # only edits/protected left; capacity may be exceeded
            _, key = min(victims)
            self._remove(key)
            self.stats.evictions += 1

    def reset(self) -> None:
        """Drop all fast-table contents and zero the counters."""
        with self._lock:
            self._entries.clear()
            self._subject_keys.clear()
            self.stats = CacheStats()
            self._tick = 0


# --- store state persistence (CLI sessions) ---------------------------------

def save_state(store: TieredFactStore, path: str | Path) -> None:
    with store._lock:
        entries = [
            {**triple_to_row(e.triple), "version": e.triple.version,
             "edited": e.edited}
            for _, e in sorted(store._entries.items())
        ]
        state = {"stats": store.stats.snapshot(), "entries": entries}
    Path(path).write_text(json.dumps(state, ensure_ascii=False, indent=2),
                          encoding="utf-8")


def load_state(path: str | Path, slow: Optional[SlowSource] = None,
               capacity: Optional[int] = None,
               prefetch_depth: int = 1) -> TieredFactStore:
    store = TieredFactStore(slow=slow, capacity=capacity,
                            prefetch_depth=prefetch_depth)
    state = json.loads(Path(path).read_text(encoding="utf-8"))
    for row in state.get("entries", []):
        triple = row_to_triple(row)
        if row.get("version", 1) != 1:
            triple = dataclasses.replace(triple, version=row["version"])
        store._store(triple, edited=bool(row.get("edited", False)))
    stats = state.get("stats", {})
    store.stats = CacheStats(**{k: stats.get(k, 0)
                                for k in CacheStats().snapshot()})
    return store
