"""Command-line entry point: cache administration, editing, querying, data
fetching/building, and evaluation suites.

Machine-readable output goes to stdout, diagnostics to stderr; every
command is reproducible from the config file plus the seed (``--seed``
overrides the configured one). The fast table and its counters persist
between invocations in the configured state file.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path
from typing import Optional

from . import cache as cachemod
from .cache import (EditRequest, InMemorySlowSource, LocalDumpSource,
                    RemoteSparqlSource, TieredFactStore, read_dump)
from .config import Config, DEFAULT_CONFIG_PATH, load_config
from .dataset import (BenchmarkItem, MultiHopItem, build_item, build_multihop,
                      emit_benchmark, load_benchmark, load_relation_templates)
from .errors import FactCacheError
from .harness import (run_main_eval, run_multihop_scenario,
                      run_scale_scenario, run_transition_scenario)
from .kbclient import (DBPEDIA_ENDPOINT, WIKIDATA_ENDPOINT,
                       KnowledgeBaseClient, filter_ambiguous)
from .models import HttpCompletionModel, MockTableModel
from .pipeline import (AliasIndex, ExtractorKind, Pipeline, aliases_for_items)
from .sparqlio import TransportReply
from .triples import EntityRef, TaskKind, TripleSet


def _err(message: str) -> None:
    print(message, file=sys.stderr)


# --- runtime assembly --------------------------------------------------------

def _slow_source(cfg: Config):
    if cfg.slow_kind == "local_dump":
        return LocalDumpSource(cfg.slow_locator)
    if cfg.slow_kind == "remote_sparql":
        return RemoteSparqlSource(cfg.slow_locator)
    return InMemorySlowSource()


def _model(cfg: Config):
    if cfg.model_kind == "http":
        return HttpCompletionModel(
            endpoint=cfg.model_endpoint,
            api_key=cfg.api_key(),
            max_tokens=cfg.model_max_tokens,
        )
    return MockTableModel(priors=cfg.model_priors)


def _store(cfg: Config, fresh: bool = False) -> TieredFactStore:
    slow = _slow_source(cfg)
    state = Path(cfg.state_path)
    if not fresh and state.exists():
        return cachemod.load_state(state, slow=slow, capacity=cfg.capacity,
                                   prefetch_depth=cfg.prefetch_depth)
    return TieredFactStore(slow=slow, capacity=cfg.capacity,
                           prefetch_depth=cfg.prefetch_depth)


def load_entities(path: str) -> dict[str, EntityRef]:
    entities: dict[str, EntityRef] = {}
    for row in json.loads(Path(path).read_text(encoding="utf-8")):
        ref = EntityRef(
            id=row["id"],
            label=row.get("label", ""),
            aliases=frozenset(row.get("aliases", ())),
            kind=row.get("kind", ""),
            gender=row.get("gender", ""),
        )
        entities[ref.id] = ref
        entities.setdefault(ref.label, ref)
    return entities


def _aliases(cfg: Config, store: TieredFactStore) -> AliasIndex:
    index = AliasIndex.from_triples(store.fast_snapshot())
    if cfg.slow_kind == "local_dump":
        _, triples = read_dump(cfg.slow_locator)
        for t in triples:
            index.add(t.subject_label, t.subject)
            if t.object_is_entity:
                index.add(t.object_label, t.obj)
    if cfg.entities_path:
        for ref in load_entities(cfg.entities_path).values():
            index.add_entity(ref)
    return index


def _pipeline(cfg: Config, store: TieredFactStore) -> Pipeline:
    return Pipeline(
        store=store,
        aliases=_aliases(cfg, store),
        model=_model(cfg),
        k=cfg.k,
        max_hops=cfg.max_hops,
        extractor=ExtractorKind(cfg.extractor),
    )


def _save(cfg: Config, store: TieredFactStore) -> None:
    cachemod.save_state(store, cfg.state_path)


# --- commands -----------------------------------------------------------------

def cmd_edit(cfg: Config, args) -> int:
    store = _store(cfg)
    before = store.get(args.subject, args.relation)
    outcome = store.inject_manual(EditRequest(
        subject=args.subject,
        relation=args.relation,
        new_object=args.object,
        subject_label=args.subject_label or "",
        relation_label=args.relation_label or "",
        object_label=args.object_label or "",
        object_is_entity=not args.literal,
    ))
    after = store.get(args.subject, args.relation)
    if before is not None and after is not None and before.version == after.version:
        print("REPLACED (no change)")
    else:
        print(outcome.name)
    _save(cfg, store)
    return 0


def cmd_query(cfg: Config, args) -> int:
    store = _store(cfg)
    pipeline = _pipeline(cfg, store)
    task = TaskKind(args.task)
    answer, trace = pipeline.answer_traced(args.question, task)
    _save(cfg, store)  # persist before printing; output pipes may close early
    print(answer.text)
    if args.trace:
        _err(f"entities: {', '.join(trace.entities) or '(none)'}")
        _err(f"cache: {trace.cache_hits} hit(s), {trace.cache_misses} miss(es)")
        for triple, score in trace.evidence.triples:
            _err(f"evidence: {triple.render()} score={score:.4f}")
        _err("prompt:")
        _err(trace.prompt.render())
    return 0


def cmd_cache(cfg: Config, args) -> int:
    store = _store(cfg)
    if args.action == "stats":
        print(" ".join(f"{k}={v}" for k, v in store.stats.snapshot().items()))
        return 0
    if args.action == "sync":
        changed = store.sync()
        print(f"{changed} changed")
        _save(cfg, store)
        return 0
    # load <dump>
    if not args.dump:
        _err("cache load requires a dump file path")
        return 2
    _, triples = read_dump(args.dump)
    added = store.bulk_load(triples)
    print(f"{added} triples")
    _save(cfg, store)
    return 0


def _fixture_transport(path: str):
    text = Path(path).read_text(encoding="utf-8")

    def transport(url, params, headers):
        return TransportReply(status=200, text=text)

    return transport


def cmd_data_fetch(cfg: Config, args) -> int:
    endpoint = args.endpoint or (
        WIKIDATA_ENDPOINT if args.kb == "wikidata" else DBPEDIA_ENDPOINT)
    transport = _fixture_transport(args.fixture) if args.fixture else None
    client = KnowledgeBaseClient(kind=args.kb, endpoint=endpoint,
                                 transport=transport)
    if args.properties:
        for pair in client.fetch_equivalent_properties():
            print(json.dumps({
                "dbpedia_property": pair.dbpedia_property,
                "wikidata_property": pair.wikidata_property,
                "label": pair.label,
            }, ensure_ascii=False))
        return 0
    if not args.relation:
        _err("data fetch requires --relation or --properties")
        return 2
    rows = client.fetch_triples(args.relation, limit=args.limit,
                                offset=args.offset,
                                relation_label=args.relation_label or "",
                                person_only=args.person_only)
    if args.filter_ambiguous:
        for t in filter_ambiguous(rows):
            print(json.dumps(cachemod.triple_to_row(t), ensure_ascii=False))
    else:
        for row in rows:
            print(json.dumps({
                "subject_uri": row.subject_uri,
                "subject_label": row.subject_label,
                "object_uri": row.object_uri,
                "object_label": row.object_label,
                "relation_count": row.relation_count,
            }, ensure_ascii=False))
    return 0


def cmd_data_build(cfg: Config, args, seed: int) -> int:
    _, triples = read_dump(args.triples)
    templates = load_relation_templates(cfg.templates_path or None)
    entities = (load_entities(cfg.entities_path)
                if cfg.entities_path else None)
    rng = random.Random(seed)

    by_relation: dict[str, list] = {}
    for t in sorted(triples, key=lambda t: t.key):
        ref = templates.get(t.relation) or templates.get(t.relation_label)
        if ref is not None:
            by_relation.setdefault(ref.id, []).append((ref, t))

    items: list = []
    if args.multihop:
        pool = TripleSet(t for group in by_relation.values()
                         for _, t in group)
        for first in pool:
            chain = [first]
            while len(chain) < args.hops:
                nxt = pool.by_subject(chain[-1].obj)
                if not nxt:
                    break
                chain.append(nxt[0])
            if len(chain) == args.hops:
                relation_map = {t.relation: ref
                                for group in by_relation.values()
                                for ref, t in group}
                items.append(build_multihop(chain, relation_map, entities))
    else:
        for relation_id, group in sorted(by_relation.items()):
            if len(group) < 3:
                continue
            object_labels = sorted({t.object_label for _, t in group})
            for i, (ref, t) in enumerate(group):
                candidates = [o for o in object_labels if o != t.object_label]
                if len(candidates) < 2:
                    continue
                distractors = rng.sample(candidates, 2)
                locality = next(
                    (lt for _, lt in group[i + 1:] + group[:i]
                     if lt.subject != t.subject), None)
                if locality is None:
                    continue
                items.append(build_item(t, ref, distractors, locality, rng))
    if args.count is not None:
        items = items[:args.count]
    written = emit_benchmark(items, args.out)
    print(f"{written} items written to {args.out}")
    return 0


def cmd_data_validate(cfg: Config, args) -> int:
    path = args.items or cfg.benchmark_path
    if not path:
        _err("data validate requires --items or a configured benchmark_path")
        return 2
    items = load_benchmark(path, strict=not args.lenient)
    print(f"{len(items)} items OK")
    return 0


def cmd_eval(cfg: Config, args, seed: int) -> int:
    store = _store(cfg, fresh=True)  # evaluation never touches saved state
    pipeline = _pipeline(cfg, store)
    fmt = args.format

    if args.suite in ("main", "rq1", "rq2"):
        path = args.items or (
            cfg.multihop_path if args.suite == "rq2" else cfg.benchmark_path)
        if not path:
            _err(f"eval {args.suite} requires --items or a configured path")
            return 2
        items = load_benchmark(path)
        pipeline.aliases.merge(aliases_for_items(items))

    if args.suite == "main":
        report = run_main_eval(items, pipeline, params=cfg.sure_params)
        print(report.to_json() if fmt == "json" else report.format_table())
        return 0
    if args.suite == "rq1":
        single = [i for i in items if isinstance(i, BenchmarkItem)]
        curve = run_transition_scenario(single, pipeline,
                                        edit_counts=args.counts)
        if fmt == "json":
            print(json.dumps({"em_by_edit_count": curve}, indent=2))
        else:
            for n, em in curve.items():
                print(f"edits={n} EM={em:.2f}")
        return 0
    if args.suite == "rq2":
        chains = [i for i in items if isinstance(i, MultiHopItem)]
        report = run_multihop_scenario(chains, pipeline)
        print(report.to_json() if fmt == "json" else report.format_table())
        return 0
    # rq3
    points = run_scale_scenario(pipeline, sizes=args.sizes)
    if fmt == "json":
        print(json.dumps({str(size): {
            "em": p.em,
            "median_lookup_s": p.median_lookup_s,
            "median_answer_s": p.median_answer_s,
        } for size, p in points.items()}, indent=2))
    else:
        for size, p in points.items():
            print(f"size={size} EM={p.em:.2f} "
                  f"lookup={p.median_lookup_s * 1e3:.3f}ms "
                  f"answer={p.median_answer_s * 1e3:.3f}ms")
    return 0


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factcache",
        description="Fact-cache editing, querying, data, and evaluation tool")
    parser.add_argument("--config", default=None,
                        help=f"config file (default {DEFAULT_CONFIG_PATH})")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the configured random seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p_edit = sub.add_parser("edit", help="inject a manual fact update")
    p_edit.add_argument("subject")
    p_edit.add_argument("relation")
    p_edit.add_argument("object")
    p_edit.add_argument("--subject-label", dest="subject_label")
    p_edit.add_argument("--relation-label", dest="relation_label")
    p_edit.add_argument("--object-label", dest="object_label")
    p_edit.add_argument("--literal", action="store_true",
                        help="object is a literal, not an entity id")

    p_query = sub.add_parser("query", help="answer a question via the cache")
    p_query.add_argument("question")
    p_query.add_argument("--task", default="qa",
                         choices=[k.value for k in TaskKind])
    p_query.add_argument("--trace", action="store_true",
                         help="print extraction/retrieval details to stderr")

    p_cache = sub.add_parser("cache", help="cache administration")
    p_cache.add_argument("action", choices=["sync", "stats", "load"])
    p_cache.add_argument("dump", nargs="?", help="dump file for `load`")

    p_data = sub.add_parser("data", help="data collection and benchmarks")
    data_sub = p_data.add_subparsers(dest="data_command", required=True)

    p_fetch = data_sub.add_parser("fetch", help="fetch rows from a KB endpoint")
    p_fetch.add_argument("--kb", choices=["wikidata", "dbpedia"],
                         default="wikidata")
    p_fetch.add_argument("--endpoint", default=None)
    p_fetch.add_argument("--fixture", default=None,
                         help="recorded response file instead of live HTTP")
    p_fetch.add_argument("--properties", action="store_true",
                         help="fetch equivalent properties instead of triples")
    p_fetch.add_argument("--relation", default=None)
    p_fetch.add_argument("--relation-label", dest="relation_label")
    p_fetch.add_argument("--limit", type=int, default=100)
    p_fetch.add_argument("--offset", type=int, default=0)
    p_fetch.add_argument("--person-only", action="store_true")
    p_fetch.add_argument("--filter-ambiguous", action="store_true")

    p_build = data_sub.add_parser("build", help="build benchmark items")
    p_build.add_argument("--triples", required=True, help="triple dump file")
    p_build.add_argument("--out", required=True)
    p_build.add_argument("--multihop", action="store_true")
    p_build.add_argument("--hops", type=int, default=2)
    p_build.add_argument("--count", type=int, default=None)

    p_validate = data_sub.add_parser("validate", help="validate a benchmark file")
    p_validate.add_argument("--items", default=None)
    p_validate.add_argument("--lenient", action="store_true")

    p_eval = sub.add_parser("eval", help="run an evaluation suite")
    p_eval.add_argument("suite", choices=["main", "rq1", "rq2", "rq3"])
    p_eval.add_argument("--items", default=None)
    p_eval.add_argument("--format", choices=["json", "table"], default="table")
    p_eval.add_argument("--counts", type=int, nargs="+", default=[1, 2, 5, 10])
    p_eval.add_argument("--sizes", type=int, nargs="+",
                        default=[1, 10, 100, 1000, 10_000, 100_000])
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.seed
        if args.command == "edit":
            return cmd_edit(cfg, args)
        if args.command == "query":
            return cmd_query(cfg, args)
        if args.command == "cache":
            return cmd_cache(cfg, args)
        if args.command == "data":
            if args.data_command == "fetch":
                return cmd_data_fetch(cfg, args)
            if args.data_command == "build":
                return cmd_data_build(cfg, args, seed)
            return cmd_data_validate(cfg, args)
        return cmd_eval(cfg, args, seed)
    except FactCacheError as exc:
        _err(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
