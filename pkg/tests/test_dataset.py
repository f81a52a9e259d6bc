from __future__ import annotations

import json
import random

import pytest

from factcache.dataset import (BenchmarkItem, MultiHopItem, build_item,
                               build_multihop, dialogue_turn, emit_benchmark,
                               fill_template, load_benchmark, pronoun_for,
                               record_line, substitute_pronoun)
from factcache.errors import (BadTemplate, BrokenChain, DistractorCollision,
                              ParseError, SchemaViolation)
from factcache.triples import EntityRef, Source, TaskKind
from conftest import FIXTURES, triple

QA_TEMPLATE = "Who is the current head of government for {}?"


class TestFillTemplate:
    def test_qa_template(self):
        assert fill_template(QA_TEMPLATE, "Sioux Falls") == \
            "Who is the current head of government for Sioux Falls?"

    def test_cloze_template(self):
        assert fill_template("() is the head of government in {}.",
                             "Sioux Falls") == \
            "() is the head of government in Sioux Falls."

    def test_missing_placeholder(self):
        with pytest.raises(BadTemplate):
            fill_template("No placeholder here.", "x")

    def test_double_placeholder(self):
        with pytest.raises(BadTemplate):
            fill_template("{} and {}", "x")


def sioux_falls_item(templates, seed=1, fc_truth=True):
    hog = templates["head of government"]
    t = triple("Sioux Falls", "head of government", "Paul Ten Haken",
               source=Source.SYNTHETIC)
    locality = triple("Viarmes", "head of government", "William Rouyer",
                      source=Source.SYNTHETIC)
    return build_item(t, hog, ["Theodor Leutwein", "Lothar von Trotha"],
                      locality, random.Random(seed), fc_truth=fc_truth)


class TestBuildItem:
    def test_reproduces_reference_queries(self, templates):
        item = sioux_falls_item(templates)
        assert item.queries[TaskKind.QA] == \
            "Who is the current head of government for Sioux Falls?"
        assert item.queries[TaskKind.CLOZE] == \
            "() is the head of government in Sioux Falls."
        assert item.queries[TaskKind.COMPLETION] == \
            "The head of government for Sioux Falls is"
        # seed 1 shuffles the options into the reference arrangement
        assert item.queries[TaskKind.CHOICE] == (
            "Who holds the position of head of government in Sioux Falls?"
            "\nA:Theodor Leutwein B:Lothar von Trotha C:Paul Ten Haken")
        assert item.queries[TaskKind.FACT_CHECK] == (
            "Determine whether the proposition is true.\nProposition:"
            "The head of government for Sioux Falls is Paul Ten Haken.")
        assert item.locality_query == \
            "Who is the current head of government for Viarmes?"
        assert item.gold == "Paul Ten Haken"

    def test_false_proposition_uses_a_distractor(self, templates):
        item = sioux_falls_item(templates, fc_truth=False)
        assert "Paul Ten Haken" not in item.queries[TaskKind.FACT_CHECK]
        assert item.gold_for(TaskKind.FACT_CHECK) == "False"

    def test_distractor_equal_to_gold_rejected(self, templates):
        hog = templates["head of government"]
        t = triple("Sioux Falls", "head of government", "Paul Ten Haken")
        locality = triple("Viarmes", "head of government", "William Rouyer")
        with pytest.raises(DistractorCollision):
            build_item(t, hog, ["Paul Ten Haken", "Lothar von Trotha"],
                       locality, random.Random(0))

    def test_locality_must_share_relation(self, templates):
        hog = templates["head of government"]
        t = triple("Sioux Falls", "head of government", "Paul Ten Haken")
        wrong = triple("France", "capital", "Paris")
        with pytest.raises(SchemaViolation):
            build_item(t, hog, ["a", "b"], wrong, random.Random(0))

    def test_locality_must_differ_in_subject(self, templates):
        hog = templates["head of government"]
        t = triple("Sioux Falls", "head of government", "Paul Ten Haken")
        same = triple("Sioux Falls", "head of government", "Someone Else")
        with pytest.raises(SchemaViolation):
            build_item(t, hog, ["a", "b"], same, random.Random(0))

    @pytest.mark.parametrize("seed", range(12))
    def test_choice_contains_gold_exactly_once(self, templates, seed):
        item = sioux_falls_item(templates, seed=seed, fc_truth=None)
        texts = [text for _, text in item.choice_options]
        assert texts.count("Paul Ten Haken") == 1
        assert sorted(letter for letter, _ in item.choice_options) == \
            ["A", "B", "C"]


AMTRAK_CHAIN = [
    triple("Amtrak", "owner of", "Route 128 station", source=Source.SYNTHETIC),
    triple("Route 128 station",
           "located in the administrative territorial entity", "Westwood",
           source=Source.SYNTHETIC),
]


class TestBuildMultihop:
    def test_amtrak_chain_matches_reference_format(self, templates):
        item = build_multihop(AMTRAK_CHAIN, templates)
        assert item.multihop_query == (
            "In which administrative territorial entity is the entities {} "
            "owns located?")
        assert item.filled_multihop_query() == (
            "In which administrative territorial entity is the entities "
            "Amtrak owns located?")
        assert item.hop_queries[0] == "What entities does Amtrak owns?"
        assert item.hop_queries[1] == ("In which administrative territorial "
                                       "entity is Route 128 station located?")
        assert item.final_gold == "Westwood"

    def test_dialogue_pronoun_for_tagged_person(self, templates):
        chain = [
            triple("America", "head of government", "Joe Biden",
                   source=Source.SYNTHETIC),
            triple("Joe Biden", "spouse", "Jill Biden",
                   source=Source.SYNTHETIC),
        ]
        entities = {"Joe Biden": EntityRef(id="Joe Biden", kind="person",
                                           gender="male")}
        item = build_multihop(chain, templates, entities)
        assert item.dialogue_turns[1] == "Who is his spouse?"

    def test_dialogue_pronoun_defaults_to_it(self, templates):
        item = build_multihop(AMTRAK_CHAIN, templates)
        assert item.dialogue_turns[1] == (
            "In which administrative territorial entity is it located?")

    def test_three_hop_nesting(self, templates):
        chain = [
            triple("America", "head of government", "Joe Biden"),
            triple("Joe Biden", "spouse", "Jill Biden"),
            triple("Jill Biden", "employer", "NOVA"),
        ]
        item = build_multihop(chain, templates)
        assert item.multihop_query == (
            "Who is the employer of the spouse of the head of government "
            "in {}?")

    def test_broken_chain_rejected(self, templates):
        broken = [
            triple("America", "head of government", "Joe Biden"),
            triple("Someone Else", "spouse", "Jill Biden"),
        ]
        with pytest.raises(BrokenChain):
            build_multihop(broken, templates)

    @pytest.mark.parametrize("length", [1, 6])
    def test_length_bounds(self, templates, length):
        chain = [triple(f"e{i}", "spouse", f"e{i + 1}")
                 for i in range(length)]
        with pytest.raises(BrokenChain):
            build_multihop(chain, templates)


class TestPronouns:
    def test_pronoun_map(self):
        male = EntityRef(id="x", kind="person", gender="male")
        female = EntityRef(id="x", kind="person", gender="female")
        unknown = EntityRef(id="x", kind="person")
        place = EntityRef(id="x")
        assert pronoun_for(male, possessive=True) == "his"
        assert pronoun_for(female, possessive=True) == "her"
        assert pronoun_for(unknown, possessive=True) == "their"
        assert pronoun_for(place, possessive=True) == "its"
        assert pronoun_for(male, possessive=False) == "him"
        assert pronoun_for(None, possessive=False) == "it"

    def test_dialogue_turn_possessive_form(self):
        male = EntityRef(id="Joe Biden", kind="person", gender="male")
        assert dialogue_turn("Who is Joe Biden's spouse?", "Joe Biden",
                             male) == "Who is his spouse?"

    def test_dialogue_turn_plain_form(self):
        assert dialogue_turn("In which country is Westwood located?",
                             "Westwood") == "In which country is it located?"

    def test_substitute_possessive(self):
        assert substitute_pronoun("Who is his spouse?", "Joe Biden") == \
            "Who is Joe Biden's spouse?"

    def test_substitute_objective(self):
        assert substitute_pronoun(
            "In which administrative territorial entity is it located?",
            "Route 128 station") == ("In which administrative territorial "
                                     "entity is Route 128 station located?")

    def test_substitute_her_possessive_vs_objective(self):
        assert substitute_pronoun("Who is her spouse?", "Jill") == \
            "Who is Jill's spouse?"
        assert substitute_pronoun("Who employs her?", "Jill") == \
            "Who employs Jill?"


class TestLoadBenchmark:
    def test_reference_single_hop_record(self):
        items = load_benchmark(FIXTURES / "single_hop_item.jsonl")
        (item,) = items
        assert isinstance(item, BenchmarkItem)
        assert item.gold == "Paul Ten Haken"
        assert item.fc_truth is True
        assert item.option_map() == {
            "a": "Theodor Leutwein", "b": "Lothar von Trotha",
            "c": "Paul Ten Haken"}

    def test_reference_multihop_record(self):
        items = load_benchmark(FIXTURES / "multihop_item.jsonl")
        (item,) = items
        assert isinstance(item, MultiHopItem)
        assert item.hops == 2
        assert item.chain[0].subject == "Amtrak"
        assert item.chain[1].obj == "Westwood"
        assert item.final_gold == "Westwood"

    def test_reference_records_reemit_byte_identically(self):
        for name in ("single_hop_item.jsonl", "multihop_item.jsonl"):
            original = (FIXTURES / name).read_text(encoding="utf-8")
            (item,) = load_benchmark(FIXTURES / name)
            assert record_line(item) + "\n" == original

    def test_missing_field_is_a_schema_violation(self, tmp_path):
        record = json.loads(
            (FIXTURES / "single_hop_item.jsonl").read_text())
        del record["object_label"]
        path = tmp_path / "broken.jsonl"
        path.write_text(json.dumps(record) + "\n")
        with pytest.raises(SchemaViolation) as exc:
            load_benchmark(path)
        assert exc.value.line == 1

    def test_bad_json_is_a_parse_error(self, tmp_path):
        path = tmp_path / "broken.jsonl"
        path.write_text("{not json\n")
        with pytest.raises(ParseError):
            load_benchmark(path)

    def test_lenient_mode_skips_invalid_lines(self, tmp_path):
        good = (FIXTURES / "single_hop_item.jsonl").read_text()
        path = tmp_path / "mixed.jsonl"
        path.write_text("{broken\n" + good)
        items = load_benchmark(path, strict=False)
        assert len(items) == 1


class TestRoundTrip:
    def test_emit_then_load_reproduces_items(self, templates, tmp_path):
        entities = {"Joe Biden": EntityRef(id="Joe Biden", kind="person",
                                           gender="male")}
        single = sioux_falls_item(templates)
        multi = build_multihop([
            triple("America", "head of government", "Joe Biden",
                   source=Source.SYNTHETIC),
            triple("Joe Biden", "spouse", "Jill Biden",
                   source=Source.SYNTHETIC),
        ], templates, entities)
        path = tmp_path / "items.jsonl"
        emit_benchmark([single, multi], path)
        loaded = load_benchmark(path, entities=entities)
        assert loaded[0] == single
        assert loaded[1] == multi

    def test_nested_option_labels_round_trip_fc_truth(self, templates,
                                                      tmp_path):
        # "Paris" is a token-phrase inside "Paris Saint-Germain"; the false
        # proposition must still load back as false
        capital = templates["capital"]
        t = triple("France", "capital", "Paris", source=Source.SYNTHETIC)
        locality = triple("Sweden", "capital", "Stockholm",
                          source=Source.SYNTHETIC)
        item = build_item(t, capital, ["Paris Saint-Germain", "Lyon"],
                          locality, random.Random(3), fc_truth=False)
        assert "Paris Saint-Germain" in item.queries[TaskKind.FACT_CHECK] or \
            "Lyon" in item.queries[TaskKind.FACT_CHECK]
        path = tmp_path / "nested.jsonl"
        emit_benchmark([item], path)
        (loaded,) = load_benchmark(path)
        assert loaded.fc_truth is False

    def test_fixed_seed_emits_identical_bytes(self, templates, tmp_path):
        paths = []
        for run in range(2):
            items = [sioux_falls_item(templates, seed=99, fc_truth=None)
                     for _ in range(5)]
            path = tmp_path / f"run{run}.jsonl"
            emit_benchmark(items, path)
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]
