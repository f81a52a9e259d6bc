from __future__ import annotations

import math

import pytest

from factcache.ranking import (EmbeddingScorer, LexicalScorer, RankedEvidence,
                               rank_triples, token_cosine, tokenize)
from factcache.triples import TripleSet
from conftest import triple

HOG = triple("America", "head of government", "Biden",
             relation_label="head of government")
CAPITAL = triple("America", "capital", "Washington")
QUERY = "Who is the head of government in America?"


class TestTokenCosine:
    def test_hand_computed_example(self):
        # query tokens: who,is,the,head,of,government,in,america (8, all 1s)
        # hog render tokens: america,head,of,government,biden -> overlap 4
        # capital render tokens: america,capital,washington -> overlap 1
        assert token_cosine(QUERY, HOG.render()) == \
            pytest.approx(4 / math.sqrt(8 * 5))
        assert token_cosine(QUERY, CAPITAL.render()) == \
            pytest.approx(1 / math.sqrt(8 * 3))

    def test_empty_text_scores_zero(self):
        assert token_cosine("", "anything") == 0.0

    def test_identical_texts_score_one(self):
        assert token_cosine("head of state", "head of state") == \
            pytest.approx(1.0)

    def test_tokenizer_lowercases_and_splits_punctuation(self):
        assert tokenize("Route 128 station, USA!") == \
            ["route", "128", "station", "usa"]


class TestRankTriples:
    def test_relation_match_outranks_shared_subject(self):
        evidence = rank_triples(QUERY, TripleSet([HOG, CAPITAL]), k=1)
        assert evidence.selected == (HOG,)
        assert evidence.triples[0][1] == pytest.approx(4 / math.sqrt(40))

    def test_singleton_candidate(self):
        evidence = rank_triples(QUERY, TripleSet([CAPITAL]), k=1)
        assert evidence.selected == (CAPITAL,)
        assert 0.0 <= evidence.triples[0][1] <= 1.0

    def test_tie_breaks_lexicographically(self):
        a = triple("a", "r", "x")
        b = triple("b", "r", "x")
        evidence = rank_triples("completely unrelated words",
                                TripleSet([b, a]), k=1)
        assert evidence.selected == (a,)  # equal scores; smaller key first

    def test_empty_candidates_yield_empty_evidence(self):
        evidence = rank_triples(QUERY, TripleSet(), k=3)
        assert len(evidence) == 0
        assert not evidence

    def test_k_caps_the_selection(self):
        ts = TripleSet([triple(f"s{i}", "head of government", f"o{i}")
                        for i in range(5)])
        assert len(rank_triples(QUERY, ts, k=2)) == 2

    def test_scores_non_increasing(self):
        ts = TripleSet([HOG, CAPITAL, triple("x", "y", "z")])
        evidence = rank_triples(QUERY, ts, k=3)
        scores = [s for _, s in evidence.triples]
        assert scores == sorted(scores, reverse=True)

    def test_k_must_be_positive(self):
        with pytest.raises(ValueError):
            rank_triples(QUERY, TripleSet(), k=0)


class TestScorers:
    def test_lexical_scorer_matches_token_cosine(self):
        scores = LexicalScorer().score(QUERY, [HOG, CAPITAL])
        assert scores == [token_cosine(QUERY, HOG.render()),
                          token_cosine(QUERY, CAPITAL.render())]

    def test_embedding_scorer_uses_supplied_vectors(self):
        vectors = {QUERY: [1.0, 0.0], HOG.render(): [1.0, 0.0],
                   CAPITAL.render(): [0.0, 1.0]}
        scorer = EmbeddingScorer(lambda text: vectors[text])
        assert scorer.score(QUERY, [HOG, CAPITAL]) == \
            [pytest.approx(1.0), pytest.approx(0.0)]

    def test_embedding_scores_clamped_to_unit_interval(self):
        vectors = {QUERY: [1.0, 0.0], HOG.render(): [-1.0, 0.0]}
        scorer = EmbeddingScorer(lambda text: vectors[text])
        assert scorer.score(QUERY, [HOG]) == [0.0]


class TestRankedEvidence:
    def test_rejects_increasing_scores(self):
        with pytest.raises(ValueError):
            RankedEvidence(triples=((HOG, 0.1), (CAPITAL, 0.9)), k=2)

    def test_rejects_overfull_selection(self):
        with pytest.raises(ValueError):
            RankedEvidence(triples=((HOG, 0.9), (CAPITAL, 0.1)), k=1)
