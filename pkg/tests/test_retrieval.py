import math
import random
from collections import Counter

import pytest

from headgen.corpus import Pair
from headgen.retrieval import (
    RetrievalError, build_index, load_index, retrieve_prototype,
    retrieve_similar_document, sample_negatives, save_index, similarity)

from conftest import synthetic_pairs


def brute_force_tfidf(pairs):
    """Independent TF-IDF oracle over attractive pairs (dense dicts)."""
    attractive = [p for p in pairs if p.attractive]
    n = len(attractive)
    texts = {p.id: p.document + p.headline for p in attractive}
    df = Counter()
    for toks in texts.values():
        df.update(set(toks))
    vecs = {}
    for pid, toks in texts.items():
        tf = Counter(toks)
        vecs[pid] = {t: tf[t] * math.log(n / df[t])
                     for t in tf if df[t] < n}
    return vecs


class TestBuildIndex:
    def test_empty_corpus_errors(self):
        with pytest.raises(RetrievalError):
            build_index([])

    def test_shared_terms_dropped(self):
        pairs = [Pair("1", ["a", "b"], ["c"], 30),
                 Pair("2", ["a", "b"], ["c"], 30)]
        index = build_index(pairs)
        assert index.vectors["1"] == {}
        assert index.vectors["2"] == {}

    def test_single_doc_term_weight(self):
        # term 'x' appears tf=3 in 1 of 2 docs -> weight 3*ln 2
        pairs = [Pair("1", ["x", "x", "x", "a"], ["a"], 30),
                 Pair("2", ["a", "a"], ["a"], 30)]
        index = build_index(pairs)
        assert index.vectors["1"]["x"] == pytest.approx(3 * math.log(2))

    def test_matches_brute_force_oracle(self):
        pairs = synthetic_pairs(n_attractive=20, n_unattractive=5)
        index = build_index(pairs)
        oracle = brute_force_tfidf(pairs)
        assert set(index.vectors) == set(oracle)
        for pid, vec in oracle.items():
            assert set(index.vectors[pid]) == set(vec)
            for term, w in vec.items():
                assert index.vectors[pid][term] == pytest.approx(w, abs=1e-9)

    def test_no_zero_entries_and_df_positive(self):
        index = build_index(synthetic_pairs())
        for vec in index.vectors.values():
            assert all(w != 0.0 for w in vec.values())
        assert all(v >= 1 for v in index.df.values())

    def test_pools_disjoint_exhaustive(self):
        pairs = synthetic_pairs()
        index = build_index(pairs)
        assert set(index.attractive_ids) | set(index.unattractive_ids) == \
            {p.id for p in pairs}
        assert not set(index.attractive_ids) & set(index.unattractive_ids)

    def test_deterministic(self):
        pairs = synthetic_pairs()
        a, b = build_index(pairs), build_index(pairs)
        assert a.vectors == b.vectors
        assert a.attractive_ids == b.attractive_ids


class TestSimilarity:
    def test_disjoint_supports_zero(self):
        assert similarity({"a": 2.0}, {"b": 3.0}) == 0.0

    def test_self_similarity_is_squared_norm(self):
        vec = {"a": 2.0, "b": -1.5}
        assert similarity(vec, vec) == pytest.approx(2.0**2 + 1.5**2)

    def test_symmetry_and_dense_oracle(self):
        rng = random.Random(5)
        terms = [f"t{i}" for i in range(12)]
        for _ in range(20):
            a = {t: rng.uniform(-2, 2) for t in rng.sample(terms, 5)}
            b = {t: rng.uniform(-2, 2) for t in rng.sample(terms, 7)}
            dense = sum(a.get(t, 0.0) * b.get(t, 0.0) for t in terms)
            assert similarity(a, b) == pytest.approx(dense)
            assert similarity(a, b) == pytest.approx(similarity(b, a))


class TestRetrieve:
    def test_identical_doc_returned(self):
        pairs = synthetic_pairs(n_attractive=6, n_unattractive=2)
        index = build_index(pairs)
        query = Pair("query", pairs[2].document, pairs[2].headline, 30)
        assert retrieve_prototype(query, index).id == pairs[2].id

    def test_never_returns_excluded_id(self):
        pairs = synthetic_pairs(n_attractive=6, n_unattractive=2)
        index = build_index(pairs)
        for p in pairs:
            if p.attractive:
                assert retrieve_prototype(p, index).id != p.id
                assert retrieve_similar_document(p, index).id != p.id

    def test_unique_nonzero_score(self):
        pairs = [Pair("d1", ["aa", "bb"], ["cc"], 30),
                 Pair("d7", ["zz", "yy"], ["xx"], 30),
                 Pair("d3", ["mm", "nn"], ["oo"], 30)]
        index = build_index(pairs)
        query = Pair("q", ["zz", "zz"], ["yy"], 30)
        assert retrieve_prototype(query, index).id == "d7"

    def test_two_doc_corpus_returns_other(self):
        pairs = [Pair("a", ["x", "y"], ["h"], 30),
                 Pair("b", ["x", "z"], ["h"], 30)]
        index = build_index(pairs)
        assert retrieve_similar_document(pairs[0], index).id == "b"

    def test_duplicate_of_proto_returned(self):
        pairs = [Pair("a", ["x", "y"], ["h", "q"], 30),
                 Pair("b", ["x", "y"], ["h", "q"], 30),
                 Pair("c", ["m", "n"], ["o", "p"], 30)]
        index = build_index(pairs)
        assert retrieve_similar_document(pairs[0], index).id == "b"

    def test_matches_exhaustive_oracle(self):
        pairs = synthetic_pairs(n_attractive=20, n_unattractive=4)
        index = build_index(pairs)
        vecs = brute_force_tfidf(pairs)
        for query in [p for p in pairs if p.attractive][:5]:
            qvec = vecs[query.id]
            best = min(
                ((-sum(qvec.get(t, 0.0) * w for t, w in vec.items()), pid)
                 for pid, vec in vecs.items() if pid != query.id))[1]
            assert retrieve_prototype(query, index).id == best

    def test_empty_after_exclusion_errors(self):
        pairs = [Pair("only", ["x"], ["y"], 30)]
        index = build_index(pairs)
        with pytest.raises(RetrievalError):
            retrieve_prototype(pairs[0], index)


class TestSampleNegatives:
    def test_seeded_rng_deterministic(self):
        index = build_index(synthetic_pairs())
        triple1 = sample_negatives(index, random.Random(9), exclude_id="p00")
        triple2 = sample_negatives(index, random.Random(9), exclude_id="p00")
        assert [p.id for p in triple1] == [p.id for p in triple2]

    def test_pool_membership(self):
        index = build_index(synthetic_pairs())
        rng = random.Random(1)
        for _ in range(50):
            ya, yn, xq = sample_negatives(index, rng, exclude_id="p01")
            assert ya.id in index.attractive_ids
            assert yn.id in index.unattractive_ids
            assert xq.id in index.attractive_ids and xq.id != "p01"

    def test_singleton_attractive_pool(self):
        pairs = [Pair("a", ["x"], ["y"], 30), Pair("b", ["m"], ["n"], 2)]
        index = build_index(pairs)
        ya, yn, _ = sample_negatives(index, random.Random(0), exclude_id=None)
        assert ya.id == "a" and yn.id == "b"

    def test_empty_unattractive_pool_errors(self):
        index = build_index([Pair("a", ["x"], ["y"], 30),
                             Pair("b", ["m"], ["n"], 30)])
        with pytest.raises(RetrievalError):
            sample_negatives(index, random.Random(0), exclude_id=None)

    def test_draw_frequencies_uniform(self):
        # chi-square-style check: each pool member within 3 sigma of uniform
        pairs = synthetic_pairs(n_attractive=8, n_unattractive=4)
        index = build_index(pairs)
        rng = random.Random(42)
        n = 10000
        counts = Counter(
            sample_negatives(index, rng, exclude_id=None)[0].id
            for _ in range(n))
        p = 1 / len(index.attractive_ids)
        sigma = math.sqrt(n * p * (1 - p))
        for pid in index.attractive_ids:
            assert abs(counts[pid] - n * p) < 3.5 * sigma


class TestPersistence:
    def test_round_trip(self, tmp_path):
        pairs = synthetic_pairs()
        index = build_index(pairs)
        path = tmp_path / "index.json"
        save_index(index, path)
        loaded = load_index(path)
        assert loaded.vectors == index.vectors
        assert loaded.attractive_ids == index.attractive_ids
        assert loaded.df == index.df
        query = pairs[0]
        assert retrieve_prototype(query, loaded).id == \
            retrieve_prototype(query, index).id

    def test_version_mismatch_errors(self, tmp_path):
        path = tmp_path / "index.json"
        path.write_text('{"version": 999}', encoding="utf-8")
        with pytest.raises(RetrievalError):
            load_index(path)
