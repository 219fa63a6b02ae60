import json
import math
import random

import pytest

from headgen.evaluation import (bleu, evaluate, lead_baseline, rouge_l,
                                rouge_n, score_corpus)
from headgen.retrieval import build_index

from conftest import synthetic_pairs


class TestRougeN:
    def test_identical_sequences(self):
        p, r, f1 = rouge_n(["a", "b", "c"], ["a", "b", "c"], 1)
        assert (p, r, f1) == (1.0, 1.0, 1.0)

    def test_partial_overlap_hand_computed(self):
        # candidate unigrams {a, b} all match; reference has 3 -> P=1, R=2/3
        p, r, f1 = rouge_n(["a", "b"], ["a", "b", "c"], 1)
        assert p == 1.0
        assert r == pytest.approx(2 / 3)
        assert f1 == pytest.approx(0.8)

    def test_clipping_repeated_tokens(self):
        # candidate has 'a' three times, reference once: one clipped match
        p, _, _ = rouge_n(["a", "a", "a"], ["a", "b"], 1)
        assert p == pytest.approx(1 / 3)

    def test_bigrams(self):
        _, r, _ = rouge_n(["a", "b", "c"], ["a", "b", "d"], 2)
        assert r == pytest.approx(1 / 2)

    def test_no_overlap_zero(self):
        assert rouge_n(["a"], ["b"], 1) == (0.0, 0.0, 0.0)

    def test_candidate_shorter_than_n(self):
        assert rouge_n(["a"], ["a", "b"], 2) == (0.0, 0.0, 0.0)


class TestRougeL:
    def test_one_substitution(self):
        # LCS([a,b,c], [a,x,c]) = 2
        p, r, f1 = rouge_l(["a", "b", "c"], ["a", "x", "c"])
        assert p == pytest.approx(2 / 3)
        assert r == pytest.approx(2 / 3)
        assert f1 == pytest.approx(2 / 3)

    def test_subsequence_not_substring(self):
        p, r, _ = rouge_l(["a", "c", "e"], ["a", "b", "c", "d", "e"])
        assert p == 1.0
        assert r == pytest.approx(3 / 5)

    def test_lcs_symmetric_under_swap(self):
        rng = random.Random(3)
        alphabet = list("abcde")
        for _ in range(30):
            x = [rng.choice(alphabet) for _ in range(rng.randint(0, 8))]
            y = [rng.choice(alphabet) for _ in range(rng.randint(0, 8))]
            px, rx, _ = rouge_l(x, y)
            py, ry, _ = rouge_l(y, x)
            assert px == pytest.approx(ry)
            assert rx == pytest.approx(py)

    def test_empty_candidate(self):
        assert rouge_l([], ["a"]) == (0.0, 0.0, 0.0)


class TestBleu:
    def test_identical_corpus_is_one(self):
        cands = [["a", "b", "c", "d", "e"], ["x", "y", "z", "w", "v"]]
        out = bleu(cands, [list(c) for c in cands])
        assert out["bleu"] == pytest.approx(1.0)
        assert out["brevity_penalty"] == 1.0

    def test_half_length_brevity_penalty(self):
        ref = ["a", "b", "c", "d", "e", "f", "g", "h"]
        out = bleu([ref[:4]], [ref])
        assert out["brevity_penalty"] == pytest.approx(math.exp(-1.0))
        assert out["bleu"] == pytest.approx(math.exp(-1.0))

    def test_missing_ngram_order_zeroes_score(self):
        # every bigram differs, so p2 = 0 and the product collapses
        out = bleu([["a", "c", "b", "d"]], [["a", "b", "c", "d"]])
        assert out["precisions"][1] == 0.0
        assert out["bleu"] == 0.0

    def test_ngram_count_oracle(self):
        cand = ["the", "cat", "sat", "on", "the", "mat"]
        ref = ["the", "cat", "is", "on", "the", "mat"]
        out = bleu([cand], [ref])
        # unigrams: the*2, cat, on, mat match; 'sat' does not -> 5/6
        assert out["precisions"][0] == pytest.approx(5 / 6)
        # bigrams: (the,cat), (on,the), (the,mat) match of 5 -> 3/5
        assert out["precisions"][1] == pytest.approx(3 / 5)
        # trigrams: (on,the,mat) of 4 -> 1/4; 4-grams: 0 of 3
        assert out["precisions"][2] == pytest.approx(1 / 4)
        assert out["precisions"][3] == 0.0

    def test_corpus_level_pooling(self):
        # counts pool across examples before dividing
        cands = [["a", "b"], ["c", "d"]]
        refs = [["a", "x"], ["c", "d"]]
        out = bleu(cands, refs, max_n=1)
        assert out["precisions"][0] == pytest.approx(3 / 4)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            bleu([["a"]], [["a"], ["b"]])

    def test_empty_candidates(self):
        out = bleu([[]], [["a"]])
        assert out["bleu"] == 0.0
        assert out["brevity_penalty"] == 0.0


class TestLeadBaseline:
    def test_first_sentence(self):
        doc = ["hello", "world", ".", "second", "sentence", "."]
        assert lead_baseline(doc) == ["hello", "world", "."]

    def test_cjk_ender(self):
        doc = ["你", "好", "。", "再", "见"]
        assert lead_baseline(doc) == ["你", "好", "。"]

    def test_no_ender_truncates(self):
        doc = [f"t{i}" for i in range(20)]
        assert lead_baseline(doc) == doc[:10]
        assert lead_baseline(doc, max_tokens=3) == doc[:3]


class TestScoreCorpus:
    def test_perfect_candidates_all_ones(self):
        refs = [["a", "b", "c", "d", "e"], ["p", "q", "r", "s", "t"]]
        rows, summary = score_corpus([list(r) for r in refs], refs)
        assert len(rows) == 2
        for key in ("rouge1_f1", "rouge2_f1", "rougel_f1", "bleu"):
            assert summary[key] == pytest.approx(1.0), key

    def test_summary_is_mean_of_rows(self):
        cands = [["a", "b"], ["x", "y"]]
        refs = [["a", "b"], ["x", "z"]]
        rows, summary = score_corpus(cands, refs)
        mean = sum(r["rouge1_f1"] for r in rows) / 2
        assert summary["rouge1_f1"] == pytest.approx(mean)

    def test_empty_corpus(self):
        rows, summary = score_corpus([], [])
        assert rows == []
        assert summary["rouge1_f1"] == 0.0


class TestEvaluate:
    def echo_fn(self, pairs):
        by_doc = {tuple(p.document): p.headline for p in pairs}
        return lambda doc, proto: by_doc[tuple(doc)]

    def test_echo_system_scores_one(self, tmp_path):
        pairs = synthetic_pairs()
        index = build_index(pairs)
        test = [p for p in pairs if p.attractive][:4]
        report = evaluate(self.echo_fn(test), test, index, out_dir=tmp_path)
        model = report["systems"]["model"]
        assert model["rouge1_f1"] == pytest.approx(1.0)
        assert model["bleu"] == pytest.approx(1.0)
        assert len(report["examples"]) == 4

    def test_output_files(self, tmp_path):
        pairs = synthetic_pairs()
        index = build_index(pairs)
        test = [p for p in pairs if p.attractive][:3]
        evaluate(self.echo_fn(pairs), test, index, out_dir=tmp_path)
        with open(tmp_path / "summary.json", encoding="utf-8") as fh:
            systems = json.load(fh)
        assert set(systems) == {"model", "lead"}
        lines = (tmp_path / "per_example.csv").read_text(
            encoding="utf-8").strip().splitlines()
        assert len(lines) == 4  # header + 3 rows
        assert lines[0].startswith("id,headline,")

    def test_lead_system_reported(self):
        pairs = synthetic_pairs()
        index = build_index(pairs)
        test = [p for p in pairs if p.attractive][:2]
        report = evaluate(self.echo_fn(pairs), test, index)
        assert 0.0 <= report["systems"]["lead"]["rouge1_f1"] <= 1.0
