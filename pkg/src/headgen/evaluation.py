"""Corpus-level ROUGE and BLEU scoring of generated headlines.

ROUGE-1/2/L are full-length F1 scores; BLEU is corpus-level with modified
n-gram precision clipping and a brevity penalty, no smoothing. All metrics
operate on token lists using the same tokenization as training.
"""

import csv
import json
import math
from collections import Counter
from pathlib import Path

from .retrieval import retrieve_prototype


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _prf(matches, cand_total, ref_total):
    p = matches / cand_total if cand_total else 0.0
    r = matches / ref_total if ref_total else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def rouge_n(candidate, reference, n):
    """Clipped n-gram overlap precision/recall/F1."""
    cand = _ngrams(candidate, n)
    ref = _ngrams(reference, n)
    matches = sum(min(count, ref[gram]) for gram, count in cand.items())
    return _prf(matches, sum(cand.values()), sum(ref.values()))


def _lcs_length(a, b):
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(cur[j - 1], prev[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate, reference):
    """Longest-common-subsequence precision/recall/F1."""
    lcs = _lcs_length(candidate, reference)
    return _prf(lcs, len(candidate), len(reference))


def bleu(candidates, references, max_n=4):
    """Corpus-level BLEU with brevity penalty; no smoothing.

    Returns a dict with the combined score, the per-order precisions
    (reported as BLEU-1..max_n), and the brevity penalty.
    """
    if len(candidates) != len(references):
        raise ValueError("candidate/reference count mismatch")
    cand_len = sum(len(c) for c in candidates)
    ref_len = sum(len(r) for r in references)
    precisions = []
    for n in range(1, max_n + 1):
        matches = total = 0
        for cand, ref in zip(candidates, references):
            cgrams = _ngrams(cand, n)
            rgrams = _ngrams(ref, n)
            matches += sum(min(count, rgrams[g]) for g, count in cgrams.items())
            total += sum(cgrams.values())
        precisions.append(matches / total if total else 0.0)
    if cand_len == 0:
        bp = 0.0
    else:
        bp = min(1.0, math.exp(1.0 - ref_len / cand_len))
    if all(p > 0 for p in precisions):
        score = bp * math.exp(sum(math.log(p) for p in precisions) / max_n)
    else:
        score = 0.0
    return {
        "bleu": score,
        "precisions": precisions,
        "brevity_penalty": bp,
        "candidate_length": cand_len,
        "reference_length": ref_len,
    }


def lead_baseline(document, max_tokens=10):
    """First sentence of the document (first 'max_tokens' tokens fallback)."""
    enders = {"。", "！", "？", ".", "!", "?"}
    for i, tok in enumerate(document):
        if tok in enders:
            return document[: i + 1]
    return document[:max_tokens]


def score_corpus(candidates, references):
    """Per-example ROUGE rows plus corpus-level aggregates."""
    rows = []
    for cand, ref in zip(candidates, references):
        _, _, r1 = rouge_n(cand, ref, 1)
        _, _, r2 = rouge_n(cand, ref, 2)
        _, _, rl = rouge_l(cand, ref)
        rows.append({"rouge1_f1": r1, "rouge2_f1": r2, "rougel_f1": rl})
    n = len(rows) or 1
    summary = {
        "rouge1_f1": sum(r["rouge1_f1"] for r in rows) / n,
        "rouge2_f1": sum(r["rouge2_f1"] for r in rows) / n,
        "rougel_f1": sum(r["rougel_f1"] for r in rows) / n,
    }
    b = bleu(candidates, references)
    summary["bleu"] = b["bleu"]
    for i, p in enumerate(b["precisions"], 1):
        summary[f"bleu{i}"] = p
    return rows, summary


def evaluate(generate_fn, test_pairs, index, out_dir=None):
    """Decode each test pair and score against its reference headline.

    ``generate_fn(document_tokens, prototype_headline_tokens) -> tokens``
    produces the candidate; prototypes come from the training index. The
    report includes a lead-sentence baseline row for comparison. When
    ``out_dir`` is given, per-example scores go to ``per_example.csv`` and
    the summary to ``summary.json``.
    """
    ids, candidates, references, leads = [], [], [], []
    for pair in test_pairs:
        proto = retrieve_prototype(pair, index)
        candidates.append(list(generate_fn(pair.document, proto.headline)))
        references.append(pair.headline)
        leads.append(lead_baseline(pair.document))
        ids.append(pair.id)

    rows, model_summary = score_corpus(candidates, references)
    _, lead_summary = score_corpus(leads, references)
    report = {
        "systems": {"model": model_summary, "lead": lead_summary},
        "examples": [
            {"id": pid, "headline": " ".join(cand), **row}
            for pid, cand, row in zip(ids, candidates, rows)
        ],
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "per_example.csv", "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["id", "headline", "rouge1_f1", "rouge2_f1",
                                "rougel_f1"])
            writer.writeheader()
            writer.writerows(report["examples"])
        with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(report["systems"], fh, indent=2, ensure_ascii=False)
    return report
