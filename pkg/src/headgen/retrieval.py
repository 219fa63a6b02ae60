"""TF-IDF retrieval over the training corpus.

Provides the prototype pair for an input document, the document most similar
to a prototype, and random negative samples for the disentanglement
constraints. Similarity is the raw scalar product of unnormalized TF-IDF
vectors (tf * ln(N/df)) computed over the concatenated document+headline
text of each pair.
"""

import json
import math
from collections import Counter
from dataclasses import dataclass

from .corpus import Pair

INDEX_VERSION = 1


class RetrievalError(ValueError):
    pass


def _pair_terms(pair: Pair):
    return pair.document + pair.headline


@dataclass
class TfIdfIndex:
    pairs: dict                 # id -> Pair (attractive and unattractive)
    attractive_ids: list        # sorted; these are the indexed/retrievable docs
    unattractive_ids: list      # sorted; headline pool for negative sampling
    doc_count: int              # N over indexed (attractive) pairs
    df: dict                    # term -> document frequency among indexed pairs
    vectors: dict               # id -> {term: weight}, zero weights dropped

    def vectorize(self, pair: Pair) -> dict:
        """Sparse TF-IDF vector for an arbitrary pair using index statistics."""
        tf = Counter(_pair_terms(pair))
        vec = {}
        for term, count in tf.items():
            dfreq = self.df.get(term)
            if dfreq is None or dfreq >= self.doc_count:
                continue  # unseen terms score 0; ubiquitous terms have idf 0
            vec[term] = count * math.log(self.doc_count / dfreq)
        return vec


def build_index(pairs) -> TfIdfIndex:
    """Index the corpus; attractive pairs are the retrievable prototypes."""
    if not pairs:
        raise RetrievalError("cannot index an empty corpus")
    by_id = {}
    for p in pairs:
        if p.id in by_id:
            raise RetrievalError(f"duplicate pair id {p.id!r}")
        by_id[p.id] = p
    attractive = sorted(p.id for p in pairs if p.attractive)
    unattractive = sorted(p.id for p in pairs if not p.attractive)
    if not attractive:
        raise RetrievalError("corpus has no attractive pairs to index")

    df = Counter()
    for pid in attractive:
        df.update(set(_pair_terms(by_id[pid])))
    index = TfIdfIndex(
        pairs=by_id, attractive_ids=attractive, unattractive_ids=unattractive,
        doc_count=len(attractive), df=dict(df), vectors={},
    )
    index.vectors = {pid: index.vectorize(by_id[pid]) for pid in attractive}
    return index


def similarity(a: dict, b: dict) -> float:
    """Scalar product of two sparse vectors."""
    if len(b) < len(a):
        a, b = b, a
    return sum(w * b[t] for t, w in a.items() if t in b)


def _best_match(query_vec: dict, index: TfIdfIndex, exclude_id):
    best_id, best_score = None, None
    for pid in index.attractive_ids:  # sorted, so ties keep the smallest id
        if pid == exclude_id:
            continue
        score = similarity(query_vec, index.vectors[pid])
        if best_score is None or score > best_score:
            best_id, best_score = pid, score
    if best_id is None:
        raise RetrievalError("no candidates left after exclusion")
    return index.pairs[best_id]


def retrieve_prototype(query: Pair, index: TfIdfIndex) -> Pair:
    """Most similar indexed pair, never the query itself."""
    return _best_match(index.vectorize(query), index, exclude_id=query.id)


def retrieve_similar_document(proto: Pair, index: TfIdfIndex) -> Pair:
    """Most similar indexed pair to a prototype, always excluding it."""
    return _best_match(index.vectorize(proto), index, exclude_id=proto.id)


def sample_negatives(index: TfIdfIndex, rng, exclude_id=None):
    """Uniformly sample (attractive headline, unattractive headline, random doc).

    The random document is drawn from the indexed docs excluding
    ``exclude_id`` (the current prototype). The rng is a seeded
    ``random.Random``.
    """
    if not index.unattractive_ids:
        raise RetrievalError("unattractive headline pool is empty")
    ya = index.pairs[rng.choice(index.attractive_ids)]
    yn = index.pairs[rng.choice(index.unattractive_ids)]
    doc_pool = [pid for pid in index.attractive_ids if pid != exclude_id]
    if not doc_pool:
        raise RetrievalError("no documents left for negative sampling")
    xq = index.pairs[rng.choice(doc_pool)]
    return ya, yn, xq


def save_index(index: TfIdfIndex, path):
    """Persist the index as a JSON sidecar file."""
    payload = {
        "version": INDEX_VERSION,
        "pairs": [
            {
                "id": p.id,
                "document": p.document,
                "headline": p.headline,
                "comment_count": p.comment_count,
            }
            for p in index.pairs.values()
        ],
        "doc_count": index.doc_count,
        "df": index.df,
        "vectors": index.vectors,
        "attractive_ids": index.attractive_ids,
        "unattractive_ids": index.unattractive_ids,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)


def load_index(path) -> TfIdfIndex:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != INDEX_VERSION:
        raise RetrievalError(
            f"index version mismatch: expected {INDEX_VERSION}, "
            f"got {payload.get('version')}")
    pairs = {
        rec["id"]: Pair(rec["id"], rec["document"], rec["headline"],
                        rec["comment_count"])
        for rec in payload["pairs"]
    }
    return TfIdfIndex(
        pairs=pairs,
        attractive_ids=payload["attractive_ids"],
        unattractive_ids=payload["unattractive_ids"],
        doc_count=payload["doc_count"],
        df=payload["df"],
        vectors=payload["vectors"],
    )
