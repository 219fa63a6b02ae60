"""Corpus ingestion: document-headline pairs, vocabulary, padded batches.

Corpus files are JSONL with one record per line:
``{"id": ..., "document": ..., "headline": ..., "comment_count": ...}``.
The attractiveness label is derived (comment_count > 20), never stored.
"""

import json
from collections import Counter
from dataclasses import dataclass, field

import torch

PAD, UNK, START, STOP = 0, 1, 2, 3
SPECIAL_TOKENS = ("<pad>", "<unk>", "<s>", "</s>")
ATTRACTIVE_COMMENT_THRESHOLD = 20


class CorpusError(ValueError):
    pass


def tokenize(text: str) -> list:
    """Whitespace-split pre-segmented text; fall back to per-character tokens.

    The model is tokenizer-agnostic: corpora are expected to arrive
    pre-segmented (space-joined tokens). Unsegmented text (no whitespace,
    e.g. raw CJK) is split into single characters.
    """
    if not isinstance(text, str):
        raise CorpusError(f"expected string, got {type(text).__name__}")
    stripped = text.strip()
    if not stripped:
        raise CorpusError("cannot tokenize empty text")
    parts = stripped.split()
    if len(parts) > 1 or len(stripped) == 1:
        return parts
    return list(stripped)


@dataclass
class Pair:
    """One document-headline record."""

    id: str
    document: list
    headline: list
    comment_count: int

    def __post_init__(self):
        if self.comment_count < 0:
            raise CorpusError(f"pair {self.id}: negative comment_count")
        if not self.document or not self.headline:
            raise CorpusError(f"pair {self.id}: empty document or headline")

    @property
    def attractive(self) -> bool:
        return self.comment_count > ATTRACTIVE_COMMENT_THRESHOLD


def load_pairs(path) -> list:
    """Read a JSONL corpus file into Pair records."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            pairs.append(
                Pair(
                    id=str(rec["id"]),
                    document=tokenize(rec["document"]),
                    headline=tokenize(rec["headline"]),
                    comment_count=int(rec.get("comment_count", 0)),
                )
            )
    return pairs


def save_pairs(pairs, path):
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            rec = {
                "id": p.id,
                "document": " ".join(p.document),
                "headline": " ".join(p.headline),
                "comment_count": p.comment_count,
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


@dataclass
class Vocabulary:
    """Token/id bijection with fixed special ids 0-3 (PAD, UNK, START, STOP)."""

    id_to_token: list
    token_to_id: dict = field(init=False)

    def __post_init__(self):
        if tuple(self.id_to_token[:4]) != SPECIAL_TOKENS:
            raise CorpusError("vocabulary must start with the special tokens")
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise CorpusError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.id_to_token)

    def encode(self, token: str) -> int:
        return self.token_to_id.get(token, UNK)

    def decode(self, idx: int, oovs=()) -> str:
        if 0 <= idx < len(self.id_to_token):
            return self.id_to_token[idx]
        ext = idx - len(self.id_to_token)
        if 0 <= ext < len(oovs):
            return oovs[ext]
        raise CorpusError(f"id {idx} outside extended vocabulary")


def build_vocabulary(pairs, cap: int) -> Vocabulary:
    """Frequency-ranked vocabulary over documents and headlines, size <= cap.

    Ties are broken lexicographically; the four specials always occupy
    ids 0-3 and count against the cap.
    """
    if cap < 5:
        raise CorpusError("vocabulary cap must be at least 5")
    if not pairs:
        raise CorpusError("cannot build vocabulary from an empty corpus")
    counts = Counter()
    for p in pairs:
        counts.update(p.document)
        counts.update(p.headline)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    keep = [tok for tok, _ in ranked[: cap - len(SPECIAL_TOKENS)]]
    return Vocabulary(list(SPECIAL_TOKENS) + keep)


def encode_extended(tokens, vocab: Vocabulary):
    """Base ids (OOV -> UNK) plus extended ids with per-example OOV numbering.

    Each distinct OOV token receives id ``len(vocab) + k`` in first-occurrence
    order; the OOV token list is returned alongside.
    """
    ids, ext_ids, oovs = [], [], []
    for tok in tokens:
        idx = vocab.token_to_id.get(tok)
        if idx is None:
            ids.append(UNK)
            if tok not in oovs:
                oovs.append(tok)
            ext_ids.append(len(vocab) + oovs.index(tok))
        else:
            ids.append(idx)
            ext_ids.append(idx)
    return ids, ext_ids, oovs


def decode_extended(ext_ids, vocab: Vocabulary, oovs=()):
    """Inverse of encode_extended for a single example."""
    return [vocab.decode(i, oovs) for i in ext_ids]


@dataclass
class TrainExample:
    """One training item with its retrieval links and sampled negatives."""

    pair: Pair                  # (X^d, Y^d)
    prototype: Pair             # (X^r, Y^r)
    similar: Pair               # most similar document to the prototype (X^s)
    random_doc: Pair            # random negative document (X^q)
    attractive_headline: list   # random attractive headline (Y^a)
    unattractive_headline: list  # random unattractive headline (Y^n)


@dataclass
class Batch:
    """Padded id tensors for one training batch."""

    doc_ids: torch.Tensor
    doc_ext_ids: torch.Tensor
    doc_mask: torch.Tensor
    doc_lengths: torch.Tensor
    doc_oovs: list
    proto_headline_ids: torch.Tensor
    proto_headline_mask: torch.Tensor
    proto_headline_lengths: torch.Tensor
    proto_doc_ids: torch.Tensor
    proto_doc_lengths: torch.Tensor
    similar_doc_ids: torch.Tensor
    similar_doc_lengths: torch.Tensor
    random_doc_ids: torch.Tensor
    random_doc_lengths: torch.Tensor
    attr_headline_ids: torch.Tensor
    attr_headline_lengths: torch.Tensor
    unattr_headline_ids: torch.Tensor
    unattr_headline_lengths: torch.Tensor
    target_ids: torch.Tensor
    target_ext_ids: torch.Tensor
    target_mask: torch.Tensor
    target_lengths: torch.Tensor

    @property
    def size(self) -> int:
        return self.doc_ids.shape[0]

    @property
    def max_oov(self) -> int:
        return max((len(o) for o in self.doc_oovs), default=0)


def _pad_rows(rows, pad_value=PAD):
    lengths = [len(r) for r in rows]
    width = max(lengths)
    out = torch.full((len(rows), width), pad_value, dtype=torch.long)
    mask = torch.zeros(len(rows), width)
    for i, row in enumerate(rows):
        out[i, : len(row)] = torch.tensor(row, dtype=torch.long)
        mask[i, : len(row)] = 1.0
    return out, mask, torch.tensor(lengths, dtype=torch.long)


def make_batch(examples, vocab: Vocabulary, doc_limit=400, proto_limit=30,
               target_limit=30) -> Batch:
    """Assemble padded tensors for a list of TrainExamples.

    Documents are cut to ``doc_limit`` tokens (prefix kept) and headlines to
    ``proto_limit``; the decoding target is cut to ``target_limit``.
    """
    if not examples:
        raise CorpusError("cannot build an empty batch")

    doc_rows, doc_ext_rows, doc_oovs = [], [], []
    tgt_rows, tgt_ext_rows = [], []
    for ex in examples:
        doc = ex.pair.document[:doc_limit]
        ids, ext_ids, oovs = encode_extended(doc, vocab)
        doc_rows.append(ids)
        doc_ext_rows.append(ext_ids)
        doc_oovs.append(oovs)
        tgt = ex.pair.headline[:target_limit]
        tgt_ids = [vocab.encode(t) for t in tgt]
        tgt_ext = []
        for tok, base in zip(tgt, tgt_ids):
            if base == UNK and tok in oovs:
                tgt_ext.append(len(vocab) + oovs.index(tok))
            else:
                tgt_ext.append(base)
        tgt_rows.append(tgt_ids)
        tgt_ext_rows.append(tgt_ext)

    def encode_rows(rows, limit):
        return _pad_rows([[vocab.encode(t) for t in r[:limit]] for r in rows])

    doc_ids, doc_mask, doc_lengths = _pad_rows(doc_rows)
    doc_ext_ids, _, _ = _pad_rows(doc_ext_rows)
    proto_h_ids, proto_h_mask, proto_h_len = encode_rows(
        [ex.prototype.headline for ex in examples], proto_limit)
    proto_d_ids, _, proto_d_len = encode_rows(
        [ex.prototype.document for ex in examples], doc_limit)
    sim_ids, _, sim_len = encode_rows(
        [ex.similar.document for ex in examples], doc_limit)
    rand_ids, _, rand_len = encode_rows(
        [ex.random_doc.document for ex in examples], doc_limit)
    attr_ids, _, attr_len = encode_rows(
        [ex.attractive_headline for ex in examples], proto_limit)
    unattr_ids, _, unattr_len = encode_rows(
        [ex.unattractive_headline for ex in examples], proto_limit)
    tgt_ids, tgt_mask, tgt_len = _pad_rows(tgt_rows)
    tgt_ext_ids, _, _ = _pad_rows(tgt_ext_rows)

    return Batch(
        doc_ids=doc_ids, doc_ext_ids=doc_ext_ids, doc_mask=doc_mask,
        doc_lengths=doc_lengths, doc_oovs=doc_oovs,
        proto_headline_ids=proto_h_ids, proto_headline_mask=proto_h_mask,
        proto_headline_lengths=proto_h_len,
        proto_doc_ids=proto_d_ids, proto_doc_lengths=proto_d_len,
        similar_doc_ids=sim_ids, similar_doc_lengths=sim_len,
        random_doc_ids=rand_ids, random_doc_lengths=rand_len,
        attr_headline_ids=attr_ids, attr_headline_lengths=attr_len,
        unattr_headline_ids=unattr_ids, unattr_headline_lengths=unattr_len,
        target_ids=tgt_ids, target_ext_ids=tgt_ext_ids, target_mask=tgt_mask,
        target_lengths=tgt_len,
    )
