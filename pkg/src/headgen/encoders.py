"""Shared embedding table and the two bidirectional LSTM encoders.

One encoder is shared by all document-side inputs (the input document, the
prototype document, its most-similar document, and the random negative
document); the other by all headline-side inputs. The pooled representation
of a sequence is the concatenation of the forward-final and backward-final
hidden states.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .corpus import PAD


class EncoderError(ValueError):
    pass


@dataclass
class EncoderStates:
    states: torch.Tensor   # [B, T, 2H], zero at PAD positions
    pooled: torch.Tensor   # [B, 2H]
    mask: torch.Tensor     # [B, T]


class TextEncoders(nn.Module):
    def __init__(self, vocab_size, embed_dim, hidden_size):
        super().__init__()
        self.vocab_size = vocab_size
        self.embedding = nn.Embedding(vocab_size, embed_dim, padding_idx=PAD)
        self.doc_rnn = nn.LSTM(embed_dim, hidden_size, batch_first=True,
                               bidirectional=True)
        self.headline_rnn = nn.LSTM(embed_dim, hidden_size, batch_first=True,
                                    bidirectional=True)

    def embed(self, ids: torch.Tensor) -> torch.Tensor:
        if ids.numel() and (ids.min() < 0 or ids.max() >= self.vocab_size):
            raise EncoderError(
                f"token id out of range [0, {self.vocab_size}); "
                "map extended OOV ids to UNK before embedding")
        return self.embedding(ids)

    def _run(self, rnn, ids, lengths) -> EncoderStates:
        if ids.ndim != 2 or ids.shape[1] == 0:
            raise EncoderError("expected a non-empty [B, T] id matrix")
        lengths = torch.as_tensor(lengths, dtype=torch.long)
        if (lengths <= 0).any():
            raise EncoderError("zero-length sequence in batch")
        emb = self.embed(ids)
        packed = pack_padded_sequence(emb, lengths.cpu(), batch_first=True,
                                      enforce_sorted=False)
        out, (h_n, _) = rnn(packed)
        states, _ = pad_packed_sequence(out, batch_first=True,
                                        total_length=ids.shape[1])
        pooled = torch.cat([h_n[0], h_n[1]], dim=-1)
        mask = (torch.arange(ids.shape[1], device=ids.device)[None, :]
                < lengths[:, None]).to(states.dtype)
        return EncoderStates(states=states, pooled=pooled, mask=mask)

    def encode_document(self, ids, lengths) -> EncoderStates:
        return self._run(self.doc_rnn, ids, lengths)

    def encode_headline(self, ids, lengths) -> EncoderStates:
        return self._run(self.headline_rnn, ids, lengths)
