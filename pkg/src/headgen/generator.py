"""LSTM decoder with dual attention, editing/guidance gates, and copying.

The decoder attends separately over the original and the polished document
states; an editing gate mixes the two contexts and a guidance gate injects
the style latent into the output state. A pointer head mixes the vocabulary
distribution with the original-document attention so out-of-vocabulary
source tokens can be copied.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .corpus import START, STOP, UNK

LOG_EPS = 1e-12


@dataclass
class DecoderStep:
    hidden: torch.Tensor        # d_t [B, D]
    cell: torch.Tensor          # LSTM cell state [B, D]
    attn_orig: torch.Tensor     # [B, T] over original document states
    attn_pol: torch.Tensor      # [B, T] over polished document states
    context_orig: torch.Tensor  # [B, 2H]
    context_pol: torch.Tensor   # [B, 2H]
    edit_gate: torch.Tensor     # gamma [B, 1]
    context: torch.Tensor       # h^E_t [B, 2H]
    out_state: torch.Tensor     # d^o_t [B, D]
    guide_gate: torch.Tensor    # gamma_s [B, 1]
    guided_state: torch.Tensor  # [B, D]
    vocab_dist: torch.Tensor    # P_v [B, V]
    prev_embed: torch.Tensor    # e(y_{t-1}) [B, E]


@dataclass
class _Hypothesis:
    tokens: list       # emitted extended ids, STOP excluded
    logp: float        # sum of token log-probabilities (incl. STOP if done)
    hidden: torch.Tensor
    cell: torch.Tensor
    context: torch.Tensor

    def score(self, done: bool) -> float:
        steps = len(self.tokens) + (1 if done else 0)
        return self.logp / max(steps, 1)


class HeadlineDecoder(nn.Module):
    def __init__(self, vocab_size, embed_dim, state_dim, dec_dim, latent_dim):
        super().__init__()
        self.vocab_size = vocab_size
        self.bridge_h = nn.Linear(state_dim, dec_dim)
        self.bridge_c = nn.Linear(state_dim, dec_dim)
        self.cell = nn.LSTMCell(embed_dim + state_dim, dec_dim)
        # bilinear attention score h_i^T W_f d_t, one W_f per stream
        self.attn_orig_proj = nn.Linear(dec_dim, state_dim, bias=False)
        self.attn_pol_proj = nn.Linear(dec_dim, state_dim, bias=False)
        self.edit_gate_lin = nn.Linear(dec_dim, 1)
        self.guide_gate_lin = nn.Linear(dec_dim, 1)
        self.out_proj = nn.Linear(dec_dim + state_dim, dec_dim)
        self.style_proj = nn.Linear(latent_dim, dec_dim)
        self.vocab_proj = nn.Linear(dec_dim, vocab_size)
        self.pgen_lin = nn.Linear(state_dim + dec_dim + embed_dim, 1)

    def init_state(self, pooled_doc):
        """Decoder start state; the initial attention context is zero."""
        h0 = self.bridge_h(pooled_doc)
        c0 = self.bridge_c(pooled_doc)
        context0 = torch.zeros_like(pooled_doc)
        return h0, c0, context0

    @staticmethod
    def _attend(proj, hidden, states, mask):
        query = proj(hidden)                                   # [B, 2H]
        scores = (states * query.unsqueeze(1)).sum(dim=-1)     # [B, T]
        scores = scores.masked_fill(mask == 0, float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        context = torch.bmm(weights.unsqueeze(1), states).squeeze(1)
        return weights, context

    def step(self, prev_ids, hidden, cell, context_prev, doc_states, doc_mask,
             pol_states, style, embedding, force_edit_gate=None,
             force_guide_gate=None) -> DecoderStep:
        """One decoding step; prev_ids must be base-vocabulary ids."""
        prev_embed = embedding(prev_ids)
        hidden, cell = self.cell(
            torch.cat([prev_embed, context_prev], dim=-1), (hidden, cell))
        attn_o, ctx_o = self._attend(self.attn_orig_proj, hidden, doc_states,
                                     doc_mask)
        attn_p, ctx_p = self._attend(self.attn_pol_proj, hidden, pol_states,
                                     doc_mask)
        gamma = torch.sigmoid(self.edit_gate_lin(hidden))
        if force_edit_gate is not None:
            gamma = torch.full_like(gamma, force_edit_gate)
        context = gamma * ctx_o + (1.0 - gamma) * ctx_p
        out_state = self.out_proj(torch.cat([hidden, context], dim=-1))
        gamma_s = torch.sigmoid(self.guide_gate_lin(hidden))
        if force_guide_gate is not None:
            gamma_s = torch.full_like(gamma_s, force_guide_gate)
        guided = gamma_s * out_state + (1.0 - gamma_s) * self.style_proj(style)
        vocab_dist = F.softmax(self.vocab_proj(guided), dim=-1)
        return DecoderStep(
            hidden=hidden, cell=cell, attn_orig=attn_o, attn_pol=attn_p,
            context_orig=ctx_o, context_pol=ctx_p, edit_gate=gamma,
            context=context, out_state=out_state, guide_gate=gamma_s,
            guided_state=guided, vocab_dist=vocab_dist, prev_embed=prev_embed)

    def copy_distribution(self, step: DecoderStep, doc_ext_ids, max_oov):
        """Mix P_v with the original-document attention over the extended vocab."""
        p_gen = torch.sigmoid(self.pgen_lin(torch.cat(
            [step.context, step.hidden, step.prev_embed], dim=-1)))
        batch = step.vocab_dist.shape[0]
        dist = step.vocab_dist.new_zeros(batch, self.vocab_size + max_oov)
        dist[:, : self.vocab_size] = p_gen * step.vocab_dist
        dist = dist.scatter_add(1, doc_ext_ids, (1.0 - p_gen) * step.attn_orig)
        return dist, p_gen

    @staticmethod
    def sequence_loss(final_dists, target_ext_ids, target_mask):
        """Mean NLL of the target words over non-PAD steps.

        final_dists: [B, T, V+max_oov]; probabilities are clamped at 1e-12
        before the log as a guard against exact zeros.
        """
        picked = final_dists.gather(2, target_ext_ids.unsqueeze(-1)).squeeze(-1)
        nll = -torch.log(picked.clamp_min(LOG_EPS))
        return (nll * target_mask).sum() / target_mask.sum()

    def _shifted_targets(self, target_ids, target_ext_ids, target_mask):
        batch = target_ids.shape[0]
        device = target_ids.device
        start_col = torch.full((batch, 1), START, dtype=torch.long,
                               device=device)
        inputs = torch.cat([start_col, target_ids], dim=1)
        pad_col = torch.zeros(batch, 1, dtype=torch.long, device=device)
        targets = torch.cat([target_ext_ids, pad_col], dim=1).clone()
        lengths = target_mask.sum(dim=1).long()
        targets[torch.arange(batch), lengths] = STOP
        tmask = torch.cat(
            [target_mask,
             torch.zeros(batch, 1, dtype=target_mask.dtype, device=device)],
            dim=1).clone()
        tmask[torch.arange(batch), lengths] = 1.0
        return inputs, targets, tmask

    def teacher_forced_loss(self, embedding, pooled_doc, doc_states, doc_mask,
                            pol_states, style, doc_ext_ids, max_oov,
                            target_ids, target_ext_ids, target_mask):
        """Teacher-forced sequence loss; also returns the per-step data."""
        inputs, targets, tmask = self._shifted_targets(
            target_ids, target_ext_ids, target_mask)
        hidden = self.bridge_h(pooled_doc)
        cell = self.bridge_c(pooled_doc)
        context = doc_states.new_zeros(doc_states.shape[0],
                                       doc_states.shape[-1])
        dists, steps = [], []
        for t in range(inputs.shape[1]):
            step = self.step(inputs[:, t], hidden, cell, context, doc_states,
                             doc_mask, pol_states, style, embedding)
            dist, _ = self.copy_distribution(step, doc_ext_ids, max_oov)
            dists.append(dist)
            steps.append(step)
            hidden, cell, context = step.hidden, step.cell, step.context
        final_dists = torch.stack(dists, dim=1)
        loss = self.sequence_loss(final_dists, targets, tmask)
        return loss, final_dists, steps

    def beam_search(self, embedding, pooled_doc, doc_states, doc_mask,
                    pol_states, style, doc_ext_ids, max_oov, beam_size=4,
                    min_len=10, max_len=30):
        """Length-normalized beam search for a single example.

        Returns a list of extended-vocabulary ids (STOP excluded). STOP is
        suppressed until ``min_len`` tokens are emitted; the best completed
        hypothesis wins, else the best live one at ``max_len``.
        """
        if pooled_doc.shape[0] != 1:
            raise ValueError("beam search decodes one example at a time")
        h0 = self.bridge_h(pooled_doc)
        c0 = self.bridge_c(pooled_doc)
        ctx0 = doc_states.new_zeros(1, doc_states.shape[-1])
        live = [_Hypothesis([], 0.0, h0[0], c0[0], ctx0[0])]
        completed = []

        for _ in range(max_len):
            prev_ids = torch.tensor(
                [START if not h.tokens else
                 (h.tokens[-1] if h.tokens[-1] < self.vocab_size else UNK)
                 for h in live], dtype=torch.long, device=doc_states.device)
            hidden = torch.stack([h.hidden for h in live])
            cell = torch.stack([h.cell for h in live])
            context = torch.stack([h.context for h in live])
            n = len(live)
            step = self.step(prev_ids, hidden, cell, context,
                             doc_states.expand(n, -1, -1),
                             doc_mask.expand(n, -1),
                             pol_states.expand(n, -1, -1),
                             style.expand(n, -1), embedding)
            dist, _ = self.copy_distribution(
                step, doc_ext_ids.expand(n, -1), max_oov)
            logp = torch.log(dist.clamp_min(LOG_EPS))

            candidates = []
            for i, hyp in enumerate(live):
                row = logp[i].clone()
                if len(hyp.tokens) < min_len:
                    row[STOP] = float("-inf")
                top_lp, top_ids = row.topk(min(beam_size, row.shape[0]))
                for lp, tok in zip(top_lp.tolist(), top_ids.tolist()):
                    candidates.append((hyp.logp + lp, tok, i))
            candidates.sort(key=lambda c: -c[0])

            new_live = []
            for total_lp, tok, i in candidates:
                parent = live[i]
                child = _Hypothesis(
                    parent.tokens + ([] if tok == STOP else [tok]), total_lp,
                    step.hidden[i], step.cell[i], step.context[i])
                if tok == STOP:
                    completed.append(child)
                elif len(new_live) < beam_size:
                    new_live.append(child)
                if len(new_live) == beam_size:
                    break
            live = new_live
            if not live:
                break

        if completed:
            best = max(completed, key=lambda h: h.score(done=True))
            return best.tokens
        best = max(live, key=lambda h: h.score(done=False))
        return best.tokens
