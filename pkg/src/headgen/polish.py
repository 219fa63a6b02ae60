"""Multi-hop highlight polishing of document states.

Each hop re-encodes the previous hop's states with a selective recurrent
unit: a GRU whose update gate is replaced by a per-position scalar computed
from the previous-hop state and the content latent, normalized by a softmax
over the valid positions of the sequence.
"""

import torch
import torch.nn as nn


class HighlightPolisher(nn.Module):
    def __init__(self, state_dim, latent_dim, softmax_gate=True):
        super().__init__()
        self.softmax_gate = softmax_gate
        self.content_proj = nn.Linear(latent_dim, state_dim)
        # scalar score per position: z_t = W2 tanh(W1 [h*c; h; c] + b1) + b2
        self.gate_hidden = nn.Linear(3 * state_dim, state_dim)
        self.gate_out = nn.Linear(state_dim, 1)
        # GRU-style reset gate and candidate state
        self.reset_x = nn.Linear(state_dim, state_dim)
        self.reset_h = nn.Linear(state_dim, state_dim, bias=False)
        self.cand_x = nn.Linear(state_dim, state_dim)
        self.cand_h = nn.Linear(state_dim, state_dim, bias=False)

    def gate(self, prev_states, content, mask):
        """Per-position update gate for one hop.

        prev_states: [B, T, 2H]; content: [B, Z]; mask: [B, T].
        Softmax is taken over valid positions only; PAD positions get gate 0.
        The sigmoid variant (softmax_gate=False) gates each position
        independently instead.
        """
        cvec = self.content_proj(content).unsqueeze(1).expand_as(prev_states)
        feats = torch.cat([prev_states * cvec, prev_states, cvec], dim=-1)
        z = self.gate_out(torch.tanh(self.gate_hidden(feats))).squeeze(-1)  # [B, T]
        if self.softmax_gate:
            z = z.masked_fill(mask == 0, float("-inf"))
            return torch.softmax(z, dim=-1)
        return torch.sigmoid(z) * mask

    def cell_step(self, x_t, h_prev, g_t):
        """One SRU step: GRU candidate mixed in by the scalar gate g_t.

        x_t, h_prev: [B, 2H]; g_t: [B] broadcast over hidden dims.
        """
        r = torch.sigmoid(self.reset_x(x_t) + self.reset_h(h_prev))
        cand = torch.tanh(self.cand_x(x_t) + r * self.cand_h(h_prev))
        g = g_t.unsqueeze(-1)
        return g * cand + (1.0 - g) * h_prev

    def forward(self, doc_states, content, hops, mask, gate_override=None):
        """Run ``hops`` polishing passes; returns (final states, gate traces).

        Each hop recomputes the gates from the previous hop's states, then
        runs the SRU recurrence left to right with a zero initial hidden
        state and the previous hop's state at position t as input.
        """
        if hops < 1:
            raise ValueError("hop count must be >= 1")
        states = doc_states
        gates = []
        for _ in range(hops):
            if gate_override is not None:
                g = gate_override
            else:
                g = self.gate(states, content, mask)
            h = torch.zeros_like(states[:, 0])
            new_states = []
            for t in range(states.shape[1]):
                h = self.cell_step(states[:, t], h, g[:, t])
                new_states.append(h)
            states = torch.stack(new_states, dim=1)
            gates.append(g)
        return states, gates
