"""VAE feature extractor and the style/content space constraints.

The prototype headline's pooled encoding is projected into two Gaussian
latent spaces (content c, style s). A reconstruction decoder plus an
auxiliary bag-of-words head regularize the latents; a classifier and an
adversarial discriminator per space keep style and content information
from mixing.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .corpus import PAD, START, STOP

LOG_EPS = 1e-12


def kl_to_standard_normal(mu: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    """Closed-form KL(N(mu, diag(exp(logvar))) || N(0, I)), summed over dims.

    Returns one scalar per leading batch element (or a scalar for 1-D input).
    """
    return 0.5 * (mu.pow(2) + logvar.exp() - 1.0 - logvar).sum(dim=-1)


@dataclass
class LatentSpace:
    mu: torch.Tensor       # [B, Z]
    logvar: torch.Tensor   # [B, Z]
    sample: torch.Tensor   # [B, Z]
    noise: torch.Tensor    # [B, Z], the epsilon actually used


class FeatureExtractor(nn.Module):
    def __init__(self, state_dim, latent_dim, embed_dim, vocab_size,
                 dropout_keep=0.8):
        super().__init__()
        self.latent_dim = latent_dim
        self.dropout = nn.Dropout(p=1.0 - dropout_keep)
        self.style_mu = nn.Linear(state_dim, latent_dim)
        self.style_logvar = nn.Linear(state_dim, latent_dim)
        self.content_mu = nn.Linear(state_dim, latent_dim)
        self.content_logvar = nn.Linear(state_dim, latent_dim)
        # reconstruction decoder initialized from [c; s] through affine bridges
        self.recon_bridge_h = nn.Linear(2 * latent_dim, state_dim)
        self.recon_bridge_c = nn.Linear(2 * latent_dim, state_dim)
        self.recon_rnn = nn.LSTM(embed_dim, state_dim, batch_first=True)
        self.recon_out = nn.Linear(state_dim, vocab_size)
        self.bow_head = nn.Linear(2 * latent_dim, vocab_size)

    def _encode(self, mu_head, logvar_head, pooled, noise=None) -> LatentSpace:
        h = self.dropout(pooled)
        mu = mu_head(h)
        logvar = logvar_head(h)
        if noise is None:
            if self.training:
                noise = torch.randn_like(mu)
            else:
                noise = torch.zeros_like(mu)
        sample = mu + torch.exp(0.5 * logvar) * noise
        return LatentSpace(mu=mu, logvar=logvar, sample=sample, noise=noise)

    def encode_style(self, pooled, noise=None) -> LatentSpace:
        return self._encode(self.style_mu, self.style_logvar, pooled, noise)

    def encode_content(self, pooled, noise=None) -> LatentSpace:
        return self._encode(self.content_mu, self.content_logvar, pooled, noise)

    def _teacher_inputs(self, ids, mask):
        batch, width = ids.shape
        start_col = torch.full((batch, 1), START, dtype=torch.long,
                               device=ids.device)
        inputs = torch.cat([start_col, ids], dim=1)           # [B, T+1]
        stop_col = torch.full((batch, 1), PAD, dtype=torch.long,
                              device=ids.device)
        targets = torch.cat([ids, stop_col], dim=1).clone()   # [B, T+1]
        lengths = mask.sum(dim=1).long()
        targets[torch.arange(batch), lengths] = STOP
        tmask = torch.cat(
            [mask, torch.zeros(batch, 1, dtype=mask.dtype, device=mask.device)],
            dim=1).clone()
        tmask[torch.arange(batch), lengths] = 1.0
        return inputs, targets, tmask

    def reconstruction_loss(self, c, s, headline_ids, headline_mask, embedding):
        """Mean teacher-forced NLL of the prototype headline given [c; s]."""
        latent = torch.cat([c, s], dim=-1)
        h0 = self.recon_bridge_h(latent).unsqueeze(0)
        c0 = self.recon_bridge_c(latent).unsqueeze(0)
        inputs, targets, tmask = self._teacher_inputs(headline_ids, headline_mask)
        out, _ = self.recon_rnn(embedding(inputs), (h0, c0))
        logits = self.recon_out(out)                           # [B, T+1, V]
        nll = F.cross_entropy(logits.transpose(1, 2), targets, reduction="none")
        return (nll * tmask).sum() / tmask.sum()

    def bow_loss(self, c, s, headline_ids, headline_mask):
        """Mean NLL of each non-PAD headline word under one latent-predicted bag."""
        logits = self.bow_head(torch.cat([c, s], dim=-1))      # [B, V]
        logp = F.log_softmax(logits, dim=-1)
        picked = logp.gather(1, headline_ids)
        return -(picked * headline_mask).sum() / headline_mask.sum()


def _match_prob(head: nn.Linear, latent, rep):
    """Two-way softmax; returns the probability of the 'match' class."""
    logits = head(torch.cat([latent, rep], dim=-1))
    return F.softmax(logits, dim=-1)[..., 0]


def _pair_loss(p_pos, p_neg):
    return (-torch.log(p_pos.clamp_min(LOG_EPS))
            - torch.log((1.0 - p_neg).clamp_min(LOG_EPS))).mean()


def _pair_acc(p_pos, p_neg):
    correct = (p_pos > 0.5).float().mean() + (p_neg < 0.5).float().mean()
    return (correct / 2.0).item()


class SpaceConstraints(nn.Module):
    """Classifier + adversarial discriminator for each latent space.

    The two discriminators form the adversarially-trained parameter group;
    everything else belongs to the generation group.
    """

    def __init__(self, state_dim, latent_dim):
        super().__init__()
        in_dim = latent_dim + state_dim
        self.style_classifier = nn.Linear(in_dim, 2)       # s vs headline reps
        self.style_discriminator = nn.Linear(in_dim, 2)    # s vs document reps
        self.content_classifier = nn.Linear(in_dim, 2)     # c vs document reps
        self.content_discriminator = nn.Linear(in_dim, 2)  # c vs headline reps

    def discriminator_parameters(self):
        return list(self.style_discriminator.parameters()) + \
            list(self.content_discriminator.parameters())

    def style_classifier_loss(self, s, h_ya, h_yn):
        p_a = _match_prob(self.style_classifier, s, h_ya)
        p_n = _match_prob(self.style_classifier, s, h_yn)
        return _pair_loss(p_a, p_n), _pair_acc(p_a, p_n)

    def style_discriminator_loss(self, s, h_xr, h_xq):
        p_r = _match_prob(self.style_discriminator, s, h_xr)
        p_q = _match_prob(self.style_discriminator, s, h_xq)
        return _pair_loss(p_r, p_q), _pair_acc(p_r, p_q)

    def style_adversarial_loss(self, s, h_xr):
        p_r = _match_prob(self.style_discriminator, s, h_xr)
        return -torch.log((1.0 - p_r).clamp_min(LOG_EPS)).mean()

    def content_classifier_loss(self, c, h_xr, h_xs):
        p_r = _match_prob(self.content_classifier, c, h_xr)
        p_s = _match_prob(self.content_classifier, c, h_xs)
        return _pair_loss(p_r, p_s), _pair_acc(p_r, p_s)

    def content_discriminator_loss(self, c, h_ya, h_yn):
        p_a = _match_prob(self.content_discriminator, c, h_ya)
        p_n = _match_prob(self.content_discriminator, c, h_yn)
        return _pair_loss(p_a, p_n), _pair_acc(p_a, p_n)

    def content_adversarial_loss(self, c, h_ya):
        p_a = _match_prob(self.content_discriminator, c, h_ya)
        return -torch.log((1.0 - p_a).clamp_min(LOG_EPS)).mean()
