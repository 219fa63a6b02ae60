"""Full model: encoders, disentanglement, polishing, and the generator.

Parameters are split into two groups for adversarial training: the two
space discriminators, and everything else (the generation group).
"""

import torch
import torch.nn as nn

from .config import Config
from .corpus import Batch, UNK, encode_extended
from .disentangle import FeatureExtractor, SpaceConstraints, kl_to_standard_normal
from .encoders import TextEncoders
from .generator import HeadlineDecoder
from .polish import HighlightPolisher


class HeadlineModel(nn.Module):
    def __init__(self, cfg: Config, vocab_size: int):
        super().__init__()
        self.cfg = cfg
        self.vocab_size = vocab_size
        state_dim = 2 * cfg.hidden_size
        self.encoders = TextEncoders(vocab_size, cfg.embed_dim, cfg.hidden_size)
        self.extractor = FeatureExtractor(
            state_dim, cfg.latent_dim, cfg.embed_dim, vocab_size,
            dropout_keep=cfg.dropout_keep)
        self.constraints = SpaceConstraints(state_dim, cfg.latent_dim)
        self.polisher = HighlightPolisher(
            state_dim, cfg.latent_dim, softmax_gate=cfg.softmax_polish_gate)
        self.decoder = HeadlineDecoder(
            vocab_size, cfg.embed_dim, state_dim, state_dim, cfg.latent_dim)

    def init_params(self, std=None):
        """Gaussian initialization of every parameter; seed via torch.manual_seed."""
        std = self.cfg.init_std if std is None else std
        with torch.no_grad():
            for p in self.parameters():
                p.normal_(mean=0.0, std=std)

    def discriminator_parameters(self):
        return self.constraints.discriminator_parameters()

    def generator_parameters(self):
        disc = {id(p) for p in self.discriminator_parameters()}
        return [p for p in self.parameters() if id(p) not in disc]

    def _pooled(self, encode, ids, lengths):
        return encode(ids, lengths).pooled

    def latents(self, batch: Batch, noise_c=None, noise_s=None):
        enc_yr = self.encoders.encode_headline(
            batch.proto_headline_ids, batch.proto_headline_lengths)
        c = self.extractor.encode_content(enc_yr.pooled, noise=noise_c)
        s = self.extractor.encode_style(enc_yr.pooled, noise=noise_s)
        return c, s, enc_yr

    def discriminator_loss(self, batch: Batch):
        """L_D = style-space + content-space discriminator losses.

        All inputs to the discriminators (latents and pooled encodings) are
        computed without gradients, so only discriminator parameters receive
        gradients from this loss.
        """
        with torch.no_grad():
            c, s, _ = self.latents(batch)
            h_xr = self._pooled(self.encoders.encode_document,
                                batch.proto_doc_ids, batch.proto_doc_lengths)
            h_xq = self._pooled(self.encoders.encode_document,
                                batch.random_doc_ids, batch.random_doc_lengths)
            h_ya = self._pooled(self.encoders.encode_headline,
                                batch.attr_headline_ids,
                                batch.attr_headline_lengths)
            h_yn = self._pooled(self.encoders.encode_headline,
                                batch.unattr_headline_ids,
                                batch.unattr_headline_lengths)
        l_sd, acc_sd = self.constraints.style_discriminator_loss(
            s.sample, h_xr, h_xq)
        l_cd, acc_cd = self.constraints.content_discriminator_loss(
            c.sample, h_ya, h_yn)
        return {
            "loss_d": l_sd + l_cd,
            "loss_style_disc": l_sd,
            "loss_content_disc": l_cd,
            "acc_style_disc": acc_sd,
            "acc_content_disc": acc_cd,
        }

    def generator_loss(self, batch: Batch, kl_weight=1.0):
        """Full generation-group loss with all components broken out."""
        cfg = self.cfg
        enc_doc = self.encoders.encode_document(batch.doc_ids,
                                                batch.doc_lengths)
        c, s, _ = self.latents(batch)
        h_xr = self._pooled(self.encoders.encode_document,
                            batch.proto_doc_ids, batch.proto_doc_lengths)
        h_xs = self._pooled(self.encoders.encode_document,
                            batch.similar_doc_ids, batch.similar_doc_lengths)
        h_ya = self._pooled(self.encoders.encode_headline,
                            batch.attr_headline_ids,
                            batch.attr_headline_lengths)
        h_yn = self._pooled(self.encoders.encode_headline,
                            batch.unattr_headline_ids,
                            batch.unattr_headline_lengths)

        kl_c = kl_to_standard_normal(c.mu, c.logvar).mean()
        kl_s = kl_to_standard_normal(s.mu, s.logvar).mean()
        recon = self.extractor.reconstruction_loss(
            c.sample, s.sample, batch.proto_headline_ids,
            batch.proto_headline_mask, self.encoders.embedding)
        bow = self.extractor.bow_loss(
            c.sample, s.sample, batch.proto_headline_ids,
            batch.proto_headline_mask)
        loss_vae = (kl_weight * cfg.lambda_kl_c * kl_c
                    + kl_weight * cfg.lambda_kl_s * kl_s + recon)

        l_cs, acc_cs = self.constraints.style_classifier_loss(
            s.sample, h_ya, h_yn)
        l_cc, acc_cc = self.constraints.content_classifier_loss(
            c.sample, h_xr, h_xs)
        l_sg = self.constraints.style_adversarial_loss(s.sample, h_xr)
        l_cg = self.constraints.content_adversarial_loss(c.sample, h_ya)

        polished, _ = self.polisher(enc_doc.states, c.sample, cfg.hops,
                                    enc_doc.mask)
        loss_seq, _, _ = self.decoder.teacher_forced_loss(
            self.encoders.embedding, enc_doc.pooled, enc_doc.states,
            enc_doc.mask, polished, s.sample, batch.doc_ext_ids,
            batch.max_oov, batch.target_ids, batch.target_ext_ids,
            batch.target_mask)

        loss_g = (loss_vae + l_cs + l_cc + l_sg + l_cg + loss_seq
                  + cfg.bow_weight * bow)
        return {
            "loss_g": loss_g,
            "loss_vae": loss_vae,
            "kl_content": kl_c,
            "kl_style": kl_s,
            "loss_recon": recon,
            "loss_bow": bow,
            "loss_style_cls": l_cs,
            "loss_content_cls": l_cc,
            "loss_style_adv": l_sg,
            "loss_content_adv": l_cg,
            "loss_seq": loss_seq,
            "acc_style_cls": acc_cs,
            "acc_content_cls": acc_cc,
            "kl_weight": kl_weight,
        }

    @torch.no_grad()
    def generate(self, document_tokens, prototype_headline_tokens, vocab,
                 beam_size=None, min_len=None, max_len=None):
        """Beam-decode one headline; returns a token list."""
        cfg = self.cfg
        was_training = self.training
        self.eval()
        try:
            doc_tokens = document_tokens[: cfg.doc_limit]
            _, ext_ids, oovs = encode_extended(doc_tokens, vocab)
            doc_ids = torch.tensor(
                [[i if i < len(vocab) else UNK for i in ext_ids]],
                dtype=torch.long)
            doc_ext = torch.tensor([ext_ids], dtype=torch.long)
            lengths = torch.tensor([len(doc_tokens)])
            enc_doc = self.encoders.encode_document(doc_ids, lengths)
            proto = prototype_headline_tokens[: cfg.proto_limit]
            proto_ids = torch.tensor([[vocab.encode(t) for t in proto]],
                                     dtype=torch.long)
            enc_yr = self.encoders.encode_headline(
                proto_ids, torch.tensor([len(proto)]))
            c = self.extractor.encode_content(enc_yr.pooled)
            s = self.extractor.encode_style(enc_yr.pooled)
            polished, _ = self.polisher(enc_doc.states, c.sample, cfg.hops,
                                        enc_doc.mask)
            out_ids = self.decoder.beam_search(
                self.encoders.embedding, enc_doc.pooled, enc_doc.states,
                enc_doc.mask, polished, s.sample, doc_ext, len(oovs),
                beam_size=beam_size or cfg.beam_size,
                min_len=cfg.min_len if min_len is None else min_len,
                max_len=cfg.max_len if max_len is None else max_len)
            return [vocab.decode(i, oovs) for i in out_ids]
        finally:
            self.train(was_training)

    @torch.no_grad()
    def latent_means(self, prototype_headline_tokens, vocab):
        """(mu_c, mu_s) for one prototype headline, inference mode."""
        was_training = self.training
        self.eval()
        try:
            proto = prototype_headline_tokens[: self.cfg.proto_limit]
            ids = torch.tensor([[vocab.encode(t) for t in proto]],
                               dtype=torch.long)
            enc = self.encoders.encode_headline(ids, torch.tensor([len(proto)]))
            c = self.extractor.encode_content(enc.pooled)
            s = self.extractor.encode_style(enc.pooled)
            return c.mu[0], s.mu[0]
        finally:
            self.train(was_training)
