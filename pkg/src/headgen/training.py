"""Adversarial two-group training loop, KL annealing, and checkpointing.

Every step runs one discriminator update followed by one generation-group
update. Checkpoints are self-contained (config, vocabulary, parameters,
optimizer moments, rng state) and deterministic on disk.
"""

import copy
import csv
import pickle
import random
import sys
from pathlib import Path

import torch

from .config import Config
from .corpus import (Batch, TrainExample, Vocabulary, make_batch)
from .model import HeadlineModel
from .retrieval import (TfIdfIndex, retrieve_prototype,
                        retrieve_similar_document, sample_negatives)

CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    pass


def kl_anneal(step: int, horizon: int = 10000) -> float:
    """Linear KL weight ramp: 0 at step 0, 1 from ``horizon`` on."""
    if step < 0:
        raise ValueError("step must be >= 0")
    if horizon <= 0:
        return 1.0
    return min(step / horizon, 1.0)


def resolve_links(pairs, index: TfIdfIndex):
    """Precompute prototype and most-similar-document links for each pair."""
    links = {}
    for pair in pairs:
        proto = retrieve_prototype(pair, index)
        similar = retrieve_similar_document(proto, index)
        links[pair.id] = (proto, similar)
    return links


class Trainer:
    def __init__(self, model: HeadlineModel, cfg: Config, vocab: Vocabulary,
                 index: TfIdfIndex, pairs):
        self.model = model
        self.cfg = cfg
        self.vocab = vocab
        self.index = index
        self.pairs = [p for p in pairs if p.attractive]
        if not self.pairs:
            raise TrainingError("no attractive pairs to train on")
        self.links = resolve_links(self.pairs, index)
        self.rng = random.Random(cfg.seed)
        self.step_count = 0
        self.disc_opt = torch.optim.Adam(model.discriminator_parameters(),
                                         lr=cfg.lr)
        self.gen_opt = torch.optim.Adam(model.generator_parameters(),
                                        lr=cfg.lr)

    def sample_batch(self) -> Batch:
        chosen = [self.pairs[self.rng.randrange(len(self.pairs))]
                  for _ in range(min(self.cfg.batch_size, len(self.pairs)))]
        examples = []
        for pair in chosen:
            proto, similar = self.links[pair.id]
            ya, yn, xq = sample_negatives(self.index, self.rng,
                                          exclude_id=proto.id)
            examples.append(TrainExample(
                pair=pair, prototype=proto, similar=similar, random_doc=xq,
                attractive_headline=ya.headline,
                unattractive_headline=yn.headline))
        return make_batch(examples, self.vocab, self.cfg.doc_limit,
                          self.cfg.proto_limit, self.cfg.target_limit)

    def _check_finite(self, metrics):
        for name, value in metrics.items():
            if torch.is_tensor(value) and not torch.isfinite(value).all():
                raise TrainingError(
                    f"non-finite loss component {name!r} at step "
                    f"{self.step_count}")

    def train_step(self, batch: Batch) -> dict:
        """One discriminator update, then one generation-group update."""
        model, cfg = self.model, self.cfg
        model.train()

        self.disc_opt.zero_grad()
        self.gen_opt.zero_grad()
        d_metrics = model.discriminator_loss(batch)
        self._check_finite(d_metrics)
        d_metrics["loss_d"].backward()
        torch.nn.utils.clip_grad_norm_(model.discriminator_parameters(),
                                       cfg.clip_norm)
        self.disc_opt.step()

        self.disc_opt.zero_grad()
        self.gen_opt.zero_grad()
        weight = kl_anneal(self.step_count, cfg.kl_anneal_batches)
        g_metrics = model.generator_loss(batch, kl_weight=weight)
        self._check_finite(g_metrics)
        g_metrics["loss_g"].backward()
        torch.nn.utils.clip_grad_norm_(model.generator_parameters(),
                                       cfg.clip_norm)
        self.gen_opt.step()

        self.step_count += 1
        out = {"step": self.step_count}
        for source in (d_metrics, g_metrics):
            for name, value in source.items():
                out[name] = (float(value.detach()) if torch.is_tensor(value)
                             else value)
        return out

    def train(self, steps, out_dir=None, log_fn=None):
        """Run ``steps`` updates; optionally log CSV metrics and checkpoint."""
        out_dir = Path(out_dir) if out_dir else None
        writer = None
        log_fh = None
        if out_dir:
            out_dir.mkdir(parents=True, exist_ok=True)
            log_fh = open(out_dir / "metrics.csv", "w", newline="",
                          encoding="utf-8")
        try:
            history = []
            for _ in range(steps):
                metrics = self.train_step(self.sample_batch())
                history.append(metrics)
                if log_fh:
                    if writer is None:
                        writer = csv.DictWriter(log_fh,
                                                fieldnames=list(metrics))
                        writer.writeheader()
                    writer.writerow(metrics)
                if log_fn:
                    log_fn(metrics)
                if out_dir and self.cfg.checkpoint_every and \
                        self.step_count % self.cfg.checkpoint_every == 0:
                    self.checkpoint(out_dir)
            if out_dir:
                self.checkpoint(out_dir)
            return history
        finally:
            if log_fh:
                log_fh.close()

    def checkpoint(self, out_dir):
        out_dir = Path(out_dir)
        path = out_dir / f"ckpt-{self.step_count}"
        save_checkpoint(path, self.model, self.cfg, self.vocab,
                        self.gen_opt, self.disc_opt, self.step_count, self.rng)
        (out_dir / "latest").write_text(path.name, encoding="utf-8")
        return path


def _canonical(obj):
    """Intern strings recursively so equal payloads pickle to equal bytes.

    After a round trip through pickle, dict keys lose interning, which
    changes pickle's memoization pattern and hence the file bytes.
    """
    if isinstance(obj, str):
        return sys.intern(obj)
    if isinstance(obj, dict):
        return {_canonical(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_canonical(v) for v in obj]
    if isinstance(obj, tuple):
        return tuple(_canonical(v) for v in obj)
    return obj


def _optimizer_state(opt):
    # copy before converting: state_dict aliases the live optimizer state
    state = copy.deepcopy(opt.state_dict())
    # tensors -> numpy for deterministic pickling
    for entry in state["state"].values():
        for key, value in entry.items():
            if torch.is_tensor(value):
                entry[key] = value.detach().cpu().numpy()
    return state


def _restore_optimizer_state(state):
    for entry in state["state"].values():
        for key, value in entry.items():
            if hasattr(value, "shape") and not torch.is_tensor(value):
                entry[key] = torch.from_numpy(value.copy())
    return state


def save_checkpoint(path, model: HeadlineModel, cfg: Config,
                    vocab: Vocabulary, gen_opt, disc_opt, step, rng):
    payload = {
        "version": CHECKPOINT_VERSION,
        "step": step,
        "config": cfg.__dict__,
        "vocab": list(vocab.id_to_token),
        "model": {name: tensor.detach().cpu().numpy()
                  for name, tensor in model.state_dict().items()},
        "gen_opt": _optimizer_state(gen_opt),
        "disc_opt": _optimizer_state(disc_opt),
        "torch_rng": torch.get_rng_state().numpy(),
        "py_rng": rng.getstate() if rng is not None else None,
    }
    with open(path, "wb") as fh:
        pickle.dump(_canonical(payload), fh, protocol=4)


def load_checkpoint(path):
    """Load a checkpoint into a fresh model; returns (model, payload).

    Raises TrainingError on version mismatch or a corrupt file, before any
    state is constructed.
    """
    try:
        with open(path, "rb") as fh:
            payload = pickle.load(fh)
    except (pickle.UnpicklingError, EOFError, AttributeError) as exc:
        raise TrainingError(f"corrupt checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or \
            payload.get("version") != CHECKPOINT_VERSION:
        raise TrainingError(
            f"checkpoint version mismatch: expected {CHECKPOINT_VERSION}, "
            f"got {payload.get('version') if isinstance(payload, dict) else '?'}")
    cfg = Config(**payload["config"])
    vocab = Vocabulary(payload["vocab"])
    model = HeadlineModel(cfg, len(vocab))
    model.load_state_dict({name: torch.from_numpy(arr.copy())
                           for name, arr in payload["model"].items()})
    return model, cfg, vocab, payload


def restore_trainer(path, index, pairs) -> Trainer:
    """Rebuild a Trainer (model + optimizers + rng) from a checkpoint."""
    model, cfg, vocab, payload = load_checkpoint(path)
    trainer = Trainer(model, cfg, vocab, index, pairs)
    trainer.gen_opt.load_state_dict(
        _restore_optimizer_state(payload["gen_opt"]))
    trainer.disc_opt.load_state_dict(
        _restore_optimizer_state(payload["disc_opt"]))
    trainer.step_count = payload["step"]
    if payload["py_rng"] is not None:
        trainer.rng.setstate(payload["py_rng"])
    torch.set_rng_state(torch.from_numpy(payload["torch_rng"].copy()))
    return trainer
