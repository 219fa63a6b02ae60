"""Command-line entry point.

Subcommands: build-index, train, generate, evaluate, inspect-latent.
Every Config key can be set in a key=value config file (--config) and
overridden by a flag of the same name.
"""

import csv
import dataclasses
import json
import sys
from pathlib import Path

import click
import torch

from . import evaluation, retrieval, training
from .config import Config, apply_overrides, load_config
from .corpus import build_vocabulary, load_pairs
from .model import HeadlineModel


def _fail(message):
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def config_options(cmd):
    """Add one override flag per Config field."""
    for f in reversed(dataclasses.fields(Config)):
        name = "--" + f.name.replace("_", "-")
        ftype = {int: int, float: float, bool: click.BOOL}.get(
            f.type if isinstance(f.type, type) else {"int": int,
                                                     "float": float,
                                                     "bool": bool}.get(f.type),
            str)
        cmd = click.option(name, f.name, type=ftype, default=None,
                           help=f"override config key {f.name}")(cmd)
    return cmd


def resolve_config(config_path, overrides) -> Config:
    cfg = load_config(config_path) if config_path else Config()
    return apply_overrides(cfg, overrides)


def _seed_everything(seed):
    torch.manual_seed(seed)


@click.group()
def main():
    """Attractive headline generation toolkit."""


@main.command("build-index")
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def build_index_cmd(corpus, out):
    """Build and persist the TF-IDF retrieval index."""
    try:
        pairs = load_pairs(corpus)
        index = retrieval.build_index(pairs)
        retrieval.save_index(index, out)
    except Exception as exc:
        _fail(exc)
    click.echo(f"indexed {index.doc_count} attractive pairs "
               f"({len(index.unattractive_ids)} unattractive) -> {out}")


@main.command("train")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@config_options
def train_cmd(config_path, corpus, index_path, out_dir, **overrides):
    """Train the model; writes checkpoints and a metrics.csv log."""
    try:
        cfg = resolve_config(config_path, overrides)
        _seed_everything(cfg.seed)
        pairs = load_pairs(corpus)
        index = retrieval.load_index(index_path)
        vocab = build_vocabulary(pairs, cfg.vocab_cap)
        model = HeadlineModel(cfg, len(vocab))
        model.init_params()
        trainer = training.Trainer(model, cfg, vocab, index, pairs)
        trainer.train(cfg.steps, out_dir=out_dir)
    except Exception as exc:
        _fail(exc)
    click.echo(f"trained {cfg.steps} steps -> {out_dir}")


@main.command("generate")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True))
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True))
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--beam", type=int, default=None)
@click.option("--min-len", type=int, default=None)
@click.option("--max-len", type=int, default=None)
@click.option("--seed", type=int, default=None)
def generate_cmd(model_path, input_path, index_path, out, beam, min_len,
                 max_len, seed):
    """Beam-decode headlines for a JSONL document file; emits JSONL."""
    try:
        model, cfg, vocab, _ = training.load_checkpoint(model_path)
        _seed_everything(cfg.seed if seed is None else seed)
        index = retrieval.load_index(index_path)
        pairs = load_pairs(input_path)
        with open(out, "w", encoding="utf-8") as fh:
            for pair in pairs:
                proto = retrieval.retrieve_prototype(pair, index)
                tokens = model.generate(pair.document, proto.headline, vocab,
                                        beam_size=beam, min_len=min_len,
                                        max_len=max_len)
                fh.write(json.dumps({"id": pair.id,
                                     "headline": " ".join(tokens)},
                                    ensure_ascii=False) + "\n")
    except Exception as exc:
        _fail(exc)
    click.echo(f"generated {len(pairs)} headlines -> {out}")


@main.command("evaluate")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True))
@click.option("--test", "test_path", required=True,
              type=click.Path(exists=True))
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--beam", type=int, default=None)
@click.option("--min-len", type=int, default=None)
@click.option("--max-len", type=int, default=None)
@click.option("--seed", type=int, default=None)
def evaluate_cmd(model_path, test_path, index_path, out_dir, beam, min_len,
                 max_len, seed):
    """Score generated headlines with ROUGE and BLEU."""
    try:
        model, cfg, vocab, _ = training.load_checkpoint(model_path)
        _seed_everything(cfg.seed if seed is None else seed)
        index = retrieval.load_index(index_path)
        test_pairs = load_pairs(test_path)

        def generate_fn(document, proto_headline):
            return model.generate(document, proto_headline, vocab,
                                  beam_size=beam, min_len=min_len,
                                  max_len=max_len)

        report = evaluation.evaluate(generate_fn, test_pairs, index,
                                     out_dir=out_dir)
    except Exception as exc:
        _fail(exc)
    summary = report["systems"]["model"]
    click.echo(json.dumps(summary, indent=2))


@main.command("inspect-latent")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True))
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def inspect_latent_cmd(model_path, corpus, index_path, out):
    """Dump (id, mu_c, mu_s) rows as CSV for external 2-D projection."""
    try:
        model, cfg, vocab, _ = training.load_checkpoint(model_path)
        index = retrieval.load_index(index_path)
        pairs = load_pairs(corpus)
        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            z = cfg.latent_dim
            writer.writerow(["id"] + [f"mu_c_{i}" for i in range(z)]
                            + [f"mu_s_{i}" for i in range(z)])
            for pair in pairs:
                proto = retrieval.retrieve_prototype(pair, index)
                mu_c, mu_s = model.latent_means(proto.headline, vocab)
                writer.writerow([pair.id] + [f"{v:.6f}" for v in mu_c.tolist()]
                                + [f"{v:.6f}" for v in mu_s.tolist()])
    except Exception as exc:
        _fail(exc)
    click.echo(f"wrote latent means for {len(pairs)} pairs -> {out}")


if __name__ == "__main__":
    main()
