"""Flat configuration shared by the model, training loop, and CLI.

Config files are plain ``key=value`` lines ('#' starts a comment); every key
can also be overridden by a CLI flag of the same name.
"""

import dataclasses
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    # vocabulary / batching
    vocab_cap: int = 10000
    doc_limit: int = 400
    proto_limit: int = 30
    target_limit: int = 30
    batch_size: int = 64
    # model dimensions
    embed_dim: int = 64
    hidden_size: int = 64          # per direction; encoder states are 2*hidden_size wide
    latent_dim: int = 32
    hops: int = 2
    dropout_keep: float = 0.8      # VAE feature-encoder dropout keep probability
    softmax_polish_gate: bool = True  # False switches to the elementwise-sigmoid gate variant
    # optimization
    lr: float = 1e-3
    clip_norm: float = 2.0
    kl_anneal_batches: int = 10000
    lambda_kl_c: float = 1.0
    lambda_kl_s: float = 1.0
    bow_weight: float = 1.0
    init_std: float = 0.02
    # decoding
    beam_size: int = 4
    min_len: int = 10
    max_len: int = 30
    # run control
    steps: int = 1000
    seed: int = 13
    log_every: int = 1
    checkpoint_every: int = 0      # 0: only final checkpoint


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(Config)}


def _coerce(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key: {key!r}")
    ftype = _FIELD_TYPES[key]
    if ftype in ("bool", bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"bad boolean for {key}: {raw!r}")
    if ftype in ("int", int):
        return int(raw)
    if ftype in ("float", float):
        return float(raw)
    return raw


def load_config(path) -> Config:
    """Parse a key=value config file into a Config."""
    cfg = Config()
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        setattr(cfg, key.strip(), _coerce(key.strip(), raw.strip()))
    return cfg


def apply_overrides(cfg: Config, overrides: dict) -> Config:
    """Return a copy of cfg with non-None override values applied."""
    updates = {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key: {key!r}")
        updates[key] = value
    return dataclasses.replace(cfg, **updates)
