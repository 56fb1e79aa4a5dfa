"""Run configuration: a flat ``key = value`` text file.

::

    # backbone
    checkpoint = weights/RN50.npz
    vocab = weights/bpe_simple_vocab_16e6.txt.gz
    variant = residual-attnpool
    pos_embedding_mode = removed
    # harness
    cache_dir = .cache/pairiqa
    workers = 4
    deterministic = true
    seed = 0
    registry = prompts.txt
    # prompt tuning
    learning_rate = 0.002
    iterations = 100000
    batch_size = 64

Relative paths resolve against the config file's directory. Unknown keys are
an error so typos do not silently fall back to defaults.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import torch

from ..backbone.adapter import BackboneConfig
from ..errors import ConfigurationError
from ..tuning import TuneConfig

PATH_KEYS = ("checkpoint", "vocab", "model_card", "cache_dir", "registry")


@dataclass
class RunConfig:
    checkpoint: str | None = None
    vocab: str | None = None
    model_card: str | None = None
    variant: str = "residual-attnpool"
    pos_embedding_mode: str = "removed"
    native_input_size: int | None = None
    max_pixels: int = 16_000_000
    cache_dir: str | None = None
    workers: int = 1
    deterministic: bool = True
    seed: int = 0
    registry: str | None = None
    tune: TuneConfig = field(default_factory=TuneConfig)

    def backbone_config(self, **overrides) -> BackboneConfig:
        if not self.checkpoint or not self.vocab:
            raise ConfigurationError("config needs both 'checkpoint' and 'vocab' to load a backbone")
        kw = dict(checkpoint_path=self.checkpoint, vocab_path=self.vocab, model_card_path=self.model_card,
                  variant=self.variant, pos_embedding_mode=self.pos_embedding_mode,
                  native_input_size=self.native_input_size, max_pixels=self.max_pixels)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return BackboneConfig(**kw)

    def apply_determinism(self) -> None:
        if self.deterministic:
            torch.manual_seed(self.seed)
            torch.use_deterministic_algorithms(True, warn_only=True)


_RUN_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig) if f.name != "tune"}
_TUNE_FIELDS = {f.name: f for f in dataclasses.fields(TuneConfig)}


def _convert(raw: str, default, key: str, where: str):
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"{where}: {key} expects a boolean, got {raw!r}")
    try:
        if isinstance(default, int) or key == "native_input_size":
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigurationError(f"{where}: {key} expects a number, got {raw!r}") from None
    return raw


def parse_config(text: str, base_dir=".", source="<string>") -> RunConfig:
    run, tune = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        where = f"{source}:{lineno}"
        if not sep or not key:
            raise ConfigurationError(f"{where}: expected 'key = value', got {raw!r}")
        if key in _RUN_FIELDS:
            if value == "":
                continue
            default = RunConfig.__dataclass_fields__[key].default
            v = _convert(value, default, key, where)
            if key in PATH_KEYS:
                p = Path(v).expanduser()
                v = str(p if p.is_absolute() else Path(base_dir) / p)
            run[key] = v
        elif key in _TUNE_FIELDS:
            tune[key] = _convert(value, _TUNE_FIELDS[key].default, key, where)
        else:
            known = sorted(set(_RUN_FIELDS) | set(_TUNE_FIELDS))
            raise ConfigurationError(f"{where}: unknown key {key!r}; known keys: {', '.join(known)}")
    if "seed" in run:
        tune["seed"] = run["seed"]
    try:
        tune_cfg = TuneConfig(**tune)
    except ValueError as e:
        raise ConfigurationError(f"{source}: {e}") from None
    return RunConfig(**run, tune=tune_cfg)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e}") from None
    return parse_config(text, base_dir=path.parent, source=str(path))
