"""Learned prompt contexts: antonym prompts whose token embeddings are trained
against MOS labels while every backbone weight stays frozen.

The context is initialised from the rendered prompt pair, so before the first
update the tuned scorer reproduces the zero-shot score exactly.
"""
from __future__ import annotations

import json
import math
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from . import metrics
from .errors import AssetError, ContractViolation, DivergenceError, InputError
from .prompts import PromptPair


@dataclass
class TuneConfig:
    learning_rate: float = 0.002
    iterations: int = 100_000
    batch_size: int = 64
    seed: int = 0
    label_scaling: str = "minmax"  # minmax (train-split min/max) | manifest (declared mos_scale) | none
    val_fraction: float = 0.1
    eval_every: int = 1000
    log_every: int = 100
    scale: float = 1.0
    momentum: float = 0.0
    weight_decay: float = 0.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InputError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.iterations < 1 or self.batch_size < 1:
            raise InputError("iterations and batch_size must be >= 1")
        if self.label_scaling not in ("minmax", "manifest", "none"):
            raise InputError(f"unknown label_scaling {self.label_scaling!r}")
        if not 0 <= self.val_fraction < 1:
            raise InputError(f"val_fraction must be in [0, 1), got {self.val_fraction}")


@dataclass
class LearnableContext:
    positive: torch.Tensor  # (L_pos, width)
    negative: torch.Tensor  # (L_neg, width)
    attribute: str = "quality"
    positive_text: str = ""
    negative_text: str = ""
    label_range: tuple | None = None  # (lo, hi) mapped to (0, 1) during training
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("positive", "negative"):
            t = getattr(self, name)
            if t.ndim != 2 or not torch.all(torch.isfinite(t)):
                raise ContractViolation(f"{name} context must be a finite 2-D tensor, got shape {tuple(t.shape)}")
        if self.positive.shape[1] != self.negative.shape[1]:
            raise ContractViolation("positive and negative contexts have different widths")

    @property
    def context_length(self) -> int:
        return int(self.positive.shape[0])

    def parameters(self):
        return [self.positive, self.negative]

    def clone(self) -> "LearnableContext":
        return LearnableContext(self.positive.detach().clone(), self.negative.detach().clone(), self.attribute,
                                self.positive_text, self.negative_text, self.label_range, dict(self.meta))

    def digest(self) -> str:
        import hashlib
        h = hashlib.sha256()
        for t in (self.positive, self.negative):
            h.update(t.detach().cpu().contiguous().numpy().tobytes())
        return h.hexdigest()


def init_context(pair: PromptPair, backbone) -> LearnableContext:
    return LearnableContext(
        backbone.content_token_embeddings(pair.positive_text),
        backbone.content_token_embeddings(pair.negative_text),
        pair.attribute, pair.positive_text, pair.negative_text,
    )


def text_features(context: LearnableContext, backbone) -> tuple[torch.Tensor, torch.Tensor]:
    return backbone.encode_context(context.positive), backbone.encode_context(context.negative)


def forward_score(image_embedding, context: LearnableContext, backbone, scale: float = 1.0,
                  text=None) -> torch.Tensor:
    """Paired score(s) in (0, 1), differentiable in the context entries only.

    ``image_embedding`` may be (C,) or (N, C); the result has shape () or (N,).
    """
    x = torch.as_tensor(image_embedding)
    t1, t2 = text if text is not None else text_features(context, backbone)
    x = x.to(t1.dtype)
    if x.shape[-1] != t1.shape[-1]:
        raise ContractViolation(f"image embedding dim {x.shape[-1]} vs text dim {t1.shape[-1]}")
    s1 = F.cosine_similarity(x, t1.expand_as(x), dim=-1, eps=0.0)
    s2 = F.cosine_similarity(x, t2.expand_as(x), dim=-1, eps=0.0)
    return torch.sigmoid(scale * (s1 - s2))


def scale_labels(mos, mode: str, declared=None):
    mos = np.asarray(mos, dtype=np.float64)
    if mode == "none":
        return mos, None
    if mode == "manifest":
        if declared is None:
            raise InputError("label_scaling='manifest' needs a manifest with a declared mos_scale")
        lo, hi = float(declared[0]), float(declared[1])
    else:
        lo, hi = float(mos.min()), float(mos.max())
    if not hi > lo:
        raise InputError(f"cannot rescale MOS labels with range [{lo}, {hi}]")
    return (mos - lo) / (hi - lo), (lo, hi)


def fit_context(image_embeddings, labels, backbone, config: TuneConfig, context: LearnableContext,
                val_embeddings=None, val_labels=None, log=None):
    """Plain mini-batch SGD on the two context blocks; returns (context, log records).

    ``labels`` must already be on the score scale. Logged ``loss`` is the MSE
    over the full training set at that iteration (iteration 0 = before any
    update); ``val_srocc`` is filled every ``eval_every`` iterations.
    """
    x = torch.as_tensor(np.asarray(image_embeddings))
    y = torch.as_tensor(np.asarray(labels, dtype=np.float64))
    n = x.shape[0]
    if n == 0:
        raise InputError("empty training set")
    ctx = context.clone()
    dtype = ctx.positive.dtype
    x, y = x.to(dtype), y.to(dtype)
    for p in ctx.parameters():
        p.requires_grad_(True)
    opt = torch.optim.SGD(ctx.parameters(), lr=config.learning_rate, momentum=config.momentum,
                          weight_decay=config.weight_decay)
    rng = np.random.default_rng(config.seed)
    records = [] if log is None else log
    bs = min(config.batch_size, n)

    def full_loss():
        with torch.no_grad():
            return float(F.mse_loss(forward_score(x, ctx, backbone, config.scale), y))

    def val_srocc():
        if val_embeddings is None or len(val_labels) < 2:
            return None
        with torch.no_grad():
            pred = forward_score(torch.as_tensor(np.asarray(val_embeddings)).to(dtype), ctx, backbone, config.scale)
        try:
            return metrics.srocc(pred.double().numpy(), val_labels)
        except Exception:
            return None

    def emit(it, loss, with_val):
        rec = {"iteration": it, "loss": loss, "val_srocc": val_srocc() if with_val else None}
        records.append(rec)

    emit(0, full_loss(), True)
    order = rng.permutation(n)
    pos = 0
    last_good = ctx.clone()
    for it in range(1, config.iterations + 1):
        if pos + bs > n:
            order = rng.permutation(n)
            pos = 0
        idx = torch.as_tensor(order[pos:pos + bs])
        pos += bs
        opt.zero_grad()
        loss = F.mse_loss(forward_score(x[idx], ctx, backbone, config.scale), y[idx])
        if not torch.isfinite(loss):
            raise DivergenceError(f"non-finite loss at iteration {it}", context=last_good, iteration=it)
        loss.backward()
        opt.step()
        if not all(torch.all(torch.isfinite(p)) for p in ctx.parameters()):
            raise DivergenceError(f"non-finite context after iteration {it}", context=last_good, iteration=it)
        last_good = ctx.clone()
        at_eval = it % config.eval_every == 0 or it == config.iterations
        if it % config.log_every == 0 or at_eval:
            emit(it, full_loss(), at_eval)
    for p in ctx.parameters():
        p.requires_grad_(False)
    final = ctx.clone()
    final.meta["val_srocc"] = records[-1]["val_srocc"]
    return final, records


def tune(manifest, backbone, config: TuneConfig, pair: PromptPair | None = None, log_path=None, load=None):
    """Tune a prompt context on the manifest's train split.

    A seeded ``val_fraction`` slice of the train split is held out for the
    periodic validation SROCC. Returns (context, log records); with
    ``log_path`` the records are also written as JSON lines.
    """
    from .harness.manifest import load_record_image
    from .prompts import get_pair

    pair = pair or get_pair("quality")
    train = [r for r in manifest.records if r.split == "train"]
    if not train:
        raise InputError(f"manifest {manifest.name!r} has no train split records")
    if any(r.mos is None for r in train):
        raise InputError("every train record needs a MOS label")
    load = load or (lambda r: load_record_image(manifest, r))
    mos_scaled, label_range = scale_labels([r.mos for r in train], config.label_scaling, manifest.mos_scale)
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(len(train))
    n_val = int(round(config.val_fraction * len(train))) if len(train) >= 10 else 0
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    embeds = np.stack([backbone.embed_image(load(r)) for r in train])
    context = init_context(pair, backbone)
    log = []
    try:
        ctx, log = fit_context(embeds[train_idx], mos_scaled[train_idx], backbone, config, context,
                               embeds[val_idx] if n_val else None, mos_scaled[val_idx] if n_val else None, log)
    finally:
        if log_path is not None:
            write_log(log, log_path)
    ctx.label_range = label_range
    ctx.meta.update(manifest=manifest.name, backbone=getattr(backbone, "fingerprint", ""),
                    val_paths=[train[i].image_path for i in val_idx])
    return ctx, log


def write_log(records, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")


def export_context(context: LearnableContext, path) -> None:
    meta = {
        "attribute": context.attribute,
        "positive_text": context.positive_text,
        "negative_text": context.negative_text,
        "label_range": list(context.label_range) if context.label_range else None,
        "meta": context.meta,
    }
    with open(path, "wb") as f:
        np.savez(f, positive=context.positive.detach().cpu().numpy(),
                 negative=context.negative.detach().cpu().numpy(), meta=np.array(json.dumps(meta)))


def import_context(path) -> LearnableContext:
    try:
        with np.load(Path(path), allow_pickle=False) as z:
            pos, neg = z["positive"], z["negative"]
            meta = json.loads(str(z["meta"]))
    except (OSError, ValueError, KeyError, zipfile.BadZipFile, EOFError, json.JSONDecodeError) as e:
        raise AssetError(f"cannot read prompt context {path}: {e}") from e
    try:
        return LearnableContext(torch.from_numpy(pos.copy()), torch.from_numpy(neg.copy()), meta["attribute"],
                                meta["positive_text"], meta["negative_text"],
                                tuple(meta["label_range"]) if meta["label_range"] else None, meta["meta"])
    except (KeyError, TypeError, ContractViolation) as e:
        raise AssetError(f"malformed prompt context {path}: {e}") from e


def context_text_embeddings(context: LearnableContext, backbone) -> tuple[np.ndarray, np.ndarray]:
    """Frozen (positive, negative) text embeddings for a tuned context, as numpy."""
    with torch.no_grad():
        t1, t2 = text_features(context, backbone)
    return t1.double().numpy(), t2.double().numpy()
