"""Produce checkpoint archives + model cards.

``convert_state_dict`` turns a published state dict (OpenAI ``.pt`` file or an
open_clip model) into the framework-neutral archive. ``write_random_backbone``
builds a small randomly initialised backbone, used for tests and dry runs of
the CLI where the real weights are unavailable.
"""
from __future__ import annotations

import gzip
import shutil
from pathlib import Path

import numpy as np
import torch

from .archive import PUBLISHED_MEAN, PUBLISHED_STD, card_from_weights, save_archive, save_model_card
from .model import CLIPModel, ModelSpec
from .tokenizer import bytes_to_unicode

_DROP = ("logit_bias",)


def state_dict_to_weights(state_dict) -> dict[str, np.ndarray]:
    out = {}
    for k, v in state_dict.items():
        if k in _DROP or k.endswith("attn_mask"):
            continue
        out[k] = v.detach().cpu().float().numpy() if v.is_floating_point() else v.detach().cpu().numpy()
    return out


def load_published_state_dict(path) -> dict:
    """State dict from an OpenAI release file (TorchScript archive or plain state dict)."""
    try:
        model = torch.jit.load(str(path), map_location="cpu")
        return model.state_dict()
    except RuntimeError:
        obj = torch.load(str(path), map_location="cpu", weights_only=True)
        return obj.get("state_dict", obj)


def convert_state_dict(state_dict, out_path, card_overrides=None, vocab_src=None) -> tuple[Path, Path]:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    weights = state_dict_to_weights(state_dict)
    card = card_from_weights(weights, **(card_overrides or {}))
    save_archive(weights, out_path)
    card_path = out_path.with_name(out_path.stem + ".card.json")
    save_model_card(card, card_path)
    if vocab_src is not None:
        shutil.copyfile(vocab_src, out_path.with_name("bpe_vocab.txt.gz"))
    return out_path, card_path


def write_tiny_vocab(path, words=("good", "bad", "photo", "bright", "dark", "clean", "noisy", "sharp", "blurry",
                                  "colorful", "dull", "high", "low", "quality", "happy", "sad")) -> int:
    """Write a small BPE vocabulary whose merges spell out ``words``; returns the token-table size."""
    b2u = bytes_to_unicode()
    merges = []
    seen = set()
    for w in words:
        sym = [b2u[b] for b in w.encode()]
        sym[-1] += "</w>"
        while len(sym) > 1:
            pair = (sym[0], sym[1])
            if pair not in seen:
                seen.add(pair)
                merges.append(pair)
            sym = [sym[0] + sym[1]] + sym[2:]
    text = "#version: tiny\n" + "\n".join(f"{a} {b}" for a, b in merges) + "\n"
    Path(path).write_bytes(gzip.compress(text.encode("utf-8"), mtime=0))
    return 512 + len(merges) + 2


def tiny_spec(variant="residual-attnpool", vocab_size=49408, image_size=64) -> ModelSpec:
    if variant == "residual-attnpool":
        return ModelSpec(variant, embed_dim=32, image_size=image_size, vision_layers=(1, 1, 1, 1), vision_width=8,
                         vision_heads=4, context_length=77, vocab_size=vocab_size, text_width=32, text_heads=2,
                         text_layers=1)
    return ModelSpec(variant, embed_dim=32, image_size=image_size, vision_layers=(2,), vision_width=32,
                     vision_heads=2, context_length=77, vocab_size=vocab_size, text_width=32, text_heads=2,
                     text_layers=1, patch_size=16)


def random_model(spec: ModelSpec, seed=0) -> CLIPModel:
    """Randomly initialised encoder pair (vanilla mode so every tensor exists)."""
    torch.manual_seed(seed)
    model = CLIPModel(spec, "vanilla")
    with torch.no_grad():
        for name, p in model.named_parameters():
            if p.ndim >= 2 or "embedding" in name:
                p.normal_(0.0, p[0].numel() ** -0.5 if p.ndim >= 2 else 0.1)
        for m in model.modules():
            if isinstance(m, torch.nn.BatchNorm2d):
                m.running_mean.normal_(0.0, 0.1)
                m.running_var.uniform_(0.5, 1.5)
                m.weight.uniform_(0.5, 1.5)
                m.bias.normal_(0.0, 0.1)
    return model


def write_random_backbone(out_dir, variant="residual-attnpool", seed=0, image_size=64, vocab_path=None):
    """Archive, card and vocab for a tiny random backbone. Returns (archive, card, vocab) paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if vocab_path is None:
        vocab_path = out_dir / "bpe_vocab.txt.gz"
        vocab_size = write_tiny_vocab(vocab_path)
    else:
        vocab_size = 49408
    spec = tiny_spec(variant, vocab_size, image_size)
    model = random_model(spec, seed)
    archive = out_dir / f"tiny-{variant}.npz"
    save_archive(state_dict_to_weights(model.state_dict()), archive)
    card = dict(variant=spec.variant, embed_dim=spec.embed_dim, image_size=spec.image_size,
                vision_layers=list(spec.vision_layers), vision_width=spec.vision_width,
                vision_heads=spec.vision_heads, patch_size=spec.patch_size, context_length=spec.context_length,
                vocab_size=spec.vocab_size, text_width=spec.text_width, text_heads=spec.text_heads,
                text_layers=spec.text_layers, activation=spec.activation,
                mean=list(PUBLISHED_MEAN), std=list(PUBLISHED_STD))
    card_path = archive.with_name(archive.stem + ".card.json")
    save_model_card(card, card_path)
    return archive, card_path, Path(vocab_path)
