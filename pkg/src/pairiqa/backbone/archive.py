"""Checkpoint archive and model card files.

Archive: a NumPy ``.npz`` file (zip of ``.npy`` members), one member per
tensor, keyed by its parameter name, e.g. ``visual.attnpool.k_proj.weight``.
Each member carries its own shape and dtype, so loading needs neither torch
serialization nor pickle.

Model card: JSON sidecar with the architecture hyper-parameters and the
pixel normalisation constants of the training recipe::

    {"variant": "residual-attnpool", "embed_dim": 1024, "image_size": 224,
     "vision_layers": [3, 4, 6, 3], "vision_width": 64, "vision_heads": 32,
     "patch_size": 32, "context_length": 77, "vocab_size": 49408,
     "text_width": 512, "text_heads": 8, "text_layers": 12,
     "activation": "quick_gelu",
     "mean": [0.48145466, 0.4578275, 0.40821073],
     "std": [0.26862954, 0.26130258, 0.27577711]}
"""
from __future__ import annotations

import hashlib
import json
import zipfile
from pathlib import Path

import numpy as np

from ..errors import AssetError
from .model import VARIANTS, ModelSpec

PUBLISHED_MEAN = (0.48145466, 0.4578275, 0.40821073)
PUBLISHED_STD = (0.26862954, 0.26130258, 0.27577711)

_CARD_FIELDS = ("variant", "embed_dim", "image_size", "vision_layers", "vision_width", "vision_heads",
                "context_length", "vocab_size", "text_width", "text_heads", "text_layers")


def save_archive(weights: dict, path) -> None:
    arrays = {k: np.array(v, order="C") for k, v in weights.items()}
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_archive(path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise AssetError(f"checkpoint archive not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as z:
            return {k: z[k] for k in z.files}
    except (OSError, ValueError, zipfile.BadZipFile, EOFError) as e:
        raise AssetError(f"corrupt checkpoint archive {path}: {e}") from e


def file_sha256(path, chunk=1 << 20) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(chunk), b""):
            h.update(block)
    return h.hexdigest()


def save_model_card(card: dict, path) -> None:
    Path(path).write_text(json.dumps(card, indent=2) + "\n", encoding="utf-8")


def load_model_card(path) -> dict:
    path = Path(path)
    try:
        card = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise AssetError(f"model card not found: {path}") from None
    except (OSError, json.JSONDecodeError) as e:
        raise AssetError(f"corrupt model card {path}: {e}") from e
    missing = [k for k in _CARD_FIELDS + ("mean", "std") if k not in card]
    if missing:
        raise AssetError(f"model card {path} lacks fields: {', '.join(missing)}")
    if card["variant"] not in VARIANTS:
        raise AssetError(f"model card {path} has unknown variant {card['variant']!r}")
    return card


def spec_from_card(card: dict) -> ModelSpec:
    return ModelSpec(
        variant=card["variant"],
        embed_dim=int(card["embed_dim"]),
        image_size=int(card["image_size"]),
        vision_layers=tuple(int(v) for v in card["vision_layers"]),
        vision_width=int(card["vision_width"]),
        vision_heads=int(card["vision_heads"]),
        context_length=int(card["context_length"]),
        vocab_size=int(card["vocab_size"]),
        text_width=int(card["text_width"]),
        text_heads=int(card["text_heads"]),
        text_layers=int(card["text_layers"]),
        patch_size=int(card.get("patch_size", 32)),
        activation=card.get("activation", "quick_gelu"),
    )


def _count(weights, prefix, depth):
    return len({k.split(".")[depth] for k in weights if k.startswith(prefix)})


def card_from_weights(weights: dict, **overrides) -> dict:
    """Infer a model card from parameter shapes (published-checkpoint conventions).

    Head counts assume 64-wide heads, as in the published models; pass
    overrides for anything else.
    """
    vit = "visual.proj" in weights
    shape = lambda k: tuple(np.asarray(weights[k]).shape)
    if vit:
        width = shape("visual.conv1.weight")[0]
        patch = shape("visual.conv1.weight")[-1]
        grid = round((shape("visual.positional_embedding")[0] - 1) ** 0.5)
        card = dict(variant="patch-transformer", vision_layers=[_count(weights, "visual.transformer.resblocks.", 3)],
                    vision_width=width, vision_heads=width // 64, image_size=patch * grid, patch_size=patch)
    else:
        layers = [_count(weights, f"visual.layer{b}.", 2) for b in (1, 2, 3, 4)]
        width = shape("visual.layer1.0.conv1.weight")[0]
        grid = round((shape("visual.attnpool.positional_embedding")[0] - 1) ** 0.5)
        card = dict(variant="residual-attnpool", vision_layers=layers, vision_width=width,
                    vision_heads=width * 32 // 64, image_size=grid * 32, patch_size=32)
    text_width = shape("ln_final.weight")[0]
    card.update(
        embed_dim=shape("text_projection")[1],
        context_length=shape("positional_embedding")[0],
        vocab_size=shape("token_embedding.weight")[0],
        text_width=text_width,
        text_heads=text_width // 64,
        text_layers=_count(weights, "transformer.resblocks.", 2),
        activation="quick_gelu",
        mean=list(PUBLISHED_MEAN),
        std=list(PUBLISHED_STD),
    )
    card.update(overrides)
    return card
