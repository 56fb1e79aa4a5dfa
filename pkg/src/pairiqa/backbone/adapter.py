"""Loading a converted checkpoint and embedding images/prompts with it."""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np
import torch

from ..errors import AssetError, ConfigurationError, InputError
from ..imageio import check_image
from .archive import file_sha256, load_archive, load_model_card, spec_from_card
from .model import POS_MODES, VARIANTS, CLIPModel
from .surgery import POSITIONAL_KEYS, apply_positional_surgery
from .tokenizer import TokenSequence, Tokenizer

MIN_SIDE = 32


class Encoder(Protocol):
    """What scoring, the harness and the tuner need from a backbone.

    Any object with these members can stand in for :class:`Backbone`.
    """
    fingerprint: str

    def embed_image(self, image) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


class TunableEncoder(Encoder, Protocol):
    def content_token_embeddings(self, text: str) -> torch.Tensor: ...

    def encode_context(self, ctx: torch.Tensor) -> torch.Tensor: ...


@dataclass(frozen=True)
class BackboneConfig:
    checkpoint_path: str
    vocab_path: str
    model_card_path: str | None = None  # defaults to <checkpoint>.card.json
    variant: str = "residual-attnpool"
    pos_embedding_mode: str = "removed"
    native_input_size: int | None = None  # taken from the model card when None
    max_pixels: int = 16_000_000

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown backbone variant {self.variant!r}; known: {', '.join(VARIANTS)}")
        if self.pos_embedding_mode not in POS_MODES:
            raise ConfigurationError(
                f"unknown positional embedding mode {self.pos_embedding_mode!r}; known: {', '.join(POS_MODES)}")

    @property
    def card_path(self) -> Path:
        if self.model_card_path:
            return Path(self.model_card_path)
        p = Path(self.checkpoint_path)
        return p.with_name(p.stem + ".card.json")


def weights_hash(module: torch.nn.Module) -> str:
    h = hashlib.sha256()
    for name, t in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(t.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


class Backbone:
    """Frozen image/text encoder pair. Safe to share across threads once built."""

    def __init__(self, model: CLIPModel, tokenizer: Tokenizer, card: dict, config: BackboneConfig,
                 archive_sha256: str = ""):
        self.model = model.eval().requires_grad_(False)
        self.tokenizer = tokenizer
        self.card = card
        self.config = config
        self.mode = config.pos_embedding_mode
        self.variant = config.variant
        self.native_size = int(config.native_input_size or card["image_size"])
        self.mean = np.asarray(card["mean"], dtype=np.float32)
        self.std = np.asarray(card["std"], dtype=np.float32)
        self.degraded = self.variant == "patch-transformer" and self.mode == "removed"
        ident = {"archive": archive_sha256, "card": card, "variant": self.variant, "mode": self.mode,
                 "native": self.native_size}
        self.fingerprint = hashlib.sha256(json.dumps(ident, sort_keys=True).encode()).hexdigest()

    @property
    def dim(self) -> int:
        return int(self.card["embed_dim"])

    def check_size(self, h: int, w: int) -> None:
        if self.mode == "vanilla":
            if (h, w) != (self.native_size, self.native_size):
                raise InputError(
                    f"vanilla positional embedding needs {self.native_size}x{self.native_size} input, got {h}x{w}; "
                    f"resize/crop first (pairiqa.imageio.resize_center_crop)")
            return
        if min(h, w) < MIN_SIDE:
            raise InputError(f"image sides must be >= {MIN_SIDE}px, got {h}x{w}")
        if h * w > self.config.max_pixels:
            raise InputError(f"{h}x{w} image exceeds the max_pixels budget of {self.config.max_pixels}; "
                             f"downscale it or raise max_pixels")

    def pixels(self, image) -> torch.Tensor:
        a = check_image(image)
        self.check_size(a.shape[0], a.shape[1])
        x = (a.astype(np.float32) - self.mean) / self.std
        return torch.from_numpy(np.ascontiguousarray(x.transpose(2, 0, 1)))[None]

    def embed_image(self, image) -> np.ndarray:
        """Embedding of an (H, W, 3) [0, 1] image. No resizing happens here."""
        with torch.inference_mode():
            out = self.model.encode_image(self.pixels(image))
        return out[0].double().numpy()

    def tokenize(self, text: str) -> TokenSequence:
        return self.tokenizer(text)

    def embed_tokens(self, tokens: TokenSequence) -> np.ndarray:
        if len(tokens.ids) > self.model.spec.context_length:
            raise InputError(f"token sequence of length {len(tokens.ids)} exceeds the context limit "
                             f"{self.model.spec.context_length}")
        ids = torch.tensor([tokens.ids], dtype=torch.long)
        with torch.inference_mode():
            out = self.model.encode_text(ids)
        return out[0].double().numpy()

    def embed_text(self, text: str) -> np.ndarray:
        return self.embed_tokens(self.tokenize(text))

    # differentiable path used by prompt tuning

    def content_token_embeddings(self, text: str) -> torch.Tensor:
        """Token embeddings of the prompt, without start/end/padding tokens."""
        tokens = self.tokenize(text)
        ids = torch.tensor(tokens.ids[1:tokens.eot_index], dtype=torch.long)
        return self.model.token_embedding.weight[ids].detach().clone()

    def encode_context(self, ctx: torch.Tensor) -> torch.Tensor:
        """Text feature for a (L, width) block of prompt token embeddings; differentiable in ``ctx``."""
        n = ctx.shape[0]
        limit = self.model.spec.context_length
        if ctx.ndim != 2 or ctx.shape[1] != self.model.spec.text_width or n + 2 > limit:
            raise InputError(f"context must be (L <= {limit - 2}, {self.model.spec.text_width}), got {tuple(ctx.shape)}")
        table = self.model.token_embedding.weight
        sot = table[self.tokenizer.sot_id][None]
        eot = table[self.tokenizer.eot_id][None]
        pad = table[self.tokenizer.pad_id][None].expand(limit - n - 2, -1)
        seq = torch.cat([sot.to(ctx.dtype), ctx, eot.to(ctx.dtype), pad.to(ctx.dtype)], dim=0)
        return self.model.encode_token_embeddings(seq[None], torch.tensor([n + 1]))[0]

    def weights_hash(self) -> str:
        return weights_hash(self.model)


def _expected_manifest(model: CLIPModel) -> str:
    return "\n".join(f"  {k}: {tuple(v.shape)}" for k, v in model.state_dict().items())


def load_backbone(config: BackboneConfig) -> Backbone:
    card = load_model_card(config.card_path)
    if card["variant"] != config.variant:
        raise ConfigurationError(f"config asks for {config.variant!r} but the model card describes {card['variant']!r}")
    weights = load_archive(config.checkpoint_path)
    other = [v for k, v in POSITIONAL_KEYS.items() if k != config.variant]
    if any(key in weights for key in other) and POSITIONAL_KEYS[config.variant] not in weights:
        raise ConfigurationError(f"checkpoint {config.checkpoint_path} holds a different variant than {config.variant!r}")
    vocab = Path(config.vocab_path)
    if not vocab.is_file():
        raise AssetError(f"vocabulary file not found: {vocab}")
    spec = spec_from_card(card)
    tokenizer = Tokenizer.from_file(vocab, n_merges=spec.vocab_size - 512 - 2, context_length=spec.context_length)
    if tokenizer.vocab_size != spec.vocab_size:
        raise AssetError(f"vocabulary {vocab} yields {tokenizer.vocab_size} tokens, model expects {spec.vocab_size}")

    model = CLIPModel(spec, config.pos_embedding_mode)
    try:
        weights = apply_positional_surgery(weights, config.pos_embedding_mode)
    except ConfigurationError as e:
        raise AssetError(f"{e}\nexpected tensors:\n{_expected_manifest(model)}") from None
    expected = model.state_dict()
    missing = [k for k in expected if k not in weights]
    bad_shape = [f"{k}: archive {tuple(weights[k].shape)} vs expected {tuple(v.shape)}"
                 for k, v in expected.items() if k in weights and tuple(weights[k].shape) != tuple(v.shape)]
    if missing or bad_shape:
        detail = "".join(f"\n  missing {k}" for k in missing) + "".join(f"\n  {s}" for s in bad_shape)
        raise AssetError(f"checkpoint {config.checkpoint_path} does not match the model card:{detail}\n"
                         f"expected tensors:\n{_expected_manifest(model)}")
    state = {k: torch.from_numpy(np.array(weights[k], dtype=expected[k].numpy().dtype)) for k in expected}
    model.load_state_dict(state, strict=True)
    backbone = Backbone(model, tokenizer, card, config, file_sha256(config.checkpoint_path))
    if backbone.degraded:
        warnings.warn("patch-transformer with the positional embedding removed is known to lose most of its "
                      "correlation with human ratings; use it for ablations only", stacklevel=2)
    return backbone
