"""Deterministic stand-ins for the real backbone.

``MockEncoder`` satisfies the same interface as :class:`Backbone`, so the
scorer, harness, sweeps and tuner can all run without pretrained weights.
"""
from __future__ import annotations

import hashlib
import zlib

import numpy as np
import regex
import torch
from torch import nn

from ..errors import ConfigurationError, InputError
from ..imageio import check_image


def image_key(image) -> str:
    a = np.ascontiguousarray(check_image(image), dtype=np.float64)
    return hashlib.sha256(repr(a.shape).encode() + a.tobytes()).hexdigest()


def _hashed_vector(text: str, dim: int) -> np.ndarray:
    rng = np.random.default_rng(zlib.crc32(text.encode("utf-8")))
    return rng.standard_normal(dim)


class TinyTextEncoder(nn.Module):
    """Small differentiable text tower (float64) for prompt-tuning tests.

    Words hash into a fixed embedding table; a context block (L, width) is
    mapped to a feature by ``(mean(h) + h[-1]) @ out`` with
    ``h = tanh(ctx @ mix + pos[:L])``.
    """

    def __init__(self, dim=8, width=6, vocab=97, max_len=16, seed=0):
        super().__init__()
        g = torch.Generator().manual_seed(seed)
        self.width = width
        self.vocab = vocab
        self.table = nn.Parameter(torch.randn(vocab, width, generator=g, dtype=torch.float64), requires_grad=False)
        self.mix = nn.Parameter(torch.randn(width, width, generator=g, dtype=torch.float64) / width ** 0.5,
                                requires_grad=False)
        self.pos = nn.Parameter(0.1 * torch.randn(max_len, width, generator=g, dtype=torch.float64),
                                requires_grad=False)
        self.out = nn.Parameter(torch.randn(width, dim, generator=g, dtype=torch.float64), requires_grad=False)

    def ids(self, text: str) -> list[int]:
        return [zlib.crc32(w.encode()) % self.vocab for w in regex.findall(r"\w+|[^\w\s]", text.lower())]

    def content_token_embeddings(self, text: str) -> torch.Tensor:
        ids = self.ids(text)
        if not ids or len(ids) > self.pos.shape[0]:
            raise InputError(f"prompt {text!r} has {len(ids)} tokens; need 1..{self.pos.shape[0]}")
        return self.table[torch.tensor(ids)].detach().clone()

    def encode_context(self, ctx: torch.Tensor) -> torch.Tensor:
        if ctx.ndim != 2 or ctx.shape[1] != self.width or not 1 <= ctx.shape[0] <= self.pos.shape[0]:
            raise InputError(f"context must be (1..{self.pos.shape[0]}, {self.width}), got {tuple(ctx.shape)}")
        h = torch.tanh(ctx @ self.mix + self.pos[: ctx.shape[0]])
        return (h.mean(dim=0) + h[-1]) @ self.out


class MockEncoder:
    """Encoder built from fixed tables / functions.

    ``image_features`` is a callable ``image -> vector`` or a dict keyed by
    :func:`image_key`. Texts come from ``text_table`` first, then from
    ``text_encoder`` (if given), else from a hash-seeded random vector.
    """

    def __init__(self, image_features, text_table=None, text_encoder: TinyTextEncoder | None = None,
                 dim: int | None = None, name: str = "mock"):
        self.image_features = image_features
        self.text_table = {k: np.asarray(v, dtype=np.float64) for k, v in (text_table or {}).items()}
        self.text_encoder = text_encoder
        if dim is None:
            if self.text_table:
                dim = len(next(iter(self.text_table.values())))
            elif text_encoder is not None:
                dim = text_encoder.out.shape[1]
            else:
                raise ConfigurationError("MockEncoder needs dim when it has no text table or text encoder")
        self.dim = dim
        self.fingerprint = "mock:" + name

    def embed_image(self, image) -> np.ndarray:
        if callable(self.image_features):
            return np.asarray(self.image_features(check_image(image)), dtype=np.float64)
        key = image_key(image)
        try:
            return np.asarray(self.image_features[key], dtype=np.float64)
        except KeyError:
            raise InputError("image not present in the mock image table") from None

    def embed_text(self, text: str) -> np.ndarray:
        if text in self.text_table:
            return self.text_table[text].copy()
        if self.text_encoder is not None:
            with torch.no_grad():
                return self.encode_context(self.content_token_embeddings(text)).numpy().astype(np.float64)
        return _hashed_vector(text, self.dim)

    def _require_text_encoder(self):
        if self.text_encoder is None:
            raise ConfigurationError("this mock has no differentiable text encoder")
        return self.text_encoder

    def content_token_embeddings(self, text: str) -> torch.Tensor:
        return self._require_text_encoder().content_token_embeddings(text)

    def encode_context(self, ctx: torch.Tensor) -> torch.Tensor:
        return self._require_text_encoder().encode_context(ctx)

    def weights_hash(self) -> str:
        h = hashlib.sha256(self.fingerprint.encode())
        if self.text_encoder is not None:
            for _, t in sorted(self.text_encoder.state_dict().items()):
                h.update(t.numpy().tobytes())
        return h.hexdigest()


def brightness_mock(name="brightness-mock") -> MockEncoder:
    """Image embedding (mean + eps, 1 - mean + eps); every shipped positive prompt is
    (1, 0) and every negative prompt (0, 1).

    Scores from this mock therefore increase strictly with mean pixel value
    for any shipped pair (and any template/preset combination).
    """
    from ..prompts import ADJECTIVE_PRESETS, TEMPLATES, PromptRegistry

    table = {}
    reg = PromptRegistry.default()
    pairs = [reg.get_pair(n).texts for n in reg.names()]
    for pos, neg in ADJECTIVE_PRESETS.values():
        pairs += [(p.replace("[text]", pos), p.replace("[text]", neg)) for p in TEMPLATES.values()]
    for pos, neg in pairs:
        table[pos] = (1.0, 0.0)
        table[neg] = (0.0, 1.0)
    return MockEncoder(lambda img: np.array([img.mean() + 1e-3, 1.0 - img.mean() + 1e-3]), table, name=name)
