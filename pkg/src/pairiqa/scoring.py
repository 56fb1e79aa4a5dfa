"""Antonym-pair scoring math on precomputed embeddings.

Everything here is a pure function over numpy vectors; the encoder that
produced the vectors is irrelevant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, ContractViolation, DegenerateInputError
from .prompts import PromptPair


@dataclass(frozen=True)
class AttributeScore:
    attribute: str
    s1: float
    s2: float
    score: float
    positive_prompt: str
    negative_prompt: str


@dataclass(frozen=True)
class Comparison:
    choice: str  # "A" or "B"
    tie: bool
    score_a: float
    score_b: float

    @property
    def decision(self) -> str:
        """Label as consumed by :func:`pairiqa.metrics.pairwise_accuracy`."""
        return "tie" if self.tie else self.choice


def as_embedding(values) -> np.ndarray:
    """Validate and return a 1-D float64 embedding vector."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ContractViolation(f"embedding must be a non-empty 1-D vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ContractViolation("embedding contains NaN or Inf")
    return x


def cosine_similarity(x, t) -> float:
    x = as_embedding(x)
    t = as_embedding(t)
    if x.shape != t.shape:
        raise ContractViolation(f"dimension mismatch: {x.shape[0]} vs {t.shape[0]}")
    nx = float(np.linalg.norm(x))
    nt = float(np.linalg.norm(t))
    if nx == 0.0 or nt == 0.0:
        raise DegenerateInputError("cosine similarity undefined for a zero-norm embedding")
    c = float(np.dot(x, t)) / (nx * nt)
    # rounding can push |c| a hair past 1
    return min(1.0, max(-1.0, c))


def single_prompt_score(x, t) -> float:
    """Naive one-prompt score: the raw cosine to a single prompt."""
    return cosine_similarity(x, t)


def pair_score(s1: float, s2: float, scale: float = 1.0) -> float:
    """Softmax over two similarities, returning the weight on the first.

    ``scale`` multiplies both similarities before the softmax. The default of
    1.0 exponentiates raw cosines; the pretrained logit scale is not applied.
    """
    if not (math.isfinite(s1) and math.isfinite(s2)):
        raise ContractViolation(f"pair_score needs finite inputs, got {s1!r}, {s2!r}")
    if not (math.isfinite(scale) and scale > 0):
        raise ContractViolation(f"scale must be positive and finite, got {scale!r}")
    d = scale * (s2 - s1)
    # e^s1 / (e^s1 + e^s2) == 1 / (1 + e^(s2 - s1)), evaluated without overflow
    if d < 0:
        return 1.0 / (1.0 + math.exp(d))
    e = math.exp(-d)
    return e / (1.0 + e)


def score_image(image_embedding, pair: PromptPair, text_embeddings, scale: float = 1.0) -> AttributeScore:
    """Score one image against an antonym pair.

    ``text_embeddings`` must be ordered (positive, negative) to match ``pair``;
    a swapped order cannot be detected here and yields ``1 - score``.
    """
    t_pos, t_neg = text_embeddings
    s1 = cosine_similarity(image_embedding, t_pos)
    s2 = cosine_similarity(image_embedding, t_neg)
    return AttributeScore(
        attribute=pair.attribute,
        s1=s1,
        s2=s2,
        score=pair_score(s1, s2, scale),
        positive_prompt=pair.positive_text,
        negative_prompt=pair.negative_text,
    )


TextEmbeddingProvider = Callable[[PromptPair], tuple]


def score_attributes(image_embedding, pairs: Sequence[PromptPair], text_embedding_provider: TextEmbeddingProvider,
                     scale: float = 1.0) -> list[AttributeScore]:
    """Score an image on several attributes at once (radar-chart style output).

    ``text_embedding_provider(pair)`` returns the (positive, negative) text
    embeddings for a pair.
    """
    if not pairs:
        raise ConfigurationError("score_attributes needs at least one prompt pair")
    names = [p.attribute for p in pairs]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ConfigurationError(f"duplicate attribute names: {', '.join(dupes)}")
    x = as_embedding(image_embedding)
    return [score_image(x, p, text_embedding_provider(p), scale) for p in pairs]


def compare_images(embedding_a, embedding_b, pair: PromptPair, text_embeddings, scale: float = 1.0) -> Comparison:
    """Pick the image that better matches the positive prompt of ``pair``.

    Exact ties resolve to "A" with ``tie=True``.
    """
    a = score_image(embedding_a, pair, text_embeddings, scale).score
    b = score_image(embedding_b, pair, text_embeddings, scale).score
    if a > b:
        return Comparison("A", False, a, b)
    if b > a:
        return Comparison("B", False, a, b)
    return Comparison("A", True, a, b)
