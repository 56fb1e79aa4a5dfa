"""Synthetic attribute degradations and score-vs-level sweeps.

Each adjuster is a closed-form per-pixel (or 3x3 neighbourhood) operator so a
sweep is reproducible bit for bit. Level orientation: a larger level always
means more of the attribute named by the positive prompt.

* brightness    out = clip(factor * in)
* noisiness     out = clip(in + N(0, sigma^2)); sweep level = -sigma
* colorfulness  out = clip(gray + factor * (in - gray)), gray = Rec. 601 luma
* sharpness     out = clip(blur + factor * (in - blur)), blur = SMOOTH_KERNEL
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from . import metrics
from .errors import ConfigurationError, InputError
from .imageio import check_image
from .prompts import PromptPair, get_pair

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# 3x3 smoothing kernel, normalised; borders use edge replication
SMOOTH_KERNEL = np.array([[1.0, 1.0, 1.0], [1.0, 5.0, 1.0], [1.0, 1.0, 1.0]]) / 13.0

ATTRIBUTES = ("brightness", "noisiness", "colorfulness", "sharpness")

DEFAULT_LEVELS = {
    "brightness": tuple(np.round(np.linspace(0.2, 2.0, 10), 6)),
    "noisiness": tuple(-np.round(np.linspace(0.5, 0.0, 11), 6) + 0.0),
    "colorfulness": tuple(np.round(np.linspace(0.0, 2.0, 11), 6)),
    "sharpness": tuple(np.round(np.linspace(0.0, 3.0, 11), 6)),
}


def _check_factor(value, name):
    if not np.isfinite(value) or value < 0:
        raise InputError(f"{name} must be finite and >= 0, got {value}")


def adjust_brightness(image, factor: float) -> np.ndarray:
    a = check_image(image)
    _check_factor(factor, "brightness factor")
    if factor == 1.0:
        return a.copy()
    return np.clip(a * factor, 0.0, 1.0)


def noise_field(shape, sigma: float, seed) -> np.ndarray:
    """The zero-mean Gaussian field ``adjust_noise`` adds, before clipping."""
    return np.random.default_rng(seed).normal(0.0, sigma, size=shape)


def adjust_noise(image, sigma: float, seed=0) -> np.ndarray:
    a = check_image(image)
    _check_factor(sigma, "noise sigma")
    if sigma == 0.0:
        return a.copy()
    return np.clip(a + noise_field(a.shape, sigma, seed), 0.0, 1.0)


def luma(image) -> np.ndarray:
    a = np.asarray(image)
    w = LUMA_WEIGHTS
    return w[0] * a[..., 0] + w[1] * a[..., 1] + w[2] * a[..., 2]


def adjust_colorfulness(image, factor: float) -> np.ndarray:
    a = check_image(image)
    _check_factor(factor, "colorfulness factor")
    if factor == 1.0:
        return a.copy()
    gray = luma(a)[..., None]
    if factor == 0.0:
        return np.clip(np.repeat(gray, 3, axis=2), 0.0, 1.0)
    return np.clip(gray + factor * (a - gray), 0.0, 1.0)


def blur(image) -> np.ndarray:
    a = np.asarray(image, dtype=np.float64)
    return np.stack([ndimage.correlate(a[..., c], SMOOTH_KERNEL, mode="nearest") for c in range(3)], axis=2)


def adjust_sharpness(image, factor: float) -> np.ndarray:
    a = check_image(image)
    _check_factor(factor, "sharpness factor")
    if factor == 1.0:
        return a.copy()
    b = blur(a)
    if factor == 0.0:
        return np.clip(b, 0.0, 1.0)
    return np.clip(b + factor * (a - b), 0.0, 1.0)


def apply_level(image, attribute: str, level: float, seed=0) -> np.ndarray:
    """Apply ``attribute`` at sweep ``level`` (noisiness levels are -sigma)."""
    if attribute == "brightness":
        return adjust_brightness(image, level)
    if attribute == "noisiness":
        if level > 0:
            raise InputError(f"noisiness levels are -sigma and must be <= 0, got {level}")
        return adjust_noise(image, -level + 0.0, seed)
    if attribute == "colorfulness":
        return adjust_colorfulness(image, level)
    if attribute == "sharpness":
        return adjust_sharpness(image, level)
    raise ConfigurationError(f"unknown degradation attribute {attribute!r}; known: {', '.join(ATTRIBUTES)}")


@dataclass
class DegradationSpec:
    attribute: str
    levels: Sequence[float] = ()
    seed: int = 0

    def __post_init__(self):
        if self.attribute not in ATTRIBUTES:
            raise ConfigurationError(f"unknown degradation attribute {self.attribute!r}; known: {', '.join(ATTRIBUTES)}")
        if not len(self.levels):
            self.levels = DEFAULT_LEVELS[self.attribute]
        self.levels = tuple(float(v) for v in self.levels)
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ConfigurationError(f"levels must be strictly increasing, got {self.levels}")


@dataclass
class SweepReport:
    attribute: str
    levels: list
    per_level_scores: dict
    level_correlation: float | None
    prompt: tuple = ()
    seed: int = 0
    images: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "attribute": self.attribute,
            "levels": list(self.levels),
            "per_level_scores": {repr(k): list(v) for k, v in self.per_level_scores.items()},
            "level_correlation": self.level_correlation,
            "prompt": list(self.prompt),
            "seed": self.seed,
            "images": list(self.images),
        }


Scorer = Callable[[np.ndarray, PromptPair], float]


def run_sweep(images, spec: DegradationSpec, scorer: Scorer, pair: PromptPair | None = None,
              names: Sequence[str] | None = None) -> SweepReport:
    """Degrade every image at every level and score it with the attribute's prompt pair.

    ``scorer(image, pair)`` returns a float. Noise for (image i, level j) is
    drawn from a generator seeded with ``(spec.seed, i, j)``. The correlation
    summary is ``None`` for single-level sweeps.
    """
    if not len(images):
        raise InputError("run_sweep needs at least one image")
    pair = pair or get_pair(spec.attribute)
    per_level = {}
    for j, level in enumerate(spec.levels):
        per_level[level] = [
            float(scorer(apply_level(img, spec.attribute, level, seed=(spec.seed, i, j)), pair))
            for i, img in enumerate(images)
        ]
    corr = metrics.level_correlation(per_level) if len(per_level) >= 2 else None
    return SweepReport(spec.attribute, list(spec.levels), per_level, corr, pair.texts, spec.seed,
                       list(names) if names is not None else [])
