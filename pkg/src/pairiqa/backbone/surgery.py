"""Positional-embedding surgery on a flat weights mapping."""
from __future__ import annotations

import numpy as np
import torch

from ..errors import ConfigurationError
from .model import POS_MODES, resample_grid

POSITIONAL_KEYS = {
    "residual-attnpool": "visual.attnpool.positional_embedding",
    "patch-transformer": "visual.positional_embedding",
}


def positional_key(weights) -> str:
    for key in POSITIONAL_KEYS.values():
        if key in weights:
            return key
    raise ConfigurationError(f"no image positional embedding among weights (expected one of "
                             f"{', '.join(POSITIONAL_KEYS.values())})")


def apply_positional_surgery(weights: dict, mode: str) -> dict:
    """Return the weights to load for positional ``mode``.

    ``vanilla`` and ``interpolated`` keep every tensor untouched (interpolated
    resamples at embed time, once the input grid is known); ``removed`` drops
    the image positional embedding so the encoder is built without one.
    The input mapping is never modified.
    """
    if mode not in POS_MODES:
        raise ConfigurationError(f"unknown positional embedding mode {mode!r}; known: {', '.join(POS_MODES)}")
    key = positional_key(weights)
    if mode == "removed":
        return {k: v for k, v in weights.items() if k != key}
    return dict(weights)


def interpolate_positional_embedding(pos, src_grid, dst_grid) -> np.ndarray:
    """Resample a (1 + h*w, C) embedding (leading class/mean slot kept) to a new grid."""
    p = torch.as_tensor(np.asarray(pos))
    out = torch.cat([p[:1], resample_grid(p[1:], tuple(src_grid), tuple(dst_grid))], dim=0)
    return out.numpy()
