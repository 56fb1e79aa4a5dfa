"""Image buffers: float RGB arrays of shape (H, W, 3) with values in [0, 1]."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import AssetError, InputError


def check_image(image) -> np.ndarray:
    """Validate an image buffer and return it as a float array (no copy when possible)."""
    a = np.asarray(image)
    if a.ndim != 3 or a.shape[2] != 3:
        raise InputError(f"image must have shape (H, W, 3), got {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise InputError(f"image must be at least 1x1, got {a.shape[:2]}")
    if not np.issubdtype(a.dtype, np.floating):
        raise InputError(f"image must be a float array in [0, 1], got dtype {a.dtype}")
    if not np.all(np.isfinite(a)) or a.min() < 0.0 or a.max() > 1.0:
        raise InputError("image values must be finite and within [0, 1]")
    return a


def from_pil(img: Image.Image) -> np.ndarray:
    return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0


def to_pil(image) -> Image.Image:
    a = check_image(image)
    return Image.fromarray(np.round(a * 255.0).astype(np.uint8), "RGB")


def resize_short_side(img: Image.Image, short_side: int) -> Image.Image:
    w, h = img.size
    if min(w, h) == short_side:
        return img
    s = short_side / min(w, h)
    size = (short_side, round(h * s)) if w <= h else (round(w * s), short_side)
    return img.resize(size, Image.BICUBIC)


def resize_center_crop(img: Image.Image, size: int) -> Image.Image:
    """Bicubic resize of the short side to ``size`` then a central size x size crop."""
    img = resize_short_side(img, size)
    w, h = img.size
    left, top = (w - size) // 2, (h - size) // 2
    return img.crop((left, top, left + size, top + size))


def load_image(path, short_side: int | None = None) -> np.ndarray:
    try:
        with Image.open(path) as img:
            img = img.convert("RGB")
    except (OSError, ValueError) as e:
        raise AssetError(f"cannot read image {path}: {e}") from e
    if short_side:
        img = resize_short_side(img, short_side)
    return from_pil(img)


def save_image(image, path) -> None:
    to_pil(image).save(Path(path))
