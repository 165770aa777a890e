"""Image loading and resize-then-crop preprocessing."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from ..errors import DecodeError, ImageIOError

# full-scale pipeline and the matching desk-scale pair (same 4:3 ratio)
RESIZE, CROP = 512, 384
TINY_RESIZE, TINY_CROP = 86, 64


def default_resize(crop_size: int) -> int:
    """Resize edge that pairs with ``crop_size`` (512 for 384, 86 for 64)."""
    return {CROP: RESIZE, TINY_CROP: TINY_RESIZE}.get(crop_size, int(round(crop_size * RESIZE / CROP)))


def load_image(path) -> Image.Image:
    path = Path(path)
    if not path.exists():
        raise ImageIOError(f"image file not found: {path}")
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("L", "P", "RGBA", "LA", "CMYK", "I;16"):
                im = im.convert("RGB")
            return im if im.mode == "RGB" else im.convert("RGB")
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageIOError(f"cannot decode image {path}: {exc}") from exc


def _as_rgb(image) -> Image.Image:
    if isinstance(image, Image.Image):
        if image.mode != "RGB":
            raise DecodeError(f"expected an RGB image, got mode {image.mode!r}")
        return image
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DecodeError(f"expected an H x W x 3 array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        arr = np.clip(np.round(arr.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)
    return Image.fromarray(arr, mode="RGB")


def resize(image, size: int = RESIZE) -> np.ndarray:
    """Bilinear resize to ``size x size``; returns ``uint8`` H x W x 3."""
    im = _as_rgb(image)
    if im.size != (size, size):
        im = im.resize((size, size), Image.BILINEAR)
    return np.asarray(im, dtype=np.uint8)


def crop_offsets(size: int, crop: int, train_mode: bool, rng=None):
    if train_mode:
        if rng is None:
            raise ValueError("train-mode cropping needs a seeded generator")
        return int(rng.integers(0, size - crop + 1)), int(rng.integers(0, size - crop + 1))
    off = (size - crop) // 2
    return off, off


def to_tensor(arr: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(arr)).permute(2, 0, 1).float().div_(255.0)


def crop(resized: np.ndarray, crop_size: int, train_mode: bool, rng=None) -> torch.Tensor:
    top, left = crop_offsets(resized.shape[0], crop_size, train_mode, rng)
    return to_tensor(resized[top:top + crop_size, left:left + crop_size])


def preprocess(image, train_mode: bool, rng=None, resize_to: int = RESIZE,
               crop_size: int = CROP) -> torch.Tensor:
    """Resize, then random (train) or centre (eval) crop; returns 3 x crop x crop in [0, 1]."""
    return crop(resize(image, resize_to), crop_size, train_mode, rng)
