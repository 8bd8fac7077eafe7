"""8-bit image IO (PNG, PGM) and bicubic upsampling."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

KEYS_A = -0.5


def load_image(path: str | Path) -> np.ndarray:
    """Read an image as float64 in [0, 1]: H x W for gray, H x W x 3 for color."""
    with Image.open(path) as im:
        if im.mode.startswith("I"):
            arr = np.asarray(im, dtype=np.float64)
            return arr / (65535.0 if arr.max() > 255 else 255.0)
        if im.mode in ("1", "L", "LA"):
            im = im.convert("L")
        elif im.mode != "RGB":
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    return arr


def quantize(img: np.ndarray) -> np.ndarray:
    """[0, 1] floats to uint8; ties round half to even."""
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(path: str | Path, img: np.ndarray) -> None:
    data = quantize(img)
    mode = "L" if data.ndim == 2 else "RGB"
    Image.fromarray(data, mode=mode).save(path, format="PNG")


def _keys(x: np.ndarray) -> np.ndarray:
    x = np.abs(x)
    a = KEYS_A
    return np.where(
        x <= 1.0,
        (a + 2.0) * x**3 - (a + 3.0) * x**2 + 1.0,
        np.where(x < 2.0, a * x**3 - 5.0 * a * x**2 + 8.0 * a * x - 4.0 * a, 0.0),
    )


def _bicubic_matrix(n_in: int, scale: int) -> np.ndarray:
    n_out = n_in * scale
    src = (np.arange(n_out) + 0.5) / scale - 0.5
    base = np.floor(src).astype(int)
    mat = np.zeros((n_out, n_in))
    for off in range(-1, 3):
        idx = base + off
        w = _keys(src - idx)
        np.add.at(mat, (np.arange(n_out), np.clip(idx, 0, n_in - 1)), w)
    return mat


def upsample_bicubic(img: np.ndarray, scale: int) -> np.ndarray:
    """Separable Keys bicubic with replicated borders."""
    if scale == 1:
        return np.array(img, dtype=np.float64)
    rows = _bicubic_matrix(img.shape[0], scale)
    cols = _bicubic_matrix(img.shape[1], scale)
    return np.einsum("ij,jk...,lk->il...", rows, img, cols)
