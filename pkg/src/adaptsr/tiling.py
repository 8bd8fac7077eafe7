"""Fixed-size overlapping tiles and Gaussian-weighted reassembly."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class TilingError(ValueError):
    pass


@dataclass(frozen=True)
class TileLayout:
    canvas: tuple[int, int]
    tile_size: int
    overlap: int
    origins: tuple[tuple[int, int], ...]

    def window(self, idx: int) -> tuple[slice, slice]:
        r, c = self.origins[idx]
        return slice(r, r + self.tile_size), slice(c, c + self.tile_size)


def _axis_origins(dim: int, tile: int, stride: int) -> list[int]:
    origins = [0]
    while origins[-1] + tile < dim:
        nxt = origins[-1] + stride
        if nxt + tile > dim:
            nxt = dim - tile
        origins.append(nxt)
    return origins


def slice_canvas(canvas: Sequence[int], tile_size: int, overlap: int) -> TileLayout:
    h, w = int(canvas[0]), int(canvas[1])
    if tile_size < 1 or tile_size > min(h, w):
        raise TilingError(f"tile {tile_size} does not fit canvas {h}x{w}")
    if not 0 <= overlap < tile_size:
        raise TilingError(f"overlap must satisfy 0 <= overlap < tile_size, got {overlap}")
    stride = tile_size - overlap
    rows = _axis_origins(h, tile_size, stride)
    cols = _axis_origins(w, tile_size, stride)
    return TileLayout((h, w), tile_size, overlap, tuple(itertools.product(rows, cols)))


def _center_distance(n: int) -> np.ndarray:
    # distance to the nearest center pixel: two centers when n is even
    d = np.abs(np.arange(n, dtype=np.float64) - (n - 1) / 2.0)
    if n % 2 == 0:
        d -= 0.5
    return d


def gaussian_weight_map(tile_size: int, sigma: float) -> np.ndarray:
    """Separable Gaussian with value 1 on the center pixel(s)."""
    if not sigma > 0:
        raise TilingError("sigma must be positive")
    g = np.exp(-(_center_distance(tile_size) ** 2) / (2.0 * sigma * sigma))
    return np.outer(g, g)


@dataclass
class BlendMap:
    """Per-tile weights normalized so they sum to one on every canvas pixel."""

    weights: list[np.ndarray]
    normalization: np.ndarray


def blend_map(layout: TileLayout, sigma: float) -> BlendMap:
    raw = gaussian_weight_map(layout.tile_size, sigma)
    den = np.zeros(layout.canvas)
    for i in range(len(layout.origins)):
        den[layout.window(i)] += raw
    if np.any(den <= 0.0):
        raise TilingError("layout leaves canvas pixels without positive blend weight")
    weights = [raw / den[layout.window(i)] for i in range(len(layout.origins))]
    return BlendMap(weights, den)


def integrate_regions(tiles: Sequence[np.ndarray], layout: TileLayout, sigma: float) -> np.ndarray:
    """Blend finished tile contents, given in layout order, onto the canvas."""
    if len(tiles) != len(layout.origins):
        raise TilingError(f"expected {len(layout.origins)} tiles, got {len(tiles)}")
    bmap = blend_map(layout, sigma)
    extra = np.shape(tiles[0])[2:]
    out = np.zeros(layout.canvas + tuple(extra))
    for i, tile in enumerate(tiles):
        tile = np.asarray(tile, dtype=np.float64)
        if tile.shape[:2] != (layout.tile_size, layout.tile_size):
            raise TilingError(f"tile {i} has shape {tile.shape}, expected {layout.tile_size} square")
        w = bmap.weights[i]
        if tile.ndim == 3:
            w = w[..., None]
        out[layout.window(i)] += w * tile
    return out
