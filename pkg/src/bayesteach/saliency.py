"""Saliency rendering: probability maps to hot-colormap RGB rasters.

The colormap is pinned to fixed breakpoints so output is bit-exact
everywhere: red ramps linearly over [0, 0.365079], green over
[0.365079, 0.746032], blue over [0.746032, 1]. Channels are clamped to
[0, 1] and quantised with round-half-away-from-zero on 255*c, which
maps 0 to pure black and 1 to pure white.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import OutOfRange
from .model import ProbMap

RED_END = 0.365079
GREEN_END = 0.746032


@dataclass(frozen=True)
class RgbRaster:
    """8-bit RGB pixels, shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ValueError("pixels must be a (height, width, 3) uint8 array")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def hot_colormap(v: float) -> tuple[int, int, int]:
    """Map one value in [0, 1] to an (r, g, b) byte triple."""
    v = float(v)
    if not (0.0 <= v <= 1.0):
        raise OutOfRange(f"colormap input {v!r} outside [0, 1]")
    r = min(max(v / RED_END, 0.0), 1.0)
    g = min(max((v - RED_END) / (GREEN_END - RED_END), 0.0), 1.0)
    b = min(max((v - GREEN_END) / (1.0 - GREEN_END), 0.0), 1.0)
    return (int(math.floor(255.0 * r + 0.5)),
            int(math.floor(255.0 * g + 0.5)),
            int(math.floor(255.0 * b + 0.5)))


def _quantize(channel: np.ndarray) -> np.ndarray:
    return np.floor(255.0 * np.clip(channel, 0.0, 1.0) + 0.5).astype(np.uint8)


def render_saliency(pmap: ProbMap) -> RgbRaster:
    """Apply the hot colormap to every pixel; dimensions are preserved
    and values are used as-is (no normalisation)."""
    v = pmap.values.astype(np.float64)
    r = _quantize(v / RED_END)
    g = _quantize((v - RED_END) / (GREEN_END - RED_END))
    b = _quantize((v - GREEN_END) / (1.0 - GREEN_END))
    return RgbRaster(np.stack([r, g, b], axis=2))


def render_grayscale(pmap: ProbMap) -> RgbRaster:
    """Plain grayscale rendering, used as the display image when no
    x-ray file accompanies a probability map."""
    v = pmap.values.astype(np.float64)
    gray = _quantize(v)
    return RgbRaster(np.stack([gray, gray, gray], axis=2))


def write_png(raster: RgbRaster, path) -> None:
    """Encode as 8-bit RGB PNG without alpha."""
    Image.fromarray(raster.pixels, mode="RGB").save(path, format="PNG")


def read_png(path) -> RgbRaster:
    arr = np.asarray(Image.open(path).convert("RGB"), dtype=np.uint8)
    return RgbRaster(arr)
