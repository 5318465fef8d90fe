"""Soft-threshold image classifier on per-pixel probability maps.

An image is summarised by its "admitted" pixels (per-pixel probability
above 0.05). Each admitted pixel j gets two features: x1, its own
probability, and x2, the fraction of all pixels occupied by admitted
pixels whose value does not exceed pixel j's. The pixel score is a
product of two logistic gates, p_j = sigmoid(w1*x1 - b1) * sigmoid(w2*x2 - b2),
and the image-level probability is the maximum p_j over admitted pixels.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfRange

ADMISSION_THRESHOLD = 0.05

ABSENT = 0
PRESENT = 1
LABEL_NAMES = {ABSENT: "absent", PRESENT: "present"}
LABEL_VALUES = {"absent": ABSENT, "present": PRESENT}


class ProbMap:
    """A width x height grid of per-pixel probabilities in [0, 1].

    Values are held as float32 (the on-disk precision); feature
    extraction widens to float64.
    """

    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.asarray(values, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"probability map must be 2-d and non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("probability map contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("probability map values must lie in [0, 1]")
        self.values = arr

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other):
        return isinstance(other, ProbMap) and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"ProbMap({self.width}x{self.height})"


@dataclass(frozen=True)
class ThetaParams:
    """Parameters of the two logistic gates: slopes w1, w2 and offsets b1, b2."""

    w1: float
    b1: float
    w2: float
    b2: float

    def __post_init__(self):
        for name in ("w1", "b1", "w2", "b2"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"theta parameter {name} must be finite, got {v!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.w1, self.b1, self.w2, self.b2], dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "ThetaParams":
        w1, b1, w2, b2 = (float(v) for v in a)
        return cls(w1, b1, w2, b2)


@dataclass(frozen=True)
class PixelFeatures:
    """Features of one admitted pixel: its row-major index, x1 and x2."""

    pixel_index: int
    x1: float
    x2: float

    def __post_init__(self):
        if not self.x1 > ADMISSION_THRESHOLD:
            raise ValueError(f"x1 must exceed {ADMISSION_THRESHOLD}, got {self.x1!r}")
        if not 0.0 < self.x2 <= 1.0:
            raise ValueError(f"x2 must lie in (0, 1], got {self.x2!r}")


def sigmoid(a):
    """Standard logistic function; works on scalars and arrays."""
    return 1.0 / (1.0 + np.exp(-a))


def admitted_feature_arrays(pmap: ProbMap):
    """Feature vectors of the admitted pixels as float64 arrays.

    Returns (indices, x1, x2) sorted by pixel index. x2 counts admitted
    pixels with value <= the pixel's own value (ties inclusive), divided
    by the total pixel count, so the brightest pixel of a fully admitted
    map gets x2 = 1.
    """
    flat = pmap.values.ravel()
    idx = np.flatnonzero(flat > ADMISSION_THRESHOLD)
    x1 = flat[idx].astype(np.float64)
    order = np.sort(x1)
    counts = np.searchsorted(order, x1, side="right")
    x2 = counts / float(flat.size)
    return idx, x1, x2


def compute_features(pmap: ProbMap) -> list[PixelFeatures]:
    """Per-pixel features for every admitted pixel, ordered by pixel index."""
    idx, x1, x2 = admitted_feature_arrays(pmap)
    return [PixelFeatures(int(i), float(a), float(b)) for i, a, b in zip(idx, x1, x2)]


def pixel_prob(features: PixelFeatures, theta: ThetaParams) -> float:
    """Score of one admitted pixel, strictly inside (0, 1)."""
    s1 = sigmoid(theta.w1 * features.x1 - theta.b1)
    s2 = sigmoid(theta.w2 * features.x2 - theta.b2)
    return float(s1 * s2)


def image_prob(pmap: ProbMap, theta: ThetaParams) -> float:
    """Image-level probability: the maximum pixel score over admitted pixels.

    A map with no admitted pixels carries no evidence and scores 0.
    """
    _, x1, x2 = admitted_feature_arrays(pmap)
    if x1.size == 0:
        return 0.0
    s1 = sigmoid(theta.w1 * x1 - theta.b1)
    s2 = sigmoid(theta.w2 * x2 - theta.b2)
    return float(np.max(s1 * s2))


def classify(p: float, cutoff: float = 0.5) -> int:
    """Binarise an image probability: PRESENT iff p > cutoff (strict)."""
    if not 0.0 <= p <= 1.0:
        raise OutOfRange(f"probability {p!r} outside [0, 1]")
    if not 0.0 < cutoff < 1.0:
        raise OutOfRange(f"cutoff {cutoff!r} outside (0, 1)")
    return PRESENT if p > cutoff else ABSENT
