"""Maximum-likelihood fitting of the soft-threshold classifier.

Full-batch gradient descent on the summed cross-entropy loss. The image
probability is a maximum over admitted pixels, so gradients flow through
the single best pixel of each image (lowest pixel index on ties). The
same trainer serves the target model (whole corpus) and the teaching
learners (four examples); learners are trained in large seeded batches,
one parameter vector per batch row, with bit-identical arithmetic to a
single-row run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDataset, NonFiniteLoss
from .model import ProbMap, ThetaParams, admitted_feature_arrays, classify, image_prob, sigmoid

DEFAULT_INIT = ThetaParams(w1=10.0, b1=5.0, w2=10.0, b2=5.0)
DEFAULT_PROB_FLOOR = 1e-7
DEFAULT_MAX_ITERATIONS = 100_000


@dataclass(frozen=True)
class TrainItem:
    """One training pair: a probability map and its binary label (0/1)."""

    map: ProbMap
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    max_iterations: int
    loss_tolerance: float
    init: ThetaParams = DEFAULT_INIT
    prob_floor: float = DEFAULT_PROB_FLOOR

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.loss_tolerance > 0:
            raise ValueError("loss_tolerance must be positive")
        if not 0.0 < self.prob_floor < 0.5:
            raise ValueError("prob_floor must lie in (0, 0.5)")


def default_train_config(n_items: int) -> TrainConfig:
    """Defaults scaled to the dataset size.

    The loss is a sum (not a mean) over items, so the stable step size
    shrinks with the item count; 40/n keeps four-example learners in the
    fast-saturating regime while full-corpus fits stay stable.
    """
    if n_items < 1:
        raise EmptyDataset("cannot build a training config for zero items")
    return TrainConfig(
        learning_rate=40.0 / n_items,
        max_iterations=DEFAULT_MAX_ITERATIONS,
        loss_tolerance=1e-9 * n_items,
    )


@dataclass(frozen=True)
class TrainResult:
    theta: ThetaParams
    loss: float
    iterations: int


class ItemFeatures:
    """Per-item admitted-pixel features, precomputed once for training."""

    __slots__ = ("x1", "x2", "top_x1", "top_x2", "has_pixels", "label")

    def __init__(self, pmap: ProbMap, label: int):
        _, x1, x2 = admitted_feature_arrays(pmap)
        self.x1 = x1
        self.x2 = x2
        self.has_pixels = x1.size > 0
        if self.has_pixels:
            # With non-negative slopes the best pixel is always the one
            # with the largest value; its x2 is the admitted fraction.
            top = int(np.argmax(x1))
            self.top_x1 = float(x1[top])
            self.top_x2 = float(x2[top])
        else:
            self.top_x1 = 0.0
            self.top_x2 = 0.0
        self.label = float(label)

    @classmethod
    def from_item(cls, item: TrainItem) -> "ItemFeatures":
        return cls(item.map, item.label)


class _PaddedRow:
    """One batch row's admitted features padded to a rectangle, for the
    full argmax scan needed when a slope is negative."""

    __slots__ = ("x1", "x2", "mask", "rows")

    def __init__(self, feats: list[ItemFeatures]):
        n = len(feats)
        m = max((f.x1.size for f in feats), default=0)
        m = max(m, 1)
        self.x1 = np.zeros((n, m))
        self.x2 = np.zeros((n, m))
        self.mask = np.zeros((n, m), dtype=bool)
        for i, f in enumerate(feats):
            k = f.x1.size
            self.x1[i, :k] = f.x1
            self.x2[i, :k] = f.x2
            self.mask[i, :k] = True
        self.rows = np.arange(n)

    def best_pixels(self, w1, b1, w2, b2):
        """Per-item argmax features (lowest pixel index on ties)."""
        s1 = sigmoid(w1 * self.x1 - b1)
        s2 = sigmoid(w2 * self.x2 - b2)
        p = s1 * s2
        p[~self.mask] = -1.0
        j = np.argmax(p, axis=1)
        return self.x1[self.rows, j], self.x2[self.rows, j]


def train_batch(rows: list[list[ItemFeatures]], cfg: TrainConfig) -> list[TrainResult]:
    """Train one parameter vector per row of feature lists.

    All rows must have the same item count. Each row runs an independent
    full-batch gradient descent from cfg.init and stops on its own when
    its loss change drops below cfg.loss_tolerance; the lowest-loss
    iterate seen is returned. Rows are vectorised together, so a batch
    of K rows is bit-identical to K separate single-row calls.
    """
    if not rows or any(not r for r in rows):
        raise EmptyDataset("training requires at least one item")
    n = len(rows[0])
    if any(len(r) != n for r in rows):
        raise ValueError("all batch rows must have the same item count")
    K = len(rows)
    X1 = np.array([[f.top_x1 for f in r] for r in rows])
    X2 = np.array([[f.top_x2 for f in r] for r in rows])
    HAS = np.array([[f.has_pixels for f in r] for r in rows])
    L = np.array([[f.label for f in r] for r in rows])
    any_empty = not HAS.all()

    floor = cfg.prob_floor
    ceil = 1.0 - cfg.prob_floor
    lr = cfg.learning_rate
    tol = cfg.loss_tolerance

    w1 = np.full(K, cfg.init.w1)
    b1 = np.full(K, cfg.init.b1)
    w2 = np.full(K, cfg.init.w2)
    b2 = np.full(K, cfg.init.b2)

    padded: dict[int, _PaddedRow] = {}

    def forward():
        # Rows with a negative slope lose the top-pixel shortcut and fall
        # back to a full scan of their items' admitted pixels.
        sx1, sx2 = X1, X2
        slow = np.flatnonzero((w1 < 0.0) | (w2 < 0.0))
        if slow.size:
            sx1 = X1.copy()
            sx2 = X2.copy()
            for k in slow:
                if k not in padded:
                    padded[k] = _PaddedRow(rows[k])
                bx1, bx2 = padded[k].best_pixels(w1[k], b1[k], w2[k], b2[k])
                keep = HAS[k]
                sx1[k, keep] = bx1[keep]
                sx2[k, keep] = bx2[keep]
        s1 = sigmoid(w1[:, None] * sx1 - b1[:, None])
        s2 = sigmoid(w2[:, None] * sx2 - b2[:, None])
        p = s1 * s2
        if any_empty:
            p = np.where(HAS, p, 0.0)
        pt = np.clip(p, floor, ceil)
        loss = -(L * np.log(pt) + (1.0 - L) * np.log1p(-pt)).sum(axis=1)
        return sx1, sx2, s1, s2, p, loss

    with np.errstate(over="ignore", invalid="ignore"):
        # Divergence shows up as a non-finite loss and raises below;
        # the intermediate inf/nan arithmetic is expected there.
        sx1, sx2, s1, s2, p, loss = forward()
        if not np.all(np.isfinite(loss)):
            raise NonFiniteLoss("loss is non-finite at the initial parameters")
        best_loss = loss.copy()
        best = np.stack([w1, b1, w2, b2], axis=1)
        prev_loss = loss
        running = np.ones(K, dtype=bool)
        iterations = np.full(K, cfg.max_iterations)

        for step in range(1, cfg.max_iterations + 1):
            # Gradient at the current parameters, from the saved forward pass.
            active = (p > floor) & (p < ceil)
            denom = np.where(active, 1.0 - p, 1.0)
            q = np.where(active, (p - L) / denom, 0.0)
            ga1 = q * (1.0 - s1)
            ga2 = q * (1.0 - s2)
            upd = running.astype(np.float64)
            w1 -= (lr * (ga1 * sx1).sum(axis=1)) * upd
            b1 -= (lr * -ga1.sum(axis=1)) * upd
            w2 -= (lr * (ga2 * sx2).sum(axis=1)) * upd
            b2 -= (lr * -ga2.sum(axis=1)) * upd

            sx1, sx2, s1, s2, p, loss = forward()
            if not np.all(np.isfinite(loss[running])):
                raise NonFiniteLoss(f"loss became non-finite at iteration {step}")
            improved = running & (loss < best_loss)
            if improved.any():
                best_loss[improved] = loss[improved]
                best[improved, 0] = w1[improved]
                best[improved, 1] = b1[improved]
                best[improved, 2] = w2[improved]
                best[improved, 3] = b2[improved]
            stopped = running & (np.abs(loss - prev_loss) < tol)
            if stopped.any():
                iterations[stopped] = step
                running &= ~stopped
                if not running.any():
                    break
            prev_loss = loss

    return [
        TrainResult(theta=ThetaParams.from_array(best[k]),
                    loss=float(best_loss[k]),
                    iterations=int(iterations[k]))
        for k in range(K)
    ]


def train_theta(items: list[TrainItem], cfg: TrainConfig) -> TrainResult:
    """Fit theta to the items by full-batch gradient descent.

    Deterministic for fixed inputs; the returned loss never exceeds the
    loss at cfg.init because the best iterate is kept.
    """
    if not items:
        raise EmptyDataset("train_theta requires at least one item")
    feats = [ItemFeatures.from_item(it) for it in items]
    return train_batch([feats], cfg)[0]


def cross_entropy_loss(items: list[TrainItem], theta: ThetaParams,
                       prob_floor: float = DEFAULT_PROB_FLOOR) -> float:
    """Summed binary cross-entropy with image probabilities clamped to
    [prob_floor, 1 - prob_floor]."""
    if not items:
        raise EmptyDataset("cross_entropy_loss requires at least one item")
    terms = np.empty(len(items))
    for i, it in enumerate(items):
        p = min(max(image_prob(it.map, theta), prob_floor), 1.0 - prob_floor)
        terms[i] = -(np.log(p) if it.label == 1 else np.log1p(-p))
    return float(terms.sum())


def loss_gradient(items: list[TrainItem], theta: ThetaParams,
                  prob_floor: float = DEFAULT_PROB_FLOOR) -> np.ndarray:
    """Analytic gradient of cross_entropy_loss w.r.t. (w1, b1, w2, b2).

    Each item contributes through its best admitted pixel only (lowest
    pixel index on ties); items whose probability is clamped contribute
    nothing.
    """
    if not items:
        raise EmptyDataset("loss_gradient requires at least one item")
    terms = []
    for it in items:
        _, x1, x2 = admitted_feature_arrays(it.map)
        if x1.size == 0:
            continue  # probability 0 is always clamped
        s1 = sigmoid(theta.w1 * x1 - theta.b1)
        s2 = sigmoid(theta.w2 * x2 - theta.b2)
        pj = s1 * s2
        j = int(np.argmax(pj))
        p = pj[j]
        if p <= prob_floor or p >= 1.0 - prob_floor:
            continue
        q = (p - it.label) / (1.0 - p)
        terms.append((q * (1.0 - s1[j]) * x1[j], -q * (1.0 - s1[j]),
                      q * (1.0 - s2[j]) * x2[j], -q * (1.0 - s2[j])))
    # fsum keeps the sum exactly linear under item duplication
    return np.array([math.fsum(t[d] for t in terms) for d in range(4)])


def evaluate_accuracy(items: list[TrainItem], theta: ThetaParams,
                      cutoff: float = 0.5) -> float:
    """Fraction of items whose thresholded image probability matches the label."""
    if not items:
        raise EmptyDataset("evaluate_accuracy requires at least one item")
    hits = sum(
        1 for it in items if classify(image_prob(it.map, theta), cutoff) == it.label)
    return hits / len(items)
