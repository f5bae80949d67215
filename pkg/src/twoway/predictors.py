"""Sign predictors: cost-sensitive linear SVM, signed low-rank
factorization, friendly-layer structural features, and a seeded coin.

The SVM minimizes (lam/2)*||w||^2 + (1/N) * sum_i c_{y_i} * hinge_i by
seeded-shuffle projected subgradient descent with steps 1/(lam*(t+t0)).
The offset t0 = round(1/lam) tames the first bias updates; the schedule
is asymptotically 1/(lam*t). The returned weights average the second
half of the iterates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .netcore import embeddedness


class DegenerateTrainingError(ValueError):
    """Training data lacks one of the two classes."""


@dataclass
class Standardizer:
    """Per-column affine transform fitted on training rows.

    Columns that were constant in training keep std 0 and map to 0.
    """

    mean: np.ndarray
    std: np.ndarray

    def transform(self, rows):
        rows = np.asarray(rows, dtype=float)
        out = rows - self.mean
        nonzero = self.std > 0
        out[:, nonzero] /= self.std[nonzero]
        out[:, ~nonzero] = 0.0
        return out

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, raw):
        return cls(np.asarray(raw["mean"], float), np.asarray(raw["std"], float))


def fit_standardizer(rows):
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ValueError("need a non-empty 2-d array of rows")
    return Standardizer(rows.mean(axis=0), rows.std(axis=0))


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    class_weights: dict
    lam: float
    epochs: int
    seed: int

    def margins(self, rows):
        return np.asarray(rows, dtype=float) @ self.weights + self.bias

    def predict(self, rows):
        return sign_of(self.margins(rows))


def sign_of(margins):
    """Decision signs with zero margins resolved to +1."""
    margins = np.asarray(margins, dtype=float)
    return np.where(margins >= 0, 1, -1)


def class_weight_map(y, class_weighted=True):
    y = np.asarray(y)
    n_pos = int((y == 1).sum())
    n_neg = int((y == -1).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateTrainingError("training labels must include both classes")
    if not class_weighted:
        return {1: 1.0, -1: 1.0}
    n = len(y)
    return {1: n / (2.0 * n_pos), -1: n / (2.0 * n_neg)}


def svm_objective(weights, bias, rows, y, lam, class_weights):
    rows = np.asarray(rows, dtype=float)
    y = np.asarray(y, dtype=float)
    cost = np.where(y > 0, class_weights[1], class_weights[-1])
    hinge = np.maximum(0.0, 1.0 - y * (rows @ weights + bias))
    return 0.5 * lam * float(weights @ weights) + float((cost * hinge).mean())


def train_svm(rows, y, lam=1e-4, epochs=50, seed=0, class_weighted=True):
    """Seeded-shuffle projected subgradient training."""
    rows = np.asarray(rows, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if rows.ndim != 2 or len(rows) != len(y):
        raise ValueError("rows and labels must align")
    if not np.all(np.isin(y, (1, -1))):
        raise ValueError("labels must be +1 or -1")
    cmap = class_weight_map(y, class_weighted)
    n, dim = rows.shape
    cost = np.where(y > 0, cmap[1], cmap[-1])

    rng = np.random.default_rng(seed)
    w = np.zeros(dim)
    b = 0.0
    radius = 1.0 / math.sqrt(lam)
    t0 = round(1.0 / lam)
    total = epochs * n
    avg_from = total // 2
    w_sum = np.zeros(dim)
    b_sum = 0.0
    n_avg = 0
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * (t + t0))
            xi = rows[i]
            violated = y[i] * (xi @ w + b) < 1.0
            w *= 1.0 - eta * lam
            if violated:
                step = eta * cost[i] * y[i]
                w += step * xi
                b += step
                norm = math.sqrt(w @ w)
                if norm > radius:
                    w *= radius / norm
            if t > avg_from:
                w_sum += w
                b_sum += b
                n_avg += 1
    return LinearModel(w_sum / n_avg, b_sum / n_avg, cmap, lam, epochs, seed)


@dataclass
class MFModel:
    factors_u: np.ndarray
    factors_v: np.ndarray
    rank: int
    lam: float
    epochs: int
    seed: int

    def margin(self, i, j):
        return float(self.factors_u[i] @ self.factors_v[j])

    def predict(self, pairs):
        return sign_of([self.margin(i, j) for (i, j) in pairs])


def mf_objective(factors_u, factors_v, edges, lam):
    total = 0.0
    for (i, j, s) in edges:
        r = 1.0 - s * float(factors_u[i] @ factors_v[j])
        if r > 0:
            total += r * r
    total += lam * (float((factors_u ** 2).sum()) + float((factors_v ** 2).sum()))
    return total


def train_mf(edges, node_count, rank=20, lam=0.05, epochs=30, lr=0.05, seed=0):
    """Squared-hinge sign completion by seeded SGD.

    Data steps run per sample in shuffled order; the ridge term applies
    once per epoch as a proximal shrink, which stays stable for any lam
    (huge lam collapses the factors to zero).
    """
    edges = list(edges)
    rng = np.random.default_rng(seed)
    fu = rng.uniform(-0.1, 0.1, size=(node_count, rank))
    fv = rng.uniform(-0.1, 0.1, size=(node_count, rank))
    if edges:
        src = np.array([e[0] for e in edges], dtype=np.int64)
        dst = np.array([e[1] for e in edges], dtype=np.int64)
        sgn = np.array([e[2] for e in edges], dtype=float)
        m = len(edges)
        shrink = 1.0 / (1.0 + 2.0 * lr * lam)
        for _ in range(epochs):
            for e in rng.permutation(m):
                i, j, s = src[e], dst[e], sgn[e]
                ui = fu[i]
                vj = fv[j]
                r = 1.0 - s * float(ui @ vj)
                if r > 0:
                    g = 2.0 * lr * r * s
                    ui_old = ui.copy()
                    ui += g * vj
                    vj += g * ui_old
            fu *= shrink
            fv *= shrink
    return MFModel(fu, fv, rank, lam, epochs, seed)


# Triad cells pair the (u,w) edge variant with the (w,v) edge variant:
# variants in order u->w +, u->w -, w->u +, w->u - (and likewise for v).
_UW_VARIANTS = (("uw", 1), ("uw", -1), ("wu", 1), ("wu", -1))
_WV_VARIANTS = (("wv", 1), ("wv", -1), ("vw", 1), ("vw", -1))

NBSP_COLUMNS = [
    "pos_in_recipient",
    "neg_in_recipient",
    "pos_out_initiator",
    "neg_out_initiator",
    "total_in_recipient",
    "total_out_initiator",
    "embeddedness",
] + [
    f"triad_{a}{'p' if sa > 0 else 'n'}_{b}{'p' if sb > 0 else 'n'}"
    for (a, sa) in _UW_VARIANTS
    for (b, sb) in _WV_VARIANTS
]


def nbsp_features(net, u, v):
    """Friendly-layer structural features for one pair, own edge ignored.

    Seven degree features (signed in-degrees of the recipient, signed
    out-degrees of the initiator, their totals, embeddedness) plus 16
    signed directed triad counts over common friendly neighbors, one
    increment per connecting edge pair.
    """
    if u == v:
        raise ValueError("initiator and recipient must differ")
    own = net.f_sign(u, v)
    pos_in_v = len(net.f_in(v, 1)) - (1 if own == 1 else 0)
    neg_in_v = len(net.f_in(v, -1)) - (1 if own == -1 else 0)
    pos_out_u = len(net.f_out(u, 1)) - (1 if own == 1 else 0)
    neg_out_u = len(net.f_out(u, -1)) - (1 if own == -1 else 0)
    feats = [
        pos_in_v,
        neg_in_v,
        pos_out_u,
        neg_out_u,
        pos_in_v + neg_in_v,
        pos_out_u + neg_out_u,
        embeddedness(net, u, v),
    ]
    nbrs_u = net.f_out(u) | net.f_in(u)
    nbrs_v = net.f_out(v) | net.f_in(v)
    common = nbrs_u & nbrs_v
    common.discard(u)
    common.discard(v)
    triads = [0] * 16
    for w in common:
        uw = []
        s = net.f_sign(u, w)
        if s is not None:
            uw.append(0 if s > 0 else 1)
        s = net.f_sign(w, u)
        if s is not None:
            uw.append(2 if s > 0 else 3)
        wv = []
        s = net.f_sign(w, v)
        if s is not None:
            wv.append(0 if s > 0 else 1)
        s = net.f_sign(v, w)
        if s is not None:
            wv.append(2 if s > 0 else 3)
        for a in uw:
            for bb in wv:
                triads[4 * a + bb] += 1
    return np.array(feats + triads, dtype=float)


class RandomSignPredictor:
    """Seeded fair coin over {+1, -1}."""

    def __init__(self, seed=0):
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def draw(self, count):
        return self._rng.integers(0, 2, size=count) * 2 - 1
