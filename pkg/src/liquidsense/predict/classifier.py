"""One-vs-one linear soft-margin classifier on the resonance frequency.

Each class pair gets a hinge-loss separator trained in the dual with SMO
(second-order working-set selection, as in LIBSVM). Prediction is a majority
vote over all pairs with ties going to the lower label.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateInputError, InsufficientDataError

C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
SMO_TOL = 1e-6
SMO_MAX_ITER = 100_000
# |decision| at or below this counts as a tie and votes for the lower label
TIE_EPS = 1e-9


@dataclass(frozen=True)
class PairwiseFunction:
    lower: int  # label voted for when decision >= 0
    upper: int
    weight: tuple[float, ...]
    bias: float

    def decision(self, z: np.ndarray) -> np.ndarray:
        return z @ np.asarray(self.weight) + self.bias


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    classes: tuple[int, ...]
    functions: tuple[PairwiseFunction, ...]
    mean: np.ndarray
    scale: np.ndarray
    C: float

    def standardize(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1, 1)
        elif x.ndim == 1:
            x = x.reshape(-1, self.mean.size)
        return (x - self.mean) / self.scale

    def predict(self, x) -> np.ndarray:
        z = self.standardize(x)
        idx = {c: i for i, c in enumerate(self.classes)}
        votes = np.zeros((z.shape[0], len(self.classes)), dtype=int)
        for fn in self.functions:
            d = fn.decision(z)
            lo = d >= -TIE_EPS
            votes[lo, idx[fn.lower]] += 1
            votes[~lo, idx[fn.upper]] += 1
        # argmax returns the first maximum, i.e. the lowest label among ties
        return np.asarray(self.classes)[np.argmax(votes, axis=1)]


def smo_train(x: np.ndarray, y: np.ndarray, C: float, tol: float = SMO_TOL,
              max_iter: int = SMO_MAX_ITER) -> tuple[np.ndarray, float]:
    """Linear-kernel soft-margin SVM; ``y`` in {-1, +1}. Returns ``(w, b)`` for ``sign(x @ w + b)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    K = x @ x.T
    Q = K * np.outer(y, y)
    diag = np.diag(K).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a'Qa - sum(a)
    for _ in range(max_iter):
        yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        if yg[i] - yg[low].min() < tol:
            break
        # second-order pick of j: largest objective decrease for the pair; first-order
        # (maximal violating pair) zigzags for ages when feature values nearly repeat
        gap = yg[i] - yg
        quad = np.maximum(diag[i] + diag - 2.0 * K[i], 1e-12)
        j = int(np.argmin(np.where(low & (gap > 0), -gap * gap / quad, np.inf)))
        # move along y_i e_i - y_j e_j, keeping sum(alpha * y) fixed
        step = gap[j] / quad[j]
        lim_i = C - alpha[i] if y[i] > 0 else alpha[i]
        lim_j = alpha[j] if y[j] > 0 else C - alpha[j]
        step = min(step, lim_i, lim_j)
        di, dj = y[i] * step, -y[j] * step
        alpha[i] = min(max(alpha[i] + di, 0.0), C)
        alpha[j] = min(max(alpha[j] + dj, 0.0), C)
        grad += Q[:, i] * di + Q[:, j] * dj
    w = (alpha * y) @ x
    yg = -y * grad
    free = (alpha > 1e-12 * C) & (alpha < C * (1 - 1e-12))
    if free.any():
        b = float(yg[free].mean())
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi_b = yg[up].max() if up.any() else yg.max()
        lo_b = yg[low].min() if low.any() else yg.min()
        b = float((hi_b + lo_b) / 2.0)
    return w, b


def _fit_ovo(z: np.ndarray, y: np.ndarray, classes, C: float) -> tuple[PairwiseFunction, ...]:
    fns = []
    for a, b in itertools.combinations(classes, 2):
        m = (y == a) | (y == b)
        yy = np.where(y[m] == a, 1.0, -1.0)
        w, bias = smo_train(z[m], yy, C)
        fns.append(PairwiseFunction(int(a), int(b), tuple(float(v) for v in w), float(bias)))
    return tuple(fns)


def _standardization(x: np.ndarray):
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


def fit_fixed_c(x, y, C: float) -> ClassifierModel:
    x = np.asarray(x, dtype=float).reshape(len(y), -1)
    y = np.asarray(y).astype(int)
    classes = tuple(int(c) for c in np.unique(y))
    if len(classes) < 2:
        raise DegenerateInputError("classifier needs at least two classes")
    mean, scale = _standardization(x)
    z = (x - mean) / scale
    return ClassifierModel(classes, _fit_ovo(z, y, classes, C), mean, scale, float(C))


def stratified_folds(y, k: int) -> list[np.ndarray]:
    """Deterministic stratified split: each class's samples dealt round-robin in input order."""
    y = np.asarray(y)
    fold_of = np.empty(y.size, dtype=int)
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        fold_of[idx] = np.arange(idx.size) % k
    return [np.flatnonzero(fold_of == f) for f in range(k)]


def cross_val_accuracy(x, y, C: float, k: int) -> float:
    x = np.asarray(x, dtype=float).reshape(len(y), -1)
    y = np.asarray(y).astype(int)
    correct = 0
    for test in stratified_folds(y, k):
        train = np.setdiff1d(np.arange(y.size), test)
        model = fit_fixed_c(x[train], y[train], C)
        correct += int(np.sum(model.predict(x[test]) == y[test]))
    return correct / y.size


def train_classifier(x, y, C_grid=C_GRID) -> ClassifierModel:
    """Grid-search ``C`` by stratified k-fold accuracy (ties to smaller C), then refit on everything."""
    y = np.asarray(y).astype(int)
    x = np.asarray(x, dtype=float).reshape(len(y), -1)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise DegenerateInputError("classifier needs at least two classes")
    if counts.min() < 2:
        raise InsufficientDataError("every class needs at least two samples")
    k = int(min(5, counts.min()))
    best_c, best_acc = None, -1.0
    for C in sorted(C_grid):
        acc = cross_val_accuracy(x, y, C, k)
        if acc > best_acc:
            best_c, best_acc = C, acc
    return fit_fixed_c(x, y, best_c)


def predict_discrete(model: ClassifierModel, f) -> int:
    return int(model.predict(np.asarray([f], dtype=float))[0])
