"""Piecewise cubic frequency -> level model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import IllPosedError, InsufficientDataError

END_CONDITIONS = ("natural", "clamped")


class LevelPrediction(NamedTuple):
    level: float
    out_of_range: bool


@dataclass(frozen=True, eq=False)
class SplineModel:
    """``S_h(x) = a_h + b_h (x - x_h) + c_h (x - x_h)^2 + d_h (x - x_h)^3`` on ``[x_h, x_{h+1}]``."""

    freqs: np.ndarray  # knots, strictly increasing
    levels: np.ndarray
    coeffs: np.ndarray  # (n - 1, 4): a, b, c, d per segment
    end_condition: str = "natural"
    end_slopes: tuple[float, float] | None = None
    capacity: float = float("inf")

    @property
    def n_segments(self) -> int:
        return self.coeffs.shape[0]

    def segment_index(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        return np.clip(np.searchsorted(self.freqs, f, side="right") - 1, 0, self.n_segments - 1)

    def evaluate(self, f, deriv: int = 0):
        """Raw spline value (or derivative) with cubic extrapolation; no clamping."""
        f = np.asarray(f, dtype=float)
        h = self.segment_index(f)
        u = f - self.freqs[h]
        a, b, c, d = self.coeffs[h].T
        if deriv == 0:
            out = a + u * (b + u * (c + u * d))
        elif deriv == 1:
            out = b + u * (2 * c + 3 * d * u)
        elif deriv == 2:
            out = 2 * c + 6 * d * u
        else:
            raise ValueError("deriv must be 0, 1 or 2")
        return float(out) if out.ndim == 0 else out

    def __call__(self, f):
        return self.evaluate(f)


def average_repeats(freqs, levels) -> tuple[np.ndarray, np.ndarray]:
    """Mean frequency per distinct level, returned sorted by frequency."""
    freqs = np.asarray(freqs, dtype=float)
    levels = np.asarray(levels, dtype=float)
    if freqs.shape != levels.shape:
        raise ValueError("freqs and levels differ in length")
    uniq = np.unique(levels)
    fm = np.array([freqs[levels == lv].mean() for lv in uniq])
    order = np.argsort(fm)
    return fm[order], uniq[order]


def _slopes(x, y, end_slopes):
    if end_slopes is not None:
        return float(end_slopes[0]), float(end_slopes[1])
    return (y[1] - y[0]) / (x[1] - x[0]), (y[-1] - y[-2]) / (x[-1] - x[-2])


def fit_spline(freqs, levels, end_condition: str = "natural", end_slopes=None,
               capacity: float = float("inf")) -> SplineModel:
    """Interpolating cubic spline through ``(freq, level)`` knots.

    Assembles the full ``4(n-1)`` system: two interpolation equations per
    segment, first- and second-derivative continuity at the ``n-2`` interior
    knots, and two end conditions. Unknowns are scaled per segment to
    ``(a, b h, c h^2, d h^3)`` to keep the matrix well conditioned.

    Clamped ends default to the one-sided difference slopes of the outer knot
    pairs when ``end_slopes`` is not given.
    """
    if end_condition not in END_CONDITIONS:
        raise ValueError(f"end_condition must be one of {END_CONDITIONS}")
    x = np.asarray(freqs, dtype=float)
    y = np.asarray(levels, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("freqs and levels must be 1-D and equal length")
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]
    dup = np.flatnonzero(np.diff(x) == 0)
    for i in dup:
        if y[i] != y[i + 1]:
            raise IllPosedError(f"frequency {x[i]} Hz maps to levels {y[i]} and {y[i + 1]}")
    if dup.size:
        keep = np.ones(x.size, bool)
        keep[dup + 1] = False
        x, y = x[keep], y[keep]
    n = x.size
    if n < 3:
        raise InsufficientDataError(f"spline needs >= 3 distinct frequencies, got {n}")

    m = n - 1
    hs = np.diff(x)
    A = np.zeros((4 * m, 4 * m))
    rhs = np.zeros(4 * m)
    r = 0
    # scaled unknowns per segment: a, B=b h, C=c h^2, D=d h^3 with t=(x-x_h)/h
    for h in range(m):
        j = 4 * h
        A[r, j] = 1.0
        rhs[r] = y[h]
        r += 1
        A[r, j:j + 4] = 1.0
        rhs[r] = y[h + 1]
        r += 1
    for h in range(m - 1):
        j, k = 4 * h, 4 * (h + 1)
        hl, hr = hs[h], hs[h + 1]
        # S_h'(x_{h+1}) = S_{h+1}'(x_{h+1})
        A[r, j + 1:j + 4] = np.array([1.0, 2.0, 3.0]) / hl
        A[r, k + 1] = -1.0 / hr
        r += 1
        # S_h''(x_{h+1}) = S_{h+1}''(x_{h+1})
        A[r, j + 2:j + 4] = np.array([2.0, 6.0]) / hl**2
        A[r, k + 2] = -2.0 / hr**2
        r += 1
    slopes = None
    if end_condition == "natural":
        A[r, 2] = 2.0 / hs[0] ** 2
        r += 1
        A[r, 4 * (m - 1) + 2: 4 * m] = np.array([2.0, 6.0]) / hs[-1] ** 2
        r += 1
    else:
        slopes = _slopes(x, y, end_slopes)
        A[r, 1] = 1.0 / hs[0]
        rhs[r] = slopes[0]
        r += 1
        A[r, 4 * (m - 1) + 1: 4 * m] = np.array([1.0, 2.0, 3.0]) / hs[-1]
        rhs[r] = slopes[1]
        r += 1
    sol = np.linalg.solve(A, rhs).reshape(m, 4)
    coeffs = sol / np.stack([np.ones(m), hs, hs**2, hs**3], axis=1)
    coeffs[:, 0] = sol[:, 0]
    return SplineModel(x, y, coeffs, end_condition, slopes, float(capacity))


def fit_spline_samples(freqs, levels, end_condition: str = "natural", capacity: float = float("inf"),
                       end_slopes=None) -> SplineModel:
    """Average repeated measurements per level, then fit."""
    f, lv = average_repeats(freqs, levels)
    return fit_spline(f, lv, end_condition, end_slopes, capacity)


def predict_continuous(model: SplineModel, f: float) -> LevelPrediction:
    """Level at frequency ``f``; outside the knot range the nearest end knot's level is used and flagged."""
    f = float(f)
    lo, hi = model.freqs[0], model.freqs[-1]
    if f < lo:
        return LevelPrediction(float(np.clip(model.levels[0], 0.0, model.capacity)), True)
    if f > hi:
        return LevelPrediction(float(np.clip(model.levels[-1], 0.0, model.capacity)), True)
    return LevelPrediction(float(np.clip(model.evaluate(f), 0.0, model.capacity)), False)
