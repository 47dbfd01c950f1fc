"""Resonance feature extraction from calibrated CSI.

Phase series -> first principal component -> STFT -> thresholded peak picking
per sweep direction -> bidirectional average.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .csi import ChirpConfig
from .errors import DegenerateInputError, InsufficientDataError, NoPeakError
from .preprocess import CombinedSeries, _unwrapped_phase
from .spectrogram import Spectrogram, stft  # noqa: F401  (re-exported)

MIN_FREQ = 100.0
THRESHOLD_DIVISOR = 3.0
VERIFICATION_WINDOW = 200.0
# below this peak-to-median ratio a sweep is treated as carrying no excitation
MIN_PEAK_TO_MEDIAN = 10.0
CROSSCHECK_BINS = 2


def phase_series(series: CombinedSeries) -> np.ndarray:
    """Unwrapped, mean-removed phase per subcarrier, shape (T, n_subcarriers)."""
    if len(series) == 0:
        raise InsufficientDataError("empty series")
    return _unwrapped_phase(series.values)


@dataclass(frozen=True, eq=False)
class PcaProjection:
    weights: np.ndarray
    explained_variance_ratio: float
    component: np.ndarray
    mean: np.ndarray

    def project(self, phases) -> np.ndarray:
        """Apply these weights to another phase matrix (centred on its own mean)."""
        x = np.asarray(phases, dtype=float)
        return (x - x.mean(axis=0)) @ self.weights


def pca_first(phases) -> PcaProjection:
    """Leading principal component of the column covariance.

    The eigenvector sign is fixed so its largest-magnitude entry is positive
    (first such entry on ties).
    """
    x = np.asarray(phases, dtype=float)
    if x.ndim != 2:
        raise ValueError("phases must be a (time, subcarrier) matrix")
    if x.shape[0] < x.shape[1] + 1:
        raise InsufficientDataError(f"need at least {x.shape[1] + 1} samples, got {x.shape[0]}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (x.shape[0] - 1)
    total = float(np.trace(cov))
    if not total > 0:
        raise DegenerateInputError("phase matrix has no variance")
    vals, vecs = np.linalg.eigh(cov)
    w = vecs[:, -1]
    if w[np.argmax(np.abs(w))] < 0:
        w = -w
    w = w / np.linalg.norm(w)
    evr = float(np.clip(vals[-1] / total, 0.0, 1.0))
    return PcaProjection(w, evr, xc @ w, mean)


@dataclass(frozen=True)
class Peak:
    freq: float  # parabolically refined
    bin_freq: float
    power: float
    index: int


def _refine(p: np.ndarray, k: int) -> float:
    if k <= 0 or k >= p.size - 1:
        return 0.0
    a, b, c = p[k - 1], p[k], p[k + 1]
    den = a - 2.0 * b + c
    if den >= 0:
        return 0.0
    return float(np.clip(0.5 * (a - c) / den, -0.5, 0.5))


def detect_peaks(freqs, power, min_freq: float = MIN_FREQ, max_freq: float | None = None,
                 threshold_divisor: float = THRESHOLD_DIVISOR,
                 window_hz: float = VERIFICATION_WINDOW) -> list[Peak]:
    """Peaks of an averaged power spectrum, ascending in frequency.

    Candidates are interior local maxima inside ``[min_freq, max_freq]`` with at
    least ``max / threshold_divisor`` of the band's maximum power. Visiting
    candidates strongest first (lower frequency first on equal power), any that
    lies closer than ``window_hz`` to an already kept peak is dropped.
    """
    freqs = np.asarray(freqs, dtype=float)
    power = np.asarray(power, dtype=float)
    hi = np.inf if max_freq is None else max_freq
    sel = np.flatnonzero((freqs >= min_freq) & (freqs <= hi))
    if sel.size < 3:
        raise NoPeakError("band holds fewer than three bins")
    f, p = freqs[sel], power[sel]
    top = float(p.max())
    if not top > 0:
        raise NoPeakError("no power in band")
    # plateaus count once, at their lowest bin
    local = np.flatnonzero((p[1:-1] > p[:-2]) & (p[1:-1] >= p[2:])) + 1
    cands = [k for k in local if p[k] >= top / threshold_divisor]
    if not cands:
        raise NoPeakError(f"no local maximum above max/{threshold_divisor:g}")
    cands.sort(key=lambda k: (-p[k], f[k]))
    kept: list[int] = []
    for k in cands:
        if all(abs(f[k] - f[j]) >= window_hz for j in kept):
            kept.append(k)
    kept.sort(key=lambda k: f[k])
    df = f[1] - f[0]
    return [Peak(float(f[k] + _refine(p, k) * df), float(f[k]), float(p[k]), int(sel[k])) for k in kept]


@dataclass(frozen=True)
class DirectionalPeak:
    freq: float
    power: float
    quality: float
    cell_freq: float


@dataclass(frozen=True)
class ResonanceEstimate:
    f_up: float
    f_down: float
    f_resonance: float
    peak_powers: tuple[float, float]
    quality: float

    def to_dict(self) -> dict:
        return {
            "f_up": self.f_up,
            "f_down": self.f_down,
            "f_resonance": self.f_resonance,
            "peak_powers": list(self.peak_powers),
            "quality": self.quality,
        }


def directional_peak(spec: Spectrogram, chirp: ChirpConfig, min_freq: float = MIN_FREQ,
                     threshold_divisor: float = THRESHOLD_DIVISOR, window_hz: float = VERIFICATION_WINDOW,
                     min_peak_to_median: float = MIN_PEAK_TO_MEDIAN) -> DirectionalPeak:
    """First resonance peak of one sweep's spectrogram, restricted to the sweep's band."""
    lo = max(min_freq, chirp.f_low)
    hi = min(chirp.f_high, spec.sample_rate / 2)
    avg = spec.mean_power()
    peaks = detect_peaks(spec.freq_bins, avg, lo, hi, threshold_divisor, window_hz)
    first = peaks[0]
    band = (spec.freq_bins >= lo) & (spec.freq_bins <= hi)
    med = float(np.median(avg[band]))
    quality = first.power / med if med > 0 else float("inf")
    if quality < min_peak_to_median:
        raise NoPeakError(f"{chirp.direction}-sweep peak only {quality:.3g}x the median band power")
    # cross-check against the single strongest time-frequency cell
    cols = np.flatnonzero(band)
    cell = cols[np.argmax(spec.power[:, cols].max(axis=0))]
    cell_freq = float(spec.freq_bins[cell])
    if abs(cell_freq - first.bin_freq) > CROSSCHECK_BINS * spec.bin_spacing:
        quality *= 0.5
    return DirectionalPeak(first.freq, first.power, quality, cell_freq)


def estimate_resonance(spec_up: Spectrogram | None, spec_down: Spectrogram | None,
                       chirp_up: ChirpConfig | None, chirp_down: ChirpConfig | None,
                       min_freq: float = MIN_FREQ, threshold_divisor: float = THRESHOLD_DIVISOR,
                       window_hz: float = VERIFICATION_WINDOW,
                       min_peak_to_median: float = MIN_PEAK_TO_MEDIAN) -> ResonanceEstimate:
    """Average the up- and down-sweep peak frequencies so that equal and opposite lag shifts cancel."""
    if spec_up is None or chirp_up is None or spec_down is None or chirp_down is None:
        raise InsufficientDataError("need one up-sweep and one down-sweep")
    if not chirp_up.sweep_rate > 0 or not chirp_down.sweep_rate < 0:
        raise InsufficientDataError("need one positive-rate and one negative-rate sweep")
    if not np.isclose(chirp_up.sweep_rate, -chirp_down.sweep_rate, rtol=1e-9, atol=0.0):
        raise InsufficientDataError("up and down sweeps must have equal |sweep_rate|")
    kw = dict(min_freq=min_freq, threshold_divisor=threshold_divisor, window_hz=window_hz,
              min_peak_to_median=min_peak_to_median)
    up = directional_peak(spec_up, chirp_up, **kw)
    down = directional_peak(spec_down, chirp_down, **kw)
    return ResonanceEstimate(
        f_up=up.freq,
        f_down=down.freq,
        f_resonance=(up.freq + down.freq) / 2.0,
        peak_powers=(up.power, down.power),
        quality=min(up.quality, down.quality),
    )
