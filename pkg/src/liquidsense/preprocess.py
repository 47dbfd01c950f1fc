"""CSI calibration and denoising: conjugate multiplication, antenna pair
selection, zero-phase Butterworth high-pass and spectral subtraction."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import fft as sp_fft
from scipy import signal

from .csi import CsiTrace
from .errors import DomainError, InsufficientDataError
from .spectrogram import Spectrogram

HIGHPASS_CUTOFF = 100.0
HIGHPASS_ORDER = 4
# seconds trimmed at each end of a filtered series before peak statistics
EDGE_TRIM = 0.25


@dataclass(frozen=True, eq=False)
class CombinedSeries:
    sample_rate: float
    values: np.ndarray  # (T, n_subcarriers) complex
    source_pair: tuple[int, int]

    def __post_init__(self):
        l, s = self.source_pair
        if l == s:
            raise DomainError("source_pair antennas must differ")

    def __len__(self):
        return self.values.shape[0]


def conjugate_multiply(trace: CsiTrace, l: int, s: int) -> CombinedSeries:
    """``H_l * conj(H_s)`` per subcarrier and frame; cancels phase common to both antennas."""
    if l == s:
        raise DomainError("conjugate multiplication needs two different antennas")
    for a in (l, s):
        if not 0 <= a < trace.n_rx:
            raise DomainError(f"antenna index {a} out of range for {trace.n_rx} receive antennas")
    hl = trace.csi[:, l, :].astype(np.complex128)
    hs = trace.csi[:, s, :].astype(np.complex128)
    return CombinedSeries(trace.packet_rate, hl * np.conj(hs), (l, s))


def unwrap(ph: np.ndarray) -> np.ndarray:
    """Phase unwrapping along axis 0; same result as ``np.unwrap`` away from exact +-pi jumps.

    Only the 2*pi corrections are accumulated, and not at all when there are none,
    which is the common case for a conjugate product and roughly halves the cost.
    """
    jumps = np.round(np.diff(ph, axis=0) / (2.0 * np.pi))
    if not jumps.any():
        return ph
    out = ph.copy()
    out[1:] -= 2.0 * np.pi * np.cumsum(jumps, axis=0)
    return out


def _unwrapped_phase(values: np.ndarray) -> np.ndarray:
    ph = unwrap(np.angle(values))
    return ph - ph.mean(axis=0)


def _band_power(ph: np.ndarray, sample_rate: float, band: tuple[float, float] | None) -> float:
    spec = sp_fft.rfft(ph, axis=0, workers=-1)
    freqs = sp_fft.rfftfreq(ph.shape[0], 1.0 / sample_rate)
    lo, hi = band if band is not None else (HIGHPASS_CUTOFF, sample_rate / 2)
    sel = (freqs >= lo) & (freqs <= hi)
    return float(np.sum(spec.real[sel] ** 2 + spec.imag[sel] ** 2))


def pair_score(trace: CsiTrace, l: int, s: int, band: tuple[float, float] | None = None) -> float:
    """Power of the mean-removed product phase inside ``band``, summed over subcarriers."""
    ph = _unwrapped_phase(conjugate_multiply(trace, l, s).values)
    return _band_power(ph, trace.packet_rate, band)


def rank_pairs(trace: CsiTrace, band: tuple[float, float] | None = None):
    """``(pair, score, phases)`` for every pair l < s, best first.

    (s, l) always ties with (l, s) since its phase is exactly negated, so only
    l < s is scored. Equal scores keep lexicographic order.
    """
    if trace.n_rx < 2:
        raise InsufficientDataError("pair selection needs at least two receive antennas")
    if trace.n_frames < 2:
        raise InsufficientDataError("pair selection needs at least two frames")
    out = []
    for l, s in itertools.combinations(range(trace.n_rx), 2):
        ph = _unwrapped_phase(conjugate_multiply(trace, l, s).values)
        out.append(((l, s), _band_power(ph, trace.packet_rate, band), ph))
    # stable sort keeps the lexicographic tie-break
    out.sort(key=lambda r: -r[1])
    return out


def select_pair(trace: CsiTrace, band: tuple[float, float] | None = None) -> tuple[int, int]:
    """Antenna pair whose product phase carries the most in-band power; ties to the smallest pair."""
    return rank_pairs(trace, band)[0][0]


def butter_highpass(cutoff: float, sample_rate: float, order: int = HIGHPASS_ORDER) -> np.ndarray:
    if not 0 < cutoff < sample_rate / 2:
        raise DomainError(f"cutoff {cutoff} Hz must lie in (0, {sample_rate / 2}) Hz")
    return signal.butter(order, cutoff, btype="highpass", fs=sample_rate, output="sos")


def highpass_array(x, sample_rate: float, cutoff: float = HIGHPASS_CUTOFF, order: int = HIGHPASS_ORDER):
    """Forward-backward Butterworth high-pass along axis 0 of a real or complex array."""
    sos = butter_highpass(cutoff, sample_rate, order)
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return signal.sosfiltfilt(sos, x.real, axis=0) + 1j * signal.sosfiltfilt(sos, x.imag, axis=0)
    return signal.sosfiltfilt(sos, x, axis=0)


def highpass(series: CombinedSeries, cutoff: float = HIGHPASS_CUTOFF) -> CombinedSeries:
    """Zero-phase 4th-order Butterworth high-pass on the real and imaginary parts of each subcarrier."""
    out = highpass_array(series.values, series.sample_rate, cutoff)
    return CombinedSeries(series.sample_rate, out, series.source_pair)


def trim_edges(n: int, sample_rate: float, trim: float = EDGE_TRIM) -> slice:
    k = int(round(trim * sample_rate))
    return slice(k, max(k, n - k))


def spectral_subtract(signal_spec: Spectrogram, baseline_spec: Spectrogram) -> Spectrogram:
    """Remove the time-averaged baseline power from every frame, floored at zero."""
    if not signal_spec.same_grid(baseline_spec):
        raise DomainError("signal and baseline spectrograms use different frequency grids")
    floor = baseline_spec.power.mean(axis=0)
    power = np.maximum(signal_spec.power - floor[None, :], 0.0)
    return Spectrogram(
        signal_spec.freq_bins, signal_spec.time_bins, power, signal_spec.sample_rate,
        signal_spec.window_len, signal_spec.hop, signal_spec.fft_len,
    )
