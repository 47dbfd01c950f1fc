"""Short-time Fourier power spectrogram."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError

WINDOW_LEN = 2048
FFT_LEN = 2048
OVERLAP = 2000


@dataclass(frozen=True, eq=False)
class Spectrogram:
    freq_bins: np.ndarray  # (F,) Hz
    time_bins: np.ndarray  # (T,) s, window centres
    power: np.ndarray  # (T, F), |X|^2
    sample_rate: float
    window_len: int = WINDOW_LEN
    hop: int = WINDOW_LEN - OVERLAP
    fft_len: int = FFT_LEN

    @property
    def bin_spacing(self) -> float:
        return self.sample_rate / self.fft_len

    def mean_power(self) -> np.ndarray:
        return self.power.mean(axis=0)

    def same_grid(self, other: "Spectrogram") -> bool:
        return (
            self.fft_len == other.fft_len
            and self.sample_rate == other.sample_rate
            and self.freq_bins.shape == other.freq_bins.shape
            and np.array_equal(self.freq_bins, other.freq_bins)
        )


def stft(x, sample_rate: float, window_len: int = WINDOW_LEN, overlap: int = OVERLAP, fft_len: int = FFT_LEN,
         t0: float = 0.0) -> Spectrogram:
    """Hamming-windowed STFT power of a real series.

    Frames start every ``window_len - overlap`` samples; only full frames are
    used. ``t0`` is the time of ``x[0]`` and offsets the reported frame centres.
    """
    x = np.asarray(x, dtype=float)
    hop = window_len - overlap
    if hop < 1:
        raise ValueError("overlap must be smaller than window_len")
    if fft_len < window_len:
        raise ValueError("fft_len must be >= window_len")
    if x.ndim != 1 or x.size < window_len:
        raise InsufficientDataError(f"series of {x.size} samples is shorter than one {window_len}-sample window")
    n = (x.size - window_len) // hop + 1
    frames = np.lib.stride_tricks.sliding_window_view(x, window_len)[::hop][:n]
    # np.hamming is the symmetric form, matching MATLAB's hamming(N)
    spec = np.fft.rfft(frames * np.hamming(window_len), n=fft_len, axis=1)
    power = spec.real**2 + spec.imag**2
    freqs = np.arange(fft_len // 2 + 1) * (sample_rate / fft_len)
    times = t0 + (np.arange(n) * hop + window_len / 2) / sample_rate
    return Spectrogram(freqs, times, power, float(sample_rate), window_len, hop, fft_len)
