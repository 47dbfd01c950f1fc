"""End-to-end trace processing: raw CSI in, resonance estimate out."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .csi import ChirpConfig, CsiTrace
from .errors import ConfigError, DegenerateInputError, NoPeakError
from .features import (
    MIN_PEAK_TO_MEDIAN,
    PcaProjection,
    ResonanceEstimate,
    estimate_resonance,
    pca_first,
    phase_series,
)
from .preprocess import (
    EDGE_TRIM,
    HIGHPASS_CUTOFF,
    conjugate_multiply,
    highpass_array,
    rank_pairs,
    spectral_subtract,
    trim_edges,
)
from .spectrogram import FFT_LEN, OVERLAP, WINDOW_LEN, Spectrogram, stft

BASELINE_POLICIES = ("auto", "none")


@dataclass
class PipelineConfig:
    f_start: float = 0.0
    f_end: float = 1000.0
    sweep_duration: float = 15.0
    sweeps: tuple[str, ...] = ("up", "down")
    padding: float = 0.0
    packet_rate: float = 2000.0
    cutoff: float = HIGHPASS_CUTOFF
    window_len: int = WINDOW_LEN
    overlap: int = OVERLAP
    fft_len: int = FFT_LEN
    threshold_divisor: float = 3.0
    verification_window: float = 200.0
    min_peak_to_median: float = MIN_PEAK_TO_MEDIAN
    edge_trim: float = EDGE_TRIM
    baseline_policy: str = "auto"
    pair: tuple[int, int] | None = None
    model_path: str | None = None
    output_path: str | None = None

    def __post_init__(self):
        self.sweeps = tuple(self.sweeps)
        if self.pair is not None:
            self.pair = tuple(int(a) for a in self.pair)
        if self.baseline_policy not in BASELINE_POLICIES:
            raise ConfigError(f"baseline_policy must be one of {BASELINE_POLICIES}")
        if not self.window_len > self.overlap >= 0:
            raise ConfigError("overlap must be in [0, window_len)")
        if self.fft_len < self.window_len:
            raise ConfigError("fft_len must be >= window_len")
        if not self.threshold_divisor >= 1:
            raise ConfigError("threshold_divisor must be >= 1")
        if not self.sweep_duration > 0:
            raise ConfigError("sweep_duration must be > 0")

    @property
    def chirp(self) -> ChirpConfig:
        return ChirpConfig(self.f_start, self.f_end, self.sweep_duration)

    @property
    def sweep_rate(self) -> float:
        return self.chirp.sweep_rate

    def sweep_segments(self) -> list[dict]:
        up = self.chirp if self.chirp.direction == "up" else self.chirp.reversed()
        segs, start = [], self.padding
        for s in self.sweeps:
            c = up if s == "up" else up.reversed()
            segs.append({"direction": c.direction, "start": start, "duration": c.duration,
                         "f_start": c.f_start, "f_end": c.f_end})
            start += c.duration
        return segs

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sweeps"] = list(self.sweeps)
        d["pair"] = list(self.pair) if self.pair is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown pipeline config field(s): {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass
class ProcessResult:
    estimate: ResonanceEstimate
    pair: tuple[int, int]
    pca: PcaProjection
    spectrograms: dict[str, Spectrogram] = field(default_factory=dict)
    baseline_used: bool = False


def _segments(trace: CsiTrace, config: PipelineConfig) -> list[dict]:
    segs = trace.metadata.get("sweeps")
    return list(segs) if segs else config.sweep_segments()


def _phases(trace: CsiTrace, pair, config: PipelineConfig) -> np.ndarray:
    ph = phase_series(conjugate_multiply(trace, *pair))
    return highpass_array(ph, trace.packet_rate, config.cutoff)


def _spec(x, config: PipelineConfig, rate: float, t0: float) -> Spectrogram:
    return stft(x, rate, config.window_len, config.overlap, config.fft_len, t0=t0)


def component_series(trace: CsiTrace, config: PipelineConfig | None = None):
    """First principal component of the filtered product phase.

    Returns ``(component, keep, pca, pair)``; ``component`` spans the whole trace
    but is zero outside the ``keep`` slice (the edge-trimmed region).
    """
    config = config or PipelineConfig()
    rate = trace.packet_rate
    segs = _segments(trace, config)
    f_top = max(max(s["f_start"], s["f_end"]) for s in segs)
    if config.pair is not None:
        pair = config.pair
        filtered = _phases(trace, pair, config)
    else:
        pair, _, ph = rank_pairs(trace, band=(config.cutoff, min(f_top, rate / 2)))[0]
        filtered = highpass_array(ph, rate, config.cutoff)
    keep = trim_edges(trace.n_frames, rate, config.edge_trim)
    try:
        pca = pca_first(filtered[keep])
    except DegenerateInputError as e:
        raise NoPeakError(f"no phase variation in trace ({e})") from e
    comp = np.zeros(trace.n_frames)
    comp[keep] = pca.component
    return comp, keep, pca, pair


def analyse_trace(trace: CsiTrace, config: PipelineConfig | None = None,
                  baseline: CsiTrace | None = None) -> tuple[dict, dict, PcaProjection, tuple[int, int], bool]:
    """Everything up to (not including) peak picking.

    Returns per-sweep spectrograms (after spectral subtraction when a baseline is
    available), the chirps they belong to, the PCA projection, the antenna pair
    and whether a baseline was subtracted.
    """
    config = config or PipelineConfig()
    rate = trace.packet_rate
    segs = _segments(trace, config)
    comp, keep, pca, pair = component_series(trace, config)

    base_spec = None
    if baseline is not None:
        bph = _phases(baseline, pair, config)
        bkeep = trim_edges(baseline.n_frames, baseline.packet_rate, config.edge_trim)
        base_spec = _spec(pca.project(bph[bkeep]), config, baseline.packet_rate, bkeep.start / rate)
    elif config.baseline_policy == "auto":
        onset = int(round(min(s["start"] for s in segs) * rate))
        if onset - keep.start >= config.window_len:
            quiet = comp[keep.start:onset]
            base_spec = _spec(quiet - quiet.mean(), config, rate, keep.start / rate)
        else:
            warnings.warn("no baseline trace and no pre-excitation padding long enough; "
                          "skipping spectral subtraction", RuntimeWarning, stacklevel=2)

    specs, chirps = {}, {}
    for seg in segs:
        d = seg["direction"]
        if d in specs:
            continue
        a = max(int(round(seg["start"] * rate)), keep.start)
        b = min(int(round((seg["start"] + seg["duration"]) * rate)), keep.stop)
        sp = _spec(comp[a:b], config, rate, a / rate)
        if base_spec is not None:
            sp = spectral_subtract(sp, base_spec)
        specs[d] = sp
        chirps[d] = ChirpConfig(float(seg["f_start"]), float(seg["f_end"]), float(seg["duration"]))
    return specs, chirps, pca, pair, base_spec is not None


def process_trace(trace: CsiTrace, config: PipelineConfig | None = None,
                  baseline: CsiTrace | None = None) -> ProcessResult:
    config = config or PipelineConfig()
    specs, chirps, pca, pair, used = analyse_trace(trace, config, baseline)
    est = estimate_resonance(
        specs.get("up"), specs.get("down"), chirps.get("up"), chirps.get("down"),
        min_freq=config.cutoff, threshold_divisor=config.threshold_divisor,
        window_hz=config.verification_window, min_peak_to_median=config.min_peak_to_median,
    )
    return ProcessResult(est, pair, pca, specs, used)
