"""Core CSI domain types, swept-sine chirp helpers and trace validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

from .errors import ConfigError, DomainError

DEFAULT_PACKET_RATE = 2000.0
DEFAULT_N_SUBCARRIERS = 30
DEFAULT_WAVELENGTH = 0.06

# slack for float time grids that land a hair past the sweep end
_T_SLACK = 1e-9


@dataclass(frozen=True)
class ChirpConfig:
    """Linear swept sine. ``sweep_rate`` is derived, never stored."""

    f_start: float = 0.0
    f_end: float = 1000.0
    duration: float = 15.0
    amplitude: float = 1.0
    initial_phase: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError(f"chirp duration must be > 0, got {self.duration}")
        if self.f_start < 0 or self.f_end < 0:
            raise ConfigError("chirp frequencies must be >= 0")
        if not all(math.isfinite(v) for v in (self.f_start, self.f_end, self.amplitude, self.initial_phase)):
            raise ConfigError("chirp parameters must be finite")

    @property
    def sweep_rate(self) -> float:
        return (self.f_end - self.f_start) / self.duration

    @property
    def f_low(self) -> float:
        return min(self.f_start, self.f_end)

    @property
    def f_high(self) -> float:
        return max(self.f_start, self.f_end)

    @property
    def direction(self) -> str:
        return "up" if self.f_end >= self.f_start else "down"

    def reversed(self) -> "ChirpConfig":
        """Same band and duration swept the other way."""
        return ChirpConfig(self.f_end, self.f_start, self.duration, self.amplitude, self.initial_phase)

    def to_dict(self) -> dict:
        return {
            "f_start": self.f_start,
            "f_end": self.f_end,
            "duration": self.duration,
            "amplitude": self.amplitude,
            "initial_phase": self.initial_phase,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChirpConfig":
        return cls(**{k: float(v) for k, v in d.items()})


def _check_time(cfg: ChirpConfig, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < -_T_SLACK) or np.any(t > cfg.duration + _T_SLACK) or np.any(~np.isfinite(t)):
        raise DomainError(f"t must lie in [0, {cfg.duration}] s")
    return t


def chirp_frequency(cfg: ChirpConfig, t):
    """Instantaneous excitation frequency (Hz) at time ``t`` into the sweep."""
    t = _check_time(cfg, t)
    out = cfg.f_start + cfg.sweep_rate * t
    return float(out) if out.ndim == 0 else out


def chirp_phase(cfg: ChirpConfig, t):
    """Accumulated phase argument of the chirp in radians, including ``initial_phase``."""
    t = _check_time(cfg, t)
    out = 2.0 * np.pi * (cfg.f_start * t + 0.5 * cfg.sweep_rate * t * t) + cfg.initial_phase
    return float(out) if out.ndim == 0 else out


def chirp_waveform(cfg: ChirpConfig, t):
    """Drive signal ``P sin(2pi(f_s t + eps t^2 / 2) + phi)``."""
    out = cfg.amplitude * np.sin(chirp_phase(cfg, t))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class CsiFrame:
    timestamp: float
    values: np.ndarray  # (n_rx, n_subcarriers) complex


@dataclass(frozen=True, eq=False)
class CsiTrace:
    """A time-ordered block of CSI frames.

    ``csi`` has shape ``(n_frames, n_rx, n_subcarriers)`` and is either complex64
    (what the file formats hold) or complex128. Arrays are made read-only on
    construction.
    """

    packet_rate: float
    timestamps: np.ndarray
    csi: np.ndarray
    carrier_wavelength: float = DEFAULT_WAVELENGTH
    n_tx: int = 1
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        ts = np.array(self.timestamps, dtype=np.float64)
        csi = np.array(self.csi)
        if csi.dtype not in (np.complex64, np.complex128):
            csi = csi.astype(np.complex128)
        if csi.ndim != 3:
            raise ConfigError(f"csi must be 3-D (frames, rx, subcarriers), got shape {csi.shape}")
        if ts.ndim != 1 or ts.shape[0] != csi.shape[0]:
            raise ConfigError(f"{ts.shape} timestamps for {csi.shape[0]} frames")
        ts.flags.writeable = False
        csi.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "csi", csi)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def n_frames(self) -> int:
        return self.csi.shape[0]

    @property
    def n_rx(self) -> int:
        return self.csi.shape[1]

    @property
    def n_subcarriers(self) -> int:
        return self.csi.shape[2]

    @property
    def duration(self) -> float:
        return self.n_frames / self.packet_rate

    @property
    def frames(self) -> Iterator[CsiFrame]:
        for t, v in zip(self.timestamps, self.csi):
            yield CsiFrame(float(t), v)

    def frame(self, i: int) -> CsiFrame:
        return CsiFrame(float(self.timestamps[i]), self.csi[i])

    def replace(self, **changes) -> "CsiTrace":
        kw = dict(
            packet_rate=self.packet_rate,
            timestamps=self.timestamps,
            csi=self.csi,
            carrier_wavelength=self.carrier_wavelength,
            n_tx=self.n_tx,
            metadata=self.metadata,
        )
        kw.update(changes)
        return CsiTrace(**kw)

    def __eq__(self, other):
        if not isinstance(other, CsiTrace):
            return NotImplemented
        return (
            self.packet_rate == other.packet_rate
            and self.carrier_wavelength == other.carrier_wavelength
            and self.n_tx == other.n_tx
            and self.metadata == other.metadata
            and self.csi.shape == other.csi.shape
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.csi, other.csi)
        )

    @classmethod
    def from_frames(cls, frames, packet_rate: float, n_rx: int, n_subcarriers: int, **kw) -> "CsiTrace":
        frames = list(frames)
        ts = np.array([f.timestamp for f in frames], dtype=np.float64)
        csi = np.empty((len(frames), n_rx, n_subcarriers), dtype=np.complex128)
        for i, f in enumerate(frames):
            v = np.asarray(f.values)
            if v.shape != (n_rx, n_subcarriers):
                raise ConfigError(f"frame {i} has shape {v.shape}, expected {(n_rx, n_subcarriers)}")
            csi[i] = v
        return cls(packet_rate=packet_rate, timestamps=ts, csi=csi, **kw)


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    frame: int | None = None
    cell: tuple[int, int] | None = None


def validate_trace(trace: CsiTrace, expected_shape: tuple[int, int] | None = None) -> list[Violation]:
    """Return every invariant violation found in ``trace``; empty means valid.

    ``expected_shape`` optionally pins ``(n_rx, n_subcarriers)`` as declared by
    some header the caller holds.
    """
    out: list[Violation] = []
    if not (math.isfinite(trace.packet_rate) and trace.packet_rate > 0):
        out.append(Violation("rate", f"packet_rate must be > 0, got {trace.packet_rate}"))
    if not (math.isfinite(trace.carrier_wavelength) and trace.carrier_wavelength > 0):
        out.append(Violation("header", f"carrier_wavelength must be > 0, got {trace.carrier_wavelength}"))
    if trace.n_tx != 1:
        out.append(Violation("header", f"only n_tx == 1 is supported, got {trace.n_tx}"))
    if trace.n_subcarriers < 1:
        out.append(Violation("dimension", "n_subcarriers must be >= 1"))
    if trace.n_rx < 2:
        out.append(Violation("dimension", f"n_rx must be >= 2 for conjugate multiplication, got {trace.n_rx}"))
    if expected_shape is not None and tuple(expected_shape) != (trace.n_rx, trace.n_subcarriers):
        out.append(
            Violation(
                "dimension",
                f"frames are {trace.n_rx}x{trace.n_subcarriers}, header declares "
                f"{expected_shape[0]}x{expected_shape[1]}",
            )
        )
    if trace.n_frames == 0:
        out.append(Violation("empty", "trace has no frames"))
        return out

    bad = ~(np.isfinite(trace.csi.real) & np.isfinite(trace.csi.imag))
    for f, a, s in zip(*np.nonzero(bad)):
        out.append(
            Violation("non-finite", f"non-finite sample at frame {f}, rx {a}, subcarrier {s}", int(f), (int(a), int(s)))
        )
    ts = trace.timestamps
    if not np.all(np.isfinite(ts)):
        idx = int(np.flatnonzero(~np.isfinite(ts))[0])
        out.append(Violation("non-finite", f"non-finite timestamp at frame {idx}", idx))
    else:
        steps = np.diff(ts)
        backwards = np.flatnonzero(steps <= 0)
        if backwards.size:
            i = int(backwards[0]) + 1
            out.append(
                Violation(
                    "non-monotone",
                    f"timestamps not strictly increasing at frame {i} "
                    f"({backwards.size} offending step(s))",
                    i,
                )
            )
        elif trace.packet_rate > 0 and trace.n_frames > 1:
            span = ts[-1] - ts[0] + 1.0 / trace.packet_rate
            expect = round(trace.packet_rate * span)
            if abs(trace.n_frames - expect) > 1:
                out.append(
                    Violation(
                        "rate",
                        f"{trace.n_frames} frames over {span:.6g} s is inconsistent with "
                        f"{trace.packet_rate:g} frames/s (expected ~{expect})",
                    )
                )
    return out
