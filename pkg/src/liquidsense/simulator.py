"""Synthetic CSI for a chirp-driven vibrating container in a multipath scene.

Every path contributes ``a / L**2 * exp(-2j*pi*L/lambda)``. Dynamic paths have
their length stretched by ``d(t) * (cos(theta) + cos(theta_bar))`` where ``d`` is
the container wall displacement. Antennas differ only by a small per-path
length offset ``m * antenna_spacing * sin(arrival_angle)``; all subcarriers
share one wavelength.

Random draws come from PCG64 streams keyed by ``(seed, chunk)`` where a chunk is
``CHUNK`` consecutive frames, so any frame can be regenerated on its own and
chunked/parallel generation matches serial output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .csi import (
    DEFAULT_N_SUBCARRIERS,
    DEFAULT_PACKET_RATE,
    DEFAULT_WAVELENGTH,
    ChirpConfig,
    CsiFrame,
    CsiTrace,
    chirp_frequency,
    chirp_phase,
)
from .errors import ConfigError, DomainError
from .traceio import write_trace

CHUNK = 4096
SECOND_MODE_RATIO = 9.0 / 4.0
SECOND_MODE_ATTENUATION = 0.1
# "d * (cos + cos) << D": displacement term at most this fraction of the path length
SMALL_DISPLACEMENT_RATIO = 1e-2


@dataclass(frozen=True)
class VibrationModel:
    """First-mode response of the container wall.

    ``lag`` delays the amplitude envelope relative to the drive, which shifts the
    apparent peak by ``+-|sweep_rate| * lag`` depending on sweep direction.
    """

    resonance_freq: float = 305.0
    damping: float = 5.0
    peak_displacement: float = 0.95e-3
    lag: float = 0.05
    second_mode: bool = False

    def __post_init__(self):
        if not self.resonance_freq > 0:
            raise ConfigError("vibration.resonance_freq must be > 0")
        if not self.damping > 0:
            raise ConfigError("vibration.damping must be > 0")
        if not self.peak_displacement >= 0:
            raise ConfigError("vibration.peak_displacement must be >= 0")
        if not self.lag >= 0:
            raise ConfigError("vibration.lag must be >= 0")

    def gain(self, freq):
        """Displacement magnitude (m) when driven at ``freq`` Hz."""
        return _oscillator(freq, self.resonance_freq, self.damping, self.peak_displacement) + (
            _oscillator(
                freq,
                SECOND_MODE_RATIO * self.resonance_freq,
                self.damping,
                SECOND_MODE_ATTENUATION * self.peak_displacement,
            )
            if self.second_mode
            else 0.0
        )


def _oscillator(freq, f_r, damping, peak):
    freq = np.asarray(freq, dtype=float)
    c = peak * damping * f_r
    return c / np.sqrt((f_r * f_r - freq * freq) ** 2 + (damping * freq) ** 2)


@dataclass(frozen=True)
class PathSpec:
    length: float
    base_attenuation: float = 1.0
    is_dynamic: bool = False
    incidence_angle: float = 0.0
    reflection_angle: float = 0.0
    arrival_angle: float = 0.0

    def __post_init__(self):
        if not self.length > 0:
            raise ConfigError("path.length must be > 0")
        if self.base_attenuation < 0:
            raise ConfigError("path.base_attenuation must be >= 0")
        if self.is_dynamic:
            for name in ("incidence_angle", "reflection_angle"):
                v = getattr(self, name)
                if not 0.0 <= v <= math.pi / 2:
                    raise ConfigError(f"path.{name} must lie in [0, pi/2], got {v}")
        if abs(self.arrival_angle) > math.pi / 2:
            raise ConfigError("path.arrival_angle must lie in [-pi/2, pi/2]")

    @property
    def projection(self) -> float:
        """Path-length change per metre of wall displacement."""
        if not self.is_dynamic:
            return 0.0
        return math.cos(self.incidence_angle) + math.cos(self.reflection_angle)


@dataclass(frozen=True)
class ClockOffsetModel:
    """Common per-frame phase random walk plus fixed per-antenna phases."""

    walk_std: float = 0.1
    antenna_phases: tuple[float, ...] = (0.0, 0.7, -1.3)
    enabled: bool = True


def default_paths() -> tuple[PathSpec, ...]:
    return (
        PathSpec(1.0, 1.0, arrival_angle=0.3),
        PathSpec(3.2, 1.0, arrival_angle=1.1),
        PathSpec(1.1, 1.0, is_dynamic=True, incidence_angle=math.pi / 3, reflection_angle=math.pi / 3,
                 arrival_angle=-0.5),
    )


@dataclass(frozen=True)
class SceneConfig:
    paths: tuple[PathSpec, ...] = field(default_factory=default_paths)
    chirp: ChirpConfig = field(default_factory=ChirpConfig)
    vibration: VibrationModel = field(default_factory=VibrationModel)
    noise_std: float = 0.0
    clock: ClockOffsetModel = field(default_factory=ClockOffsetModel)
    carrier_wavelength: float = DEFAULT_WAVELENGTH
    n_rx: int = 3
    n_subcarriers: int = DEFAULT_N_SUBCARRIERS
    antenna_spacing: float = 0.03
    sweeps: tuple[str, ...] = ("up", "down")
    padding: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        object.__setattr__(self, "sweeps", tuple(self.sweeps))
        if not any(p.is_dynamic for p in self.paths):
            raise ConfigError("scene.paths needs at least one dynamic path")
        if all(p.is_dynamic for p in self.paths):
            raise ConfigError("scene.paths needs at least one static path")
        if self.n_rx < 2:
            raise ConfigError("scene.n_rx must be >= 2")
        if self.n_subcarriers < 1:
            raise ConfigError("scene.n_subcarriers must be >= 1")
        if not self.carrier_wavelength > 0:
            raise ConfigError("scene.carrier_wavelength must be > 0")
        if self.noise_std < 0:
            raise ConfigError("scene.noise_std must be >= 0")
        if self.padding < 0:
            raise ConfigError("scene.padding must be >= 0")
        if not self.sweeps or any(s not in ("up", "down") for s in self.sweeps):
            raise ConfigError("scene.sweeps must be a non-empty list of 'up'/'down'")
        f_r = self.vibration.resonance_freq
        if not self.chirp.f_low <= f_r <= self.chirp.f_high:
            raise ConfigError(
                f"vibration.resonance_freq {f_r} Hz outside excitation band "
                f"[{self.chirp.f_low}, {self.chirp.f_high}] Hz"
            )
        if self.clock.enabled and len(self.clock.antenna_phases) < self.n_rx:
            raise ConfigError(f"clock.antenna_phases needs {self.n_rx} entries")
        d_max = float(np.max(self.vibration.gain(np.linspace(self.chirp.f_low, self.chirp.f_high, 4001))))
        d_max = max(d_max, self.vibration.peak_displacement)
        for k, p in enumerate(self.paths):
            if p.is_dynamic and d_max * p.projection > SMALL_DISPLACEMENT_RATIO * p.length:
                raise ConfigError(f"paths[{k}]: displacement not small relative to path length")

    def chirps(self) -> list[ChirpConfig]:
        up = self.chirp if self.chirp.direction == "up" else self.chirp.reversed()
        return [up if s == "up" else up.reversed() for s in self.sweeps]

    @property
    def duration(self) -> float:
        return self.padding + sum(c.duration for c in self.chirps())

    def with_resonance(self, f_r: float) -> "SceneConfig":
        return replace(self, vibration=replace(self.vibration, resonance_freq=float(f_r)))

    def sweep_segments(self) -> list[dict]:
        segs, start = [], self.padding
        for c in self.chirps():
            segs.append(
                {"direction": c.direction, "start": start, "duration": c.duration, "f_start": c.f_start,
                 "f_end": c.f_end}
            )
            start += c.duration
        return segs


@dataclass(frozen=True)
class GroundTruthCurve:
    """Level (ml) to first-resonance frequency (Hz), strictly decreasing."""

    levels: tuple[float, ...]
    freqs: tuple[float, ...]
    capacity: float
    f_min: float = 140.0
    f_max: float = 900.0

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float)
        fr = np.asarray(self.freqs, dtype=float)
        if lv.ndim != 1 or lv.shape != fr.shape or lv.size < 2:
            raise ConfigError("curve needs >= 2 (level, freq) knots")
        order = np.argsort(lv)
        lv, fr = lv[order], fr[order]
        if np.any(np.diff(lv) <= 0):
            raise ConfigError("curve levels must be distinct")
        if np.any(np.diff(fr) >= 0):
            raise ConfigError("curve must be strictly decreasing: higher level, lower frequency")
        if fr.min() < self.f_min or fr.max() > self.f_max:
            raise ConfigError(f"curve frequencies must lie in [{self.f_min}, {self.f_max}] Hz")
        if lv[0] < 0 or lv[-1] > self.capacity:
            raise ConfigError("curve levels must lie in [0, capacity]")
        object.__setattr__(self, "levels", tuple(lv.tolist()))
        object.__setattr__(self, "freqs", tuple(fr.tolist()))

    def frequency(self, level: float) -> float:
        if not 0 <= level <= self.capacity:
            raise DomainError(f"level {level} ml outside [0, {self.capacity}] ml")
        if not self.levels[0] <= level <= self.levels[-1]:
            raise DomainError(f"level {level} ml outside curve knots [{self.levels[0]}, {self.levels[-1]}]")
        return float(np.interp(level, self.levels, self.freqs))

    def to_dict(self) -> dict:
        return {"capacity_ml": self.capacity, "knots": [[lv, f] for lv, f in zip(self.levels, self.freqs)]}

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruthCurve":
        knots = d["knots"]
        return cls(tuple(k[0] for k in knots), tuple(k[1] for k in knots), float(d["capacity_ml"]))


def default_curve(capacity: float = 1800.0, n_levels: int = 10) -> GroundTruthCurve:
    """Convex-ish metal-container curve: slow change near empty, fast near full."""
    x = np.linspace(0.0, 1.0, n_levels)
    freqs = 720.0 - 200.0 * x - 100.0 * x**2
    return GroundTruthCurve(tuple((x * capacity).tolist()), tuple(freqs.tolist()), capacity)


def displacement(vib: VibrationModel, chirp: ChirpConfig, t):
    """Wall displacement in metres ``t`` seconds into a sweep.

    The envelope is the oscillator gain at the drive frequency ``lag`` seconds
    earlier (held at ``f_start`` before the sweep began); the carrier follows the
    chirp phase.
    """
    phase = chirp_phase(chirp, t)
    t_lag = np.clip(np.asarray(t, dtype=float) - vib.lag, 0.0, chirp.duration)
    out = vib.gain(chirp_frequency(chirp, t_lag)) * np.sin(phase)
    return float(out) if np.ndim(out) == 0 else out


def path_response(path: PathSpec, wavelength: float, disp=0.0, offset=0.0):
    """Complex gain of one path with wall displacement ``disp`` and antenna length offset ``offset``."""
    length = path.length + offset + np.asarray(disp) * path.projection
    return path.base_attenuation / length**2 * np.exp(-2j * np.pi * length / wavelength)


def _displacement_series(scene: SceneConfig, times: np.ndarray) -> np.ndarray:
    d = np.zeros_like(times)
    for seg, chirp in zip(scene.sweep_segments(), scene.chirps()):
        local = times - seg["start"]
        # half-open segments so a boundary sample belongs to the later sweep
        m = (local >= 0) & (local < seg["duration"])
        if m.any():
            d[m] = displacement(scene.vibration, chirp, local[m])
    return d


def _chunk_draws(scene: SceneConfig, seed: int, chunk: int, need_noise: bool):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk,))))
    steps = rng.standard_normal(CHUNK)
    noise = None
    if need_noise:
        noise = rng.standard_normal((CHUNK, scene.n_rx, scene.n_subcarriers, 2))
    return steps, noise


def _synth(scene: SceneConfig, packet_rate: float, seed: int, idx: np.ndarray, dtype) -> tuple:
    times = idx / packet_rate
    disp = _displacement_series(scene, times)
    h = np.zeros((idx.size, scene.n_rx), dtype=np.complex128)
    for p in scene.paths:
        for m in range(scene.n_rx):
            off = m * scene.antenna_spacing * math.sin(p.arrival_angle)
            h[:, m] += path_response(p, scene.carrier_wavelength, disp if p.is_dynamic else 0.0, off)

    need_noise = scene.noise_std > 0
    walk = np.zeros(idx.size)
    noise = np.zeros((idx.size, scene.n_rx, scene.n_subcarriers), dtype=np.complex128) if need_noise else None
    if scene.clock.enabled or need_noise:
        last_chunk = int(idx.max()) // CHUNK if idx.size else -1
        chunks_needed = set((idx // CHUNK).tolist())
        cum = 0.0
        for c in range(last_chunk + 1):
            # the walk is cumulative, so every earlier chunk's steps are needed
            steps, nz = _chunk_draws(scene, seed, c, need_noise and c in chunks_needed)
            csum = cum + np.cumsum(steps)
            if c in chunks_needed:
                sel = (idx // CHUNK) == c
                local = idx[sel] - c * CHUNK
                walk[sel] = csum[local]
                if need_noise:
                    z = nz[local]
                    noise[sel] = (z[..., 0] + 1j * z[..., 1]) * (scene.noise_std / math.sqrt(2.0))
            cum = csum[-1]

    out = np.repeat(h[:, :, None], scene.n_subcarriers, axis=2)
    if scene.clock.enabled:
        ant = np.asarray(scene.clock.antenna_phases[: scene.n_rx], dtype=float)
        out = out * np.exp(1j * (scene.clock.walk_std * walk))[:, None, None] * np.exp(1j * ant)[None, :, None]
    if need_noise:
        out = out + noise
    return times, out.astype(dtype)


def _check_rate(scene: SceneConfig, packet_rate: float):
    if not packet_rate > 0:
        raise ConfigError("packet_rate must be > 0")
    f_top = max(c.f_high for c in scene.chirps())
    if packet_rate < 2.0 * f_top:
        raise ConfigError(f"packet_rate {packet_rate} below Nyquist rate {2.0 * f_top} for a {f_top} Hz chirp")


def synth_frame(scene: SceneConfig, t: float, seed: int = 0, packet_rate: float = DEFAULT_PACKET_RATE,
                dtype=np.complex128) -> CsiFrame:
    """Single frame at time ``t`` (snapped to the packet grid) of the trace ``synth_trace`` would produce."""
    _check_rate(scene, packet_rate)
    if not 0 <= t <= scene.duration:
        raise DomainError(f"t={t} outside trace duration [0, {scene.duration}] s")
    idx = np.array([int(round(t * packet_rate))])
    times, out = _synth(scene, packet_rate, seed, idx, dtype)
    return CsiFrame(float(times[0]), out[0])


def synth_trace(scene: SceneConfig, packet_rate: float = DEFAULT_PACKET_RATE, seed: int = 0,
                dtype=np.complex64) -> CsiTrace:
    """Uniformly sampled trace covering padding plus every configured sweep."""
    _check_rate(scene, packet_rate)
    n = int(round(packet_rate * scene.duration))
    idx = np.arange(n)
    times, csi = _synth(scene, packet_rate, seed, idx, dtype)
    vib = scene.vibration
    meta = {
        "simulated": True,
        "seed": int(seed),
        "resonance_freq": vib.resonance_freq,
        "damping": vib.damping,
        "lag": vib.lag,
        "second_mode": vib.second_mode,
        "padding": scene.padding,
        "sweeps": scene.sweep_segments(),
    }
    return CsiTrace(packet_rate=float(packet_rate), timestamps=times, csi=csi,
                    carrier_wavelength=scene.carrier_wavelength, metadata=meta)


def trace_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1)[0])


def iter_dataset(curve: GroundTruthCurve, base_scene: SceneConfig, levels, sweeps_per_level: int,
                 seed: int = 0, packet_rate: float = DEFAULT_PACKET_RATE):
    """Generator form of ``synth_dataset``; validates everything before the first trace is built."""
    levels = [float(lv) for lv in levels]
    for lv in levels:
        if not 0 <= lv <= curve.capacity:
            raise DomainError(f"level {lv} ml outside [0, {curve.capacity}] ml")
    if sweeps_per_level < 1:
        raise ConfigError("sweeps_per_level must be >= 1")
    scenes = [base_scene.with_resonance(curve.frequency(lv)) for lv in levels]
    _check_rate(base_scene, packet_rate)
    ordered = sorted(set(levels))
    return _dataset_gen(curve, levels, scenes, ordered, sweeps_per_level, seed, packet_rate)


def _dataset_gen(curve, levels, scenes, ordered, sweeps_per_level, seed, packet_rate):
    k = 0
    for lv, scene in zip(levels, scenes):
        for _ in range(sweeps_per_level):
            tr = synth_trace(scene, packet_rate, trace_seed(seed, k))
            meta = dict(tr.metadata)
            meta.update(level_ml=lv, level_class=ordered.index(lv) + 1, capacity_ml=curve.capacity)
            yield tr.replace(metadata=meta)
            k += 1


def synth_dataset(curve: GroundTruthCurve, base_scene: SceneConfig, levels, sweeps_per_level: int,
                  seed: int = 0, packet_rate: float = DEFAULT_PACKET_RATE) -> list[CsiTrace]:
    """Labeled traces, ``sweeps_per_level`` per level, classes numbered 1.. from the lowest level.

    Each level's resonance frequency is linearly interpolated between curve knots.
    """
    return list(iter_dataset(curve, base_scene, levels, sweeps_per_level, seed, packet_rate))


MANIFEST_VERSION = 1


def write_dataset(traces, out_dir, capacity: float, count: int | None = None) -> dict:
    """Write traces as binary files plus ``manifest.json``; returns the manifest.

    ``traces`` may be a generator when ``count`` is given, so a large dataset
    never has to sit in memory at once.
    """
    if count is None:
        traces = list(traces)
        count = len(traces)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(count - 1)))
    entries = []
    for i, tr in enumerate(traces):
        name = f"trace_{i:0{width}d}.csit"
        write_trace(tr, out_dir / name, "binary")
        m = tr.metadata
        entries.append(
            {"file": name, "level_ml": m["level_ml"], "level_class": m["level_class"],
             "resonance_freq": m["resonance_freq"], "seed": m["seed"]}
        )
    manifest = {"version": MANIFEST_VERSION, "capacity_ml": capacity, "traces": entries}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# -- JSON config -------------------------------------------------------------

def scene_from_dict(d: dict) -> SceneConfig:
    kw = {}
    if "paths" in d:
        kw["paths"] = tuple(PathSpec(**p) for p in d["paths"])
    if "chirp" in d:
        kw["chirp"] = ChirpConfig.from_dict(d["chirp"])
    if "vibration" in d:
        kw["vibration"] = VibrationModel(**d["vibration"])
    if "clock" in d:
        c = dict(d["clock"])
        if "antenna_phases" in c:
            c["antenna_phases"] = tuple(c["antenna_phases"])
        kw["clock"] = ClockOffsetModel(**c)
    for k in ("noise_std", "carrier_wavelength", "antenna_spacing", "padding"):
        if k in d:
            kw[k] = float(d[k])
    for k in ("n_rx", "n_subcarriers"):
        if k in d:
            kw[k] = int(d[k])
    if "sweeps" in d:
        kw["sweeps"] = tuple(d["sweeps"])
    return SceneConfig(**kw)


def scene_to_dict(scene: SceneConfig) -> dict:
    return {
        "paths": [vars(p).copy() for p in scene.paths],
        "chirp": scene.chirp.to_dict(),
        "vibration": vars(scene.vibration).copy(),
        "noise_std": scene.noise_std,
        "clock": {"walk_std": scene.clock.walk_std, "antenna_phases": list(scene.clock.antenna_phases),
                  "enabled": scene.clock.enabled},
        "carrier_wavelength": scene.carrier_wavelength,
        "n_rx": scene.n_rx,
        "n_subcarriers": scene.n_subcarriers,
        "antenna_spacing": scene.antenna_spacing,
        "sweeps": list(scene.sweeps),
        "padding": scene.padding,
    }
