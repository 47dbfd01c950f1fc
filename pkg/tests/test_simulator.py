import json
import math
from dataclasses import replace

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liquidsense.cli import _schema
from liquidsense.csi import ChirpConfig, chirp_frequency, chirp_phase
from liquidsense.errors import ConfigError, DomainError
from liquidsense.simulator import (
    CHUNK,
    ClockOffsetModel,
    GroundTruthCurve,
    PathSpec,
    SceneConfig,
    VibrationModel,
    default_curve,
    displacement,
    path_response,
    scene_from_dict,
    scene_to_dict,
    synth_dataset,
    synth_frame,
    synth_trace,
    write_dataset,
)
from liquidsense.traceio import read_trace


def _small_scene(**kw):
    base = dict(chirp=ChirpConfig(0.0, 400.0, 1.0), n_subcarriers=3,
                vibration=VibrationModel(resonance_freq=200.0))
    base.update(kw)
    return SceneConfig(**base)


def test_gain_peaks_at_resonance():
    vib = VibrationModel(resonance_freq=305.0, damping=5.0, peak_displacement=0.95e-3)
    grid = np.arange(0.0, 1000.0, 0.01)
    assert grid[np.argmax(vib.gain(grid))] == pytest.approx(305.0, abs=0.05)
    assert vib.gain(305.0) == pytest.approx(0.95e-3, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(f_r=st.floats(140, 900), gamma=st.floats(1, 20), k=st.floats(10, 40), sign=st.sampled_from([-1, 1]))
def test_far_from_resonance_response_is_small(f_r, gamma, k, sign):
    w = f_r + sign * k * gamma
    if w <= 0:
        return
    vib = VibrationModel(resonance_freq=f_r, damping=gamma, peak_displacement=1.0)
    # direct evaluation of the oscillator magnitude, normalized at f_r
    raw = lambda x: 1.0 / math.sqrt((f_r**2 - x**2) ** 2 + (gamma * x) ** 2)
    expected = raw(w) / raw(f_r)
    assert float(vib.gain(w)) == pytest.approx(expected, rel=1e-9)
    assert expected <= 0.1


def test_displacement_at_resonance_phase_peak():
    vib = VibrationModel(resonance_freq=305.0, lag=0.0)
    base = ChirpConfig(0.0, 1000.0, 15.0)
    t_r = 305.0 / base.sweep_rate
    phi = math.pi / 2 - chirp_phase(base, t_r)
    chirp = replace(base, initial_phase=phi)
    assert chirp_frequency(chirp, t_r) == pytest.approx(305.0)
    assert displacement(vib, chirp, t_r) == pytest.approx(0.95e-3, rel=1e-9)
    with pytest.raises(DomainError):
        displacement(vib, chirp, 15.5)


def test_peak_phase_swing():
    path = PathSpec(1.1, 1.0, is_dynamic=True, incidence_angle=math.pi / 3, reflection_angle=math.pi / 3)
    assert path.projection == pytest.approx(1.0)
    d = 0.95e-3
    swing = abs(np.angle(path_response(path, 0.06, d) / path_response(path, 0.06, 0.0)))
    assert swing == pytest.approx(2 * math.pi * 0.00095 / 0.06, rel=1e-3)
    assert swing == pytest.approx(0.0995, rel=0.01)


def _single_static_scene(**kw):
    paths = (PathSpec(1.0, 1.0), PathSpec(2.0, 0.0, is_dynamic=True))
    return _small_scene(paths=paths, clock=ClockOffsetModel(enabled=False), antenna_spacing=0.0, **kw)


def test_single_static_path_frame():
    frame = synth_frame(_single_static_scene(), 0.3, packet_rate=1000)
    np.testing.assert_allclose(np.abs(frame.values), 1.0, rtol=1e-12)
    expected = (-2 * math.pi / 0.06) % (2 * math.pi)
    assert expected == pytest.approx(2 * math.pi / 3)
    np.testing.assert_allclose(np.angle(frame.values) % (2 * math.pi), expected, atol=1e-9)


def test_zero_displacement_is_time_constant():
    scene = _small_scene(vibration=VibrationModel(resonance_freq=200.0, peak_displacement=0.0),
                         clock=ClockOffsetModel(enabled=False))
    tr = synth_trace(scene, packet_rate=1000, dtype=np.complex128)
    np.testing.assert_array_equal(tr.csi, np.broadcast_to(tr.csi[0], tr.csi.shape))


def test_frame_determinism_and_chunk_consistency():
    scene = _small_scene(noise_std=0.01, chirp=ChirpConfig(0.0, 400.0, 10.0))
    tr = synth_trace(scene, packet_rate=1000, seed=5, dtype=np.complex128)
    for i in (0, 1, CHUNK - 1, CHUNK, 2 * CHUNK + 17, tr.n_frames - 1):
        f = synth_frame(scene, i / 1000.0, seed=5, packet_rate=1000)
        np.testing.assert_array_equal(f.values, tr.csi[i])
        assert f.timestamp == tr.timestamps[i]
    a = synth_frame(scene, 4.2, seed=5, packet_rate=1000)
    b = synth_frame(scene, 4.2, seed=5, packet_rate=1000)
    np.testing.assert_array_equal(a.values, b.values)


def test_default_trace_shape(noiseless_trace):
    assert noiseless_trace.n_frames == 60000
    assert noiseless_trace.duration == pytest.approx(30.0)
    assert [s["direction"] for s in noiseless_trace.metadata["sweeps"]] == ["up", "down"]


def test_seed_changes_noise_only():
    scene = _small_scene(noise_std=0.01)
    a = synth_trace(scene, packet_rate=1000, seed=1)
    b = synth_trace(scene, packet_rate=1000, seed=2)
    assert not np.array_equal(a.csi, b.csi)
    strip = lambda m: {k: v for k, v in m.items() if k != "seed"}
    assert strip(a.metadata) == strip(b.metadata)
    assert a.metadata["resonance_freq"] == 200.0


def test_nyquist_violation():
    with pytest.raises(ConfigError):
        synth_trace(_small_scene(), packet_rate=700)


def test_noise_power():
    scene = _small_scene(noise_std=0.2, paths=(PathSpec(1.0, 0.0), PathSpec(1.0, 0.0, is_dynamic=True)),
                         clock=ClockOffsetModel(enabled=False))
    tr = synth_trace(scene, packet_rate=1000, seed=0, dtype=np.complex128)
    assert np.mean(np.abs(tr.csi) ** 2) == pytest.approx(0.04, rel=0.03)


def test_scene_validation():
    with pytest.raises(ConfigError):
        _small_scene(paths=(PathSpec(1.0),))
    with pytest.raises(ConfigError):
        _small_scene(paths=(PathSpec(1.0, is_dynamic=True),))
    with pytest.raises(ConfigError):
        _small_scene(vibration=VibrationModel(resonance_freq=500.0))
    with pytest.raises(ConfigError):
        # 3 cm peak displacement on a 1 m path is not small
        _small_scene(vibration=VibrationModel(resonance_freq=200.0, peak_displacement=0.03))
    with pytest.raises(ConfigError):
        PathSpec(1.0, is_dynamic=True, incidence_angle=2.0)
    with pytest.raises(ConfigError):
        VibrationModel(damping=0.0)


def test_curve_invariants():
    with pytest.raises(ConfigError):
        GroundTruthCurve((0.0, 100.0), (300.0, 320.0), 200.0)
    with pytest.raises(ConfigError):
        GroundTruthCurve((0.0, 100.0), (950.0, 320.0), 200.0)
    curve = default_curve()
    assert curve.capacity == 1800.0 and len(curve.levels) == 10
    assert curve.freqs[0] - curve.freqs[-1] == pytest.approx(300.0)
    assert min(-np.diff(curve.freqs)) >= 20.0
    assert GroundTruthCurve.from_dict(curve.to_dict()) == curve


def _dataset_curve():
    return GroundTruthCurve((0.0, 500.0, 1000.0), (300.0, 250.0, 160.0), 1000.0)


def test_dataset_labels_and_interpolation():
    scene = _small_scene(chirp=ChirpConfig(0.0, 400.0, 0.5), n_subcarriers=1)
    traces = synth_dataset(_dataset_curve(), scene, [0.0, 500.0, 750.0], 2, seed=1, packet_rate=900)
    assert len(traces) == 6
    meta = [t.metadata for t in traces]
    assert [m["level_class"] for m in meta] == [1, 1, 2, 2, 3, 3]
    assert meta[2]["resonance_freq"] == 250.0  # exactly at a knot
    assert meta[4]["resonance_freq"] == pytest.approx(205.0)
    freqs = [m["resonance_freq"] for m in meta[::2]]
    assert freqs[0] > freqs[1] > freqs[2]
    with pytest.raises(DomainError):
        synth_dataset(_dataset_curve(), scene, [1200.0], 1, packet_rate=900)


def test_ten_by_ten_dataset(tmp_path):
    curve = default_curve()
    scene = _small_scene(chirp=ChirpConfig(0.0, 800.0, 0.3), n_subcarriers=1)
    traces = synth_dataset(curve, scene, curve.levels, 10, seed=0, packet_rate=1700)
    assert len(traces) == 100
    manifest = write_dataset(traces, tmp_path, curve.capacity)
    assert len(manifest["traces"]) == 100
    assert sorted({e["level_class"] for e in manifest["traces"]}) == list(range(1, 11))
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk == manifest
    assert read_trace(tmp_path / manifest["traces"][37]["file"]).metadata["level_class"] == 4


def test_scene_dict_roundtrip_and_schema():
    scene = SceneConfig(noise_std=0.01, padding=1.0)
    d = scene_to_dict(scene)
    assert scene_from_dict(d) == scene
    jsonschema.validate({"scene": d, "curve": default_curve().to_dict()}, _schema("simulation"))


def test_common_mode_clock():
    clocked = _small_scene()
    plain = replace(clocked, clock=ClockOffsetModel(enabled=False))
    a = synth_trace(clocked, packet_rate=1000, seed=3, dtype=np.complex128).csi
    b = synth_trace(plain, packet_rate=1000, seed=3, dtype=np.complex128).csi
    ratio = a / b
    # per frame, each antenna sees the same walk times its own fixed phase
    rel = ratio * np.exp(-1j * np.array(clocked.clock.antenna_phases))[None, :, None]
    np.testing.assert_allclose(rel, np.broadcast_to(rel[:, :1, :1], rel.shape), atol=1e-12)
    np.testing.assert_allclose(np.abs(ratio), 1.0, atol=1e-12)
