import warnings
from dataclasses import replace

import jsonschema
import numpy as np
import pytest

from liquidsense.cli import _schema
from liquidsense.errors import ConfigError
from liquidsense.pipeline import PipelineConfig, component_series, process_trace
from liquidsense.simulator import SceneConfig, VibrationModel, synth_trace

BIN = 2000 / 2048


def test_defaults():
    c = PipelineConfig()
    assert (c.f_start, c.f_end, c.packet_rate, c.cutoff) == (0.0, 1000.0, 2000.0, 100.0)
    assert round(c.sweep_rate, 2) == 66.67
    assert (c.window_len, c.overlap, c.fft_len) == (2048, 2000, 2048)
    assert (c.threshold_divisor, c.verification_window) == (3.0, 200.0)
    assert [s["direction"] for s in c.sweep_segments()] == ["up", "down"]


def test_config_dict_roundtrip_and_schema():
    c = PipelineConfig(pair=(1, 2), padding=2.0)
    d = c.to_dict()
    jsonschema.validate(d, _schema("pipeline"))
    assert PipelineConfig.from_dict(d) == c
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"window": 5})
    with pytest.raises(ConfigError):
        PipelineConfig(overlap=4096)
    with pytest.raises(ConfigError):
        PipelineConfig(baseline_policy="sometimes")


def test_missing_baseline_warns(noiseless_trace):
    with pytest.warns(RuntimeWarning, match="skipping spectral subtraction"):
        res = process_trace(noiseless_trace)
    assert not res.baseline_used
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = process_trace(noiseless_trace, PipelineConfig(baseline_policy="none"))
    assert abs(res.estimate.f_resonance - 305.0) <= 2 * BIN


def test_padding_serves_as_baseline():
    scene = SceneConfig(vibration=VibrationModel(resonance_freq=420.0, lag=0.0), noise_std=0.003, padding=1.5)
    res = process_trace(synth_trace(scene, seed=3))
    assert res.baseline_used
    assert abs(res.estimate.f_resonance - 420.0) <= 2 * BIN


def test_explicit_baseline_trace():
    scene = SceneConfig(vibration=VibrationModel(resonance_freq=610.0, lag=0.0), noise_std=0.003)
    quiet = replace(scene, vibration=replace(scene.vibration, peak_displacement=0.0))
    res = process_trace(synth_trace(scene, seed=1), baseline=synth_trace(quiet, seed=99))
    assert res.baseline_used
    assert abs(res.estimate.f_resonance - 610.0) <= 2 * BIN
    assert np.all(res.spectrograms["up"].power >= 0)


def test_fixed_pair_and_config_segments(noiseless_trace):
    bare = noiseless_trace.replace(metadata={})
    res = process_trace(bare, PipelineConfig(pair=(0, 2)))
    assert res.pair == (0, 2)
    assert abs(res.estimate.f_resonance - 305.0) <= 2 * BIN


def test_component_is_zero_outside_trim(noiseless_trace):
    comp, keep, pca, pair = component_series(noiseless_trace)
    assert keep == slice(500, 59500)
    assert np.all(comp[:500] == 0) and np.all(comp[59500:] == 0)
    assert np.linalg.norm(pca.weights) == pytest.approx(1.0)
