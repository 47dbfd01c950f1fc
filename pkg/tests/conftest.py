import warnings

import numpy as np
import pytest

from liquidsense.simulator import SceneConfig, VibrationModel, synth_trace


@pytest.fixture(autouse=True)
def _quiet_baseline_warning():
    # the "no baseline, skipping spectral subtraction" warning is expected almost everywhere
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="no baseline trace", category=RuntimeWarning)
        yield


@pytest.fixture(scope="session")
def noiseless_scene():
    return SceneConfig(vibration=VibrationModel(resonance_freq=305.0, lag=0.0))


@pytest.fixture(scope="session")
def noiseless_trace(noiseless_scene):
    return synth_trace(noiseless_scene, seed=7, dtype=np.complex128)
