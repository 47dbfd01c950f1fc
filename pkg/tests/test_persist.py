import json

import numpy as np
import pytest

from liquidsense.errors import ModelFormatError, ModelVersionError
from liquidsense.predict import fit_spline, load_model, predict_continuous, save_model, train_classifier
from liquidsense.predict.persist import dumps_model


def _spline(capacity=1800.0, end="clamped"):
    rng = np.random.default_rng(0)
    f = np.sort(rng.uniform(200, 700, 6))
    return fit_spline(f, np.sort(rng.uniform(0, 1800, 6))[::-1], end, capacity=capacity)


def _classifier():
    rng = np.random.default_rng(1)
    x = np.repeat([300.0, 330.0, 360.0, 400.0], 5) + rng.normal(0, 2, 20)
    return train_classifier(x, np.repeat([1, 2, 3, 4], 5))


@pytest.mark.parametrize("make", [_spline, _classifier, lambda: _spline(float("inf"), "natural")])
def test_save_load_save_identical(tmp_path, make):
    m = make()
    save_model(m, tmp_path / "a.json")
    save_model(load_model(tmp_path / "a.json"), tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    d = json.loads((tmp_path / "a.json").read_text())
    assert d["version"] == 1 and d["type"] in ("spline", "classifier")


def test_loaded_predictions_identical(tmp_path):
    grid = np.linspace(150, 800, 1000)
    s = _spline()
    save_model(s, tmp_path / "s.json")
    s2 = load_model(tmp_path / "s.json")
    assert [predict_continuous(s, f) for f in grid] == [predict_continuous(s2, f) for f in grid]
    np.testing.assert_array_equal(s.coeffs, s2.coeffs)
    c = _classifier()
    save_model(c, tmp_path / "c.json")
    np.testing.assert_array_equal(load_model(tmp_path / "c.json").predict(grid), c.predict(grid))


def test_infinite_capacity_is_null(tmp_path):
    d = json.loads(dumps_model(_spline(float("inf"))))
    assert d["capacity"] is None


def test_version_and_format_errors(tmp_path):
    d = json.loads(dumps_model(_spline()))
    d["version"] = 2
    (tmp_path / "v.json").write_text(json.dumps(d))
    with pytest.raises(ModelVersionError):
        load_model(tmp_path / "v.json")
    (tmp_path / "bad.json").write_text('{"type": "spline",\n "version": }')
    with pytest.raises(ModelFormatError, match="line 2"):
        load_model(tmp_path / "bad.json")
    (tmp_path / "t.json").write_text('{"type": "forest", "version": 1}')
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "t.json")
    del d["knots"]
    d["version"] = 1
    (tmp_path / "k.json").write_text(json.dumps(d))
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "k.json")
