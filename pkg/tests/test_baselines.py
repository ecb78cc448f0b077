import numpy as np
import pytest

from cpnrom.baselines import (
    _quadratic_features,
    fit_linear,
    fit_quadratic,
    quadratic_metrics,
)
from cpnrom.cpn import evaluate
from cpnrom.snapdata import SnapshotSet, XGeometry


def euclid(d):
    return XGeometry.from_weights(d, None)


def test_linear_full_rank(rng):
    states = rng.normal(size=(4, 4))
    s = SnapshotSet(states)
    model = fit_linear(s, euclid(4), n=4, center=False)
    assert evaluate(model, s).re < 1e-10


def test_linear_rank_guard(rng):
    s = SnapshotSet(rng.normal(size=(3, 2)))
    with pytest.raises(ValueError, match="exceeds the rank"):
        fit_linear(s, euclid(3), n=3)


def test_quadratic_feature_order():
    a = np.array([[1.0], [2.0], [3.0]])
    z = _quadratic_features(a)
    # (1,1), (1,2), (1,3), (2,2), (2,3), (3,3)
    assert z[:, 0] == pytest.approx([1.0, 2.0, 3.0, 4.0, 6.0, 9.0])
    assert z.shape[0] == 3 * 4 // 2


def test_exact_quadratic_manifold():
    t = np.linspace(-1.0, 1.0, 50)
    s = SnapshotSet(np.vstack([t, t**2, np.zeros_like(t)]))
    model = fit_quadratic(s, euclid(3), n=1, center=False)
    assert quadratic_metrics(model, s).re < 1e-8
    direction = model.basis_quad[:, 0]
    assert np.abs(direction / np.linalg.norm(direction)) == pytest.approx(
        [0.0, 1.0, 0.0], abs=1e-8)


def test_ridge_infinity_reduces_to_linear(rng):
    states = rng.normal(size=(5, 40))
    s = SnapshotSet(states)
    g = euclid(5)
    quad = fit_quadratic(s, g, n=2, ridge_grid=(1e14,))
    assert np.abs(quad.basis_quad).max() < 1e-8
    lin = fit_linear(s, g, n=2)
    assert quadratic_metrics(quad, s).re == pytest.approx(
        evaluate(lin, s).re, rel=1e-6)


def test_quadratic_never_worse_than_linear_at_zero_ridge(rng):
    states = rng.normal(size=(6, 60))
    s = SnapshotSet(states)
    g = euclid(6)
    lin = fit_linear(s, g, n=2)
    quad = fit_quadratic(s, g, n=2, ridge_grid=(1e-13,))
    assert quadratic_metrics(quad, s).re <= evaluate(lin, s).re + 1e-12


def test_dimension_reporting(rng):
    s = SnapshotSet(rng.normal(size=(8, 30)))
    quad = fit_quadratic(s, euclid(8), n=3)
    assert quad.basis_quad.shape[1] == 3 * 4 // 2
    assert quad.N == 3 * 6 // 2  # n(n+3)/2


def test_empty_ridge_grid(rng):
    s = SnapshotSet(rng.normal(size=(3, 10)))
    with pytest.raises(ValueError, match="grid"):
        fit_quadratic(s, euclid(3), n=1, ridge_grid=())
