import numpy as np
import pytest

from pdnet.nn import LRN, BatchNorm, Conv2d, Linear, Pool2d, grad_check, relative_error, run_suite
from pdnet.nn.gradcheck import CASES, GROUPS, numeric_gradient


def test_relative_error_definition():
    assert relative_error(np.array([1.0]), np.array([1.0])) == 0.0
    assert relative_error(np.array([2.0]), np.array([1.0])) == pytest.approx(0.5)
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0


def test_numeric_gradient_of_quadratic():
    t = np.array([1.0, -2.0, 3.0])
    g = numeric_gradient(lambda: float(np.sum(t ** 2)), t)
    np.testing.assert_allclose(g, 2 * t, rtol=1e-9)
    assert np.array_equal(t, [1.0, -2.0, 3.0])


def test_linear_is_exact_up_to_rounding():
    rng = np.random.default_rng(0)
    layer = Linear(6, 4)
    rep = grad_check(layer, rng.normal(size=(3, 6)), 1e-4,
                     {"W": rng.normal(size=(4, 6)), "b": rng.normal(size=4)})
    assert rep.max_error < 1e-7


def test_conv_on_2x3x5x5_input():
    rng = np.random.default_rng(1)
    layer = Conv2d(3, 2, 3, 1, 1)
    rep = grad_check(layer, rng.normal(size=(2, 3, 5, 5)), 1e-4, layer.init_params(None, rng))
    assert rep.passed
    assert set(rep.errors) == {"input", "W", "b"}


@pytest.mark.parametrize("layer,shape,params", [
    (Linear(5, 3), (2, 5), None),
    (Conv2d(2, 3, 3), (2, 2, 5, 5), None),
    (LRN(alpha=1.0), (2, 7, 2, 2), None),
    (BatchNorm(3), (4, 3, 2, 2), None),
])
def test_corrupted_gradient_is_caught(layer, shape, params):
    rng = np.random.default_rng(2)
    params = layer.init_params(shape[1:], rng) if params is None else params
    x = rng.normal(size=shape)
    assert grad_check(layer, x, 1e-4, params).passed
    assert not grad_check(layer, x, 1e-4, params, tamper=0.1).passed


def test_max_pool_away_from_ties():
    x = np.random.default_rng(3).permutation(2 * 2 * 6 * 6).reshape(2, 2, 6, 6) / 10.0
    assert grad_check(Pool2d("max", 2, 2), x).passed


def test_suite_covers_every_layer_type():
    assert set(GROUPS["all"]) == set(CASES)
    reports = run_suite(CASES, trials=5, tolerance=1e-4, seed=11)
    assert all(r.passed for r in reports.values()), {k: r.max_error for k, r in reports.items()}


def test_suite_is_reproducible():
    a = run_suite(["bn"], 2, 1e-4, seed=7)["bn"]
    b = run_suite(["bn"], 2, 1e-4, seed=7)["bn"]
    assert a.errors == b.errors


def test_strict_tolerance_fails():
    reports = run_suite(["fc", "tanh"], 1, 1e-12, seed=0)
    assert not any(r.passed for r in reports.values())
