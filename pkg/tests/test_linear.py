import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from overfitlab.gmm import Dataset, GmmConfig
from overfitlab.linear import (dataset_margin, logistic_grad, logistic_loss, mean_train_loss,
                               softplus_neg, softplus_neg_array, weights_from_csv,
                               weights_from_json, weights_to_csv, weights_to_json)

# log1p(exp(-100)) from 50-digit mpmath
TAIL_100 = 3.720075976020836e-44


def ds(X, y, y_obs=None, rho=0.0):
    X = np.asarray(X, dtype=float)
    return Dataset(X, np.asarray(y), np.asarray(y if y_obs is None else y_obs),
                   GmmConfig(np.eye(X.shape[1])[0], 1.0), rho=rho)


def test_loss_at_zero_margin():
    assert logistic_loss(np.zeros(3), np.ones(3), 1) == math.log(2)


def test_loss_tails():
    assert math.isclose(logistic_loss(np.array([100.0]), np.array([1.0]), 1), TAIL_100, rel_tol=1e-14)
    assert abs(logistic_loss(np.array([50.0]), np.array([1.0]), -1) - 50.0) < 1e-12


@pytest.mark.parametrize("m", [1e6, -1e6, 1e3, -1e3, 0.0, 745.0, -745.0])
def test_stable_extremes(m):
    loss = softplus_neg(m)
    assert math.isfinite(loss) and loss >= 0
    g = logistic_grad(np.array([m]), np.array([1.0]), 1)
    assert np.all(np.isfinite(g))
    assert abs(softplus_neg_array(np.array([m]))[0] - loss) <= 1e-12 * max(1.0, loss)
    if m < 0:
        assert abs(loss + m) <= 1e-9 * abs(m) + 1e-12


def test_grad_at_zero():
    x = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(logistic_grad(np.zeros(3), x, -1), x / 2)


def test_grad_tail_small():
    x = np.array([1.0, 0.0])
    g = logistic_grad(np.array([100.0, 5.0]), x, 1)
    assert np.linalg.norm(g) <= np.linalg.norm(x) * 4e-44


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        logistic_loss(np.zeros(2), np.zeros(3), 1)
    with pytest.raises(ValueError):
        logistic_grad(np.zeros(2), np.zeros(3), 1)


def central_diff(w, x, y, h=1e-6):
    g = np.empty_like(w)
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = h
        g[j] = (logistic_loss(w + e, x, y) - logistic_loss(w - e, x, y)) / (2 * h)
    return g


def test_gradient_matches_finite_differences_300_cases():
    rng = np.random.default_rng(2024)
    for case in range(300):
        p = (2, 5, 8, 32)[case % 4]
        w = rng.standard_normal(p)
        x = rng.standard_normal(p)
        y = int(rng.choice([-1, 1]))
        g = logistic_grad(w, x, y)
        fd = central_diff(w, x, y)
        assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(g), 1e-3), case


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.floats(1e-3, 1e3))
@settings(max_examples=100)
def test_sign_homogeneity(w, x, c):
    w, x = np.array(w), np.array(x)
    s = x @ w
    if abs(s) > 1e-9:
        assert np.sign(x @ (c * w)) == np.sign(s)


def test_margins():
    assert dataset_margin(np.array([3.0, 0.0]), ds([[1, 0]], [1])) == 3.0
    assert dataset_margin(np.array([1.0, 0.0]), ds([[1, 0], [-1, 0]], [1, -1])) == 1.0
    d = ds([[1, 0], [0, 1], [2, 2], [1, 1]], [1, 1, -1, 1])
    w = np.array([1.0, 0.5])
    assert dataset_margin(w, d) == -3.0
    d0 = ds([[0, 1]], [1])
    assert dataset_margin(np.array([1.0, 0.0]), d0) == 0.0


def test_margin_label_modes():
    d = ds([[1.0, 0.0], [-1.0, 0.0]], [1, -1], [1, 1], rho=0.5)
    w = np.array([1.0, 0.0])
    assert dataset_margin(w, d, "clean") == 1.0
    assert dataset_margin(w, d, "observed") == -1.0


def test_mean_train_loss():
    d = ds([[1, 0], [-1, 0]], [1, -1])
    assert mean_train_loss(np.zeros(2), d) == math.log(2)
    assert math.isclose(mean_train_loss(np.array([100.0]), ds([[1]], [1])), TAIL_100, rel_tol=1e-14)


def test_weights_round_trip():
    w = np.array([0.1, -2.5e-300, 3.0])
    assert np.array_equal(weights_from_csv(weights_to_csv(w)), w)
    assert np.array_equal(weights_from_json(weights_to_json(w)), w)
