from __future__ import annotations

import math

import numpy as np
import pytest

from multirotor.simkit import IntegrationError, rk4_step

decay = lambda t, x, u: -x


def _error_at_one(dt):
    x = np.array([1.0])
    n = int(round(1.0 / dt))
    for k in range(n):
        x = rk4_step(x, None, k * dt, dt, decay)
    return abs(x[0] - math.exp(-1.0))


def test_single_step_exponential():
    x = rk4_step(np.array([1.0]), None, 0.0, 0.1, decay)
    assert abs(x[0] - 0.9048374180359595) < 1e-7


def test_fourth_order_convergence():
    ratio = _error_at_one(0.1) / _error_at_one(0.05)
    assert ratio == pytest.approx(16.0, rel=0.05)
    ratio = _error_at_one(0.05) / _error_at_one(0.025)
    assert ratio == pytest.approx(16.0, rel=0.05)


def test_zero_derivative_leaves_state():
    x = np.array([1.5, -2.0, 3e7])
    out = rk4_step(x, None, 3.0, 0.01, lambda t, y, u: np.zeros_like(y))
    np.testing.assert_array_equal(out, x)


def test_input_is_held_over_step():
    seen = []

    def f(t, x, u):
        seen.append(u)
        return np.array([u])

    out = rk4_step(np.array([0.0]), 2.0, 0.0, 0.5, f)
    assert seen == [2.0] * 4
    assert out[0] == 1.0


def test_blowup_reports_time():
    # the stage at t=0.3 belongs to the step that starts at 0.2
    f = lambda t, x, u: np.array([np.inf]) if t > 0.25 else -x
    with pytest.raises(IntegrationError, match="t=0.2 s"):
        x = np.array([1.0])
        for k in range(10):
            x = rk4_step(x, None, round(k * 0.1, 10), 0.1, f)


def test_rejects_non_positive_step():
    with pytest.raises(ValueError):
        rk4_step(np.array([1.0]), None, 0.0, 0.0, decay)
