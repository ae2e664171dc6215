from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multirotor.control_central import (
    CentralGains,
    DispatchError,
    MitigationController,
    dispatch,
    mitigation_step,
    rotor1_reference,
)

finite = dict(allow_nan=False, allow_infinity=False)


def _check_shares(u, total):
    cmd = dispatch(u, total)
    assert cmd.delta_p_2_ref + cmd.delta_p_3_ref == total
    assert cmd.delta_p_2_ref * total >= 0 and cmd.delta_p_3_ref * total >= 0
    return cmd


def test_dispatch_algebra_random_pairs():
    rng = np.random.default_rng(2024)
    u = rng.uniform(-0.5, 0.5, 10_000)
    dp = rng.uniform(-1.0, 1.0, 10_000) * 10.0 ** rng.uniform(0, 7, 10_000)
    for uc, total in zip(u.tolist(), dp.tolist()):
        _check_shares(uc, total)
        half = dispatch(0.0, total)
        assert half.delta_p_2_ref == half.delta_p_3_ref == 0.5 * total


@given(st.floats(-0.5, 0.5, **finite), st.floats(-1e8, 1e8, **finite))
@settings(max_examples=500)
def test_dispatch_sum_exact(u, total):
    _check_shares(u, total)


def test_dispatch_examples():
    cmd = dispatch(0.5, -1e6)
    assert (cmd.delta_p_2_ref, cmd.delta_p_3_ref) == (-1e6, 0.0)
    cmd = dispatch(-0.5, -1e6)
    assert (cmd.delta_p_2_ref, cmd.delta_p_3_ref) == (0.0, -1e6)
    cmd = dispatch(0.0, -2e6)
    assert cmd.delta_p_2_ref == cmd.delta_p_3_ref == -1e6
    with pytest.raises(DispatchError):
        dispatch(0.51, 1.0)


def test_rotor1_reference():
    assert rotor1_reference(-3e6, -2e6) == -1e6
    assert rotor1_reference(-2e6, -2e6) == 0.0


@given(
    st.floats(-0.5, 0.5, **finite),
    st.floats(-1e8, 1e8, **finite),
    st.floats(0.0, 1.0, **finite),
)
def test_three_rotor_total_conserved(u, total, share):
    dp23 = share * total
    cmd = dispatch(u, dp23)
    p1 = rotor1_reference(total, dp23)
    assert p1 + (cmd.delta_p_2_ref + cmd.delta_p_3_ref) == p1 + dp23
    assert abs(p1 + cmd.delta_p_2_ref + cmd.delta_p_3_ref - total) <= 4e-16 * abs(total)


def test_zero_rate_gives_zero_output():
    ctl = MitigationController(CentralGains(3.0, 2.0, 0.5))
    assert all(ctl.step(0.0, 0.02) == 0.0 for _ in range(100))


def test_pi_definition_constant_rate():
    kp, ki, c, dt = 2.0, 0.5, 0.01, 0.02
    ctl = MitigationController(CentralGains(kp, ki, 0.5))
    n = 250
    for _ in range(n + 1):
        u = ctl.step(c, dt)
    assert u == pytest.approx(kp * c + ki * c * n * dt, rel=1e-12)


def test_integral_runs_while_disabled():
    # the integral equals the accrued angle from start regardless of the switch
    ctl = MitigationController(CentralGains(0.0, 1.0, 0.5))
    for _ in range(51):
        assert ctl.step(0.1, 0.02, enabled=False) == 0.0
    assert ctl.step(0.1, 0.02, enabled=True) == pytest.approx(0.1 * 51 * 0.02, rel=1e-12)


@given(st.lists(st.floats(-5.0, 5.0, **finite), min_size=1, max_size=300), st.floats(0.01, 0.5, **finite))
def test_output_clamped(rates, limit):
    ctl = MitigationController(CentralGains(10.0, 30.0, limit))
    for r in rates:
        assert abs(ctl.step(r, 0.02)) <= limit


def test_positive_rate_drives_output_to_clamp():
    ctl = MitigationController(CentralGains(0.1, 1.0, 0.3))
    out = [ctl.step(0.05, 0.02) for _ in range(1000)]
    assert np.all(np.diff(out) >= 0)
    assert out[-1] == 0.3


def test_conditional_integration_stops_windup():
    ctl = MitigationController(CentralGains(0.0, 1.0, 0.2))
    for _ in range(500):
        ctl.step(1.0, 0.02)
    assert ctl.integral == pytest.approx(0.2, rel=1e-12)
    # reversal leaves the clamp at once because the integral never ran away;
    # the first trapezoid straddles the sign change and has zero area
    ctl.step(-1.0, 0.02)
    assert ctl.step(-1.0, 0.02) == pytest.approx(0.18, rel=1e-12)


def test_disabled_is_identity_dispatcher():
    ctl = MitigationController(CentralGains(-500.0, -50.0, 0.2))
    rng = np.random.default_rng(3)
    for rate, total in zip(rng.normal(size=200), rng.normal(size=200) * 1e6):
        u = ctl.step(float(rate), 0.02, enabled=False)
        a, b = dispatch(u, total), dispatch(0.0, total)
        assert (a.delta_p_2_ref, a.delta_p_3_ref) == (b.delta_p_2_ref, b.delta_p_3_ref)


def test_mitigation_step_wrapper():
    g = CentralGains(1.0, 1.0, 0.5)
    a, b = MitigationController(g), MitigationController(g)
    for r in (0.01, 0.02, -0.03):
        assert mitigation_step(r, 0.02, g, a) == b.step(r, 0.02)


def test_gain_validation():
    with pytest.raises(ValueError):
        CentralGains(u_c_limit=0.6)
    with pytest.raises(ValueError):
        CentralGains(u_c_limit=0.0)
    with pytest.raises(ValueError):
        CentralGains(k_p_c=float("nan"))
    with pytest.raises(ValueError):
        MitigationController(CentralGains()).step(0.0, 0.0)
