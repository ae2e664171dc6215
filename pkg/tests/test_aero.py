from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multirotor.aero import (
    V_MIN,
    Aero,
    AeroConstants,
    AeroMaps,
    LowWindError,
    MapError,
    coefficient_lookup,
    constant_maps,
    default_maps,
    power_coefficient,
    read_map_csv,
    rotor_thrust,
    rotor_torque,
    thrust_from_power,
    tip_speed_ratio,
)

MAPS = default_maps()
finite = dict(allow_nan=False, allow_infinity=False)


def test_tip_speed_ratio_examples():
    assert tip_speed_ratio(2.0, 10.0, 10.0) == 2.0
    assert tip_speed_ratio(0.0, 8.0, 63.0) == 0.0
    with pytest.raises(LowWindError):
        tip_speed_ratio(1.0, 0.001, 63.0)
    with pytest.raises(LowWindError):
        tip_speed_ratio(1.0, V_MIN, 63.0)


def test_lookup_exact_at_nodes():
    i, j = 14, 5
    cq, ct = coefficient_lookup(MAPS, MAPS.lambda_grid[i], MAPS.beta_grid[j])
    assert cq == MAPS.cq_table[i, j]
    assert ct == MAPS.ct_table[i, j]


def test_lookup_cell_midpoint_is_corner_mean():
    i, j = 10, 3
    lam = 0.5 * (MAPS.lambda_grid[i] + MAPS.lambda_grid[i + 1])
    beta = 0.5 * (MAPS.beta_grid[j] + MAPS.beta_grid[j + 1])
    cq, ct = coefficient_lookup(MAPS, lam, beta)
    assert cq == pytest.approx(MAPS.cq_table[i : i + 2, j : j + 2].mean(), rel=1e-14)
    assert ct == pytest.approx(MAPS.ct_table[i : i + 2, j : j + 2].mean(), rel=1e-14)


def test_lookup_clamps_outside_grid():
    top = MAPS.lambda_grid[-1]
    assert coefficient_lookup(MAPS, 35.0, 4.0) == coefficient_lookup(MAPS, top, 4.0)
    assert coefficient_lookup(MAPS, 7.0, -5.0) == coefficient_lookup(MAPS, 7.0, 0.0)
    assert coefficient_lookup(MAPS, 7.0, 120.0) == coefficient_lookup(MAPS, 7.0, 90.0)


def test_default_grid_shape():
    assert MAPS.lambda_grid[0] == 0.0 and MAPS.lambda_grid[-1] == 20.0
    assert np.all(np.diff(MAPS.lambda_grid) == 0.5)
    assert MAPS.beta_grid.tolist() == list(range(0, 91, 2))
    assert np.all(MAPS.cq_table[0] == 0.0)


def test_surrogate_peak_is_plausible():
    # the exponential-family surrogate peaks near 0.44 at about lambda 6.9 and zero pitch
    lam = np.linspace(2, 14, 1201)
    cp = power_coefficient(lam, 0.0)
    assert 0.40 < cp.max() < 16 / 27
    assert 6.0 < lam[cp.argmax()] < 8.0


def test_thrust_from_power_inverts_actuator_disc():
    a = np.linspace(0.0, 1 / 3, 50)
    cp = 4 * a * (1 - a) ** 2
    np.testing.assert_allclose(thrust_from_power(cp), 4 * a * (1 - a), atol=1e-12)
    assert thrust_from_power(-0.1) == 0.0


def test_torque_and_thrust_closed_form():
    const = AeroConstants(rho=1.225, radius=63.0)
    flat = constant_maps(0.05, 0.8)
    # one-line independent evaluations of 1/2 rho pi R^3 v^2 cQ and 1/2 rho pi R^2 v^2 cT
    assert rotor_torque(11.4, 1.0, 0.0, const, flat) == pytest.approx(3126491.9952890817, rel=1e-14)
    assert rotor_thrust(10.0, 1.0, 0.0, const, flat) == pytest.approx(610980.0808627966, rel=1e-14)


def test_zero_coefficient_gives_zero_load():
    const = AeroConstants()
    zero = constant_maps(0.0, 0.0)
    assert rotor_torque(12.0, 1.2, 3.0, const, zero) == 0.0
    assert rotor_thrust(12.0, 1.2, 3.0, const, zero) == 0.0


@given(
    v=st.floats(0.5, 40.0, **finite),
    w=st.floats(0.0, 3.0, **finite),
    cq=st.floats(-0.2, 0.2, **finite),
    ct=st.floats(0.0, 1.5, **finite),
)
def test_loads_homogeneous_degree_two_in_wind(v, w, cq, ct):
    const = AeroConstants()
    flat = constant_maps(cq, ct)
    np.testing.assert_allclose(
        rotor_torque(2 * v, w, 0.0, const, flat), 4 * rotor_torque(v, w, 0.0, const, flat), rtol=1e-13
    )
    np.testing.assert_allclose(
        rotor_thrust(2 * v, w, 0.0, const, flat), 4 * rotor_thrust(v, w, 0.0, const, flat), rtol=1e-13
    )


@given(lam=st.floats(-5.0, 30.0, **finite), beta=st.floats(-10.0, 100.0, **finite))
def test_lookup_bounded_by_table(lam, beta):
    cq, ct = coefficient_lookup(MAPS, lam, beta)
    eps = 1e-15
    assert MAPS.cq_table.min() - eps <= cq <= MAPS.cq_table.max() + eps
    assert MAPS.ct_table.min() - eps <= ct <= MAPS.ct_table.max() + eps


@given(lam=st.floats(0.0, 20.0, **finite), beta=st.floats(0.0, 90.0, **finite))
def test_lookup_continuous(lam, beta):
    h = 1e-7
    a = np.array(coefficient_lookup(MAPS, lam, beta))
    b = np.array(coefficient_lookup(MAPS, min(lam + h, 20.0), min(beta + h, 90.0)))
    # slopes of the tables are O(1), so a 1e-7 nudge moves values by far less than 1e-5
    assert np.all(np.abs(a - b) < 1e-5)


@given(
    v=st.floats(1.0, 30.0, **finite),
    w=st.floats(0.0, 3.0, **finite),
    beta=st.floats(-5.0, 95.0, **finite),
)
def test_scalar_path_matches_vector_path_bitwise(v, w, beta):
    aero = Aero(AeroConstants(), MAPS)
    vec = aero.loads(np.array([v]), np.array([w]), np.array([beta]), slopes=True)
    pt = aero.point_loads(v, w, beta, slopes=True)
    for a, b in zip(vec, pt):
        assert float(a[0]) == b


def test_slopes_match_finite_differences(aero):
    v, w, beta = 13.0, 1.3, 7.3  # interior of a map cell
    t, f, dtw, dtb, dtv, dfw, dfb, dfv = aero.loads(v, w, beta, slopes=True)
    h = 1e-6
    for idx, (d_t, d_f) in enumerate([(dtv, dfv), (dtw, dfw), (dtb, dfb)]):
        args_p = [v, w, beta]
        args_m = [v, w, beta]
        args_p[idx] += h
        args_m[idx] -= h
        tp, fp = aero.loads(*args_p)
        tm, fm = aero.loads(*args_m)
        assert (tp - tm) / (2 * h) == pytest.approx(d_t, rel=1e-6)
        assert (fp - fm) / (2 * h) == pytest.approx(d_f, rel=1e-6)


def test_map_csv_round_trip(tmp_path):
    MAPS.to_csv(tmp_path / "cq.csv", tmp_path / "ct.csv")
    back = AeroMaps.from_csv(tmp_path / "cq.csv", tmp_path / "ct.csv")
    assert np.array_equal(back.lambda_grid, MAPS.lambda_grid)
    assert np.array_equal(back.beta_grid, MAPS.beta_grid)
    assert np.array_equal(back.cq_table, MAPS.cq_table)
    assert np.array_equal(back.ct_table, MAPS.ct_table)


def test_map_csv_errors_name_the_file(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("lambda \\ beta,0,2\n1,0.1,0.1\n0.5,0.1,0.1\n")
    with pytest.raises(MapError, match="bad.csv"):
        read_map_csv(bad)
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("lambda \\ beta,0,2\n0,0.1\n1,0.1,0.1\n")
    with pytest.raises(MapError, match="ragged.csv"):
        read_map_csv(ragged)
    with pytest.raises(MapError, match="missing.csv"):
        read_map_csv(tmp_path / "missing.csv")


def test_map_invariants():
    with pytest.raises(MapError):
        AeroMaps([0.0], [0.0, 1.0], np.zeros((1, 2)), np.zeros((1, 2)))
    with pytest.raises(MapError):
        AeroMaps([0.0, 1.0], [0.0, 1.0], np.zeros((2, 3)), np.zeros((2, 2)))
    with pytest.raises(MapError):
        AeroMaps([0.0, 1.0], [0.0, 1.0], np.full((2, 2), np.nan), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        AeroConstants(rho=0.0)
    with pytest.raises(ValueError):
        AeroConstants(radius=-1.0)
