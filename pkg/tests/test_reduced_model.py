from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multirotor.aero import LowWindError
from multirotor.dynamics import RotorModel, equilibrium_find, pitch_for_torque
from multirotor.reduced_model import (
    DecompositionError,
    DegenerateSectorError,
    MembershipWeights,
    PremiseVector,
    ReducedModel,
    SchedulingBox,
    VertexModel,
    blend,
    membership,
    reduced_derivative,
    sector_decompose,
)

unit = st.floats(0.0, 1.0, allow_nan=False)


class AffineModel:
    """omega_dot = a*omega + b*beta + c*v - t_g: both scheduled terms are constant."""

    tau_beta = 0.5

    def omega_dot(self, omega_r, beta, v, t_g):
        return 2.0 * omega_r - 3.0 * beta + 0.1 * v - t_g

    def terms(self, omega_r, beta, v, t_g):
        return np.full_like(np.asarray(omega_r, float), 2.0), np.full_like(np.asarray(omega_r, float), -3.0)


class BilinearModel:
    """Scheduled terms equal omega_r and beta themselves, so sector corners are box corners."""

    tau_beta = 0.5

    def omega_dot(self, omega_r, beta, v, t_g):
        return 0.5 * omega_r**2 + 0.5 * beta**2 - t_g

    def terms(self, omega_r, beta, v, t_g):
        return np.asarray(omega_r, float) * 1.0, np.asarray(beta, float) * 1.0


TOY_BOX = SchedulingBox(omega_r=(1.0, 2.0), beta=(0.0, 0.5), v=(5.0, 10.0), t_g=(0.0, 1.0))
_TOY = sector_decompose(TOY_BOX, BilinearModel(), resolution=5)


@pytest.fixture(scope="module")
def decomposition(rotor, aero, control):
    return sector_decompose(control.box(rotor.n_g), ReducedModel(rotor, aero))


def _points(box, n, seed):
    return [PremiseVector(*row) for row in box.sample(n, np.random.default_rng(seed))]


def test_vertex_structure(decomposition, rotor):
    assert len(decomposition.vertices) == 4
    for vx in decomposition.vertices:
        assert vx.b[0] == 0.0 and vx.b[1] == 1.0 / rotor.tau_beta
        assert vx.a[1, 1] == -1.0 / rotor.tau_beta
        assert vx.c.tolist() == [1.0, 0.0]
    a = np.array([vx.a[0] for vx in decomposition.vertices])
    lo, hi = decomposition.term_bounds[:, 0], decomposition.term_bounds[:, 1]
    assert sorted(set(a[:, 0])) == [lo[0], hi[0]] and sorted(set(a[:, 1])) == [lo[1], hi[1]]


def test_ts_model_is_exact(decomposition, rotor):
    model = decomposition.model
    worst = 0.0
    for z in _points(decomposition.box, 1000, 11):
        x = (z.omega_r, z.beta)
        ts = decomposition.ts_derivative(x, 0.1, z)[0]
        ref = float(model.omega_dot(z.omega_r, z.beta, z.v, z.t_g))
        worst = max(worst, abs(ts - ref) / abs(ref))
    assert worst <= 1e-10


def test_partition_of_unity(decomposition):
    for z in _points(decomposition.box, 1000, 12):
        h = decomposition.weights(z)
        assert abs(h.sum() - 1.0) <= 1e-12
        assert np.all(h >= 0)


def test_local_jacobian_inside_vertex_hull(decomposition, rotor, aero):
    lo, hi = decomposition.term_bounds[:, 0], decomposition.term_bounds[:, 1]
    full = RotorModel(rotor, aero)
    j_t = rotor.total_inertia
    for z in _points(decomposition.box, 1000, 13):
        t = np.array(decomposition.terms(z))
        assert np.all(t >= lo) and np.all(t <= hi)
        # aerodynamic part of the full-model Jacobian, rescaled to the lumped inertia
        x = np.zeros(8)
        x[5], x[7] = z.omega_r, z.beta
        J = full.jacobian(x, z.v) - full.A
        np.testing.assert_allclose(J[5, [5, 7]] * rotor.J_r / j_t, t, rtol=1e-12)


def test_blended_matrix_reproduces_local_terms(decomposition):
    for z in _points(decomposition.box, 100, 14):
        A = blend(membership(z, decomposition), decomposition.vertices)
        np.testing.assert_allclose(A[0], decomposition.terms(z), rtol=1e-12)


def test_affine_map_collapses_vertices():
    dec = sector_decompose(TOY_BOX, AffineModel(), resolution=5)
    first = dec.vertices[0].a
    for vx in dec.vertices[1:]:
        np.testing.assert_array_equal(vx.a, first)
    with pytest.raises(DegenerateSectorError):
        dec.weights(PremiseVector(1.5, 0.2, 6.0, 0.5))


def test_membership_corners_and_centre():
    dec = sector_decompose(TOY_BOX, BilinearModel(), resolution=5, margin=0.0)
    np.testing.assert_array_equal(dec.weights(PremiseVector(1.0, 0.0, 6.0, 0.5)), [1, 0, 0, 0])
    np.testing.assert_array_equal(dec.weights(PremiseVector(2.0, 0.5, 6.0, 0.5)), [0, 0, 0, 1])
    np.testing.assert_array_equal(dec.weights(PremiseVector(1.0, 0.5, 6.0, 0.5)), [0, 1, 0, 0])
    np.testing.assert_array_equal(dec.weights(PremiseVector(1.5, 0.25, 6.0, 0.5)), [0.25] * 4)


def test_premise_clamped_into_box():
    dec = sector_decompose(TOY_BOX, BilinearModel(), resolution=5, margin=0.0)
    np.testing.assert_array_equal(dec.weights(PremiseVector(9.0, -1.0, 50.0, 9.0)), [0, 0, 1, 0])


def test_blend_examples():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([0.0, 1.0])
    c = np.array([1.0, 0.0])
    verts = [VertexModel(i + 1, s * A, b, c) for i, s in enumerate((1, -1, 1, -1))]
    np.testing.assert_array_equal(blend(MembershipWeights(np.full(4, 0.25)), verts), np.zeros((2, 2)))
    np.testing.assert_array_equal(blend(MembershipWeights(np.array([0.0, 1.0, 0.0, 0.0])), verts), -A)


@given(unit, unit, unit, unit)
@settings(max_examples=200, deadline=None)
def test_blend_within_vertex_hull(a, b, c, d):
    rng = np.random.default_rng(5)
    mats = rng.normal(size=(4, 2, 2))
    w = np.array([a, b, c, d]) + 1e-9
    h = MembershipWeights(w / w.sum())
    verts = [VertexModel(i + 1, m, np.zeros(2), np.zeros(2)) for i, m in enumerate(mats)]
    out = blend(h, verts)
    assert np.all(out >= mats.min(axis=0) - 1e-12)
    assert np.all(out <= mats.max(axis=0) + 1e-12)


@given(unit, unit, unit, unit)
@settings(max_examples=200, deadline=None)
def test_weights_partition_unity_anywhere(a, b, c, d):
    dec = _TOY
    lo, hi = TOY_BOX.bounds()[:, 0], TOY_BOX.bounds()[:, 1]
    z = PremiseVector(*(lo + np.array([a, b, c, d]) * (hi - lo)))
    h = dec.weights(z)
    assert abs(h.sum() - 1.0) <= 1e-12 and np.all(h >= 0)


def test_reduced_derivative_examples(rotor, aero):
    v, w = 14.0, 1.2671
    beta = pitch_for_torque(v, w, 4e6 / w, aero)
    state, inp = equilibrium_find(v, w, beta, rotor, aero)
    d = reduced_derivative((state.omega_r, state.beta), inp.beta_ref, inp.t_g, v, rotor, aero)
    assert np.max(np.abs(d)) < 1e-9

    t_r = float(aero.loads(v, w, 5.0)[0])
    d = reduced_derivative((w, np.radians(5.0)), 0.3, t_r / rotor.n_g, v, rotor, aero)
    assert abs(d[0]) < 1e-12 * t_r / rotor.total_inertia
    d = reduced_derivative((w, 0.3), 0.3, 0.0, v, rotor, aero)
    assert d[1] == 0.0
    with pytest.raises(LowWindError):
        reduced_derivative((w, 0.1), 0.1, 0.0, 0.05, rotor, aero)


def test_box_validation():
    with pytest.raises(DecompositionError):
        SchedulingBox(omega_r=(2.0, 1.0), beta=(0.0, 0.5), v=(5.0, 10.0), t_g=(0.0, 1.0))
    with pytest.raises(DecompositionError):
        SchedulingBox(omega_r=(1.0, 2.0), beta=(0.0, 0.5), v=(0.0, 10.0), t_g=(0.0, 1.0))


def test_membership_weights_validation():
    with pytest.raises(ValueError):
        MembershipWeights(np.array([0.5, 0.5, 0.5, -0.5]))
    with pytest.raises(ValueError):
        MembershipWeights(np.array([0.3, 0.3, 0.3, 0.3]))
