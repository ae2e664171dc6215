"""Four-DOF rotor-generator unit: arm, blade flap, flexible drive train, pitch lag.

State order (one row per rotor when vectorised):
    y_a, y_b, dtheta_s, y_a_dot, y_b_dot, omega_r, omega_g, beta
Pitch is in radians here; the aerodynamic maps take degrees.
"""
from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from .aero import V_MIN, Aero

YA, YB, DTH, YAD, YBD, WR, WG, BETA = range(8)
N_STATES = 8
BETA_MAX = np.pi / 2


class ParameterError(ValueError):
    """A physical parameter violates its invariant; the message names the key."""


class NoEquilibriumError(ValueError):
    pass


@dataclass(frozen=True)
class RotorUnitParams:
    # Defaults: 5 MW class unit (public reference drive train referred to the
    # high-speed shaft), arm mode near 0.3 Hz.
    tau_beta: float = 0.2
    m_a: float = 2.97e5
    m_b: float = 4.4e3
    n_blades: int = 3
    J_r: float = 3.8759e7
    J_g: float = 534.116
    k_a: float = 1.19e6
    k_b: float = 8.03e4
    k_s: float = 92211.5
    d_a: float = 2.4e4
    d_b: float = 1.9e3
    d_s: float = 660.5
    n_g: float = 97.0

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "n_blades":
                if int(value) != value or value < 1:
                    raise ParameterError(f"n_blades must be an integer >= 1, got {value}")
                continue
            if not np.isfinite(value) or value <= 0:
                raise ParameterError(f"{f.name} must be positive and finite, got {value}")

    @property
    def total_inertia(self) -> float:
        """Rotor plus generator inertia seen from the low-speed shaft."""
        return self.J_r + self.n_g**2 * self.J_g


@dataclass(frozen=True)
class RotorUnitState:
    y_a: float = 0.0
    y_b: float = 0.0
    delta_theta_s: float = 0.0
    y_a_dot: float = 0.0
    y_b_dot: float = 0.0
    omega_r: float = 0.0
    omega_g: float = 0.0
    beta: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, x) -> "RotorUnitState":
        return cls(*(float(c) for c in x))


@dataclass(frozen=True)
class RotorUnitInput:
    t_g: float = 0.0
    beta_ref: float = 0.0


def assemble_matrices(params: RotorUnitParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mass, stiffness and damping over (y_a, y_b, theta_r, theta_g)."""
    p = params
    nm = p.n_blades * p.m_b
    M = np.array(
        [
            [p.m_a + nm, nm, 0.0, 0.0],
            [nm, nm, 0.0, 0.0],
            [0.0, 0.0, p.J_r, 0.0],
            [0.0, 0.0, 0.0, p.J_g],
        ]
    )
    K = np.array(
        [
            [p.k_a, 0.0, 0.0, 0.0],
            [0.0, p.n_blades * p.k_b, 0.0, 0.0],
            [0.0, 0.0, p.k_s * p.n_g**2, -p.k_s * p.n_g],
            [0.0, 0.0, -p.k_s * p.n_g, p.k_s],
        ]
    )
    D = np.array(
        [
            [p.d_a, 0.0, 0.0, 0.0],
            [0.0, p.n_blades * p.d_b, 0.0, 0.0],
            [0.0, 0.0, p.d_s * p.n_g**2, -p.d_s * p.n_g],
            [0.0, 0.0, -p.d_s * p.n_g, p.d_s],
        ]
    )
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise ParameterError("mass matrix is not positive definite") from exc
    return M, K, D


def reduced_stiffness(params: RotorUnitParams) -> np.ndarray:
    """4x3 stiffness acting on (y_a, y_b, dtheta_s); exact image of K under dtheta_s = n_g*theta_r - theta_g."""
    p = params
    return np.array(
        [
            [p.k_a, 0.0, 0.0],
            [0.0, p.n_blades * p.k_b, 0.0],
            [0.0, 0.0, p.k_s * p.n_g],
            [0.0, 0.0, -p.k_s],
        ]
    )


def linear_system_matrix(params: RotorUnitParams) -> np.ndarray:
    """The 8x8 linear part of the unit's state equation."""
    M, _, D = assemble_matrices(params)
    Minv = np.linalg.inv(M)
    A = np.zeros((N_STATES, N_STATES))
    A[YA, YAD] = 1.0
    A[YB, YBD] = 1.0
    A[DTH, WR] = params.n_g
    A[DTH, WG] = -1.0
    A[3:7, 0:3] = -Minv @ reduced_stiffness(params)
    A[3:7, 3:7] = -Minv @ D
    A[BETA, BETA] = -1.0 / params.tau_beta
    return A


def input_matrix(params: RotorUnitParams) -> np.ndarray:
    B = np.zeros((N_STATES, 2))
    B[WG, 0] = -1.0 / params.J_g
    B[BETA, 1] = 1.0 / params.tau_beta
    return B


class RotorModel:
    """Precomputed per-unit model, evaluated on arrays of shape (..., 8)."""

    def __init__(self, params: RotorUnitParams, aero: Aero):
        self.params = params
        self.aero = aero
        self.A = linear_system_matrix(params)
        self.A_T = np.ascontiguousarray(self.A.T)
        self.B = input_matrix(params)
        self._f_gain = 1.0 / (params.n_blades * params.m_b)
        self._t_gain = 1.0 / params.J_r

    def loads(self, x, v):
        """Rotor torque and thrust; both zero where v is at or below the floor."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        live = v > V_MIN
        v_safe = np.where(live, v, 1.0)
        t_r, f_t = self.aero.loads(v_safe, x[..., WR], np.degrees(x[..., BETA]))
        return np.where(live, t_r, 0.0), np.where(live, f_t, 0.0)

    def rhs(self, x, t_g, beta_ref, v):
        return self.rhs_and_thrust(x, t_g, beta_ref, v)[0]

    def rhs_and_thrust(self, x, t_g, beta_ref, v):
        x = np.asarray(x, dtype=float)
        dx = x @ self.A_T
        t_r, f_t = self.loads(x, v)
        dx[..., YBD] += f_t * self._f_gain
        dx[..., WR] += t_r * self._t_gain
        dx[..., WG] -= np.asarray(t_g) / self.params.J_g
        dx[..., BETA] += np.asarray(beta_ref) / self.params.tau_beta
        return dx, f_t

    def jacobian(self, x, v) -> np.ndarray:
        """Analytic d(rhs)/dx at a single operating point (inputs enter affinely)."""
        x = np.asarray(x, dtype=float)
        J = self.A.copy()
        if v <= V_MIN:
            return J
        _, _, dtw, dtb, _, dfw, dfb, _ = self.aero.loads(
            v, x[WR], np.degrees(x[BETA]), slopes=True
        )
        deg = 180.0 / np.pi
        J[YBD, WR] += dfw * self._f_gain
        J[YBD, BETA] += dfb * deg * self._f_gain
        J[WR, WR] += dtw * self._t_gain
        J[WR, BETA] += dtb * deg * self._t_gain
        return J


def state_derivative(
    state: RotorUnitState,
    inp: RotorUnitInput,
    v: float,
    params: RotorUnitParams,
    aero: Aero,
) -> RotorUnitState:
    model = RotorModel(params, aero)
    dx = model.rhs(state.as_array(), inp.t_g, inp.beta_ref, v)
    return RotorUnitState.from_array(dx)


def generator_power(t_g, omega_g):
    """Electrical power of a lossless generator."""
    return t_g * omega_g


def mechanical_energy(x, params: RotorUnitParams) -> float:
    """Kinetic plus elastic energy of the structural and drive-train states."""
    M, _, _ = assemble_matrices(params)
    x = np.asarray(x, dtype=float)
    qd = x[[YAD, YBD, WR, WG]]
    p = params
    elastic = p.k_a * x[YA] ** 2 + p.n_blades * p.k_b * x[YB] ** 2 + p.k_s * x[DTH] ** 2
    return 0.5 * float(qd @ M @ qd) + 0.5 * elastic


def equilibrium_find(
    v: float,
    target_omega_r: float,
    beta: float,
    params: RotorUnitParams,
    aero: Aero,
) -> tuple[RotorUnitState, RotorUnitInput]:
    """Steady state at given wind, rotor speed and pitch (rad); solves T_g and deflections."""
    if v <= V_MIN:
        raise NoEquilibriumError(f"wind {v} m/s is below the floor")
    t_r, f_t = aero.loads(v, target_omega_r, np.degrees(beta))
    t_r, f_t = float(t_r), float(f_t)
    if t_r < 0:
        raise NoEquilibriumError(
            f"aerodynamic torque {t_r:.4g} N*m is negative at v={v}, "
            f"omega_r={target_omega_r}, beta={beta}; no non-negative generator torque balances it"
        )
    p = params
    t_g = t_r / p.n_g
    state = RotorUnitState(
        y_a=f_t / p.k_a,
        y_b=f_t / (p.n_blades * p.k_b),
        delta_theta_s=t_g / p.k_s,
        omega_r=target_omega_r,
        omega_g=p.n_g * target_omega_r,
        beta=beta,
    )
    return state, RotorUnitInput(t_g=t_g, beta_ref=beta)


def pitch_for_torque(
    v: float,
    omega_r: float,
    torque: float,
    aero: Aero,
    beta_max_deg: float = 90.0,
) -> float:
    """Smallest pitch (rad) at which the rotor torque falls to ``torque``.

    At fixed wind and speed the bilinear map is piecewise linear in pitch, so
    the root inside the bracketing cell is exact. Returns 0 when even zero
    pitch gives less torque (below-rated operation).
    """
    grid = aero.maps.beta_grid
    nodes = np.concatenate([[0.0], grid[(grid > 0) & (grid < beta_max_deg)], [beta_max_deg]])
    excess = np.asarray(aero.loads(v, omega_r, nodes)[0]) - torque
    if excess[0] <= 0:
        return 0.0
    below = np.nonzero(excess <= 0)[0]
    if below.size == 0:
        raise NoEquilibriumError(
            f"pitch cannot shed enough torque at v={v} m/s (target {torque:.4g} N*m)"
        )
    k = below[0]
    e0, e1 = excess[k - 1], excess[k]
    beta_deg = nodes[k - 1] + (nodes[k] - nodes[k - 1]) * e0 / (e0 - e1)
    return float(np.radians(beta_deg))
