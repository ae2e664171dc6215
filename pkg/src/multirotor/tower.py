"""Torsion of the main tower about its vertical axis.

Only the two lateral rotors (2 and 3) produce a moment; rotor 1 sits on the axis.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .dynamics import ParameterError


@dataclass(frozen=True)
class TowerParams:
    # Defaults place the torsion mode at 0.5 Hz with 2 % damping.
    j_z: float = 3.5e9
    k_z: float = 3.5e9 * np.pi**2
    d_z: float = 0.04 * 3.5e9 * np.pi
    lever_r: float = 70.0

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value) or value <= 0:
                raise ParameterError(f"{f.name} must be positive and finite, got {value}")

    @property
    def natural_frequency(self) -> float:
        """Undamped torsion frequency in rad/s."""
        return float(np.sqrt(self.k_z / self.j_z))

    @property
    def damping_ratio(self) -> float:
        return float(self.d_z / (2.0 * np.sqrt(self.k_z * self.j_z)))


@dataclass(frozen=True)
class TowerState:
    phi_z: float = 0.0
    phi_z_dot: float = 0.0


def tower_rhs(x, f_t2, f_t3, params: TowerParams) -> np.ndarray:
    """Array form: x = (phi_z, phi_z_dot)."""
    phi, rate = x[0], x[1]
    acc = (-params.k_z * phi - params.d_z * rate + params.lever_r * (f_t3 - f_t2)) / params.j_z
    return np.array([rate, acc])


def tower_derivative(state: TowerState, f_t2: float, f_t3: float, params: TowerParams) -> TowerState:
    d = tower_rhs((state.phi_z, state.phi_z_dot), f_t2, f_t3, params)
    return TowerState(float(d[0]), float(d[1]))


def static_twist(delta_thrust: float, params: TowerParams) -> float:
    """Steady torsion angle under a constant thrust difference F_T3 - F_T2."""
    return params.lever_r * delta_thrust / params.k_z


def tower_base_load_metric(phi_z) -> float:
    """RMS of the torsion angle over a window of samples."""
    phi = np.asarray(phi_z, dtype=float)
    if phi.size == 0:
        raise ValueError("load metric needs a non-empty window")
    return float(np.sqrt(np.mean(phi**2)))
