"""Tower-torsion mitigation: PI law on the torsion rate and the power dispatcher.

The participation factor u_c skews the power change demanded from the two
lateral units. Its effect on the thrust difference has the sign of the
demanded power change, so the sign of the gains that damp the torsion depends
on whether power is being curtailed or raised.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DispatchError(ValueError):
    pass


@dataclass(frozen=True)
class CentralGains:
    k_p_c: float = 0.0
    k_i_c: float = 0.0
    u_c_limit: float = 0.5

    def __post_init__(self) -> None:
        if not (np.isfinite(self.k_p_c) and np.isfinite(self.k_i_c)):
            raise ValueError("central gains must be finite")
        if not 0 < self.u_c_limit <= 0.5:
            raise ValueError(f"u_c_limit must lie in (0, 0.5], got {self.u_c_limit}")


@dataclass(frozen=True)
class DispatchCommand:
    delta_p_2_ref: float
    delta_p_3_ref: float
    u_c: float


class MitigationController:
    """u_c = k_p * phi_dot + k_i * integral(phi_dot), clamped.

    The integral accumulates (trapezoidal) from the first sample whether or not
    the output is enabled, so once enabled the integral term is k_i times the
    torsion angle accrued since start. While enabled it may only grow until the
    output reaches the clamp and is held there (conditional integration).
    """

    def __init__(self, gains: CentralGains):
        self.gains = gains
        self.integral = 0.0
        self._prev_rate: float | None = None

    def reset(self) -> None:
        self.integral = 0.0
        self._prev_rate = None

    def step(self, phi_z_dot: float, dt: float, enabled: bool = True) -> float:
        if not dt > 0:
            raise ValueError("dt must be positive")
        g = self.gains
        area = 0.0 if self._prev_rate is None else 0.5 * (self._prev_rate + phi_z_dot) * dt
        self._prev_rate = phi_z_dot
        candidate = self.integral + area
        raw = g.k_p_c * phi_z_dot + g.k_i_c * candidate
        growth = g.k_i_c * (candidate - self.integral)
        winding = enabled and (
            (raw > g.u_c_limit and growth > 0) or (raw < -g.u_c_limit and growth < 0)
        )
        if not winding:
            self.integral = candidate
        else:
            # advance only as far as the clamp, never past it or backwards
            edge = g.u_c_limit if raw > 0 else -g.u_c_limit
            target = (edge - g.k_p_c * phi_z_dot) / g.k_i_c
            lo, hi = sorted((self.integral, candidate))
            self.integral = min(max(target, lo), hi)
        if not enabled:
            return 0.0
        u = g.k_p_c * phi_z_dot + g.k_i_c * self.integral
        return float(np.clip(u, -g.u_c_limit, g.u_c_limit))


def mitigation_step(
    phi_z_dot: float,
    dt: float,
    gains: CentralGains,
    controller: MitigationController,
    enabled: bool = True,
) -> float:
    if controller.gains is not gains:
        controller.gains = gains
    return controller.step(phi_z_dot, dt, enabled)


def dispatch(u_c: float, delta_p_total_ref: float) -> DispatchCommand:
    """Split the lateral units' power change by (1/2 + u_c, 1/2 - u_c).

    The larger share is formed by multiplication and the smaller one by
    subtraction, which is exact in floating point, so the two shares always sum
    to the demanded total bit-for-bit.
    """
    if not abs(u_c) <= 0.5:
        raise DispatchError(f"participation factor {u_c} outside [-0.5, 0.5]")
    total = float(delta_p_total_ref)
    if u_c >= 0:
        p2 = (0.5 + u_c) * total
        p3 = total - p2
    else:
        p3 = (0.5 - u_c) * total
        p2 = total - p3
    return DispatchCommand(p2, p3, float(u_c))


def rotor1_reference(delta_p_total_all: float, delta_p_23: float) -> float:
    return delta_p_total_all - delta_p_23
