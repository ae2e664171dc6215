"""Static rotor aerodynamics: tabulated cQ/cT maps and the torque/thrust relations.

Pitch angles are in degrees at this interface; the dynamic models convert from
radians before calling in.
"""
from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

V_MIN = 0.1  # m/s, floor below which the tip-speed ratio is undefined


class LowWindError(ValueError):
    """Wind speed at or below the floor, so the tip-speed ratio is unbounded."""


class MapError(ValueError):
    """An aerodynamic table violates its structural invariants."""


@dataclass(frozen=True)
class AeroConstants:
    rho: float = 1.225   # kg/m^3
    radius: float = 63.0  # m

    def __post_init__(self) -> None:
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    @property
    def torque_scale(self) -> float:
        """0.5*rho*pi*R^3, multiplies v^2*cQ."""
        return 0.5 * self.rho * np.pi * self.radius**3

    @property
    def thrust_scale(self) -> float:
        """0.5*rho*pi*R^2, multiplies v^2*cT."""
        return 0.5 * self.rho * np.pi * self.radius**2


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_grid(name: str, grid: np.ndarray) -> None:
    if grid.ndim != 1 or grid.size < 2:
        raise MapError(f"{name} needs at least 2 samples")
    if not np.all(np.isfinite(grid)):
        raise MapError(f"{name} contains non-finite values")
    if not np.all(np.diff(grid) > 0):
        raise MapError(f"{name} must be strictly ascending")


@dataclass(frozen=True, eq=False)
class AeroMaps:
    """cQ and cT sampled on a (lambda, beta[deg]) grid, indexed [lambda][beta]."""

    lambda_grid: np.ndarray
    beta_grid: np.ndarray
    cq_table: np.ndarray
    ct_table: np.ndarray

    def __post_init__(self) -> None:
        for name in ("lambda_grid", "beta_grid", "cq_table", "ct_table"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        _check_grid("lambda_grid", self.lambda_grid)
        _check_grid("beta_grid", self.beta_grid)
        shape = (self.lambda_grid.size, self.beta_grid.size)
        for name in ("cq_table", "ct_table"):
            table = getattr(self, name)
            if table.shape != shape:
                raise MapError(f"{name} has shape {table.shape}, expected {shape}")
            if not np.all(np.isfinite(table)):
                raise MapError(f"{name} contains non-finite values")

    def _locate(self, grid: np.ndarray, x):
        # np.minimum/np.maximum: np.clip carries heavy per-call overhead on small arrays
        x = np.minimum(np.maximum(x, grid[0]), grid[-1])
        i = np.minimum(np.maximum(grid.searchsorted(x, side="right") - 1, 0), grid.size - 2)
        width = grid[i + 1] - grid[i]
        return i, (x - grid[i]) / width, width

    def evaluate(self, lam, beta_deg, slopes: bool = False):
        """Bilinear lookup of (cQ, cT), clamped to the grid.

        With ``slopes=True`` also returns the partial derivatives
        (dcQ/dlambda, dcQ/dbeta, dcT/dlambda, dcT/dbeta), beta in degrees. Outside
        the grid the clamped surface is flat, so the matching slope is zero.
        """
        lam = np.asarray(lam, dtype=float)
        beta_deg = np.asarray(beta_deg, dtype=float)
        i, s, wl = self._locate(self.lambda_grid, lam)
        j, t, wb = self._locate(self.beta_grid, beta_deg)
        both = self._stacked
        f00 = both[i, j]
        f01 = both[i, j + 1]
        f10 = both[i + 1, j]
        f11 = both[i + 1, j + 1]
        s_ = s[..., None]
        t_ = t[..., None]
        lo = f00 + (f01 - f00) * t_
        hi = f10 + (f11 - f10) * t_
        val = lo + (hi - lo) * s_
        if not slopes:
            return val[..., 0], val[..., 1]
        in_lam = (lam >= self.lambda_grid[0]) & (lam <= self.lambda_grid[-1])
        in_beta = (beta_deg >= self.beta_grid[0]) & (beta_deg <= self.beta_grid[-1])
        d_lam = np.where(in_lam[..., None], (hi - lo) / wl[..., None], 0.0)
        d_beta = ((f01 - f00) * (1.0 - s_) + (f11 - f10) * s_) / wb[..., None]
        d_beta = np.where(in_beta[..., None], d_beta, 0.0)
        return (
            val[..., 0],
            val[..., 1],
            d_lam[..., 0],
            d_beta[..., 0],
            d_lam[..., 1],
            d_beta[..., 1],
        )

    def evaluate_point(self, lam: float, beta_deg: float, slopes: bool = False):
        """Scalar twin of ``evaluate`` in plain Python, same arithmetic order.

        The simulator calls the maps a few hundred thousand times with three
        points each; per-call numpy overhead dominates there.
        """
        lg, bg, cq, ct = self._lists
        x = min(max(lam, lg[0]), lg[-1])
        y = min(max(beta_deg, bg[0]), bg[-1])
        i = min(max(bisect.bisect_right(lg, x) - 1, 0), len(lg) - 2)
        j = min(max(bisect.bisect_right(bg, y) - 1, 0), len(bg) - 2)
        wl = lg[i + 1] - lg[i]
        wb = bg[j + 1] - bg[j]
        s = (x - lg[i]) / wl
        t = (y - bg[j]) / wb
        out = []
        for table in (cq, ct):
            r0, r1 = table[i], table[i + 1]
            f00, f01, f10, f11 = r0[j], r0[j + 1], r1[j], r1[j + 1]
            lo = f00 + (f01 - f00) * t
            hi = f10 + (f11 - f10) * t
            out.append(lo + (hi - lo) * s)
            if slopes:
                in_lam = lg[0] <= lam <= lg[-1]
                in_beta = bg[0] <= beta_deg <= bg[-1]
                out.append((hi - lo) / wl if in_lam else 0.0)
                out.append(((f01 - f00) * (1.0 - s) + (f11 - f10) * s) / wb if in_beta else 0.0)
        if not slopes:
            return out[0], out[1]
        cq_v, cq_l, cq_b, ct_v, ct_l, ct_b = out
        return cq_v, ct_v, cq_l, cq_b, ct_l, ct_b

    @property
    def _lists(self):
        cached = self.__dict__.get("_as_lists")
        if cached is None:
            cached = (
                self.lambda_grid.tolist(),
                self.beta_grid.tolist(),
                self.cq_table.tolist(),
                self.ct_table.tolist(),
            )
            object.__setattr__(self, "_as_lists", cached)
        return cached

    @property
    def _stacked(self) -> np.ndarray:
        cached = self.__dict__.get("_both")
        if cached is None:
            cached = np.stack([self.cq_table, self.ct_table], axis=-1)
            object.__setattr__(self, "_both", cached)
        return cached

    @classmethod
    def from_csv(cls, cq_path: str | Path, ct_path: str | Path) -> "AeroMaps":
        lam_q, beta_q, cq = read_map_csv(cq_path)
        lam_t, beta_t, ct = read_map_csv(ct_path)
        if not (np.array_equal(lam_q, lam_t) and np.array_equal(beta_q, beta_t)):
            raise MapError(f"{cq_path} and {ct_path} use different grids")
        return cls(lam_q, beta_q, cq, ct)

    def to_csv(self, cq_path: str | Path, ct_path: str | Path) -> None:
        write_map_csv(cq_path, self.lambda_grid, self.beta_grid, self.cq_table)
        write_map_csv(ct_path, self.lambda_grid, self.beta_grid, self.ct_table)


def read_map_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read one coefficient table. Errors name the file."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
        if len(rows) < 3:
            raise MapError("needs a header row and at least 2 lambda rows")
        beta = np.array([float(c) for c in rows[0][1:]])
        lam = np.array([float(r[0]) for r in rows[1:]])
        table = np.array([[float(c) for c in r[1:]] for r in rows[1:]])
        if table.shape != (lam.size, beta.size):
            raise MapError(f"ragged table, expected {beta.size} columns per row")
        _check_grid("lambda_grid", lam)
        _check_grid("beta_grid", beta)
        if not np.all(np.isfinite(table)):
            raise MapError("table contains non-finite values")
    except (OSError, ValueError) as exc:
        raise MapError(f"{path}: {exc}") from exc
    return lam, beta, table


def write_map_csv(path: str | Path, lam, beta, table) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda \\ beta"] + [repr(float(b)) for b in beta])
        for l, row in zip(lam, table):
            w.writerow([repr(float(l))] + [repr(float(c)) for c in row])


# Exponential-family power coefficient; constants from a common wind-energy fit.
_C1, _C2, _C3, _C4, _C5, _C6, _C7 = 0.73, 151.0, 0.58, 0.002, 2.14, 13.2, 18.4


def power_coefficient(lam, beta_deg):
    """Analytic cP(lambda, beta) surrogate; smooth and monotone in pitch."""
    lam = np.asarray(lam, dtype=float)
    b = np.asarray(beta_deg, dtype=float)
    inv_li = 1.0 / (lam + 0.02 * b) - 0.003 / (b**3 + 1.0)
    return _C1 * (_C2 * inv_li - _C3 * b - _C4 * b**_C5 - _C6) * np.exp(-_C7 * inv_li)


def thrust_from_power(cp):
    """Actuator-disc thrust coefficient consistent with a given cP.

    Solves cP = 4a(1-a)^2 for the axial induction a (branch a <= 1/3) and
    returns cT = 4a(1-a), floored at zero.
    """
    cp = np.asarray(cp, dtype=float)
    cp_c = np.minimum(cp, 16.0 / 27.0)
    a = cp_c / 4.0
    for _ in range(60):
        g = 4.0 * a * (1.0 - a) ** 2 - cp_c
        dg = 4.0 * (1.0 - a) * (1.0 - 3.0 * a)
        step = g / np.where(np.abs(dg) > 1e-12, dg, 1e-12)
        a = np.minimum(a - step, 1.0 / 3.0)
    return np.maximum(4.0 * a * (1.0 - a), 0.0)


def default_maps(
    lambda_grid=None,
    beta_grid=None,
) -> AeroMaps:
    """Surrogate maps on lambda in [0, 20] step 0.5 and beta in {0, 2, ..., 90} deg."""
    lam = np.arange(0.0, 20.0 + 1e-9, 0.5) if lambda_grid is None else np.asarray(lambda_grid, float)
    beta = np.arange(0.0, 90.0 + 1e-9, 2.0) if beta_grid is None else np.asarray(beta_grid, float)
    L, B = np.meshgrid(lam, beta, indexing="ij")
    with np.errstate(divide="ignore", invalid="ignore"):
        cp = power_coefficient(L, B)
        cq = np.where(L > 0, cp / L, 0.0)
    cp = np.where(L > 0, cp, 0.0)
    ct = thrust_from_power(cp)
    return AeroMaps(lam, beta, cq, ct)


def constant_maps(cq: float, ct: float) -> AeroMaps:
    """Flat maps, handy for checking the algebraic relations."""
    lam = np.array([0.0, 20.0])
    beta = np.array([0.0, 90.0])
    return AeroMaps(lam, beta, np.full((2, 2), cq), np.full((2, 2), ct))


def tip_speed_ratio(omega_r, v, radius: float, v_min: float = V_MIN):
    """lambda = omega_r * R / v."""
    v_arr = np.asarray(v, dtype=float)
    if np.any(v_arr <= v_min):
        raise LowWindError(f"wind speed {v} m/s at or below floor {v_min} m/s")
    if np.any(np.asarray(omega_r) < 0):
        raise ValueError("rotor speed must be non-negative")
    return np.asarray(omega_r, dtype=float) * radius / v_arr


def coefficient_lookup(maps: AeroMaps, lam, beta_deg):
    return maps.evaluate(lam, beta_deg)


def rotor_torque(v, omega_r, beta_deg, const: AeroConstants, maps: AeroMaps):
    lam = tip_speed_ratio(omega_r, v, const.radius)
    cq, _ = maps.evaluate(lam, beta_deg)
    return const.torque_scale * np.asarray(v, dtype=float) ** 2 * cq


def rotor_thrust(v, omega_r, beta_deg, const: AeroConstants, maps: AeroMaps):
    lam = tip_speed_ratio(omega_r, v, const.radius)
    _, ct = maps.evaluate(lam, beta_deg)
    return const.thrust_scale * np.asarray(v, dtype=float) ** 2 * ct


@dataclass(frozen=True, eq=False)
class Aero:
    """Constants and maps of one rotor, with vectorised force evaluation."""

    const: AeroConstants
    maps: AeroMaps

    def loads(self, v, omega_r, beta_deg, slopes: bool = False):
        """(T_r, F_T) for arrays of operating points; no wind-floor check.

        With ``slopes=True`` returns (T_r, F_T, dT/domega, dT/dbeta_deg, dT/dv,
        dF/domega, dF/dbeta_deg, dF/dv).
        """
        if isinstance(v, float) and isinstance(omega_r, float) and isinstance(beta_deg, float):
            return self.point_loads(v, omega_r, beta_deg, slopes)
        v = np.asarray(v, dtype=float)
        lam = np.asarray(omega_r, dtype=float) * self.const.radius / v
        v2 = v * v
        kq = self.const.torque_scale
        kt = self.const.thrust_scale
        if not slopes:
            cq, ct = self.maps.evaluate(lam, beta_deg)
            return kq * v2 * cq, kt * v2 * ct
        cq, ct, cq_l, cq_b, ct_l, ct_b = self.maps.evaluate(lam, beta_deg, slopes=True)
        rv = self.const.radius * v
        return (
            kq * v2 * cq,
            kt * v2 * ct,
            kq * rv * cq_l,
            kq * v2 * cq_b,
            kq * v * (2.0 * cq - lam * cq_l),
            kt * rv * ct_l,
            kt * v2 * ct_b,
            kt * v * (2.0 * ct - lam * ct_l),
        )

    def point_loads(self, v: float, omega_r: float, beta_deg: float, slopes: bool = False):
        """Scalar version of ``loads`` returning Python floats."""
        v = float(v)
        const = self.const
        lam = float(omega_r) * const.radius / v
        v2 = v * v
        kq, kt = self._scales
        if not slopes:
            cq, ct = self.maps.evaluate_point(lam, float(beta_deg))
            return kq * v2 * cq, kt * v2 * ct
        cq, ct, cq_l, cq_b, ct_l, ct_b = self.maps.evaluate_point(lam, float(beta_deg), True)
        rv = const.radius * v
        return (
            kq * v2 * cq,
            kt * v2 * ct,
            kq * rv * cq_l,
            kq * v2 * cq_b,
            kq * v * (2.0 * cq - lam * cq_l),
            kt * rv * ct_l,
            kt * v2 * ct_b,
            kt * v * (2.0 * ct - lam * ct_l),
        )

    @property
    def _scales(self) -> tuple[float, float]:
        cached = self.__dict__.get("_k")
        if cached is None:
            cached = (self.const.torque_scale, self.const.thrust_scale)
            object.__setattr__(self, "_k", cached)
        return cached
