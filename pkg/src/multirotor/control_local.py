"""Decentralised power-tracking controller for one rotor-generator unit.

Power path: the generator torque is set from the power reference and the
measured generator speed. Pitch path: gain-scheduled state feedback with
integral action on the rotor-speed error, blended by the sector memberships,
around an equilibrium-pitch feedforward. The effective wind speed used for
scheduling comes from a disturbance observer plus Newton inversion of the
torque map.

Gains follow the u = -K x convention: each vertex stores K_x (on the deviation
of omega_r and beta) and k_I (on the speed-error integral), and the pitch
command is beta_eq - sum_j h_j (K_x,j x_dev + k_I,j * integral).
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .aero import V_MIN, Aero
from .dynamics import pitch_for_torque
from .reduced_model import N_VERTICES, PremiseVector, SectorDecomposition, VertexModel


class SynthesisError(RuntimeError):
    def __init__(self, vertex: int, reason: str):
        super().__init__(f"vertex {vertex}: {reason}")
        self.vertex = vertex


class GainFileError(ValueError):
    pass


def lqr(A, B, Q, R) -> np.ndarray:
    """Continuous-time LQR gain K for u = -K x."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    P = scipy.linalg.solve_continuous_are(A, B, Q, R)
    return np.linalg.solve(R, B.T @ P)


def augment(vertex: VertexModel) -> tuple[np.ndarray, np.ndarray]:
    """Append the rotor-speed error integral as a third state."""
    A = np.zeros((3, 3))
    A[:2, :2] = vertex.a
    A[2, :2] = vertex.c
    B = np.zeros((3, 1))
    B[:2, 0] = vertex.b
    return A, B


def _stabilizable(A: np.ndarray, B: np.ndarray) -> bool:
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if lam.real >= -1e-12:
            pbh = np.hstack([A - lam * np.eye(n), B])
            if np.linalg.matrix_rank(pbh, tol=1e-9 * max(1.0, np.abs(pbh).max())) < n:
                return False
    return True


@dataclass(frozen=True, eq=False)
class GainSchedule:
    k_x: np.ndarray  # (N_r, 2)
    k_i: np.ndarray  # (N_r,)
    omega_rated: float
    p_rated: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "k_x", np.array(self.k_x, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "k_i", np.array(self.k_i, dtype=float).reshape(-1))
        if self.k_x.shape[0] != self.k_i.shape[0]:
            raise GainFileError("k_x and k_i disagree on the number of vertices")

    @property
    def gains(self) -> np.ndarray:
        """(N_r, 3) stacked [K_x | k_I]."""
        return np.column_stack([self.k_x, self.k_i])

    def closed_loop(self, vertices) -> list[np.ndarray]:
        out = []
        for j, vx in enumerate(vertices):
            A, B = augment(vx)
            out.append(A - B @ self.gains[j][None, :])
        return out

    def closed_loop_eigenvalues(self, vertices) -> list[np.ndarray]:
        return [np.linalg.eigvals(a) for a in self.closed_loop(vertices)]

    def save(self, path: str | Path, term_bounds=None) -> None:
        cp = configparser.ConfigParser()
        cp["schedule"] = {
            "omega_rated": repr(float(self.omega_rated)),
            "p_rated": repr(float(self.p_rated)),
            "n_vertices": str(self.k_i.size),
        }
        if term_bounds is not None:
            tb = np.asarray(term_bounds, dtype=float)
            cp["schedule"]["term1_bounds"] = ", ".join(repr(float(x)) for x in tb[0])
            cp["schedule"]["term2_bounds"] = ", ".join(repr(float(x)) for x in tb[1])
        for j in range(self.k_i.size):
            cp[f"vertex.{j + 1}"] = {
                "k_x": ", ".join(repr(float(x)) for x in self.k_x[j]),
                "k_i": repr(float(self.k_i[j])),
            }
        with Path(path).open("w") as fh:
            cp.write(fh)

    @classmethod
    def load(cls, path: str | Path) -> "GainSchedule":
        cp = configparser.ConfigParser()
        try:
            if not cp.read(path):
                raise GainFileError(f"{path}: cannot read gain file")
            n = cp.getint("schedule", "n_vertices")
            k_x = []
            k_i = []
            for j in range(1, n + 1):
                sec = cp[f"vertex.{j}"]
                k_x.append([float(x) for x in sec["k_x"].split(",")])
                k_i.append(float(sec["k_i"]))
            return cls(
                np.array(k_x),
                np.array(k_i),
                cp.getfloat("schedule", "omega_rated"),
                cp.getfloat("schedule", "p_rated"),
            )
        except (KeyError, ValueError, configparser.Error) as exc:
            raise GainFileError(f"{path}: {exc}") from exc


def synthesize_gains(
    vertices,
    q=(1.0, 0.0, 16.0),
    r: float = 1.0,
    omega_rated: float = 0.0,
    p_rated: float = 0.0,
) -> GainSchedule:
    """Per-vertex LQR on the integrator-augmented vertex models."""
    Q = np.diag(np.asarray(q, dtype=float))
    R = np.array([[float(r)]])
    k_x, k_i = [], []
    for vx in vertices:
        A, B = augment(vx)
        if not _stabilizable(A, B):
            raise SynthesisError(vx.index, "augmented vertex model is not stabilizable")
        try:
            K = lqr(A, B, Q, R)[0]
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SynthesisError(vx.index, f"Riccati solve failed ({exc})") from exc
        if np.max(np.linalg.eigvals(A - B @ K[None, :]).real) >= 0:
            raise SynthesisError(vx.index, "closed loop is not Hurwitz")
        k_x.append(K[:2])
        k_i.append(K[2])
    return GainSchedule(np.array(k_x), np.array(k_i), omega_rated, p_rated)


def invert_torque(
    torque: float,
    omega_r: float,
    beta: float,
    aero: Aero,
    v0: float,
    max_iter: int = 30,
    tol: float = 1e-12,
) -> tuple[float, bool]:
    """Newton solve of T_r(v, omega_r, beta) = torque for v; beta in rad.

    Returns (v, converged). On failure the last iterate is meaningless and the
    caller should keep its previous estimate.
    """
    beta_deg = float(np.degrees(beta))
    v = max(float(v0), 2 * V_MIN)
    for _ in range(max_iter):
        t, _, _, _, dtv, *_ = aero.loads(v, omega_r, beta_deg, slopes=True)
        g = float(t) - torque
        dg = float(dtv)
        if not dg > 0:
            return v, False
        step = g / dg
        v_new = v - step
        if v_new <= V_MIN:
            v_new = 0.5 * (v + V_MIN)
        if abs(v_new - v) <= tol * max(1.0, v):
            return v_new, True
        v = v_new
    return v, False


@dataclass
class ObserverState:
    omega_hat: float = 0.0
    torque_hat: float = 0.0
    v_raw: float = 0.0
    v_hat: float = 0.0
    failed: bool = False


class WindObserver:
    """Aerodynamic-torque disturbance observer followed by map inversion.

    The observer runs on the rigid reduced model J_t*omega_r_dot = T_r - n_g*T_g
    with a double pole at -bandwidth; the Newton solution is low-pass filtered.
    """

    def __init__(
        self,
        aero: Aero,
        j_t: float,
        n_g: float,
        bandwidth: float = 2.0,
        filter_time: float = 0.5,
        v_design: float = 11.4,
    ):
        self.aero = aero
        self.j_t = j_t
        self.n_g = n_g
        self.l1 = 2.0 * bandwidth
        self.l2 = j_t * bandwidth**2
        self.filter_time = filter_time
        self.v_design = v_design
        self.state = ObserverState(v_raw=v_design, v_hat=v_design)

    def reset(self, omega_r: float, t_g: float) -> None:
        # quasi-static start: aerodynamic torque balances the generator
        self.state = ObserverState(
            omega_hat=omega_r,
            torque_hat=self.n_g * t_g,
            v_raw=self.v_design,
            v_hat=self.v_design,
        )

    def update(self, omega_r: float, t_g: float, beta: float, dt: float) -> float:
        if not dt > 0:
            raise ValueError("dt must be positive")
        s = self.state
        err = omega_r - s.omega_hat
        s.omega_hat += dt * ((s.torque_hat - self.n_g * t_g) / self.j_t + self.l1 * err)
        s.torque_hat += dt * self.l2 * err
        v, ok = invert_torque(s.torque_hat, omega_r, beta, self.aero, s.v_raw)
        s.failed = not ok
        if ok:
            s.v_raw = v
        alpha = 1.0 - np.exp(-dt / self.filter_time)
        s.v_hat += alpha * (s.v_raw - s.v_hat)
        return s.v_hat


def estimate_wind(omega_r: float, t_g: float, beta: float, dt: float, observer: WindObserver) -> float:
    return observer.update(omega_r, t_g, beta, dt)


@dataclass(frozen=True, eq=False)
class FeedforwardTable:
    """Equilibrium pitch (rad) at rated speed over wind speed and power reference."""

    v_grid: np.ndarray
    p_grid: np.ndarray
    beta: np.ndarray  # [v][p]

    def __call__(self, v: float, p: float) -> float:
        vg, pg = self.v_grid, self.p_grid
        v = min(max(v, vg[0]), vg[-1])
        p = min(max(p, pg[0]), pg[-1])
        i = min(max(int(np.searchsorted(vg, v, side="right")) - 1, 0), vg.size - 2)
        j = min(max(int(np.searchsorted(pg, p, side="right")) - 1, 0), pg.size - 2)
        s = (v - vg[i]) / (vg[i + 1] - vg[i])
        t = (p - pg[j]) / (pg[j + 1] - pg[j])
        b = self.beta
        lo = b[i, j] + (b[i, j + 1] - b[i, j]) * t
        hi = b[i + 1, j] + (b[i + 1, j + 1] - b[i + 1, j]) * t
        return float(lo + (hi - lo) * s)

    @classmethod
    def build(
        cls,
        aero: Aero,
        omega_rated: float,
        p_rated: float,
        v_grid=None,
        p_fractions=None,
    ) -> "FeedforwardTable":
        v_grid = np.arange(3.0, 30.0 + 1e-9, 0.25) if v_grid is None else np.asarray(v_grid, float)
        frac = np.arange(0.0, 1.2 + 1e-9, 0.05) if p_fractions is None else np.asarray(p_fractions, float)
        p_grid = frac * p_rated
        table = np.array(
            [[pitch_for_torque(v, omega_rated, p / omega_rated, aero) for p in p_grid] for v in v_grid]
        )
        return cls(v_grid, p_grid, table)


@dataclass(frozen=True)
class LocalLimits:
    beta_min: float = 0.0
    beta_max: float = np.pi / 2
    beta_rate_max: float = float(np.radians(8.0))
    t_g_max: float = 1.2 * 5e6 / (97.0 * 12.1 * np.pi / 30)
    t_g_slew: float = 5e6 / (97.0 * 12.1 * np.pi / 30)  # N*m/s: 10 % of rated per 0.1 s
    omega_floor: float = 0.1
    integrator_limit: float = 1.0


@dataclass
class LocalControllerState:
    integrator: float = 0.0
    beta_cmd_prev: float = 0.0
    t_g_cmd_prev: float = 0.0
    v_hat: float = 0.0
    beta_eq: float = 0.0
    h: np.ndarray = field(default_factory=lambda: np.full(N_VERTICES, 1.0 / N_VERTICES))


def pitch_law(h, gains, x_dev, integrator: float, beta_eq: float) -> float:
    """Unsaturated pitch command from blended gains."""
    k = np.asarray(h) @ np.asarray(gains)
    return float(beta_eq - (k[0] * x_dev[0] + k[1] * x_dev[1] + k[2] * integrator))


def rate_limit(value: float, previous: float, max_rate: float, dt: float) -> float:
    step = max_rate * dt
    return min(max(value, previous - step), previous + step)


class LocalController:
    def __init__(
        self,
        schedule: GainSchedule,
        decomposition: SectorDecomposition,
        feedforward: FeedforwardTable,
        observer: WindObserver,
        limits: LocalLimits = LocalLimits(),
        n_g: float = 97.0,
    ):
        if schedule.k_i.size != len(decomposition.vertices):
            raise ValueError("gain schedule and decomposition disagree on vertex count")
        self.schedule = schedule
        self.decomposition = decomposition
        self.feedforward = feedforward
        self.observer = observer
        self.limits = limits
        self.n_g = n_g
        self.state = LocalControllerState()

    def reset(self, omega_r: float, beta: float, t_g: float) -> None:
        self.observer.reset(omega_r, t_g)
        self.state = LocalControllerState(
            beta_cmd_prev=beta,
            t_g_cmd_prev=t_g,
            v_hat=self.observer.state.v_hat,
        )

    def torque_command(self, omega_g: float, delta_p_ref: float, dt: float) -> float:
        lim = self.limits
        raw = (self.schedule.p_rated + delta_p_ref) / max(omega_g, lim.omega_floor)
        raw = min(max(raw, 0.0), lim.t_g_max)
        return rate_limit(raw, self.state.t_g_cmd_prev, lim.t_g_slew, dt)

    def step(
        self,
        omega_r: float,
        omega_g: float,
        beta: float,
        delta_p_ref: float,
        dt: float,
        v_override: float | None = None,
    ) -> tuple[float, float]:
        """One control period; returns (t_g_cmd, beta_ref)."""
        if not dt > 0:
            raise ValueError("dt must be positive")
        st = self.state
        lim = self.limits
        sched = self.schedule

        # torque applied over the last period drives the observer
        v_hat = self.observer.update(omega_r, st.t_g_cmd_prev, beta, dt)
        if v_override is not None:
            v_hat = float(v_override)
        st.v_hat = v_hat

        t_g_cmd = self.torque_command(omega_g, delta_p_ref, dt)

        p_ref = sched.p_rated + delta_p_ref
        beta_eq = self.feedforward(v_hat, p_ref)
        z = PremiseVector(omega_r, beta, v_hat, t_g_cmd)
        h = self.decomposition.weights(z)
        x_dev = (omega_r - sched.omega_rated, beta - beta_eq)
        raw = pitch_law(h, sched.gains, x_dev, st.integrator, beta_eq)
        cmd = min(max(raw, lim.beta_min), lim.beta_max)
        cmd = rate_limit(cmd, st.beta_cmd_prev, lim.beta_rate_max, dt)

        # conditional integration: hold while the command is pinned against a
        # limit in the direction the integral would push it
        err = omega_r - sched.omega_rated
        push = -(h @ sched.k_i) * err
        pinned_high = raw > cmd and push > 0
        pinned_low = raw < cmd and push < 0
        if not (pinned_high or pinned_low):
            st.integrator = float(
                np.clip(st.integrator + err * dt, -lim.integrator_limit, lim.integrator_limit)
            )

        st.beta_cmd_prev = cmd
        st.t_g_cmd_prev = t_g_cmd
        st.beta_eq = beta_eq
        st.h = h
        return t_g_cmd, cmd


def control_step(controller: LocalController, meas, delta_p_ref: float, dt: float):
    """Functional wrapper: meas = (omega_r, omega_g, beta)."""
    omega_r, omega_g, beta = meas[:3]
    return controller.step(omega_r, omega_g, beta, delta_p_ref, dt)
