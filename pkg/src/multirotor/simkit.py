"""Wind field, fixed-step integration and the closed-loop scenario engine.

The coupled state is 26 long: three rotor units of 8 states each, then the
tower torsion angle and rate. Controllers run every ``control_period`` and
their commands are held in between; winds are drawn at the same instants and
held too, so refining ``dt`` never changes the wind sequence.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .aero import V_MIN, Aero
from .control_central import CentralGains, MitigationController, dispatch, rotor1_reference
from .control_local import (
    FeedforwardTable,
    GainSchedule,
    LocalController,
    LocalLimits,
    WindObserver,
    synthesize_gains,
)
from .dynamics import (
    BETA,
    N_STATES,
    WG,
    WR,
    YBD,
    RotorModel,
    RotorUnitParams,
    equilibrium_find,
    pitch_for_torque,
)
from .reduced_model import ReducedModel, SchedulingBox, SectorDecomposition, sector_decompose
from .tower import TowerParams, tower_base_load_metric

N_ROTORS = 3
_RAD2DEG = 180.0 / math.pi
STATE_NAMES = ("y_a", "y_b", "dtheta_s", "y_a_dot", "y_b_dot", "omega_r", "omega_g", "beta")


class IntegrationError(RuntimeError):
    def __init__(self, t: float, detail: str = "non-finite state derivative"):
        super().__init__(f"integration blew up at t={t!r} s: {detail}")
        self.t = t


class ScenarioError(ValueError):
    pass


# ---------------------------------------------------------------- wind


@dataclass(frozen=True)
class WindScenario:
    """Piecewise-constant mean per rotor plus independent OU turbulence."""

    schedules: tuple[tuple[tuple[float, float], ...], ...]
    turbulence_intensity: float = 0.0
    correlation_time: float = 10.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        sched = tuple(tuple((float(t), float(v)) for t, v in s) for s in self.schedules)
        object.__setattr__(self, "schedules", sched)
        if len(sched) != N_ROTORS:
            raise ScenarioError(f"need {N_ROTORS} wind schedules, got {len(sched)}")
        for i, s in enumerate(sched, start=1):
            if not s:
                raise ScenarioError(f"wind schedule of rotor {i} is empty")
            times = [t for t, _ in s]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ScenarioError(f"wind schedule of rotor {i} is not time-sorted")
            if any(not (v >= 0 and math.isfinite(v)) for _, v in s):
                raise ScenarioError(f"wind schedule of rotor {i} has a negative mean")
        if not 0 <= self.turbulence_intensity < 0.5:
            raise ScenarioError("turbulence_intensity must lie in [0, 0.5)")
        if not self.correlation_time > 0:
            raise ScenarioError("correlation_time must be positive")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ScenarioError("rng_seed must be a 64-bit unsigned integer")

    def mean(self, rotor: int, t: float) -> float:
        """Scheduled mean for rotor 0..2; the first breakpoint also covers earlier times."""
        value = self.schedules[rotor][0][1]
        for tb, vb in self.schedules[rotor]:
            if t >= tb:
                value = vb
            else:
                break
        return value


@dataclass
class TurbulenceState:
    """Per-rotor OU state in units of standard deviations."""

    rng: np.random.Generator
    t_last: float | None = None
    value: float = 0.0


def turbulence_states(scenario: WindScenario) -> list[TurbulenceState]:
    # one independent stream per rotor, all derived from the single seed
    return [
        TurbulenceState(np.random.default_rng([int(scenario.rng_seed), i]))
        for i in range(N_ROTORS)
    ]


def wind_sample(scenario: WindScenario, rotor: int, t: float, state: TurbulenceState) -> float:
    """Mean plus OU turbulence at time t; advances ``state``.

    The noise is unit-variance OU, scaled by intensity*mean, so a change of
    mean rescales the turbulence without restarting it. Calls must have
    non-decreasing t.
    """
    mean = scenario.mean(rotor, t)
    ti = scenario.turbulence_intensity
    if ti == 0:
        return mean
    xi = state.rng.standard_normal()
    if state.t_last is None:
        state.value = xi  # stationary start
    else:
        gap = t - state.t_last
        if gap < 0:
            raise ScenarioError("wind samples must be requested in time order")
        a = math.exp(-gap / scenario.correlation_time)
        state.value = a * state.value + math.sqrt(1.0 - a * a) * xi
    state.t_last = t
    return max(mean * (1.0 + ti * state.value), 0.0)


# ---------------------------------------------------------------- integration


def rk4_step(x, u, t: float, dt: float, f) -> np.ndarray:
    """Classical Runge-Kutta step of x' = f(t, x, u) with u held over the step."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    # overflow is caught below and reported with its time, not as a warning
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = f(t, x, u)
        k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1, u)
        k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2, u)
        k4 = f(t + dt, x + dt * k3, u)
        incr = k1 + 2.0 * k2 + 2.0 * k3 + k4
    # any non-finite stage derivative poisons the weighted sum
    if not np.isfinite(incr).all():
        raise IntegrationError(t)
    return x + (dt / 6.0) * incr


class CoupledPlant:
    """Three identical units on one tower. Inputs u = (t_g[3], beta_ref[3], v[3])."""

    def __init__(self, rotor: RotorUnitParams, tower: TowerParams, aero: Aero):
        self.model = RotorModel(rotor, aero)
        self.tower = tower
        self.n = N_ROTORS * N_STATES

    def rhs(self, t: float, x: np.ndarray, u) -> np.ndarray:
        t_g, beta_ref, v = u
        m = self.model
        p = m.params
        nr = self.n
        rot = x[:nr].reshape(N_ROTORS, N_STATES)
        drot = rot @ m.A_T
        f_t = [0.0] * N_ROTORS
        for i, (w, b) in enumerate(zip(rot[:, WR].tolist(), rot[:, BETA].tolist())):
            vi = float(v[i])
            if vi > V_MIN:
                t_r, f_t[i] = m.aero.point_loads(vi, w, b * _RAD2DEG)
                drot[i, YBD] += f_t[i] * m._f_gain
                drot[i, WR] += t_r * m._t_gain
        drot[:, WG] -= t_g / p.J_g
        drot[:, BETA] += beta_ref / p.tau_beta
        tw = self.tower
        phi, rate = x[nr], x[nr + 1]
        acc = (-tw.k_z * phi - tw.d_z * rate + tw.lever_r * (f_t[2] - f_t[1])) / tw.j_z
        out = np.empty_like(x)
        out[:nr] = drot.reshape(-1)
        out[nr] = rate
        out[nr + 1] = acc
        return out

    def thrusts(self, x: np.ndarray, v) -> np.ndarray:
        rot = x[: self.n].reshape(N_ROTORS, N_STATES)
        return self.model.loads(rot, v)[1]


# ---------------------------------------------------------------- configuration


@dataclass(frozen=True)
class ControlSettings:
    omega_rated: float = 12.1 * math.pi / 30
    p_rated: float = 5e6
    v_design: float = 11.4
    # scheduling box
    speed_band: float = 0.1
    v_max: float = 18.0
    beta_max_deg: float = 25.0
    torque_max: float = 1.2
    # synthesis weights on (omega error, pitch deviation, speed-error integral)
    q: tuple[float, float, float] = (1.0, 0.0, 16.0)
    r: float = 1.0
    # actuators and observer
    beta_rate_max_deg: float = 8.0
    t_g_max_fraction: float = 1.2
    t_g_slew_fraction: float = 1.0
    integrator_limit: float = 1.0
    omega_floor: float = 0.1
    observer_bandwidth: float = 12.0
    observer_filter_time: float = 0.5
    central: CentralGains = CentralGains(-500.0, -50.0, 0.2)
    gain_file: str | None = None

    def __post_init__(self) -> None:
        positive = (
            "omega_rated", "p_rated", "v_design", "speed_band", "v_max", "beta_max_deg",
            "torque_max", "r", "beta_rate_max_deg", "t_g_max_fraction", "t_g_slew_fraction",
            "integrator_limit", "omega_floor", "observer_bandwidth", "observer_filter_time",
        )
        for name in positive:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ScenarioError(f"{name} must be positive and finite, got {value}")
        if self.speed_band >= 1:
            raise ScenarioError("speed_band must be below 1")
        if self.v_max <= self.v_design:
            raise ScenarioError("v_max must exceed v_design")
        if len(self.q) != 3 or any(not (math.isfinite(w) and w >= 0) for w in self.q):
            raise ScenarioError("q must hold three non-negative weights")

    def rated_torque(self, n_g: float) -> float:
        """Generator-side torque at rated power and speed."""
        return self.p_rated / (n_g * self.omega_rated)

    def box(self, n_g: float) -> SchedulingBox:
        return SchedulingBox.around_rated(
            self.omega_rated,
            self.rated_torque(n_g),
            self.v_design,
            v_max=self.v_max,
            beta_max_deg=self.beta_max_deg,
            speed_band=self.speed_band,
            torque_max=self.torque_max,
        )

    def limits(self, n_g: float) -> LocalLimits:
        tr = self.rated_torque(n_g)
        return LocalLimits(
            beta_rate_max=math.radians(self.beta_rate_max_deg),
            t_g_max=self.t_g_max_fraction * tr,
            t_g_slew=self.t_g_slew_fraction * tr,
            omega_floor=self.omega_floor,
            integrator_limit=self.integrator_limit,
        )


@dataclass(frozen=True)
class SimConfig:
    rotor: RotorUnitParams
    tower: TowerParams
    aero: Aero
    control: ControlSettings
    wind: WindScenario
    # (t, dP_total) breakpoints, linearly interpolated, held beyond the ends
    power_schedule: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    share_23: float = 2.0 / 3.0
    dt: float = 0.005
    control_period: float = 0.02
    t_end: float = 100.0
    mitigation_enable_time: float | None = 70.0
    observer: bool = True
    name: str = "custom"
    windows: tuple[tuple[float, float], tuple[float, float]] = ((50.0, 70.0), (75.0, 95.0))

    def __post_init__(self) -> None:
        ps = tuple((float(t), float(p)) for t, p in self.power_schedule)
        object.__setattr__(self, "power_schedule", ps)
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ScenarioError("dt must be positive")
        if not self.control_period >= self.dt:
            raise ScenarioError("control_period must be at least dt")
        ratio = self.control_period / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ScenarioError("control_period must be an integer multiple of dt")
        if not self.t_end > 0:
            raise ScenarioError("t_end must be positive")
        if not ps:
            raise ScenarioError("power_schedule needs at least one breakpoint")
        times = [t for t, _ in ps]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ScenarioError("power_schedule is not time-sorted")
        if not 0 <= self.share_23 <= 1:
            raise ScenarioError("share_23 must lie in [0, 1]")

    def delta_p_total(self, t: float) -> float:
        times = [b[0] for b in self.power_schedule]
        values = [b[1] for b in self.power_schedule]
        return float(np.interp(t, times, values))

    def with_seed(self, seed: int) -> "SimConfig":
        return replace(self, wind=replace(self.wind, rng_seed=int(seed)))


# ---------------------------------------------------------------- controllers


@dataclass(frozen=True, eq=False)
class ControlDesign:
    """Everything the local controllers share: decomposition, gains, feedforward."""

    decomposition: SectorDecomposition
    schedule: GainSchedule
    feedforward: FeedforwardTable


def design_controllers(
    rotor: RotorUnitParams,
    aero: Aero,
    control: ControlSettings,
    schedule: GainSchedule | None = None,
) -> ControlDesign:
    model = ReducedModel(rotor, aero)
    dec = sector_decompose(control.box(rotor.n_g), model)
    if schedule is None:
        if control.gain_file is not None:
            schedule = GainSchedule.load(control.gain_file)
        else:
            schedule = synthesize_gains(
                dec.vertices, control.q, control.r, control.omega_rated, control.p_rated
            )
    ff = FeedforwardTable.build(aero, control.omega_rated, control.p_rated)
    return ControlDesign(dec, schedule, ff)


def _local_controllers(cfg: SimConfig, design: ControlDesign) -> list[LocalController]:
    c = cfg.control
    out = []
    for _ in range(N_ROTORS):
        obs = WindObserver(
            cfg.aero,
            cfg.rotor.total_inertia,
            cfg.rotor.n_g,
            bandwidth=c.observer_bandwidth,
            filter_time=c.observer_filter_time,
            v_design=c.v_design,
        )
        out.append(
            LocalController(
                design.schedule,
                design.decomposition,
                design.feedforward,
                obs,
                c.limits(cfg.rotor.n_g),
                cfg.rotor.n_g,
            )
        )
    return out


# ---------------------------------------------------------------- trace


def trace_columns() -> list[str]:
    cols = ["t"]
    for i in range(1, N_ROTORS + 1):
        cols += [f"v_{i}", f"v_hat_{i}"]
        cols += [f"{name}_{i}" for name in STATE_NAMES]
        cols += [f"t_g_{i}", f"beta_ref_{i}", f"p_g_{i}", f"dp_ref_{i}", f"f_t_{i}"]
    cols += ["phi_z", "phi_z_dot", "u_c", "dp_total_ref", "dp_23_ref"]
    return cols


@dataclass(frozen=True, eq=False)
class SimTrace:
    columns: tuple[str, ...]
    data: np.ndarray  # (n_samples, n_columns)
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.data.ndim != 2 or self.data.shape[1] != len(self.columns):
            raise ValueError("trace data does not match its columns")
        t = self.data[:, 0]
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("trace timestamps must be strictly increasing")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    @property
    def t(self) -> np.ndarray:
        return self.data[:, 0]

    def window(self, name: str, t0: float, t1: float) -> np.ndarray:
        t = self.t
        return self[name][(t >= t0) & (t <= t1)]

    def to_csv(self, path: str | Path) -> None:
        # repr round-trips every double exactly, so the file is bit-faithful
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for row in self.data.tolist():
                w.writerow([repr(x) for x in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> "SimTrace":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        return cls(tuple(rows[0]), np.array([[float(x) for x in r] for r in rows[1:]]))


def rms_ratio(trace: SimTrace, before: tuple[float, float], after: tuple[float, float]) -> float:
    """RMS torsion over ``after`` divided by RMS torsion over ``before``."""
    return tower_base_load_metric(trace.window("phi_z", *after)) / tower_base_load_metric(
        trace.window("phi_z", *before)
    )


# ---------------------------------------------------------------- scenario loop


def initial_state(cfg: SimConfig, v0, dp0) -> tuple[np.ndarray, np.ndarray]:
    """Each unit in equilibrium at rated speed with the feedforward pitch; tower at rest."""
    c = cfg.control
    x = np.zeros(N_ROTORS * N_STATES + 2)
    t_g = np.zeros(N_ROTORS)
    for i in range(N_ROTORS):
        p_ref = c.p_rated + dp0[i]
        beta = pitch_for_torque(v0[i], c.omega_rated, p_ref / c.omega_rated, cfg.aero)
        st, inp = equilibrium_find(v0[i], c.omega_rated, beta, cfg.rotor, cfg.aero)
        x[i * N_STATES : (i + 1) * N_STATES] = st.as_array()
        t_g[i] = inp.t_g
    return x, t_g


def run_scenario(cfg: SimConfig, design: ControlDesign | None = None) -> SimTrace:
    if design is None:
        design = design_controllers(cfg.rotor, cfg.aero, cfg.control)
    plant = CoupledPlant(cfg.rotor, cfg.tower, cfg.aero)
    n_sub = int(round(cfg.control_period / cfg.dt))
    n_ctrl = int(math.floor(cfg.t_end / cfg.control_period + 1e-9))
    tc = cfg.control_period
    dt = cfg.dt

    turb = turbulence_states(cfg.wind)

    def winds(t: float) -> np.ndarray:
        return np.array([wind_sample(cfg.wind, i, t, turb[i]) for i in range(N_ROTORS)])

    def references(t: float) -> tuple[float, float, float]:
        total = cfg.delta_p_total(t)
        dp23 = cfg.share_23 * total
        return total, dp23, rotor1_reference(total, dp23)

    v = winds(0.0)
    total, dp23, dp1 = references(0.0)
    half = dispatch(0.0, dp23)
    x, t_g0 = initial_state(cfg, v, (dp1, half.delta_p_2_ref, half.delta_p_3_ref))

    locals_ = _local_controllers(cfg, design)
    for i, ctl in enumerate(locals_):
        row = x[i * N_STATES : (i + 1) * N_STATES]
        ctl.reset(row[WR], row[BETA], t_g0[i])
    central = MitigationController(cfg.control.central)

    cols = trace_columns()
    data = np.empty((n_ctrl + 1, len(cols)))
    nr = N_ROTORS * N_STATES

    for k in range(n_ctrl + 1):
        t = k * tc
        if k > 0:
            v = winds(t)
        rot = x[:nr].reshape(N_ROTORS, N_STATES)
        phi, phi_dot = x[nr], x[nr + 1]

        # central level: dispatch of the lateral units' power change
        total, dp23, dp1 = references(t)
        enabled = cfg.mitigation_enable_time is not None and t >= cfg.mitigation_enable_time
        u_c = central.step(phi_dot, tc, enabled)
        cmd = dispatch(u_c, dp23)
        dp = (dp1, cmd.delta_p_2_ref, cmd.delta_p_3_ref)

        # local level
        t_g = np.empty(N_ROTORS)
        beta_ref = np.empty(N_ROTORS)
        v_hat = np.empty(N_ROTORS)
        for i, ctl in enumerate(locals_):
            if k == 0:
                t_g[i], beta_ref[i] = ctl.state.t_g_cmd_prev, ctl.state.beta_cmd_prev
                v_hat[i] = ctl.state.v_hat
                continue
            override = None if cfg.observer else float(v[i])
            t_g[i], beta_ref[i] = ctl.step(
                rot[i, WR], rot[i, WG], rot[i, BETA], dp[i], tc, v_override=override
            )
            v_hat[i] = ctl.state.v_hat

        f_t = plant.thrusts(x, v)
        row = [t]
        for i in range(N_ROTORS):
            row += [v[i], v_hat[i], *rot[i]]
            row += [t_g[i], beta_ref[i], t_g[i] * rot[i, WG], dp[i], f_t[i]]
        row += [phi, phi_dot, u_c, total, dp23]
        data[k] = row

        if k == n_ctrl:
            break
        u = (t_g, beta_ref, v)
        for s in range(n_sub):
            ts = t + s * dt
            x = rk4_step(x, u, ts, dt, plant.rhs)

    meta = {
        "scenario": cfg.name,
        "seed": int(cfg.wind.rng_seed),
        "mitigation": cfg.mitigation_enable_time is not None,
        "observer": cfg.observer,
    }
    return SimTrace(tuple(cols), data, meta)


# ---------------------------------------------------------------- named scenarios


def fig7_power_schedule(p_rated: float, cut: float = 0.2) -> tuple[tuple[float, float], ...]:
    """Gradual curtailment of the whole turbine by ``cut`` of its rated power."""
    total = -cut * N_ROTORS * p_rated
    return ((0.0, 0.0), (20.0, 0.0), (60.0, total))


def fig7_scenario(
    base: SimConfig,
    turbulence_intensity: float = 0.05,
    seed: int = 42,
    v_base: float = 14.0,
    step: float = 1.0,
) -> SimConfig:
    """Uniform wind to 50 s, then rotor 3 sees ``step`` m/s more; mitigation from 70 s."""
    wind = WindScenario(
        schedules=(((0.0, v_base),), ((0.0, v_base),), ((0.0, v_base), (50.0, v_base + step))),
        turbulence_intensity=turbulence_intensity,
        correlation_time=base.wind.correlation_time,
        rng_seed=seed,
    )
    return replace(
        base,
        wind=wind,
        power_schedule=fig7_power_schedule(base.control.p_rated),
        t_end=100.0,
        mitigation_enable_time=70.0,
        windows=((50.0, 70.0), (75.0, 95.0)),
        name="fig7" if turbulence_intensity > 0 else "fig7_calm",
    )
