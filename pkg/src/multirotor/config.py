"""INI configuration: one section per module, every physical key required.

Named scenarios live in ``[scenario.NAME]`` sections whose keys are
``section.key`` overrides applied on top of the base sections before parsing.
Map and gain file paths are resolved relative to the config file.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

from .aero import Aero, AeroConstants, AeroMaps, MapError, default_maps
from .control_central import CentralGains
from .dynamics import ParameterError, RotorUnitParams
from .simkit import ControlSettings, ScenarioError, SimConfig, WindScenario
from .tower import TowerParams

ROTOR_KEYS = tuple(f.name for f in fields(RotorUnitParams))
TOWER_KEYS = tuple(f.name for f in fields(TowerParams))


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key or file."""


def shipped_config(name: str = "default.cfg") -> Path:
    return Path(str(resources.files("multirotor") / "data" / name))


def _parse_pairs(text: str, key: str) -> tuple[tuple[float, float], ...]:
    """'0:14, 50:15' -> ((0.0, 14.0), (50.0, 15.0))."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            a, b = item.split(":")
            out.append((float(a), float(b)))
        except ValueError as exc:
            raise ConfigError(f"{key}: cannot parse breakpoint {item!r} (expected t:value)") from exc
    if not out:
        raise ConfigError(f"{key}: needs at least one t:value breakpoint")
    return tuple(out)


class _Reader:
    def __init__(self, cp: configparser.ConfigParser, base_dir: Path):
        self.cp = cp
        self.base_dir = base_dir

    def raw(self, section: str, key: str) -> str:
        if not self.cp.has_section(section):
            raise ConfigError(f"missing section [{section}] (needed for key {section}.{key})")
        if not self.cp.has_option(section, key):
            raise ConfigError(f"missing required key {section}.{key}")
        return self.cp.get(section, key).strip()

    def optional(self, section: str, key: str) -> str | None:
        if self.cp.has_option(section, key):
            value = self.cp.get(section, key).strip()
            return value or None
        return None

    def number(self, section: str, key: str) -> float:
        text = self.raw(section, key)
        try:
            value = float(text)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}: {text!r} is not a number") from exc
        if not math.isfinite(value):
            raise ConfigError(f"{section}.{key}: must be finite, got {text}")
        return value

    def integer(self, section: str, key: str) -> int:
        text = self.raw(section, key)
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}: {text!r} is not an integer") from exc

    def flag(self, section: str, key: str) -> bool:
        try:
            return self.cp.getboolean(section, key)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}: not a boolean") from exc

    def path(self, section: str, key: str) -> Path | None:
        value = self.optional(section, key)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def known(self, section: str, keys) -> None:
        if not self.cp.has_section(section):
            return
        extra = sorted(set(self.cp.options(section)) - set(keys))
        if extra:
            raise ConfigError(f"unknown key {section}.{extra[0]}")


def _build(section: str, cls, values: dict):
    try:
        return cls(**values)
    except (ParameterError, ScenarioError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


def _aero(r: _Reader) -> Aero:
    r.known("aero", ("rho", "radius", "cq_file", "ct_file"))
    const = _build("aero", AeroConstants, {"rho": r.number("aero", "rho"), "radius": r.number("aero", "radius")})
    cq_path, ct_path = r.path("aero", "cq_file"), r.path("aero", "ct_file")
    if (cq_path is None) != (ct_path is None):
        raise ConfigError("aero.cq_file and aero.ct_file must be given together")
    if cq_path is None:
        maps = default_maps()
    else:
        try:
            maps = AeroMaps.from_csv(cq_path, ct_path)
        except (MapError, OSError) as exc:
            raise ConfigError(str(exc)) from exc
    return Aero(const, maps)


SCHEDULE_KEYS = ("speed_band", "v_max", "beta_max_deg", "torque_max")
LOCAL_KEYS = (
    "beta_rate_max_deg", "t_g_max_fraction", "t_g_slew_fraction", "integrator_limit",
    "omega_floor", "observer_bandwidth", "observer_filter_time",
)


def _control(r: _Reader) -> ControlSettings:
    r.known("operation", ("omega_rated", "p_rated", "v_design"))
    r.known("schedule", SCHEDULE_KEYS)
    r.known("synthesis", ("q_omega", "q_beta", "q_integral", "r", "gain_file"))
    r.known("local", LOCAL_KEYS)
    r.known("central", ("k_p_c", "k_i_c", "u_c_limit", "share_23"))
    values = {k: r.number("operation", k) for k in ("omega_rated", "p_rated", "v_design")}
    values.update({k: r.number("schedule", k) for k in SCHEDULE_KEYS})
    values.update({k: r.number("local", k) for k in LOCAL_KEYS})
    values["q"] = tuple(r.number("synthesis", k) for k in ("q_omega", "q_beta", "q_integral"))
    values["r"] = r.number("synthesis", "r")
    gain = r.path("synthesis", "gain_file")
    values["gain_file"] = None if gain is None else str(gain)
    values["central"] = _build(
        "central",
        CentralGains,
        {k: r.number("central", k) for k in ("k_p_c", "k_i_c", "u_c_limit")},
    )
    return _build("control", ControlSettings, values)


def _apply_scenario(cp: configparser.ConfigParser, name: str) -> None:
    section = f"scenario.{name}"
    if not cp.has_section(section):
        known = sorted(s.split(".", 1)[1] for s in cp.sections() if s.startswith("scenario."))
        raise ConfigError(f"unknown scenario {name!r} (config defines: {', '.join(known) or 'none'})")
    for dotted, value in cp.items(section):
        if "." not in dotted:
            raise ConfigError(f"{section}.{dotted}: override keys must read section.key")
        target, key = dotted.split(".", 1)
        if not cp.has_section(target):
            cp.add_section(target)
        cp.set(target, key, value)


def read_config(path: str | Path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str  # keep J_r distinct from j_r
    try:
        with Path(path).open() as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cp


@dataclass(frozen=True)
class LoadedConfig:
    sim: SimConfig
    path: Path
    scenario: str | None


def load_config(path: str | Path, scenario: str | None = None, seed: int | None = None) -> LoadedConfig:
    path = Path(path)
    cp = read_config(path)
    if scenario is not None:
        _apply_scenario(cp, scenario)
    r = _Reader(cp, path.parent)

    r.known("rotor", ROTOR_KEYS)
    rotor_vals = {k: r.number("rotor", k) for k in ROTOR_KEYS}
    rotor_vals["n_blades"] = r.integer("rotor", "n_blades")
    rotor = _build("rotor", RotorUnitParams, rotor_vals)
    r.known("tower", TOWER_KEYS)
    tower = _build("tower", TowerParams, {k: r.number("tower", k) for k in TOWER_KEYS})
    aero = _aero(r)
    control = _control(r)

    r.known("wind", ("rotor1", "rotor2", "rotor3", "turbulence_intensity", "correlation_time", "seed"))
    wind_seed = r.integer("wind", "seed") if seed is None else int(seed)
    wind = _build(
        "wind",
        WindScenario,
        {
            "schedules": tuple(_parse_pairs(r.raw("wind", f"rotor{i}"), f"wind.rotor{i}") for i in (1, 2, 3)),
            "turbulence_intensity": r.number("wind", "turbulence_intensity"),
            "correlation_time": r.number("wind", "correlation_time"),
            "rng_seed": wind_seed,
        },
    )

    r.known("power", ("schedule",))
    r.known("simulation", ("dt", "control_period", "t_end", "mitigation_enable_time", "observer"))
    r.known("metrics", ("before", "after"))
    enable = r.raw("simulation", "mitigation_enable_time")
    if enable.lower() in ("off", "none"):
        enable_time = None
    else:
        enable_time = r.number("simulation", "mitigation_enable_time")
    windows = []
    for key in ("before", "after"):
        pair = _parse_window(r.raw("metrics", key), f"metrics.{key}")
        windows.append(pair)
    sim = _build(
        "simulation",
        SimConfig,
        {
            "rotor": rotor,
            "tower": tower,
            "aero": aero,
            "control": control,
            "wind": wind,
            "power_schedule": _parse_pairs(r.raw("power", "schedule"), "power.schedule"),
            "share_23": r.number("central", "share_23"),
            "dt": r.number("simulation", "dt"),
            "control_period": r.number("simulation", "control_period"),
            "t_end": r.number("simulation", "t_end"),
            "mitigation_enable_time": enable_time,
            "observer": r.flag("simulation", "observer"),
            "name": scenario or "default",
            "windows": tuple(windows),
        },
    )
    return LoadedConfig(sim, path, scenario)


def _parse_window(text: str, key: str) -> tuple[float, float]:
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"{key}: expected 't0, t1'") from exc
    if not a < b:
        raise ConfigError(f"{key}: window start must precede its end")
    return (a, b)


def dump_config(sim: SimConfig) -> str:
    """Normalized, fully resolved listing of every parameter."""
    c = sim.control
    lines = ["[rotor]"]
    lines += [f"{k} = {getattr(sim.rotor, k)!r}" for k in ROTOR_KEYS]
    lines += ["", "[tower]"]
    lines += [f"{k} = {getattr(sim.tower, k)!r}" for k in TOWER_KEYS]
    maps = sim.aero.maps
    lines += [
        "",
        "[aero]",
        f"rho = {sim.aero.const.rho!r}",
        f"radius = {sim.aero.const.radius!r}",
        f"map_grid = {maps.lambda_grid.size} x {maps.beta_grid.size} "
        f"(lambda {maps.lambda_grid[0]!r}..{maps.lambda_grid[-1]!r}, "
        f"beta {maps.beta_grid[0]!r}..{maps.beta_grid[-1]!r} deg)",
        "",
        "[operation]",
        f"omega_rated = {c.omega_rated!r}",
        f"p_rated = {c.p_rated!r}",
        f"v_design = {c.v_design!r}",
        "",
        "[schedule]",
    ]
    lines += [f"{k} = {getattr(c, k)!r}" for k in SCHEDULE_KEYS]
    lines += ["", "[synthesis]", f"q = {c.q!r}", f"r = {c.r!r}", f"gain_file = {c.gain_file}"]
    lines += ["", "[local]"]
    lines += [f"{k} = {getattr(c, k)!r}" for k in LOCAL_KEYS]
    g = c.central
    lines += [
        "",
        "[central]",
        f"k_p_c = {g.k_p_c!r}",
        f"k_i_c = {g.k_i_c!r}",
        f"u_c_limit = {g.u_c_limit!r}",
        f"share_23 = {sim.share_23!r}",
        "",
        "[wind]",
    ]
    for i, s in enumerate(sim.wind.schedules, start=1):
        lines.append(f"rotor{i} = " + ", ".join(f"{t!r}:{v!r}" for t, v in s))
    lines += [
        f"turbulence_intensity = {sim.wind.turbulence_intensity!r}",
        f"correlation_time = {sim.wind.correlation_time!r}",
        f"seed = {sim.wind.rng_seed}",
        "",
        "[power]",
        "schedule = " + ", ".join(f"{t!r}:{p!r}" for t, p in sim.power_schedule),
        "",
        "[simulation]",
        f"dt = {sim.dt!r}",
        f"control_period = {sim.control_period!r}",
        f"t_end = {sim.t_end!r}",
        f"mitigation_enable_time = {sim.mitigation_enable_time!r}",
        f"observer = {sim.observer}",
        "",
        "[metrics]",
        f"before = {sim.windows[0][0]!r}, {sim.windows[0][1]!r}",
        f"after = {sim.windows[1][0]!r}, {sim.windows[1][1]!r}",
    ]
    return "\n".join(lines) + "\n"
