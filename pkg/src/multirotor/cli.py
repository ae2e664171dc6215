"""Command-line entry point: ``multirotor run | validate | synthesize``."""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import ConfigError, dump_config, load_config, shipped_config
from .control_local import GainFileError, GainSchedule, SynthesisError, synthesize_gains
from .reduced_model import DecompositionError, ReducedModel, sector_decompose
from .simkit import IntegrationError, N_ROTORS, SimConfig, SimTrace, design_controllers, run_scenario
from .tower import tower_base_load_metric

OUT_ENV = "MULTIROTOR_OUT"
DEFAULT_OUT = "multirotor_out"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BLOWUP = 2
EXIT_SYNTHESIS = 3


@dataclass(frozen=True)
class RunManifest:
    config: Path
    output_dir: Path
    seed: int | None = None
    scenario: str | None = None
    mitigation: bool = True
    observer: bool = True
    gains: Path | None = None
    # the package only ever simulates; true-wind feedthrough is meaningless on hardware
    simulation_only: bool = True

    def __post_init__(self) -> None:
        if not self.observer and not self.simulation_only:
            raise ConfigError("observer-off (true-wind feedthrough) requires simulation-only mode")


def resolve_output(arg: str | None) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get(OUT_ENV) or DEFAULT_OUT)


# ---------------------------------------------------------------- outputs


def _fmt(x: float) -> str:
    return repr(float(x))


def metrics_text(trace: SimTrace, sim: SimConfig) -> str:
    before, after = sim.windows
    mitigated = sim.mitigation_enable_time is not None
    lines = [
        "[run]",
        f"scenario = {sim.name}",
        f"seed = {sim.wind.rng_seed}",
        f"turbulence_intensity = {_fmt(sim.wind.turbulence_intensity)}",
        "mitigation = " + (f"on from t = {_fmt(sim.mitigation_enable_time)} s" if mitigated else "off"),
        "observer = " + ("on" if sim.observer else "off (true wind fed through)"),
        "",
        "[tower]",
        f"rms_phi_z_before = {_fmt(tower_base_load_metric(trace.window('phi_z', *before)))}",
        f"window_before = {before[0]!r}, {before[1]!r}",
    ]
    rms_after = tower_base_load_metric(trace.window("phi_z", *after))
    if mitigated:
        rms_before = tower_base_load_metric(trace.window("phi_z", *before))
        lines += [
            f"rms_phi_z_mitigated = {_fmt(rms_after)}",
            f"window_mitigated = {after[0]!r}, {after[1]!r}",
            f"rms_ratio = {_fmt(rms_after / rms_before)}",
        ]
    else:
        lines += [
            "rms_phi_z_mitigated = absent (mitigation disabled)",
            "window_mitigated = absent (mitigation disabled)",
            "rms_ratio = absent (mitigation disabled)",
            f"rms_phi_z_after_unmitigated = {_fmt(rms_after)}",
        ]
    lines.append(f"max_abs_phi_z = {_fmt(np.max(np.abs(trace['phi_z'])))}")

    p_rated = sim.control.p_rated
    w_rated = sim.control.omega_rated
    for i in range(1, N_ROTORS + 1):
        err = trace[f"p_g_{i}"] - (p_rated + trace[f"dp_ref_{i}"])
        werr = trace[f"omega_r_{i}"] / w_rated - 1.0
        lines += [
            "",
            f"[rotor{i}]",
            f"power_error_mean = {_fmt(np.mean(err))}",
            f"power_error_rms = {_fmt(np.sqrt(np.mean(err**2)))}",
            f"power_error_max_abs = {_fmt(np.max(np.abs(err)))}",
            f"speed_error_rms_fraction = {_fmt(np.sqrt(np.mean(werr**2)))}",
            f"speed_error_max_abs_fraction = {_fmt(np.max(np.abs(werr)))}",
        ]
    split = trace["dp_ref_2"] + trace["dp_ref_3"] - trace["dp_23_ref"]
    total = trace["dp_ref_1"] + trace["dp_ref_2"] + trace["dp_ref_3"] - trace["dp_total_ref"]
    lines += [
        "",
        "[dispatch]",
        f"max_abs_split_error = {_fmt(np.max(np.abs(split)))}",
        f"max_abs_total_error = {_fmt(np.max(np.abs(total)))}",
        f"max_abs_u_c = {_fmt(np.max(np.abs(trace['u_c'])))}",
    ]
    return "\n".join(lines) + "\n"


def plot_script(trace_name: str = "trace.csv", image: str = "fig.png") -> str:
    """gnuplot script: winds, tower torsion and powers stacked over time."""
    def col(name: str) -> str:
        return f'(column("{name}"))'

    winds = ", \\\n     ".join(
        f"'{trace_name}' using {col('t')}:{col(f'v_{i}')} with lines title 'v_{i}'"
        for i in range(1, N_ROTORS + 1)
    )
    powers = ", \\\n     ".join(
        f"'{trace_name}' using {col('t')}:({col(f'p_g_{i}')}/1e6) with lines title 'P_{{g,{i}}}'"
        for i in range(1, N_ROTORS + 1)
    )
    return f"""# gnuplot -p plot.gp  (writes {image})
set datafile separator ','
set terminal pngcairo size 900,1000
set output '{image}'
set multiplot layout 3,1
set grid
set xlabel 't [s]'
set ylabel 'wind [m/s]'
plot {winds}
set ylabel 'phi_z [rad]'
plot '{trace_name}' using {col('t')}:{col('phi_z')} with lines title 'phi_z'
set ylabel 'power [MW]'
plot {powers}
unset multiplot
"""


# ---------------------------------------------------------------- commands


def cmd_run(manifest: RunManifest) -> int:
    try:
        loaded = load_config(manifest.config, manifest.scenario, manifest.seed)
        sim = loaded.sim
        if not manifest.mitigation:
            sim = replace(sim, mitigation_enable_time=None)
        if not manifest.observer:
            sim = replace(sim, observer=False)
        schedule = None if manifest.gains is None else GainSchedule.load(manifest.gains)
        design = design_controllers(sim.rotor, sim.aero, sim.control, schedule)
    except (ConfigError, GainFileError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SynthesisError, DecompositionError) as exc:
        print(f"synthesis failed: {exc}", file=sys.stderr)
        return EXIT_SYNTHESIS
    try:
        trace = run_scenario(sim, design)
    except IntegrationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    out = manifest.output_dir
    out.mkdir(parents=True, exist_ok=True)
    trace.to_csv(out / "trace.csv")
    (out / "metrics.txt").write_text(metrics_text(trace, sim))
    (out / "plot.gp").write_text(plot_script())
    print(f"wrote {out / 'trace.csv'}, metrics.txt, plot.gp")
    return EXIT_OK


def cmd_validate(config: Path) -> int:
    try:
        loaded = load_config(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(dump_config(loaded.sim))
    return EXIT_OK


def cmd_synthesize(config: Path, output: Path) -> int:
    try:
        sim = load_config(config).sim
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    c = sim.control
    try:
        dec = sector_decompose(c.box(sim.rotor.n_g), ReducedModel(sim.rotor, sim.aero))
        schedule = synthesize_gains(dec.vertices, c.q, c.r, c.omega_rated, c.p_rated)
    except (SynthesisError, DecompositionError) as exc:
        print(f"synthesis failed: {exc}", file=sys.stderr)
        return EXIT_SYNTHESIS
    schedule.save(output, dec.term_bounds)
    for vx, eig in zip(dec.vertices, schedule.closed_loop_eigenvalues(dec.vertices)):
        text = ", ".join(f"{e.real:.6g}{e.imag:+.6g}j" for e in sorted(eig, key=lambda e: (e.real, e.imag)))
        print(f"vertex {vx.index}: {text}")
    print(f"wrote {output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multirotor", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write trace, metrics and plot script")
    run.add_argument("--config", type=Path, default=None, help="config file (default: shipped 3x5 MW)")
    run.add_argument("--scenario", default=None, help="named [scenario.NAME] section to apply")
    run.add_argument("--seed", type=int, default=None, help="override the turbulence seed")
    run.add_argument("--out", default=None, help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    run.add_argument("--no-mitigation", action="store_true", help="keep the central controller off")
    run.add_argument("--no-observer", action="store_true", help="feed the true wind to the local controllers")
    run.add_argument("--gains", type=Path, default=None, help="gain-schedule file instead of synthesis")

    val = sub.add_parser("validate", help="check every parameter block and print the resolved config")
    val.add_argument("config", type=Path)

    syn = sub.add_parser("synthesize", help="compute the gain schedule and write it to a file")
    syn.add_argument("config", type=Path)
    syn.add_argument("output", type=Path)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        try:
            manifest = RunManifest(
                config=args.config or shipped_config(),
                output_dir=resolve_output(args.out),
                seed=args.seed,
                scenario=args.scenario,
                mitigation=not args.no_mitigation,
                observer=not args.no_observer,
                gains=args.gains,
            )
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return cmd_run(manifest)
    if args.command == "validate":
        return cmd_validate(args.config)
    return cmd_synthesize(args.config, args.output)


if __name__ == "__main__":
    sys.exit(main())
