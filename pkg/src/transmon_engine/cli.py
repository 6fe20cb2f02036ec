"""Command-line entry point: validate, steady-state, cycle, sweep, oracle-check.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import cycle, model, oracle, thermo
from .errors import ConfigError, DomainError, EngineError
from .model import EngineParameters, GammaConvention, Knobs

ENV_PREFIX = "TRANSMON_ENGINE_"
MHZ = model.TWO_PI * 1e6

RUN_DEFAULTS = {
    "resolution": cycle.DEFAULT_RESOLUTION,
    "points_per_stroke": cycle.DEFAULT_POINTS_PER_STROKE,
    "samples": 200,
    "seed": 0,
    "workers": 1,
}
CONFIG_KEYS = (*model.RAW_KEYS, *model.CONVENTION_KEYS, *RUN_DEFAULTS)

ORACLE_TOL = 1e-8
JOINT_TOL = 1e-3
JOINT_SCALES = (1, 2, 4, 8)
JOINT_SMALL_SCALE = 100

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG = 0, 1, 2


# -- configuration ------------------------------------------------------------

def load_config(path: str | None, environ=None) -> dict:
    """Merge the reference defaults, the YAML file at ``path`` and environment overrides."""
    environ = os.environ if environ is None else environ
    config = {**model.TABLE_1, **RUN_DEFAULTS}
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config: {exc}", key="config") from None
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a mapping of key: value", key="config")
        config.update(_checked(loaded, "config file"))
    overrides = {}
    for name, text in environ.items():
        if name.startswith(ENV_PREFIX):
            overrides[name[len(ENV_PREFIX):].lower()] = yaml.safe_load(text)
    config.update(_checked(overrides, "environment"))
    return config


def _checked(entries: dict, origin: str) -> dict:
    for key in entries:
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key (from {origin})", key=str(key))
    return dict(entries)


def _int_setting(config: dict, key: str, minimum: int) -> int:
    value = config[key]
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"must be an integer >= {minimum}, got {value!r}", key=key)
    return value


def parameters_from(config: dict) -> EngineParameters:
    return model.to_internal_units({k: config[k] for k in (*model.RAW_KEYS, *model.CONVENTION_KEYS)
                                    if k in config})


# -- output -------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        # adding 0.0 turns -0.0 into 0.0
        return "" if math.isnan(value) else format(value + 0.0, ".17g")
    return str(value)


def write_csv(path: Path, header, rows) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(buffer.getvalue())


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(report: dict, out: Path | None, name: str) -> None:
    text = dump_json(report)
    sys.stdout.write(text)
    if out is not None:
        (out / name).write_text(text)


def write_surface(path: Path, grid: cycle.SurfaceGrid) -> None:
    write_csv(path, ("omega", "drive", "value", "reason_code"), grid.rows())


# -- commands -----------------------------------------------------------------

def cmd_validate(params: EngineParameters, config: dict, args) -> int:
    (w0, w1), (e0, e1) = params.omega_knob_range, params.drive_knob_range
    report = {
        "parameters_rad_per_s": {
            "omega_cpw": params.omega_cpw, "omega_pump": params.omega_pump,
            "g_over_hbar": params.g_over_hbar, "temperature_freq": params.temperature_freq,
            "gamma": params.gamma_minus_net, "kappa_cpw": params.kappa_cpw,
            "omega_knob_range": list(params.omega_knob_range),
            "drive_knob_range": list(params.drive_knob_range),
        },
        "conventions": {k: getattr(params, k).value for k in model.CONVENTION_KEYS},
        "beta_hbar_omega_at_omega0": float(params.thermal_gap_frequency(w0)) / params.temperature_freq,
        "beta_hbar_omega_at_omega1_max": float(params.thermal_gap_frequency(w1)) / params.temperature_freq,
        "abs_cavity_amplitude_at_e1_max": abs(complex(model.cavity_amplitude(params, e1))),
        "abs_cavity_amplitude_at_e0": abs(complex(model.cavity_amplitude(params, e0))),
    }
    _emit(report, args.out, "validate.json")
    return EXIT_OK


def _check_point(params: EngineParameters, knobs: Knobs) -> None:
    # drive = 0 is the undriven reference point and is accepted outside the window
    probe = Knobs(knobs.omega_t, params.drive_knob_range[0]) if knobs.drive == 0 else knobs
    params.check_in_window(probe)


def cmd_steady_state(params: EngineParameters, config: dict, args) -> int:
    if args.omega_mhz is None or args.drive_mhz is None:
        raise ConfigError("steady-state needs --omega-mhz and --drive-mhz", key="knobs")
    knobs = Knobs(args.omega_mhz * MHZ, args.drive_mhz * MHZ)
    _check_point(params, knobs)
    rho = model.steady_state_analytic(params, knobs)
    x, y, z = model.bloch_vector(rho)
    record = {
        "omega": knobs.omega_t, "drive": knobs.drive,
        "rho_ee": float(rho[0, 0].real), "re_rho_eg": float(rho[0, 1].real),
        "im_rho_eg": float(rho[0, 1].imag), "entropy": thermo.von_neumann_entropy(rho),
        "bloch_x": float(x), "bloch_y": float(y), "bloch_z": float(z),
    }
    if args.out is not None:
        write_csv(args.out / "steady_state.csv", tuple(record), [tuple(record.values())])
    _emit(record, args.out, "steady_state.json")
    return EXIT_OK


STROKE_COLUMNS = ("work", "heat", "q_plus", "passive_heat", "ergotropy_change")


def cmd_cycle(params: EngineParameters, config: dict, args) -> int:
    omega1 = params.omega_knob_range[1] if args.omega1_mhz is None else args.omega1_mhz * MHZ
    e1 = params.drive_knob_range[1] if args.e1_mhz is None else args.e1_mhz * MHZ
    pps = _int_setting(config, "points_per_stroke", 2)
    spec, strokes = cycle.build_cycle(params, omega1, e1, pps)
    result = thermo.cycle_energetics(params, strokes, decompose=True)

    header = ["stroke", "knob", "fixed", "start", "end"]
    header += [f"{c}_rad_s" for c in STROKE_COLUMNS] + [f"{c}_2pi_mhz" for c in STROKE_COLUMNS]
    header += ["work_plus_heat_2pi_mhz", "efficiency"]
    rows = []
    for i, (s, e) in enumerate(zip(strokes, result.per_stroke), start=1):
        values = (e.work, e.heat, e.positive_heat, e.passive_heat, e.ergotropy_change)
        rows.append([i, s.which_knob.value, s.fixed_value, s.start, s.end, *values,
                     *(v / MHZ for v in values), (e.work + e.heat) / MHZ, None])
    totals = (result.total_work, result.total_heat, result.q_plus,
              result.total_passive_heat, result.total_ergotropy_change)
    rows.append(["total", "", None, None, None, *totals, *(v / MHZ for v in totals),
                 (result.total_work + result.total_heat) / MHZ, result.efficiency])
    if args.out is not None:
        write_csv(args.out / "cycle.csv", header, rows)
    _emit({
        "corners": {"omega0": spec.omega0, "omega1": spec.omega1, "e0": spec.e0, "e1": spec.e1},
        "efficiency": result.efficiency,
        "extracted_work_2pi_mhz": -result.total_work / MHZ,
        "q_plus_2pi_mhz": result.q_plus / MHZ,
        "loop_closure_2pi_mhz": (result.total_work + result.total_heat) / MHZ,
    }, args.out, "cycle.json")
    return EXIT_OK


def cmd_sweep(params: EngineParameters, config: dict, args) -> int:
    resolution = _int_setting(config, "resolution", 2)
    pps = _int_setting(config, "points_per_stroke", 2)
    workers = _int_setting(config, "workers", 1)
    entropy = cycle.entropy_surface(params, resolution)
    population, coherence = cycle.state_surfaces(params, resolution)
    efficiency = cycle.efficiency_map(params, resolution, pps, workers)
    summary = {"resolution": resolution, "points_per_stroke": pps}
    try:
        w1, e1, eta = cycle.find_max_efficiency(efficiency)
        summary.update(max_efficiency=eta, omega1=w1, e1=e1,
                       omega1_2pi_mhz=w1 / MHZ, e1_2pi_mhz=e1 / MHZ,
                       at_upper_corner=bool(w1 == efficiency.omega_axis[-1]
                                            and e1 == efficiency.drive_axis[-1]))
    except EngineError as exc:
        summary.update(max_efficiency=None, error=str(exc))
    summary["corner_efficiency"] = _fmt_optional(efficiency.values[-1, -1])
    if args.out is not None:
        for name, grid in (("entropy", entropy), ("rho_ee", population),
                           ("abs_rho_eg", coherence), ("efficiency", efficiency)):
            write_surface(args.out / f"{name}.csv", grid)
    _emit(summary, args.out, "max_efficiency.json")
    if args.conventions_report:
        _emit({"conventions": cycle.conventions_report(params, resolution, pps, workers)},
              args.out, "conventions_report.json")
    return EXIT_OK


def _fmt_optional(value: float):
    return None if math.isnan(value) else float(value)


def oracle_distances(params: EngineParameters, omega, drive) -> dict[str, np.ndarray]:
    """Trace distance closed form vs Liouvillian null space, per Gamma convention."""
    out = {}
    for convention in GammaConvention:
        p = params.replace(gamma_convention=convention)
        out[convention.value] = np.array([
            model.trace_distance(model.steady_state_analytic(params, Knobs(w, e)),
                                 oracle.steady_state_nullspace(oracle.qubit_liouvillian(p, Knobs(w, e))))
            for w, e in zip(omega, drive)])
    return out


def joint_reduction_distances(params: EngineParameters, knobs: Knobs,
                              scales=(*JOINT_SCALES, JOINT_SMALL_SCALE)) -> dict[int, dict]:
    """Reduced joint steady state vs closed form with g divided by each scale."""
    out = {}
    for scale in scales:
        p = params.replace(g_over_hbar=params.g_over_hbar / scale)
        rho, trunc = oracle.joint_steady_state(p, knobs)
        out[scale] = {"trace_distance": model.trace_distance(
            oracle.reduced_qubit_state(rho, trunc), model.steady_state_analytic(p, knobs)),
            "n_max": trunc.n_max}
    return out


def cmd_oracle_check(params: EngineParameters, config: dict, args) -> int:
    n = _int_setting(config, "samples", 1)
    seed = _int_setting(config, "seed", 0)
    rng = np.random.default_rng(seed)
    omega = rng.uniform(*params.omega_knob_range, n)
    drive = rng.uniform(*params.drive_knob_range, n)
    distances = oracle_distances(params, omega, drive)
    maxima = {k: float(v.max()) for k, v in distances.items()}
    matching = sorted(k for k, v in maxima.items() if v < ORACLE_TOL)
    configured = params.gamma_convention.value
    worst = int(np.argmax(distances[configured]))
    report = {
        "samples": n, "seed": seed, "tolerance": ORACLE_TOL,
        "max_trace_distance": maxima,
        "configured_gamma_convention": configured,
        "matching_gamma_conventions": matching,
        "worst_point": {"omega": float(omega[worst]), "drive": float(drive[worst]),
                        "trace_distance": float(distances[configured][worst])},
    }
    passed = configured in matching
    if args.joint_check:
        (w0, w1), (e0, _) = params.omega_knob_range, params.drive_knob_range
        knobs = Knobs(0.5 * (w0 + w1), e0)
        joint = joint_reduction_distances(params, knobs)
        ladder = [joint[s]["trace_distance"] for s in JOINT_SCALES]
        joint_ok = (joint[JOINT_SMALL_SCALE]["trace_distance"] < JOINT_TOL
                    and all(b < a for a, b in zip(ladder, ladder[1:])))
        report["joint_check"] = {"omega": knobs.omega_t, "drive": knobs.drive, "passed": joint_ok,
                                 "by_g_divisor": {str(k): v for k, v in joint.items()}}
        passed = passed and joint_ok
    report["verdict"] = "pass" if passed else "fail"
    _emit(report, args.out, "oracle_check.json")
    if not passed:
        if configured not in matching and matching:
            print(f"FAIL: closed form matches gamma_convention={matching[0]}, "
                  f"not the configured {configured}", file=sys.stderr)
        print(f"FAIL: worst point omega={omega[worst]!r} drive={drive[worst]!r} "
              f"distance={distances[configured][worst]:.3e}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "steady-state": cmd_steady_state,
    "cycle": cmd_cycle,
    "sweep": cmd_sweep,
    "oracle-check": cmd_oracle_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transmon-engine", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=tuple(COMMANDS))
    parser.add_argument("--config", help="YAML file of key: value settings")
    parser.add_argument("--omega-mhz", type=float, help="steady-state: omega_T / 2pi in MHz")
    parser.add_argument("--drive-mhz", type=float, help="steady-state: E_d / (2 pi hbar) in MHz")
    parser.add_argument("--omega1-mhz", type=float, help="cycle: upper omega corner / 2pi in MHz")
    parser.add_argument("--e1-mhz", type=float, help="cycle: upper drive corner / (2 pi hbar) in MHz")
    parser.add_argument("--resolution", type=int)
    parser.add_argument("--points-per-stroke", type=int)
    parser.add_argument("--samples", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--joint-check", action="store_true")
    parser.add_argument("--conventions-report", action="store_true",
                        help="sweep: efficiency maxima under every frequency/gap convention")
    parser.add_argument("--out", type=Path, help="directory for CSV/JSON output")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        for key in ("resolution", "points_per_stroke", "samples", "seed", "workers"):
            if getattr(args, key) is not None:
                config[key] = getattr(args, key)
        params = parameters_from(config)
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](params, config, args)
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EngineError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
