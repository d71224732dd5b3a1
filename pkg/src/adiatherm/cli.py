"""Command-line experiment runner.

Subcommands map onto the experiment suite: entropy time traces in quench
and adiabatic settings, protocol-vs-exact Gibbs comparison, noise sweeps
with decay fits and collapse metrics, the adiabaticity diagnostic, the
20-qubit observable table, and the perturbed-evolution scaling check.
Every run writes deterministic CSV/JSON data files plus one JSON manifest
(the manifest carries wall time, so it is the one file that varies between
identical runs).

Exit codes: 0 success, 2 config error, 3 backend-cap error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BackendCapError, NumericalError
from .models import ising_1d, ring, thermal_reference_curve, torus
from .protocol import (
    TimeSeries,
    entropy_from_x,
    fit_decay,
    hardware_summary,
    HardwareObservables,
    s0_of_beta0,
)
from .experiments import (
    BACKEND_DM,
    BACKEND_TRAJ,
    SETTING_ADIABATIC,
    SETTING_MIRROR,
    SETTING_QUENCH,
    run_adiabaticity_diagnostic,
    run_entropy_timeseries,
    run_hardware_table,
    run_perturbation_scaling,
    run_thermal_prep,
)
from .paulis import PauliSum, single_site
from .schedules import (
    NOISE_PER_TROTTER_STEP,
    NOISE_PER_TWO_QUBIT_GATE,
    LinearSchedule,
    PowerLawSchedule,
    hardware_circuit,
    linear_trotter_circuit,
    mirror_circuit,
)


class ConfigError(Exception):
    pass


# --------------------------------------------------------------------------
# config schemas: key -> (type, default)

_PLACEMENTS = (NOISE_PER_TROTTER_STEP, NOISE_PER_TWO_QUBIT_GATE)

SCHEMAS: dict[str, dict[str, tuple]] = {
    "quench-adiabatic": {
        "n_list": (list, [6, 8, 10, 12]),
        "beta0": (float, 1.0),
        "j": (float, -1.0),
        "h_x": (float, 1.0),
        "h_z": (float, 1.0),
        "h0_sign": (int, 1),
        "m_steps": (int, 120),
        "dt": (float, 0.05),
        "p": (float, 0.0),
        "placement": (str, NOISE_PER_TROTTER_STEP),
        "seed": (int, 0),
    },
    "gibbs-compare": {
        "n": (int, 12),
        "m_steps": (int, 60),
        "dt": (float, 0.1),
        "h0_sign": (int, 1),
        "parameter_sets": (list, [[1.0, 1.0, -1.0], [2.0, 0.0, -1.0], [1.0, 0.5, -1.0]]),
        "beta0_min": (float, 0.1),
        "beta0_max": (float, 2.0),
        "beta0_step": (float, 0.1),
        "ref_beta_min": (float, 0.05),
        "ref_beta_max": (float, 2.5),
        "ref_beta_points": (int, 120),
        "seed": (int, 0),
    },
    "noise-curves": {
        "n": (int, 12),
        "j": (float, -1.0),
        "h_x": (float, -1.0),
        "h_z": (float, 1.0),
        "h0_sign": (int, 1),
        "m_steps": (int, 60),
        "dt": (float, 0.1),
        "ts_m_steps": (int, 200),
        "ts_beta0": (float, 2.0),
        "p_list": (list, [0.0, 2.5e-4, 5e-4, 1e-3]),
        "placement": (str, NOISE_PER_TROTTER_STEP),
        "beta0_min": (float, 0.1),
        "beta0_max": (float, 2.0),
        "beta0_step": (float, 0.1),
        "seed": (int, 0),
    },
    "adiabaticity": {
        "n": (int, 10),
        "j": (float, -1.0),
        "h_x": (float, 1.0),
        "h_z": (float, 1.0),
        "h0_sign": (int, 1),
        "dt": (float, 0.1),
        "beta0": (float, 2.0),
        "p": (float, 5e-4),
        "m_list": (list, [20, 40, 60, 80, 100]),
        "k_list": (list, [0, 1, 2, 4]),
        "threshold": (float, 0.01),
        "dt_probe": (float, None),
        "placement": (str, NOISE_PER_TROTTER_STEP),
        "seed": (int, 0),
    },
    "hardware-table": {
        "lx": (int, 5),
        "ly": (int, 4),
        "h_x": (float, 2.0),
        "m_steps": (int, 16),
        "a": (float, 1.186),
        "b": (float, 0.077),
        "c": (float, 2.181),
        "d": (float, 0.469),
        "flip_site": (int, 0),
        "shots": (bool, False),
        "z_shots": (int, 1500),
        "x_shots": (int, 1500),
        "m_shots": (int, 1000),
        "fixture_e": (float, -2.334),
        "fixture_e_err": (float, 0.0186),
        "fixture_e_prime": (float, -2.0279),
        "fixture_e_prime_err": (float, 0.0161),
        "fixture_m": (float, -0.921),
        "fixture_m_err": (float, 0.0028),
        "fixture_m_prime": (float, -0.846),
        "fixture_m_prime_err": (float, 0.0026),
        "seed": (int, 0),
    },
    "perturb-scaling": {
        "n": (int, 6),
        "j": (float, -1.0),
        "h_x": (float, 1.0),
        "h_z": (float, 1.0),
        "beta": (float, 1.0),
        "epsilon": (float, 0.02),
        "delta_kind": (str, "z_field"),
        "delta_site": (int, 0),
        "t_list": (list, [2.0, 3.0, 4.5, 6.5, 9.5, 14.0]),
        "lambda_list": (list, [1.0, 2.0, 4.0]),
        "seed": (int, 0),
    },
}


def load_config(command: str, path: str | None, overrides: dict) -> dict:
    schema = SCHEMAS[command]
    cfg = {key: default for key, (_, default) in schema.items()}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in raw.items():
            if key not in schema:
                raise ConfigError(f"unknown config key {key!r} for {command}")
            cfg[key] = value
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    # coerce scalar types
    for key, (typ, default) in schema.items():
        value = cfg[key]
        if value is None:
            continue
        if typ in (int, float) and isinstance(value, bool):
            raise ConfigError(f"config key {key!r} must be a number")
        if typ is int:
            if isinstance(value, float) and not value.is_integer():
                raise ConfigError(f"config key {key!r} must be an integer")
            cfg[key] = int(value)
        elif typ is float:
            cfg[key] = float(value)
        elif typ is bool and not isinstance(value, bool):
            raise ConfigError(f"config key {key!r} must be a boolean")
        elif typ is list and not isinstance(value, list):
            raise ConfigError(f"config key {key!r} must be a list")
    return cfg


def _beta0_grid(cfg: dict) -> list[float]:
    lo, hi, step = cfg["beta0_min"], cfg["beta0_max"], cfg["beta0_step"]
    if step <= 0:
        raise ConfigError("beta0_step must be positive")
    grid = []
    k = 0
    while True:
        b = lo + k * step
        if b > hi + 1e-9:
            break
        grid.append(round(b, 12))
        k += 1
    if len(grid) < 3:
        raise ConfigError("beta0 grid needs at least 3 points")
    return grid


# --------------------------------------------------------------------------
# deterministic output helpers

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.12g}"
    return str(value)


def _csv(header: str, rows) -> str:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class OutputDir:
    def __init__(self, out: Path):
        self.out = out
        self.files: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, content: str) -> None:
        tmp = self.out / (name + ".tmp")
        tmp.write_text(content)
        os.replace(tmp, self.out / name)
        self.files.append(name)


def _timeseries_rows(trace, setting: str):
    rows = []
    for t, s_exact, s_est in zip(
        trace.exact.times, trace.exact.values, trace.x_estimate.values
    ):
        rows.append((t, s_exact, s_est, setting, trace.n_qubits, trace.p))
    return rows


TIMESERIES_HEADER = "t,S_exact,S_xestimate,setting,N,p"
CURVES_HEADER = "beta0,E,S,beta_f,p,M,dt,N"


def _curves_csv(records) -> str:
    rows = [
        (r.beta0, r.energy, r.entropy, r.beta_f, r.p, r.m_steps, r.dt, r.n_qubits)
        for r in records
    ]
    return _csv(CURVES_HEADER, rows)


# --------------------------------------------------------------------------
# subcommands

def cmd_quench_adiabatic(cfg: dict, out: OutputDir, args) -> dict:
    n_list = [int(n) for n in cfg["n_list"]]
    if not n_list:
        raise ConfigError("n_list must not be empty")
    extras = {"areas": {}, "mean_drift": {}}
    rows_extrap = []
    s0 = s0_of_beta0(cfg["beta0"])
    for n in n_list:
        if n % 2 != 0:
            raise ConfigError("system sizes must be even (half-system entropy)")
        lattice = ring(n)
        schedule = LinearSchedule(
            cfg["m_steps"], cfg["dt"], cfg["j"], cfg["h_x"], cfg["h_z"], cfg["h0_sign"]
        )
        for setting in (SETTING_QUENCH, SETTING_ADIABATIC):
            trace = run_entropy_timeseries(
                lattice, schedule, cfg["beta0"],
                setting=setting, p=cfg["p"], placement=cfg["placement"],
            )
            out.write(
                f"timeseries_{setting}_N{n}.csv",
                _csv(TIMESERIES_HEADER, _timeseries_rows(trace, setting)),
            )
            if setting == SETTING_ADIABATIC:
                times = np.array(trace.exact.times)
                values = np.array(trace.exact.values)
                area = float(np.trapezoid(np.abs(values - s0), times))
                total_t = float(times[-1])
                extras["areas"][str(n)] = area
                extras["mean_drift"][str(n)] = area / total_t
                rows_extrap.append((n, 1.0 / n, area, area / total_t))
    out.write("extrapolation.csv", _csv("N,inv_N,area,mean_drift", rows_extrap))
    if len(n_list) >= 2:
        inv_n = np.array([1.0 / n for n in n_list])
        drift = np.array([extras["mean_drift"][str(n)] for n in n_list])
        slope, intercept = np.polyfit(inv_n, drift, 1)
        extras["drift_fit"] = {"slope": float(slope), "intercept": float(intercept)}
    return extras


def cmd_gibbs_compare(cfg: dict, out: OutputDir, args) -> dict:
    n = cfg["n"]
    grid = _beta0_grid(cfg)
    ref_betas = np.linspace(
        cfg["ref_beta_min"], cfg["ref_beta_max"], cfg["ref_beta_points"]
    )
    lattice = ring(n)
    for i, params in enumerate(cfg["parameter_sets"]):
        if len(params) != 3:
            raise ConfigError("each parameter set must be [h_x, h_z, j]")
        h_x, h_z, j = (float(v) for v in params)
        schedule = LinearSchedule(cfg["m_steps"], cfg["dt"], j, h_x, h_z, cfg["h0_sign"])
        result = run_thermal_prep(lattice, schedule, grid)
        out.write(f"prep_set{i}.csv", _curves_csv(result.records))
        ref = thermal_reference_curve(ising_1d(n, j, h_x, h_z, periodic=True), ref_betas)
        rows = list(zip(ref.betas, ref.energy_density, ref.entropy_density))
        out.write(f"reference_set{i}.csv", _csv("beta,E,S", rows))
        if args.dump_circuit and i == 0:
            out.write("circuit_set0.txt", linear_trotter_circuit(schedule, lattice).to_text())
    return {"beta0_grid": grid}


def cmd_noise_curves(cfg: dict, out: OutputDir, args) -> dict:
    p_list = [float(p) for p in cfg["p_list"]]
    for p in p_list:
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"noise amplitude {p} outside [0, 1]")
    n = cfg["n"]
    lattice = ring(n)
    grid = _beta0_grid(cfg)
    backend = BACKEND_TRAJ if args.backend == "traj" else BACKEND_DM
    n_traj = args.trajectories or 100
    curve_schedule = LinearSchedule(
        cfg["m_steps"], cfg["dt"], cfg["j"], cfg["h_x"], cfg["h_z"], cfg["h0_sign"]
    )
    ts_schedule = LinearSchedule(
        cfg["ts_m_steps"], cfg["dt"], cfg["j"], cfg["h_x"], cfg["h_z"], cfg["h0_sign"]
    )
    decay_rows = []
    curves = {}
    for i, p in enumerate(p_list):
        fwd = run_entropy_timeseries(
            lattice, ts_schedule, cfg["ts_beta0"],
            setting=SETTING_ADIABATIC, p=p, placement=cfg["placement"],
        )
        out.write(
            f"timeseries_forward_p{i}.csv",
            _csv(TIMESERIES_HEADER, _timeseries_rows(fwd, SETTING_ADIABATIC)),
        )
        mir = run_entropy_timeseries(
            lattice, ts_schedule, cfg["ts_beta0"],
            setting=SETTING_MIRROR, p=p, placement=cfg["placement"],
        )
        out.write(
            f"timeseries_mirror_p{i}.csv",
            _csv(TIMESERIES_HEADER, _timeseries_rows(mir, SETTING_MIRROR)),
        )
        fit = fit_decay(fwd.exact, cfg["ts_beta0"])
        decay_rows.append((p, fit.alpha, fit.r, fit.rms))
        result = run_thermal_prep(
            lattice, curve_schedule, grid,
            p=p, placement=cfg["placement"],
            backend=backend, n_traj=n_traj, seed=cfg["seed"],
        )
        out.write(f"curves_p{i}.csv", _curves_csv(result.records))
        curves[p] = result.records
    out.write("decay_fits.csv", _csv("p,alpha,r_end,rms", decay_rows))
    collapse = _collapse_metrics(curves)
    out.write("collapse.json", _json_text(collapse))
    if args.dump_circuit:
        out.write("circuit.txt", linear_trotter_circuit(curve_schedule, lattice).to_text())
    return {"beta0_grid": grid, "collapse": collapse}


def _collapse_metrics(curves: dict) -> dict:
    """Vertical spread of E(beta_f) curves on their common range, the spread
    of E(beta0) at the same noise levels, and the largest beta_f per level."""
    p_list = sorted(curves)
    valid = {
        p: [(r.beta_f, r.energy) for r in recs if not r.flat_e and math.isfinite(r.beta_f)]
        for p, recs in curves.items()
    }
    beta_max = {repr(p): (max(b for b, _ in pts) if pts else math.nan)
                for p, pts in valid.items()}
    lo = max(min(b for b, _ in pts) for pts in valid.values() if pts)
    hi = min(max(b for b, _ in pts) for pts in valid.values() if pts)
    e_beta_spread = math.nan
    if hi > lo:
        grid = np.linspace(lo, hi, 50)
        interped = []
        for p in p_list:
            pts = sorted(valid[p])
            xs = np.array([b for b, _ in pts])
            ys = np.array([e for _, e in pts])
            interped.append(np.interp(grid, xs, ys))
        stacked = np.vstack(interped)
        e_beta_spread = float(np.max(stacked.max(axis=0) - stacked.min(axis=0)))
    # spread of E(beta0) across noise levels on the shared beta0 grid
    beta0s = [r.beta0 for r in curves[p_list[0]]]
    e_by_p = np.array([[r.energy for r in curves[p]] for p in p_list])
    e_beta0_spread = float(np.max(e_by_p.max(axis=0) - e_by_p.min(axis=0)))
    return {
        "p_list": p_list,
        "common_beta_range": [float(lo), float(hi)],
        "e_of_beta_spread": e_beta_spread,
        "e_of_beta0_spread": e_beta0_spread,
        "beta_max": beta_max,
    }


def cmd_adiabaticity(cfg: dict, out: OutputDir, args) -> dict:
    if any(int(k) < 0 for k in cfg["k_list"]):
        raise ConfigError("probe step counts must be >= 0")
    if not 0.0 <= cfg["p"] <= 1.0:
        raise ConfigError(f"noise amplitude {cfg['p']} outside [0, 1]")
    lattice = ring(cfg["n"])

    def schedule_for_m(m: int) -> LinearSchedule:
        return LinearSchedule(m, cfg["dt"], cfg["j"], cfg["h_x"], cfg["h_z"], cfg["h0_sign"])

    rows = run_adiabaticity_diagnostic(
        lattice, schedule_for_m,
        [int(m) for m in cfg["m_list"]],
        [int(k) for k in cfg["k_list"]],
        cfg["beta0"],
        p=cfg["p"], placement=cfg["placement"],
        dt_probe=cfg["dt_probe"], threshold=cfg["threshold"],
    )
    out.write(
        "diagnostic.csv",
        _csv(
            "M,k,S_estimate,S_exact,verdict",
            [(r.m_steps, r.k, r.s_estimate, r.s_exact, r.adiabatic) for r in rows],
        ),
    )
    if args.dump_circuit:
        m_max = max(int(m) for m in cfg["m_list"])
        out.write(
            "circuit.txt",
            linear_trotter_circuit(schedule_for_m(m_max), lattice).to_text(),
        )
    return {}


def _observables_dict(result) -> dict:
    obs = result.observables
    data = {
        "zz": obs.zz, "x": obs.x, "e": obs.e,
        "zz_prime": obs.zz_prime, "x_prime": obs.x_prime, "e_prime": obs.e_prime,
        "m": obs.m, "m_prime": obs.m_prime,
        "se_zz": obs.se_zz, "se_x": obs.se_x, "se_e": obs.se_e,
        "se_zz_prime": obs.se_zz_prime, "se_x_prime": obs.se_x_prime,
        "se_e_prime": obs.se_e_prime,
        "se_m": obs.se_m, "se_m_prime": obs.se_m_prime,
        "two_qubit_gates_forward": result.two_qubit_gates_forward,
        "two_qubit_gates_mirror": result.two_qubit_gates_mirror,
    }
    data.update(result.derived)
    return data


def cmd_hardware_table(cfg: dict, out: OutputDir, args) -> dict:
    spec = PowerLawSchedule(cfg["m_steps"], cfg["a"], cfg["b"], cfg["c"], cfg["d"], cfg["h_x"])
    exact = run_hardware_table(
        cfg["lx"], cfg["ly"], cfg["h_x"], spec, flip_site=cfg["flip_site"], shots=False,
    )
    out.write("observables.json", _json_text(_observables_dict(exact)))
    if cfg["shots"] or args.shots:
        z = x = m = None
        if args.shots:
            z = x = m = int(args.shots)
        sampled = run_hardware_table(
            cfg["lx"], cfg["ly"], cfg["h_x"], spec,
            flip_site=cfg["flip_site"], shots=True,
            z_shots=z or cfg["z_shots"], x_shots=x or cfg["x_shots"],
            m_shots=m or cfg["m_shots"], seed=cfg["seed"],
        )
        out.write("shot_observables.json", _json_text(_observables_dict(sampled)))
    fixture = HardwareObservables(
        zz=math.nan, x=math.nan, e=cfg["fixture_e"],
        zz_prime=math.nan, x_prime=math.nan, e_prime=cfg["fixture_e_prime"],
        m=cfg["fixture_m"], m_prime=cfg["fixture_m_prime"],
        se_e=cfg["fixture_e_err"], se_e_prime=cfg["fixture_e_prime_err"],
        se_m=cfg["fixture_m_err"], se_m_prime=cfg["fixture_m_prime_err"],
    )
    fixture_summary = hardware_summary(fixture)
    fixture_summary.update(
        {
            "input_e": cfg["fixture_e"], "input_e_err": cfg["fixture_e_err"],
            "input_e_prime": cfg["fixture_e_prime"],
            "input_e_prime_err": cfg["fixture_e_prime_err"],
            "input_m": cfg["fixture_m"], "input_m_err": cfg["fixture_m_err"],
            "input_m_prime": cfg["fixture_m_prime"],
            "input_m_prime_err": cfg["fixture_m_prime_err"],
        }
    )
    out.write("fixture.json", _json_text(fixture_summary))
    if args.dump_circuit:
        from .models import torus as _torus

        lattice = _torus(cfg["lx"], cfg["ly"])
        fwd = hardware_circuit(spec, lattice)
        out.write("circuit.txt", fwd.to_text())
        out.write("mirror_circuit.txt", mirror_circuit(fwd, halve=True).to_text())
    return {}


def cmd_perturb_scaling(cfg: dict, out: OutputDir, args) -> dict:
    n = cfg["n"]
    h = ising_1d(n, cfg["j"], cfg["h_x"], cfg["h_z"], periodic=True)
    eps = cfg["epsilon"]
    if cfg["delta_kind"] == "z_field":
        delta = PauliSum(n, [single_site(n, i, "Z", eps) for i in range(n)])
    elif cfg["delta_kind"] == "z_site":
        delta = PauliSum(n, [single_site(n, cfg["delta_site"], "Z", eps)])
    else:
        raise ConfigError(f"unknown delta_kind {cfg['delta_kind']!r}")
    result = run_perturbation_scaling(
        h, delta, cfg["beta"], [float(t) for t in cfg["t_list"]],
        lambda_grid=[float(l) for l in cfg["lambda_list"]],
    )
    out.write(
        "scaling.csv",
        _csv(
            "lambda,t,delta_S_full,delta_S_half,second_order",
            [(r.lam, r.t, r.delta_s_full, r.delta_s_half, r.second_order)
             for r in result.rows],
        ),
    )
    out.write(
        "slopes.json",
        _json_text(
            {
                "slope": result.slope,
                "intercept": result.intercept,
                "lambda_metrics": {repr(k): v for k, v in result.lambda_metrics.items()},
            }
        ),
    )
    return {"slope": result.slope}


COMMANDS = {
    "quench-adiabatic": cmd_quench_adiabatic,
    "gibbs-compare": cmd_gibbs_compare,
    "noise-curves": cmd_noise_curves,
    "adiabaticity": cmd_adiabaticity,
    "hardware-table": cmd_hardware_table,
    "perturb-scaling": cmd_perturb_scaling,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adiatherm",
        description="Adiabatic thermal-state preparation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument(
            "--backend", choices=["dm", "sv", "traj"], default="dm",
            help="state backend where the command supports a choice",
        )
        p.add_argument("--trajectories", type=int, default=None, metavar="K")
        p.add_argument("--shots", type=int, default=None, metavar="N")
        p.add_argument("--dump-circuit", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.time()
    try:
        cfg = load_config(args.command, args.config, {"seed": args.seed})
        out = OutputDir(Path(args.out))
        extras = COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BackendCapError as exc:
        print(f"backend cap exceeded: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    manifest = {
        "command": args.command,
        "version": __version__,
        "seed": cfg["seed"],
        "backend": args.backend,
        "config": cfg,
        "outputs": sorted(out.files),
        "extras": extras,
        "wall_time_s": round(time.time() - started, 3),
        "timestamp_utc": datetime.now(timezone.utc).isoformat(),
    }
    out.write("manifest.json", _json_text(manifest))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
