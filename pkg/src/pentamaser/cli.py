"""Command-line front end: ``pentamaser <command> [options]``.

Every command loads the preset, overlays ``--config`` and the per-command
overrides, validates the result, computes everything in memory and only then
writes its files. Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from . import dynamics as mb
from . import fitting, metrics, pump
from .config import PRESETS, RunConfig, load_config
from .constants import dbm_to_watt
from .errors import NumericalError, PentamaserError, ValidationError
from .geometry import LabOrientation, field_in_molecular_frame, site_frames
from .spectra import rotation_pattern
from .spin import energy_levels, high_field_populations, transitions

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

FIT_MODELS = ("damped", "line", "rabi-line", "lorentzian", "double-lorentzian", "piecewise")
_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


# ---------------------------------------------------------------- output helpers


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def _json_text(payload: dict) -> str:
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _write_outputs(out_dir: Path, files: dict[str, str]) -> None:
    """Write all files via temporary names, then rename them into place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=".tmp-", suffix=".part")
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            staged.append((tmp, out_dir / name))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)


def _envelope(command: str, cfg: RunConfig, arguments: dict, result: dict) -> dict:
    return {
        "tool": "pentamaser",
        "version": __version__,
        "command": command,
        "arguments": arguments,
        "config": cfg.data,
        "result": result,
    }


# ---------------------------------------------------------------- commands


def cmd_levels(cfg: RunConfig, args) -> dict[str, str]:
    system = cfg.spin_system()
    if args.direction:
        direction = np.array(_AXES[args.direction])
        b1 = np.array(_AXES["y" if args.direction != "y" else "z"])
    else:
        frames = site_frames(cfg.mount())
        frame = frames[args.site - 1]
        direction = field_in_molecular_frame(LabOrientation(args.theta, 1.0), frame)
        t = math.radians(args.theta)
        b1 = frame.rotation @ np.array([-math.sin(t), math.cos(t), 0.0])
    levels = energy_levels(system, args.b0 * direction)
    pops = high_field_populations(system, levels)
    trans = transitions(levels, pops, b1, pairs=((0, 1), (1, 2), (0, 2)))
    level_rows = [(k, float(levels.eigenvalues[k]), float(pops[k])) for k in range(3)]
    trans_rows = [
        (t.lower_index, t.upper_index, t.frequency, t.matrix_element_sq, t.population_difference)
        for t in trans
    ]
    arguments = {"b0_mT": args.b0, "theta_deg": args.theta, "site": args.site, "direction": args.direction}
    result = {
        "field_vector_molecular_mT": (args.b0 * direction).tolist(),
        "levels": [dict(zip(("level", "energy_MHz", "population"), r)) for r in level_rows],
        "transitions": [
            dict(zip(("lower", "upper", "frequency_MHz", "matrix_element_sq", "population_difference"), r))
            for r in trans_rows
        ],
    }
    files = {"levels.json": _json_text(_envelope("levels", cfg, arguments, result))}
    if args.format == "csv":
        files["levels.csv"] = _csv_text(("level", "energy_MHz", "population"), level_rows)
        files["transitions.csv"] = _csv_text(
            ("lower", "upper", "frequency_MHz", "matrix_element_sq", "population_difference"), trans_rows
        )
    return files


def _theta_list(args) -> list[float]:
    if args.thetas is not None:
        items = [s for s in args.thetas.replace(" ", "").split(",") if s]
        try:
            return [float(s) for s in items]
        except ValueError as exc:
            raise ValidationError(f"bad theta list {args.thetas!r}") from exc
    if not args.theta_step > 0:
        raise ValidationError("theta-step must be positive")
    n = int(math.floor((args.theta_stop - args.theta_start) / args.theta_step + 1e-9)) + 1
    return [args.theta_start + k * args.theta_step for k in range(max(n, 0))]


def cmd_rotation_pattern(cfg: RunConfig, args) -> dict[str, str]:
    thetas = _theta_list(args)
    if not thetas:
        raise ValidationError("theta list must not be empty")
    pattern = rotation_pattern(cfg.spectrum_config(), cfg.spin_system(), cfg.mount(), thetas)
    files: dict[str, str] = {}
    manifest = []
    for theta, spec in pattern.items():
        name = f"spectrum_theta_{theta:07.2f}.csv"
        entry = {
            "theta_deg": theta,
            "lines": [
                {
                    "site": ln.site_id,
                    "transition": list(ln.transition),
                    "field_mT": ln.resonance_field,
                    "amplitude": ln.signed_amplitude,
                    "width_mT": ln.width_mT,
                    "emissive": ln.emissive,
                }
                for ln in spec.lines
            ],
        }
        if args.format == "csv":
            files[name] = _csv_text(("field_mT", "amplitude"), list(zip(spec.field, spec.amplitude)))
            entry["file"] = name
        else:
            entry["field_mT"] = spec.field
            entry["amplitude"] = spec.amplitude
        manifest.append(entry)
    files["manifest.json"] = _json_text(_envelope("rotation-pattern", cfg, {"thetas": thetas}, {"spectra": manifest}))
    return files


def _trajectory_csv(traj: mb.Trajectory) -> str:
    rows = zip(traj.t, traj.a.real, traj.a.imag, traj.s_minus.real, traj.s_minus.imag, traj.s_z, traj.photons, traj.p_out)
    return _csv_text(("t_us", "re_a", "im_a", "re_sminus", "im_sminus", "sz", "photons", "p_out_W"), list(rows))


def _regimes(params: mb.MaxwellBlochParams, g_value: float) -> dict:
    """Threshold and regime for the coupling read as rad/s and as Hz."""
    out = {}
    for label, g in (("angular", g_value), ("hz", 2 * math.pi * g_value)):
        n_th = mb.threshold_inversion(replace(params, g=g))
        out[label] = {
            "g_rad_per_s": g,
            "threshold_inversion": n_th,
            "regime": "oscillator" if params.N0 > n_th else "amplifier",
        }
    return out


def cmd_amplify(cfg: RunConfig, args) -> dict[str, str]:
    d = cfg["dynamics"]
    params = cfg.amplifier_params()
    traj = mb.integrate(params, float(d["t_span"]), rtol=float(d["rtol"]), atol=float(d["atol"]), n_points=int(d["n_points"]))
    p_in = dbm_to_watt(float(d["p_in_dbm"]))
    k = params.coupling_k
    trace = mb.amplifier_gain_trace(traj, p_in, float(d["threshold_db"]))
    onoff = mb.amplifier_gain_trace(traj, p_in, float(d["threshold_db"]), reference_power=p_in * k / (1 + k))
    result = {
        "p_in_W": p_in,
        "peak_gain_db": trace.peak_db,
        "plateau_gain_db": trace.plateau_db,
        "duration_us": trace.duration_us,
        "peak_delay_us": float(traj.t[int(np.argmax(traj.p_out))]),
        "onoff_peak_gain_db": onoff.peak_db,
        "onoff_plateau_gain_db": onoff.plateau_db,
        "onoff_duration_us": onoff.duration_us,
        "coupling_interpretations": _regimes(params, float(cfg["dynamics"]["g"])),
        "integrator": {key: traj.metadata[key] for key in ("method", "rtol", "atol", "nfev")},
    }
    files = {"amplify.json": _json_text(_envelope("amplify", cfg, {}, result))}
    if args.format == "csv":
        files["trajectory.csv"] = _trajectory_csv(traj)
    else:
        files["amplify.json"] = _json_text(
            _envelope("amplify", cfg, {}, {**result, "trajectory": _trajectory_dict(traj)})
        )
    return files


def _trajectory_dict(traj: mb.Trajectory) -> dict:
    return {
        "t_us": traj.t,
        "re_a": traj.a.real,
        "im_a": traj.a.imag,
        "re_sminus": traj.s_minus.real,
        "im_sminus": traj.s_minus.imag,
        "sz": traj.s_z,
        "photons": traj.photons,
        "p_out_W": traj.p_out,
    }


def cmd_oscillate(cfg: RunConfig, args) -> dict[str, str]:
    d = cfg["dynamics"]
    overrides = {"QL": args.ql} if args.ql is not None else {}
    params = cfg.oscillator_params(**overrides)
    if args.n0 is not None:
        params = replace(params, N0=args.n0)
    t_span = args.t_span if args.t_span is not None else float(d["t_span"])
    traj = mb.oscillator_burst(
        params, t_span, args.seed_coherence, rtol=float(d["rtol"]), atol=float(d["atol"]), n_points=int(d["n_points"])
    )
    meta = traj.metadata
    result = {
        "burst": meta["burst"],
        "seed_coherence": meta["seed_coherence"],
        "seed_photons": meta["seed_photons"],
        "peak_photons": meta["peak_photons"],
        "peak_delay_us": meta["peak_delay_us"],
        "peak_power_W": meta["peak_power_W"],
        "energy_J": meta["energy_J"],
        "N0": params.N0,
        "QL": params.omega_c / params.kappa_c,
        "threshold_inversion": mb.threshold_inversion(params),
        "coupling_interpretations": _regimes(params, float(cfg["dynamics"]["g"])),
    }
    arguments = {"ql": args.ql, "n0": args.n0, "t_span_us": t_span, "seed_coherence": args.seed_coherence}
    if args.format == "csv":
        return {
            "oscillate.json": _json_text(_envelope("oscillate", cfg, arguments, result)),
            "trajectory.csv": _trajectory_csv(traj),
        }
    return {"oscillate.json": _json_text(_envelope("oscillate", cfg, arguments, {**result, "trajectory": _trajectory_dict(traj)}))}


def cmd_metrics(cfg: RunConfig, args) -> dict[str, str]:
    res, med = cfg.resonator(), cfg.gain_medium()
    m = cfg["metrics"]
    gamma_e = cfg.spin_system().gamma_e_over_2pi
    QL_rise = float(cfg["resonator"]["QL_rise"])
    hot = metrics.evaluate(res, med, gamma_e=gamma_e, T_bath=float(m["T_bath"]), QL_rise=QL_rise)
    cold_T, cold_nf = metrics.noise_temperature(hot.T_spin, hot.Qm, res.Q0, float(m["T_bath_cold"]))

    n_total = pump.total_triplet_yield(cfg.pump_pulse(), cfg.optical_medium())
    pol = pump.two_level_polarization(med.p_upper, med.p_lower)
    delta_n = pump.inverted_spins(n_total, pol)
    R, delta_n_prime = pump.linewidth_calibration(
        delta_n, float(cfg["medium"]["cavity_linewidth"]), float(cfg["medium"]["spin_linewidth"])
    )
    result = {
        **hot.to_dict(),
        "T_bath": float(m["T_bath"]),
        "T_noise_cold": cold_T,
        "noise_figure_cold_db": cold_nf,
        "T_bath_cold": float(m["T_bath_cold"]),
        "QL": res.QL,
        "QL_rise": QL_rise,
        "inversion_chain": {
            "N_total": n_total,
            "polarization": pol,
            "delta_N": delta_n,
            "linewidth_ratio": R,
            "delta_N_prime": delta_n_prime,
            "delta_n_per_m3": pump.inverted_density(delta_n_prime, med.V_crystal),
        },
        "inputs": {
            "resonator": {"f_c": res.f_c, "Q0": res.Q0, "Qe": res.Qe, "V_mode": res.V_mode},
            "medium": {
                "delta_n": med.delta_n,
                "sigma_sq": med.sigma_sq,
                "eta": med.eta,
                "T2_us": med.T2,
                "V_crystal": med.V_crystal,
                "p_upper": med.p_upper,
                "p_lower": med.p_lower,
            },
            "gamma_e_over_2pi": gamma_e,
        },
    }
    return {"metrics.json": _json_text(_envelope("metrics", cfg, {}, result))}


def cmd_pump_profile(cfg: RunConfig, args) -> dict[str, str]:
    profile = pump.depth_profile(cfg.pump_pulse(), cfg.optical_medium())
    result = {"N_total": profile.total(), "illuminated_area_cm2": profile.illuminated_area}
    if args.format == "csv":
        return {
            "pump_profile.json": _json_text(_envelope("pump-profile", cfg, {}, result)),
            "pump_profile.csv": _csv_text(
                ("depth_mm", "triplet_density_per_m3"), list(zip(profile.depth, profile.density))
            ),
        }
    result.update(depth_mm=profile.depth, triplet_density_per_m3=profile.density)
    return {"pump_profile.json": _json_text(_envelope("pump-profile", cfg, {}, result))}


def _read_two_columns(path: str) -> tuple[np.ndarray, np.ndarray]:
    try:
        with open(path, encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    data = []
    for i, row in enumerate(rows):
        try:
            data.append((float(row[0]), float(row[1])))
        except (ValueError, IndexError):
            if i == 0:
                continue  # header
            raise ValidationError(f"{path}: row {i + 1} is not two numbers") from None
    if not data:
        raise ValidationError(f"{path}: no data rows")
    arr = np.asarray(data)
    return arr[:, 0], arr[:, 1]


def synthetic_data(model: str, snr: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, dict]:
    """Reference datasets for each fit model; noise σ = signal scale / ``snr``."""
    if model == "damped":
        truth = {"A": 1.0, "gamma": 0.2, "omega": 2 * math.pi * 0.8, "phi": 0.3, "offset": 0.1}
        x = np.linspace(0.0, 10.0, 1000)
        y = fitting.damped_cosine(x, **truth)
        scale = truth["A"]
    elif model in ("line", "rabi-line"):
        T2, eps = 4.24, 0.05
        truth = {"slope": eps, "intercept": 1.0 / (2 * T2)}
        x = np.linspace(0.2, 2.0, 12)
        y = truth["slope"] * x + truth["intercept"]
        scale = float(np.ptp(y))
    elif model == "lorentzian":
        truth = {"center": 0.0, "fwhm": 0.34, "amplitude": 14.8, "offset": 0.0}
        x = np.linspace(-2.0, 2.0, 401)
        y = fitting.lorentzian(x, **truth)
        scale = truth["amplitude"]
    elif model == "double-lorentzian":
        truth = {"center1": -60.0, "fwhm1": 10.0, "amplitude1": 8.0, "center2": -40.0, "fwhm2": 12.0, "amplitude2": 6.0, "offset": 0.5}
        x = np.linspace(-90.0, -10.0, 161)
        y = fitting.double_lorentzian(x, *truth.values())
        scale = truth["amplitude1"]
    elif model == "piecewise":
        truth = {"breakpoint": 2.0, "slope1": 0.0, "slope2": 5.0, "intercept": 0.0}
        x = np.linspace(0.0, 5.0, 401)
        y = fitting.hinge(x, *truth.values())
        scale = float(np.ptp(y))
    else:
        raise ValidationError(f"unknown model {model!r}")
    if snr > 0 and math.isfinite(snr):
        y = y + rng.normal(0.0, scale / snr, size=y.shape)
    return x, y, truth


def cmd_fit(cfg: RunConfig, args) -> dict[str, str]:
    f = cfg["fitting"]
    truth = None
    if args.input:
        x, y = _read_two_columns(args.input)
    else:
        rng = np.random.default_rng(int(cfg["seed"]))
        x, y, truth = synthetic_data(args.model, float(f["snr"]), rng)
    restarts = int(f["restarts"])
    runners: dict[str, Callable] = {
        "damped": lambda: fitting.fit_damped_oscillation(x, y, restarts=restarts),
        "line": lambda: fitting.fit_line(x, y),
        "rabi-line": lambda: fitting.fit_rabi_damping(x, y),
        "lorentzian": lambda: fitting.fit_lorentzian(x, y, restarts=restarts),
        "double-lorentzian": lambda: fitting.fit_double_lorentzian(x, y, restarts=restarts),
        "piecewise": lambda: fitting.fit_piecewise_linear(x, y, f_ratio=float(f["f_ratio"])),
    }
    res = runners[args.model]()
    result = {"model": args.model, "fit": res.to_dict(), "source": args.input or "synthetic"}
    if truth is not None:
        result["truth"] = truth
    files = {"fit.json": _json_text(_envelope("fit", cfg, {"model": args.model, "input": args.input}, result))}
    if args.format == "csv" and truth is not None:
        files["fit_data.csv"] = _csv_text(("x", "y"), list(zip(x, y)))
    return files


COMMANDS: dict[str, Callable[[RunConfig, argparse.Namespace], dict[str, str]]] = {
    "levels": cmd_levels,
    "rotation-pattern": cmd_rotation_pattern,
    "amplify": cmd_amplify,
    "oscillate": cmd_oscillate,
    "metrics": cmd_metrics,
    "pump-profile": cmd_pump_profile,
    "fit": cmd_fit,
}


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file overlaid on the preset")
    common.add_argument("--preset", default="reference", choices=PRESETS, help="base preset (default: reference)")
    common.add_argument("--out", help="output directory (default: output_dir from the config)")
    common.add_argument("--seed", type=int, help="random seed for synthetic data")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="data file format")

    parser = argparse.ArgumentParser(prog="pentamaser", description="Pentacene maser simulation toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("levels", parents=[common], help="energy levels and transitions at one field")
    p.add_argument("--b0", type=float, default=307.0, help="field magnitude in mT")
    p.add_argument("--theta", type=float, default=0.0, help="holder rotation angle in degrees")
    p.add_argument("--site", type=int, choices=(1, 2), default=1)
    p.add_argument("--direction", choices=tuple(_AXES), help="field along a molecular axis instead")

    p = sub.add_parser("rotation-pattern", parents=[common], help="trEPR spectra over holder angles")
    p.add_argument("--thetas", help="comma-separated angles in degrees (overrides the range)")
    p.add_argument("--theta-start", type=float, default=0.0)
    p.add_argument("--theta-stop", type=float, default=180.0)
    p.add_argument("--theta-step", type=float, default=10.0)

    p = sub.add_parser("amplify", parents=[common], help="driven amplifier transient")
    p.add_argument("--p-in-dbm", type=float)
    p.add_argument("--ql", type=float)
    p.add_argument("--n0", type=float)
    p.add_argument("--t-span", type=float, help="integration window in µs")
    p.add_argument("--detuning-mhz", type=float)

    p = sub.add_parser("oscillate", parents=[common], help="free-running oscillator burst")
    p.add_argument("--ql", type=float, help="loaded Q (default: resonator.oscillator_QL)")
    p.add_argument("--n0", type=float)
    p.add_argument("--t-span", type=float, help="integration window in µs")
    p.add_argument("--seed-coherence", type=float, help="initial |S-| (default sqrt(N0))")

    p = sub.add_parser("metrics", parents=[common], help="closed-form figures of merit")
    p.add_argument("--delta-n", type=float, help="inverted spin density in m^-3")

    p = sub.add_parser("pump-profile", parents=[common], help="triplet density versus depth")
    p.add_argument("--fluence", type=float, help="pump fluence in mJ/cm^2")

    p = sub.add_parser("fit", parents=[common], help="least-squares fit of two-column CSV data")
    p.add_argument("model", choices=FIT_MODELS)
    p.add_argument("--input", help="two-column CSV (x, y); synthetic data if omitted")
    return parser


def _config_overrides(args) -> dict:
    o: dict[str, dict] = {}

    def put(block, key, value):
        if value is not None:
            o.setdefault(block, {})[key] = value

    put("dynamics", "p_in_dbm", getattr(args, "p_in_dbm", None))
    if args.command == "amplify":
        put("dynamics", "QL", args.ql)
        put("dynamics", "N0", args.n0)
        put("dynamics", "t_span", args.t_span)
        put("dynamics", "detuning_MHz", args.detuning_mhz)
    put("medium", "delta_n", getattr(args, "delta_n", None))
    put("pump", "fluence", getattr(args, "fluence", None))
    if args.seed is not None:
        o["seed"] = args.seed
    if args.out is not None:
        o["output_dir"] = args.out
    return o


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config, args.preset).with_overrides(_config_overrides(args))
        files = COMMANDS[args.command](cfg, args)
        _write_outputs(Path(cfg["output_dir"]), files)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PentamaserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    for name in sorted(files):
        print(Path(cfg["output_dir"]) / name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
