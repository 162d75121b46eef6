"""Command-line entry point: reproducible runs from JSON configs.

Commands:

* ``simulate``  -- transient run from a scenario + model card
* ``sweep-fcm`` -- family of chirped-laser spectra over bias or heater power
* ``fit``       -- full parameter extraction from a measurement manifest
* ``eye``       -- eye diagram and metrics from a trace CSV
* ``bench``     -- adaptive vs fixed-step baseline comparison

All structured inputs and outputs are JSON, all array data CSV.  Exit
codes: 0 success, 2 input/schema error, 3 numerical/solver error,
4 internal error.  Output files are written atomically (temp + rename) so
interrupted runs never leave half-written results.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis, extraction
from .electrical import ElectricalParams, read_s11_csv
from .errors import InputError, NumericalError, ResomodError
from .model import (ResonatorParams, SCHEMA_VERSION, load_model_card,
                    model_card_dict)
from .solver import SolverConfig, Trace, integrate_adaptive, integrate_fixed_baseline
from .stimulus import (HeaterDrive, Stimulus, chirp_laser,
                       constant_drive, cw_laser, nrz_waveform,
                       offset_frequency, pam4_levels, pam4_symbols,
                       pam4_waveform, prbs_bits)
from .thermal import ThermalParams

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_INTERNAL = 4

# chirp duration default: dwell this many photon lifetimes per linewidth,
# which keeps sweep distortion near 0.25% of the dip depth
FCM_DWELL_DEFAULT = 240.0


class SchemaError(InputError):
    pass


# -- small JSON-schema helpers ---------------------------------------------------

_REQUIRED = object()


def _get(cfg: dict, path: str, typ, default=_REQUIRED, check=None,
         what: str = ""):
    node = cfg
    for key in path.split("."):
        if not isinstance(node, dict) or key not in node:
            if default is not _REQUIRED:
                return default
            raise SchemaError(f"missing required field '{path}'")
        node = node[key]
    if typ is float and isinstance(node, (int, float)) and not isinstance(node, bool):
        node = float(node)
    elif typ is int and isinstance(node, (int, float)) and float(node).is_integer() \
            and not isinstance(node, bool):
        node = int(node)
    elif not isinstance(node, typ):
        raise SchemaError(f"field '{path}': expected {typ.__name__}, "
                          f"got {type(node).__name__}")
    if check is not None and not check(node):
        raise SchemaError(f"field '{path}': invalid value {node!r}"
                          + (f" ({what})" if what else ""))
    return node


def _load_json(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise SchemaError(f"file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{p}: not valid JSON ({exc})") from None


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_trace_csv(path: Path, sample: dict) -> None:
    lines = [Trace.CSV_HEADER]
    for i in range(sample["t"].size):
        vals = (sample["t"][i], sample["v_m"][i],
                sample["ein"][i].real, sample["ein"][i].imag,
                sample["eout"][i].real, sample["eout"][i].imag,
                sample["p_out"][i], sample["dlambda"][i])
        lines.append(",".join(repr(float(v)) for v in vals))
    _atomic_write(path, "\n".join(lines) + "\n")


# -- scenario handling --------------------------------------------------------------

def load_scenario(path) -> dict:
    cfg = _load_json(path)
    _get(cfg, "schema_version", int, check=lambda v: v == SCHEMA_VERSION,
         what=f"supported version is {SCHEMA_VERSION}")
    _get(cfg, "data_rate", float, check=lambda v: v > 0, what="must be > 0")
    _get(cfg, "format", str, check=lambda v: v in ("nrz", "pam4"),
         what="must be 'nrz' or 'pam4'")
    _get(cfg, "vpp", float, check=lambda v: v > 0, what="must be > 0")
    _get(cfg, "v_bias", float)
    _get(cfg, "prbs_order", int, check=lambda v: v in (7, 9, 13, 15, 31),
         what="must be one of 7, 9, 13, 15, 31")
    _get(cfg, "seed", int, check=lambda v: v != 0, what="must be nonzero")
    _get(cfg, "n_ui", int, check=lambda v: v >= 0, what="must be >= 0")
    _get(cfg, "t_edge_ui", float, default=0.25,
         check=lambda v: 0 < v < 1, what="must be in (0, 1)")
    _get(cfg, "laser.power_mW", float, check=lambda v: v > 0, what="must be > 0")
    if "lambda_L_nm" not in cfg.get("laser", {}) and \
            "offset_pm" not in cfg.get("laser", {}):
        raise SchemaError("field 'laser': needs 'lambda_L_nm' or 'offset_pm'")
    return cfg


def build_run(cfg: dict, resonator: ResonatorParams,
              thermal: ThermalParams | None, seed_override: int | None = None):
    """Scenario dict -> (stimulus, bits, symbol levels, ui)."""
    ui = 1.0 / _get(cfg, "data_rate", float)
    fmt = cfg["format"]
    n_ui = cfg["n_ui"]
    seed = seed_override if seed_override is not None else cfg["seed"]
    vpp = cfg["vpp"]
    v_bias = cfg["v_bias"]
    t_edge = _get(cfg, "t_edge_ui", float, default=0.25) * ui

    lam_ref = resonator.lambda_ref
    if "lambda_ref_nm" in cfg.get("laser", {}):
        lam_ref = _get(cfg, "laser.lambda_ref_nm", float) * 1e-9
    if "lambda_L_nm" in cfg.get("laser", {}):
        lam_l = _get(cfg, "laser.lambda_L_nm", float) * 1e-9
    else:
        offset = _get(cfg, "laser.offset_pm", float) * 1e-12
        lam_l = resonator.resonance_wavelength(0.0) + offset
    power = _get(cfg, "laser.power_mW", float) * 1e-3
    laser = cw_laser(power, lam_l, lam_ref)

    n_bits = max(n_ui, 1) * (2 if fmt == "pam4" else 1)
    bits = prbs_bits(cfg["prbs_order"], seed, n_bits)
    if fmt == "nrz":
        drive = nrz_waveform(bits, ui, v_bias - vpp / 2, v_bias + vpp / 2, t_edge)
        symbols = bits
    else:
        levels = pam4_levels(vpp, v_bias)
        drive = pam4_waveform(bits, ui, levels, t_edge)
        symbols = pam4_symbols(bits)

    p_h = 0.0
    if "heater" in cfg:
        if "mW" in cfg["heater"]:
            p_h = _get(cfg, "heater.mW", float, check=lambda v: v >= 0) * 1e-3
        elif "v" in cfg["heater"]:
            if thermal is None:
                raise SchemaError("field 'heater.v': model card has no thermal "
                                  "section to convert voltage to power")
            p_h = thermal.heater_power(_get(cfg, "heater.v", float)).p_h
    stim = Stimulus(voltage_drive=drive, laser=laser, t_end=n_ui * ui,
                    heater_drive=HeaterDrive.constant(p_h))
    return stim, bits, symbols, ui, lam_ref


def solver_config_from(cfg: dict, ui: float, **overrides) -> SolverConfig:
    sol = cfg.get("solver", {})
    kw = dict(
        rel_tol=_get(cfg, "solver.rel_tol", float, default=1e-6),
        abs_tol_field=_get(cfg, "solver.abs_tol_field", float, default=1e-9),
        abs_tol_voltage=_get(cfg, "solver.abs_tol_voltage", float, default=1e-9),
        max_step=_get(cfg, "solver.max_step_ui", float, default=0.05) * ui,
        method=_get(cfg, "solver.method", str, default="exprb32"),
    )
    kw.update(overrides)
    return SolverConfig(**kw)


def _load_card(path):
    p = Path(path)
    if not p.exists():
        raise SchemaError(f"model card not found: {p}")
    try:
        return load_model_card(p)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{p}: bad model card ({exc})") from None


# -- commands ------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = load_scenario(args.config)
    resonator, electrical, thermal = _load_card(args.model)
    if "lambda_ref_nm" in cfg.get("laser", {}):
        resonator = replace(resonator,
                            lambda_ref=_get(cfg, "laser.lambda_ref_nm", float) * 1e-9)
    if electrical is None:
        raise SchemaError("model card has no electrical section; "
                          "simulate needs the full card")
    stim, bits, symbols, ui, _ = build_run(cfg, resonator, thermal, args.seed)
    if args.dry_run:
        print("dry-run: scenario and model card are valid")
        return EXIT_OK
    samples_per_ui = _get(cfg, "solver.samples_per_ui", int, default=64)
    sol = solver_config_from(cfg, ui)
    trace = integrate_adaptive(resonator, electrical, thermal, sol, stim)
    out = Path(args.out)
    if cfg["n_ui"] == 0:
        print("warning: n_ui = 0 produces an empty trace", file=sys.stderr)
        grid = np.array([0.0])
    else:
        grid = np.arange(0.0, stim.t_end, ui / samples_per_ui)
    sample = trace.resample(grid)
    trace_path = out / "trace.csv"
    _write_trace_csv(trace_path, sample)
    digest = hashlib.sha256(trace_path.read_bytes()).hexdigest()
    summary = {
        "schema_version": SCHEMA_VERSION,
        "stats": trace.stats,
        "trace_csv_sha256": digest,
        "n_samples": int(grid.size),
        "metrics": {
            "p_out_max_W": float(np.max(sample["p_out"])),
            "p_out_min_W": float(np.min(sample["p_out"])),
            "p_out_mean_W": float(np.mean(sample["p_out"])),
        },
        "final_state": {
            "t_s": float(trace.t[-1]),
            "v_m_V": float(trace.v_m[-1]),
            "dlambda_m": float(trace.dlambda[-1]),
            "p_out_W": float(trace.p_out[-1]),
        },
    }
    _write_json(out / "summary.json", summary)
    return EXIT_OK


def _fcm_point(resonator_d, electrical_d, thermal_d, point) -> tuple[str, list, list]:
    """Worker for one sweep point; reconstructed from dicts for pickling."""
    resonator = ResonatorParams.from_dict(resonator_d)
    electrical = ElectricalParams.from_dict(electrical_d) if electrical_d else None
    thermal = ThermalParams.from_dict(thermal_d) if thermal_d else None
    import warnings as _warnings

    bias = point["bias_V"]
    p_h = point["heater_W"]
    lam_center = resonator.resonance_wavelength(bias) + (
        thermal.static_shift(p_h) if thermal else 0.0)
    # re-center the analytic frame on this sweep point so the chirp offsets
    # stay small; the output spectrum is frame-invariant
    resonator = replace(resonator, lambda_ref=lam_center)
    span = point["span_m"]
    f_hi = offset_frequency(lam_center - span / 2, resonator.lambda_ref)
    f_lo = offset_frequency(lam_center + span / 2, resonator.lambda_ref)
    d = resonator.decay_times(bias)
    linewidth = 1.0 / (math.pi * d.tau)
    duration = point.get("duration_s")
    if duration is None:
        rate = linewidth / (FCM_DWELL_DEFAULT * d.tau)
        duration = abs(f_hi - f_lo) / rate
    chirp = chirp_laser(point["power_W"], f_hi, f_lo, duration)
    stim = Stimulus(voltage_drive=constant_drive(bias), laser=chirp,
                    t_end=duration, heater_drive=HeaterDrive.constant(p_h))
    sol = SolverConfig(rel_tol=point.get("rel_tol", 1e-7))
    with _warnings.catch_warnings():
        _warnings.simplefilter("ignore")
        trace = integrate_adaptive(resonator, electrical, thermal, sol, stim)
        lam, t = analysis.fcm_spectrum(trace, chirp, resonator.lambda_ref,
                                       tau_max=d.tau)
    return point["label"], lam.tolist(), t.tolist()


def cmd_sweep_fcm(args) -> int:
    cfg = _load_json(args.config)
    _get(cfg, "schema_version", int, check=lambda v: v == SCHEMA_VERSION)
    mode = _get(cfg, "mode", str, check=lambda v: v in ("bias", "heater"),
                what="must be 'bias' or 'heater'")
    values = _get(cfg, "values", list)
    if not values:
        raise SchemaError("field 'values': must not be empty")
    span = _get(cfg, "span_pm", float, check=lambda v: v > 0) * 1e-12
    power = _get(cfg, "laser_power_mW", float, default=1.0) * 1e-3
    duration = cfg.get("duration_s")
    resonator, electrical, thermal = _load_card(args.model)
    if electrical is None:
        raise SchemaError("model card has no electrical section")

    points = []
    for v in values:
        v = float(v)
        if mode == "bias":
            bias, p_h = v, _get(cfg, "heater_mW", float, default=0.0) * 1e-3
            label = f"bias_{bias:+.3f}V"
        else:
            bias = _get(cfg, "bias_V", float, default=0.0)
            p_h = v * 1e-3
            label = f"heater_{v:.3f}mW"
        points.append({"bias_V": bias, "heater_W": p_h, "span_m": span,
                       "power_W": power, "duration_s": duration,
                       "rel_tol": _get(cfg, "rel_tol", float, default=1e-7),
                       "label": label})
    if args.dry_run:
        print(f"dry-run: {len(points)} sweep points validated")
        return EXIT_OK

    res_d = resonator.to_dict()
    el_d = electrical.to_dict()
    th_d = thermal.to_dict() if thermal else None
    out = Path(args.out)
    results = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_fcm_point, res_d, el_d, th_d, p)
                       for p in points]
            results = [f.result() for f in futures]
    else:
        results = [_fcm_point(res_d, el_d, th_d, p) for p in points]

    files = []
    for (label, lam, t), point in zip(results, points):
        fname = f"spectrum_{label}.csv"
        lines = ["lambda_nm,transmission"]
        for li, ti in zip(lam, t):
            lines.append(f"{float(li) * 1e9!r},{float(ti)!r}")
        _atomic_write(out / fname, "\n".join(lines) + "\n")
        files.append(fname)
    _write_json(out / "sweep_summary.json", {
        "schema_version": SCHEMA_VERSION, "mode": mode,
        "values": [float(v) for v in values], "files": files,
    })
    return EXIT_OK


def _fit_sweep_worker(sweep, coupling):
    """Per-bias worker: extract one sweep's resonance record."""
    return extraction.extract_per_bias([sweep], coupling=coupling)[0]


def cmd_fit(args) -> int:
    cfg = _load_json(args.config)
    _get(cfg, "schema_version", int, check=lambda v: v == SCHEMA_VERSION)
    sweeps_cfg = _get(cfg, "transmission_sweeps", list)
    if not sweeps_cfg:
        raise SchemaError("field 'transmission_sweeps': must not be empty")
    base_dir = Path(args.config).parent
    coupling = _get(cfg, "coupling", str, default="over",
                    check=lambda v: v in ("over", "under"))
    lambda0_degree = _get(cfg, "lambda0_degree", int, default=2,
                          check=lambda v: v in (1, 2))
    if args.dry_run:
        for i, s in enumerate(sweeps_cfg):
            p = base_dir / _get(s, "path", str)
            if not p.exists():
                raise SchemaError(f"transmission_sweeps[{i}].path: "
                                  f"file not found: {p}")
        print("dry-run: manifest validated")
        return EXIT_OK

    sweeps = []
    for i, s in enumerate(sweeps_cfg):
        path = base_dir / _get(s, "path", str)
        if not path.exists():
            raise SchemaError(f"transmission_sweeps[{i}].path: file not found: {path}")
        sweeps.append(extraction.read_sweep_csv(
            path, bias=_get(s, "bias_V", float),
            heater_power=_get(s, "heater_mW", float, default=0.0) * 1e-3))

    warnings_out = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_fit_sweep_worker, sw, coupling)
                       for sw in sweeps]
            records = [f.result() for f in futures]
    else:
        records = extraction.extract_per_bias(sweeps, coupling=coupling)
    bias_recs = [r for r in records if r["heater_W"] == 0.0]
    heat_recs = [r for r in records if r["heater_W"] > 0.0]
    polys = extraction.fit_voltage_polys(
        [(r["bias_V"], r["lambda0_m"], r["tau_c_s"], r["tau_l_s"])
         for r in bias_recs], lambda0_degree=lambda0_degree)

    gamma = None
    if heat_recs:
        heater_bias = heat_recs[0]["bias_V"]
        ref = [r for r in bias_recs if r["bias_V"] == heater_bias]
        pts = [(r["heater_W"], r["lambda0_m"]) for r in heat_recs]
        if ref:
            pts.append((0.0, ref[0]["lambda0_m"]))
        gamma = extraction.fit_gamma(pts)
    else:
        warnings_out.append("no heater sweeps in manifest: card emitted "
                            "without heater efficiency")
        print("warning: " + warnings_out[-1], file=sys.stderr)

    biases = sorted({r["bias_V"] for r in bias_recs})
    resonator = ResonatorParams(
        lambda_ref=polys["lambda0"]["coeffs"][0],
        lambda0_coeffs=tuple(polys["lambda0"]["coeffs"]),
        tau_c_coeffs=tuple(polys["tau_c"]["coeffs"]),
        tau_l_coeffs=tuple(polys["tau_l"]["coeffs"]),
        v_range=(biases[0], biases[-1]),
        gamma=gamma,
    )

    report = {
        "schema_version": SCHEMA_VERSION,
        "per_bias": records,
        "voltage_polynomials": polys,
        "gamma_m_per_W": gamma,
        "warnings": warnings_out,
    }

    electrical = None
    thermal = None
    cv_cfg = cfg.get("cv_points")
    if cv_cfg:
        pts = [(_get(p, "bias_V", float), _get(p, "cj_fF", float) * 1e-15)
               for p in cv_cfg]
        cj0, vbi, mj = extraction.fit_cv(pts)
        report["cv_fit"] = {"Cj0_F": cj0, "Vbi_V": vbi, "mj": mj}
        if "s11" in cfg:
            s11_path = base_dir / _get(cfg, "s11.path", str)
            if not s11_path.exists():
                raise SchemaError(f"s11.path: file not found: {s11_path}")
            f, s11_vals = read_s11_csv(s11_path)
            z0 = _get(cfg, "z0_ohm", float, default=50.0)
            rh = cfg.get("rh_ohm")
            init = ElectricalParams(Cj0=cj0, Vbi=vbi, mj=mj, Rs=100.0,
                                    Cox=50e-15, RSi=1e3, Cpad=30e-15, Z0=z0,
                                    Rh=float(rh) if rh else None)
            electrical, s11_report = extraction.fit_s11(
                f, s11_vals, init, v_bias=_get(cfg, "s11.bias_V", float, default=0.0))
            report["s11_fit"] = s11_report
        else:
            warnings_out.append("no S11 data: electrical card limited to the "
                                "C-V junction parameters")
            print("warning: " + warnings_out[-1], file=sys.stderr)
    else:
        warnings_out.append("no C-V points: card emitted without an "
                            "electrical section")
        print("warning: " + warnings_out[-1], file=sys.stderr)

    if gamma is not None and cfg.get("rh_ohm") is not None:
        thermal = ThermalParams(gamma=gamma, Rh=float(cfg["rh_ohm"]),
                                tau_h=float(cfg.get("tau_h_s", 15e-6)),
                                dynamic=False)

    out = Path(args.out)
    _write_json(out / "model_card.json",
                model_card_dict(resonator, electrical, thermal))
    _write_json(out / "fit_report.json", report)
    return EXIT_OK


def cmd_eye(args) -> int:
    cfg = _load_json(args.config)
    _get(cfg, "schema_version", int, check=lambda v: v == SCHEMA_VERSION)
    ui = 1.0 / _get(cfg, "data_rate", float, check=lambda v: v > 0)
    skip = _get(cfg, "skip_ui", int, default=10)
    n_t = _get(cfg, "n_t", int, default=analysis.DEFAULT_BINS)
    n_p = _get(cfg, "n_p", int, default=analysis.DEFAULT_BINS)
    trace_path = Path(args.trace)
    if not trace_path.exists():
        raise SchemaError(f"trace file not found: {trace_path}")
    if args.dry_run:
        print("dry-run: eye spec validated")
        return EXIT_OK
    trace = Trace.from_csv(trace_path)
    eye = analysis.fold_eye(trace, ui, skip=skip, n_t=n_t, n_p=n_p)
    out = Path(args.out)

    lines = ["t_s," + ",".join(f"bin_{i:03d}" for i in range(n_p))]
    t_centers = 0.5 * (eye.t_edges[:-1] + eye.t_edges[1:])
    for i in range(n_t):
        row = ",".join(str(int(c)) for c in eye.grid[i])
        lines.append(f"{float(t_centers[i])!r},{row}")
    _atomic_write(out / "eye.csv", "\n".join(lines) + "\n")

    metrics = {"schema_version": SCHEMA_VERSION,
               "ui_s": ui, "n_samples": eye.n_samples,
               "p_edges_W": eye.p_edges.tolist(),
               "t_edges_s": eye.t_edges.tolist()}
    if "pattern" in cfg:
        fmt = _get(cfg, "pattern.format", str, default="nrz",
                   check=lambda v: v in ("nrz", "pam4"))
        order = _get(cfg, "pattern.prbs_order", int,
                     check=lambda v: v in (7, 9, 13, 15, 31))
        seed = _get(cfg, "pattern.seed", int, check=lambda v: v != 0)
        n_ui = int(trace.t_end / ui + 0.5)
        bits = prbs_bits(order, seed, n_ui * (2 if fmt == "pam4" else 1))
        if fmt == "nrz":
            metrics["eye_metrics"] = analysis.eye_metrics(trace, bits, ui,
                                                          skip=skip)
        else:
            metrics["pam4_metrics"] = analysis.pam4_level_metrics(
                trace, pam4_symbols(bits), ui, skip=skip)
    _write_json(out / "eye_metrics.json", metrics)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = load_scenario(args.config)
    resonator, electrical, thermal = _load_card(args.model)
    if electrical is None:
        raise SchemaError("model card has no electrical section")
    stim, bits, symbols, ui, _ = build_run(cfg, resonator, thermal, args.seed)
    if args.dry_run:
        print("dry-run: bench inputs validated")
        return EXIT_OK
    sol = solver_config_from(cfg, ui,
                             rel_tol=_get(cfg, "solver.rel_tol", float,
                                          default=2e-4))
    adaptive = integrate_adaptive(resonator, electrical, thermal, sol, stim)
    store_every = max(1, int(round(ui / 64 / args.baseline_dt)))
    baseline = integrate_fixed_baseline(resonator, electrical, thermal,
                                        args.baseline_dt, stim,
                                        nonlinear_cj=args.nonlinear_cj,
                                        store_every=store_every)
    reference = None
    if args.reference_dt:
        store_ref = max(1, int(round(ui / 64 / args.reference_dt)))
        reference = integrate_fixed_baseline(resonator, electrical, thermal,
                                             args.reference_dt, stim,
                                             nonlinear_cj=True,
                                             store_every=store_ref)
    report = analysis.benchmark_report(adaptive, baseline, reference,
                                       t_skip=2 * ui)
    report["schema_version"] = SCHEMA_VERSION
    _write_json(Path(args.out) / "benchmark.json", report)
    ratio = report.get("baseline_ticks_per_adaptive_eval")
    if ratio:
        print(f"baseline ticks per adaptive derivative evaluation: {ratio:.1f}")
    return EXIT_OK


# -- argument parsing -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resomod",
        description="Resonant-modulator compact-model simulator and fitter")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=True):
        p.add_argument("--config", required=True, help="JSON config file")
        if model:
            p.add_argument("--model", required=True, help="model card JSON")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
        p.add_argument("--dry-run", action="store_true",
                       help="validate inputs without computing")

    p = sub.add_parser("simulate", help="transient run -> trace.csv + summary.json")
    common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("sweep-fcm",
                       help="chirped-laser spectra over bias or heater power")
    common(p)
    p.set_defaults(fn=cmd_sweep_fcm)

    p = sub.add_parser("fit", help="extract a model card from measurements")
    common(p, model=False)
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("eye", help="eye diagram and metrics from a trace CSV")
    common(p, model=False)
    p.add_argument("--trace", required=True, help="trace CSV from simulate")
    p.set_defaults(fn=cmd_eye)

    p = sub.add_parser("bench", help="adaptive vs fixed-step baseline comparison")
    common(p)
    p.add_argument("--baseline-dt", type=float, default=100e-15,
                   help="baseline tick [s] (default 100 fs)")
    p.add_argument("--reference-dt", type=float, default=None,
                   help="optional fine-step reference tick [s]")
    p.add_argument("--nonlinear-cj", action="store_true",
                   help="let the baseline update the junction capacitance")
    p.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ResomodError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 -- CLI boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
