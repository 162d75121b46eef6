"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest -s`` to see them).

Closed-form oracles (Lorentzian statics, matrix exponentials, analytic
decay) gate the solver; synthesis round trips gate the extraction chain;
the clocked fine-step baseline provides the accuracy reference for the
solver-efficiency comparison.  Device-anchored values (zero-bias junction
capacitance, heater tuning efficiency, electrical self-bandwidth) are
checked exactly where exact and within stated windows otherwise.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy.linalg import expm

from resomod import (ElectricalParams, ResonatorParams, SolverConfig,
                     ThermalParams, integrate_adaptive, integrate_fixed_baseline)
from resomod.analysis import eye_metrics, pam4_level_metrics
from resomod.electrical import write_s11_csv
from resomod.extraction import (TransmissionSweep, find_resonance,
                                read_sweep_csv, write_sweep_csv)
from resomod.cli import main as cli_main
from resomod.model import C_VACUUM
from resomod.solver import ResonatorState
from resomod.stimulus import (PiecewiseLinearDrive, Stimulus, constant_drive,
                              cw_laser, nrz_waveform, pam4_levels,
                              pam4_symbols, pam4_waveform, prbs_bits)

from conftest import DEMO_RESONATOR, FAST_RESONATOR, TABLE_ELECTRICAL, DEMO_THERMAL


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def models():
    return (ResonatorParams(**DEMO_RESONATOR),
            ResonatorParams(**FAST_RESONATOR),
            ElectricalParams(**TABLE_ELECTRICAL),
            ThermalParams(**DEMO_THERMAL))


def test_criterion_1_steady_state_oracle(models):
    """Transient settles onto the closed-form Lorentzian transmission."""
    rp, _, ep, tp = models
    t_start = time.perf_counter()
    biases = np.linspace(-0.5, 2.5, 5)
    worst = 0.0
    for v in biases:
        lam0 = rp.resonance_wavelength(v)
        detunings = np.linspace(-450e-12, 450e-12, 20)
        tau = rp.decay_times(v).tau
        for dlam in detunings:
            lam_l = lam0 + dlam
            stim = Stimulus(voltage_drive=constant_drive(v),
                            laser=cw_laser(1e-3, lam_l, rp.lambda_ref),
                            t_end=30 * tau)
            tr = integrate_adaptive(rp, ep, tp, SolverConfig(rel_tol=1e-8),
                                    stim, init="zero")
            t_sim = tr.p_out[-1] / tr.p_in[-1]
            t_ref = rp.static_transmission(v, 0.0, lam_l)
            worst = max(worst, abs(t_sim - t_ref))
    elapsed = time.perf_counter() - t_start
    ok = worst < 1e-6 and elapsed < 10.0
    _report("criterion 1 (steady-state oracle)", ok,
            f"max |T_sim - T_ref| = {worst:.2e} over 100 points "
            f"(limit 1e-6), runtime {elapsed:.1f} s (limit 10 s)")


def test_criterion_2_linear_ode_oracle(models):
    """Adaptive trace matches the matrix-exponential solution piecewise."""
    rp, _, _, _ = models
    rng = np.random.default_rng(42)
    n_seg = 100
    seg_len = 30e-12
    eps = 1e-20
    biases = rng.uniform(-0.5, 2.5, size=n_seg)
    times = [0.0]
    values = [biases[0]]
    for k in range(1, n_seg):
        tb = k * seg_len
        times.extend([tb - eps, tb])
        values.extend([biases[k - 1], biases[k]])
    drive = PiecewiseLinearDrive(np.asarray(times), np.asarray(values))
    power = 1e-3
    stim = Stimulus(voltage_drive=drive,
                    laser=cw_laser(power, 1566.65e-9, rp.lambda_ref),
                    t_end=n_seg * seg_len)
    rtol = 1e-8
    cfg = SolverConfig(rel_tol=rtol, direct_drive=True, max_step=2e-12)
    tr = integrate_adaptive(rp, None, None, cfg, stim, init="zero")

    amp = math.sqrt(power)
    dw = 2 * math.pi * stim.laser.delta_f
    state = np.array([0.0, 0.0, amp, 0.0])
    a_sim = tr.resample(tr.t)["a"]
    scale = float(np.max(np.abs(a_sim)))
    worst = 0.0
    checked = 0
    t_now = 0.0
    for k in range(n_seg):
        v = biases[k]
        d = rp.decay_times(v)
        w0p = 2 * math.pi * C_VACUUM * (1 / rp.resonance_wavelength(v)
                                        - 1 / rp.lambda_ref)
        A = np.array([
            [-1 / d.tau, -w0p, 0.0, d.mu],
            [w0p, -1 / d.tau, -d.mu, 0.0],
            [0.0, 0.0, 0.0, -dw],
            [0.0, 0.0, dw, 0.0],
        ])
        sel = np.nonzero((tr.t > t_now + 1e-18)
                         & (tr.t <= t_now + seg_len + 1e-18))[0]
        for i in sel:
            ref = expm(A * (tr.t[i] - t_now)) @ state
            worst = max(worst, abs(a_sim[i] - complex(ref[0], ref[1])) / scale)
            checked += 1
        state = expm(A * seg_len) @ state
        t_now += seg_len
    ok = worst < 10 * rtol
    _report("criterion 2 (matrix-exponential oracle)", ok,
            f"max relative deviation {worst:.2e} at {checked} accepted steps "
            f"(limit {10 * rtol:.0e})")


def test_criterion_3_extraction_round_trip(models, tmp_path):
    """Full measurement synthesis through the fit command, 2% recovery."""
    rp, _, ep, tp = models
    t_start = time.perf_counter()
    lam = np.arange(1565.2e-9, 1568.2e-9, 1e-12)
    sweeps = []
    for v in np.linspace(-0.5, 2.5, 7):
        t = rp.static_transmission(v, 0.0, lam) * 0.8
        name = f"bias_{v:+.2f}.csv"
        write_sweep_csv(tmp_path / name, TransmissionSweep(v, 0.0, lam, t))
        sweeps.append({"path": name, "bias_V": float(v), "heater_mW": 0.0})
    for ph_mw in (0.25, 0.5, 0.75, 1.0):
        t = rp.static_transmission(0.0, tp.static_shift(ph_mw * 1e-3), lam) * 0.8
        name = f"heat_{ph_mw:.2f}.csv"
        write_sweep_csv(tmp_path / name,
                        TransmissionSweep(0.0, ph_mw * 1e-3, lam, t))
        sweeps.append({"path": name, "bias_V": 0.0, "heater_mW": ph_mw})
    f = np.geomspace(0.1e9, 50e9, 201)
    write_s11_csv(tmp_path / "s11.csv", f, ep.s11(0.0, f))
    manifest = {
        "schema_version": 1,
        "transmission_sweeps": sweeps,
        "s11": {"path": "s11.csv", "bias_V": 0.0},
        "cv_points": [{"bias_V": v, "cj_fF": ep.junction_capacitance(v) * 1e15}
                      for v in (-0.4, 0.0, 1.0)],
        "rh_ohm": 8000.0,
    }
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    rc = cli_main(["fit", "--config", str(tmp_path / "manifest.json"),
                   "--out", str(tmp_path / "out")])
    assert rc == 0
    card = json.loads((tmp_path / "out" / "model_card.json").read_text())

    failures = []

    def check(name, got, truth):
        rel = abs(got - truth) / abs(truth)
        if rel > 0.02:
            failures.append(f"{name}: {rel:.3%}")
        return rel

    worst = 0.0
    res = card["resonator"]
    for key, truth in (("lambda0_coeffs", rp.lambda0_coeffs),
                       ("tau_c_coeffs", rp.tau_c_coeffs),
                       ("tau_l_coeffs", rp.tau_l_coeffs)):
        for i, (g, t) in enumerate(zip(res[key], truth)):
            worst = max(worst, check(f"{key}[{i}]", g, t))
    worst = max(worst, check("gamma", res["gamma"], rp.gamma))
    for key in ("Cj0", "Vbi", "mj", "Rs", "Cox", "RSi", "Cpad"):
        worst = max(worst, check(key, card["electrical"][key], getattr(ep, key)))
    elapsed = time.perf_counter() - t_start
    ok = not failures and elapsed < 30.0
    _report("criterion 3 (extraction round trip)", ok,
            f"17 parameters recovered, worst error {worst:.2e} (limit 2%), "
            f"runtime {elapsed:.1f} s (limit 30 s)"
            + (f"; failures: {failures}" if failures else ""))


def test_criterion_4_device_anchors(models):
    """Exact zero-bias capacitance, heater shift, and self-bandwidth window."""
    _, _, ep, tp = models
    cj0 = ep.junction_capacitance(0.0)
    shift = tp.static_shift(1e-3)
    f_elec = ep.electrical_bandwidth(1.0)
    ok = (cj0 == 143e-15
          and shift == pytest.approx(251e-12, rel=1e-12)
          and abs(f_elec - 18.6e9) < 0.1e9)
    _report("criterion 4 (device anchors)", ok,
            f"Cj(0) = {cj0 * 1e15:.1f} fF (exact 143), "
            f"shift(1 mW) = {shift * 1e12:.1f} pm (exact 251), "
            f"f_elec(1 V) = {f_elec / 1e9:.2f} GHz (18.6 +/- 0.1)")


def test_criterion_5_fcm_fidelity(models, tmp_path):
    """Swept-laser spectra match the closed form; heater shift is 251 pm."""
    rp, _, ep, tp = models
    from resomod.model import save_model_card
    card_path = tmp_path / "card.json"
    save_model_card(card_path, rp, ep, tp)

    cfg_bias = {"schema_version": 1, "mode": "bias", "values": [0.0, 1.5],
                "span_pm": 1500.0, "laser_power_mW": 1.0}
    (tmp_path / "sweep_bias.json").write_text(json.dumps(cfg_bias))
    rc = cli_main(["sweep-fcm", "--config", str(tmp_path / "sweep_bias.json"),
                   "--model", str(card_path), "--out", str(tmp_path / "b")])
    assert rc == 0
    worst = 0.0
    for v in (0.0, 1.5):
        sweep = read_sweep_csv(tmp_path / "b" / f"spectrum_bias_{v:+.3f}V.csv")
        t_ref = rp.static_transmission(v, 0.0, sweep.wavelength)
        depth = 1.0 - t_ref.min()
        worst = max(worst, float(np.max(np.abs(sweep.transmission - t_ref))
                                 / depth))

    cfg_heat = {"schema_version": 1, "mode": "heater", "values": [0.0, 1.0],
                "span_pm": 1500.0, "laser_power_mW": 1.0, "bias_V": 0.0}
    (tmp_path / "sweep_heat.json").write_text(json.dumps(cfg_heat))
    rc = cli_main(["sweep-fcm", "--config", str(tmp_path / "sweep_heat.json"),
                   "--model", str(card_path), "--out", str(tmp_path / "h")])
    assert rc == 0
    lam0 = {}
    for ph in (0.0, 1.0):
        sweep = read_sweep_csv(tmp_path / "h" / f"spectrum_heater_{ph:.3f}mW.csv")
        lam0[ph], _ = find_resonance(sweep)
    shift = lam0[1.0] - lam0[0.0]
    shift_err = abs(shift - 251e-12) / 251e-12
    ok = worst < 0.01 and shift_err < 0.02
    _report("criterion 5 (swept-spectrum fidelity)", ok,
            f"max deviation {worst:.3%} of depth (limit 1%), heater shift "
            f"{shift * 1e12:.1f} pm vs 251 pm ({shift_err:.2%}, limit 2%)")


def test_criterion_6_eye_nonlinearity(models):
    """Fast rise, slow fall; freezing Cj closes a tenth of the asymmetry."""
    _, rp_fast, ep, tp = models
    ui = 1 / 25e9
    n_ui = 500
    bits = prbs_bits(13, seed=1, n=n_ui)
    laser = cw_laser(1e-3, rp_fast.resonance_wavelength(0.0) - 50e-12,
                     rp_fast.lambda_ref)
    drv = nrz_waveform(bits, ui, -0.5, 1.5, 0.30 * ui)
    stim = Stimulus(voltage_drive=drv, laser=laser, t_end=n_ui * ui)

    tr = integrate_adaptive(rp_fast, ep, tp,
                            SolverConfig(rel_tol=1e-5, max_step=ui / 20), stim)
    m = eye_metrics(tr, bits, ui, skip=10)
    r_nl = m["rise_20_80_s"] / m["fall_80_20_s"]

    base = integrate_fixed_baseline(rp_fast, ep, tp, 20e-15, stim,
                                    nonlinear_cj=False, store_every=10)
    mc = eye_metrics(base, bits, ui, skip=10)
    r_const = mc["rise_20_80_s"] / mc["fall_80_20_s"]
    shift_toward_one = (r_const - r_nl) / (1.0 - r_nl)

    ok = (m["rise_20_80_s"] < m["fall_80_20_s"]
          and shift_toward_one >= 0.10
          and m["extinction_ratio_dB"] > 4.0)
    _report("criterion 6 (eye nonlinearity)", ok,
            f"rise {m['rise_20_80_s'] * 1e12:.1f} ps < fall "
            f"{m['fall_80_20_s'] * 1e12:.1f} ps, constant-Cj moves rise/fall "
            f"ratio toward 1 by {shift_toward_one:.1%} (limit 10%), "
            f"ER {m['extinction_ratio_dB']:.1f} dB (limit 4)")


def test_criterion_7_solver_efficiency(models):
    """Five-fold fewer derivative evaluations than baseline ticks at matched
    output accuracy against a 1 fs reference run."""
    rp, _, ep, tp = models
    t_start = time.perf_counter()
    ui = 1 / 28e9
    n_ui = 1000
    bits = prbs_bits(13, seed=1, n=n_ui)
    laser = cw_laser(1e-3, rp.resonance_wavelength(0.0) - 50e-12, rp.lambda_ref)
    drv = nrz_waveform(bits, ui, -0.5, 1.5, 0.25 * ui)
    stim = Stimulus(voltage_drive=drv, laser=laser, t_end=n_ui * ui)

    adaptive = integrate_adaptive(
        rp, ep, tp, SolverConfig(rel_tol=2e-4, max_step=ui / 20), stim)
    baseline = integrate_fixed_baseline(rp, ep, tp, 100e-15, stim,
                                        nonlinear_cj=True, store_every=5)
    reference = integrate_fixed_baseline(rp, ep, tp, 1e-15, stim,
                                         nonlinear_cj=True, store_every=500)

    grid = reference.t[reference.t > 2 * ui]
    p_ref = reference.resample(grid)["p_out"]
    p_ad = adaptive.resample(grid)["p_out"]
    p_bl = baseline.resample(grid)["p_out"]
    peak = float(p_ref.max())
    rms_ad = float(np.sqrt(np.mean((p_ad - p_ref) ** 2)) / peak)
    rms_bl = float(np.sqrt(np.mean((p_bl - p_ref) ** 2)) / peak)

    nfev = adaptive.stats["n_rhs_evals"]
    njev = adaptive.stats["n_jac_evals"]
    ticks = baseline.stats["ticks"]
    elapsed = time.perf_counter() - t_start
    ok = (nfev <= ticks / 5.0 and rms_ad < 1e-3 and elapsed < 300.0)
    _report("criterion 7 (solver efficiency)", ok,
            f"adaptive {nfev} derivative evals (+{njev} Jacobians) vs "
            f"{ticks} baseline ticks -> ratio {ticks / nfev:.1f}x (limit 5x); "
            f"RMS vs 1 fs reference: adaptive {rms_ad:.2e} (limit 1e-3), "
            f"100 fs baseline {rms_bl:.2e}; wall adaptive "
            f"{adaptive.stats['wall_clock_s']:.1f} s, baseline "
            f"{baseline.stats['wall_clock_s']:.1f} s, reference "
            f"{reference.stats['wall_clock_s']:.1f} s; total {elapsed:.0f} s "
            f"(limit 300 s)")


def test_criterion_8_pam4_levels(models):
    """Four distinguishable levels with visibly non-uniform spacing."""
    _, rp_fast, ep, tp = models
    ui = 1 / 20e9
    n_sym = 400
    bits = prbs_bits(13, seed=1, n=2 * n_sym)
    symbols = pam4_symbols(bits)
    drv = pam4_waveform(bits, ui, pam4_levels(2.0, 0.5), 0.25 * ui)
    laser = cw_laser(1e-3, rp_fast.resonance_wavelength(0.0) - 50e-12,
                     rp_fast.lambda_ref)
    stim = Stimulus(voltage_drive=drv, laser=laser, t_end=n_sym * ui)
    tr = integrate_adaptive(rp_fast, ep, tp,
                            SolverConfig(rel_tol=1e-5, max_step=ui / 20), stim)
    m = pam4_level_metrics(tr, symbols, ui, skip=10)
    levels = np.asarray(m["levels_W"])
    spreads = np.asarray(m["level_spreads_W"])
    gaps = np.diff(levels)
    distinguishable = bool(np.all(gaps > 3 * (spreads[:-1] + spreads[1:])))
    ok = distinguishable and m["gap_ratio"] > 1.1
    _report("criterion 8 (four-level sanity)", ok,
            f"levels {np.array2string(levels * 1e3, precision=3)} mW, "
            f"all gaps > 3 sigma apart: {distinguishable}, adjacent-gap "
            f"ratio {m['gap_ratio']:.2f} (limit 1.1)")


def test_criterion_9_property_suites(models):
    """Randomized property sweeps: zero failures."""
    rp, _, ep, tp = models
    rng = np.random.default_rng(20240817)
    failures = []
    counts = {}

    # passivity of the static response
    n = 1000
    for _ in range(n):
        v = rng.uniform(-1.0, 3.0)
        lam = 1566.7e-9 + rng.uniform(-2e-9, 2e-9)
        t = rp.static_transmission(v, rng.uniform(0, 300e-12), lam)
        if not 0.0 <= t <= 1.0:
            failures.append(f"static passivity at v={v:.3f}")
    counts["static passivity"] = n

    # transient passivity: steady single tone never gains energy
    for _ in range(6):
        v = float(rng.uniform(-0.5, 2.5))
        lam = 1566.7e-9 + float(rng.uniform(-300e-12, 300e-12))
        stim = Stimulus(voltage_drive=constant_drive(v),
                        laser=cw_laser(1e-3, lam, rp.lambda_ref), t_end=0.4e-9)
        tr = integrate_adaptive(rp, ep, tp, SolverConfig(rel_tol=1e-7), stim)
        sel = tr.t > 0.15e-9
        if np.mean(tr.p_out[sel]) > np.mean(tr.p_in[sel]) * (1 + 1e-9):
            failures.append(f"transient passivity at v={v:.2f}")
    counts["transient passivity"] = 6

    # frame invariance under reference shifts
    from dataclasses import replace
    bits = prbs_bits(7, seed=3, n=12)
    ui = 1 / 25e9
    drv = nrz_waveform(bits, ui, -0.5, 1.5, 0.25 * ui)
    cfg = SolverConfig(rel_tol=1e-9, max_step=0.25e-12)
    grid = np.linspace(0, 12 * ui, 1200)
    base_run = None
    for shift in (0.0, 10e-12, -15e-12, 7e-12):
        rp_s = replace(rp, lambda_ref=rp.lambda_ref + shift)
        stt = Stimulus(voltage_drive=drv,
                       laser=cw_laser(1e-3, 1566.65e-9, rp_s.lambda_ref),
                       t_end=12 * ui)
        p = integrate_adaptive(rp_s, ep, tp, cfg, stt).resample(grid)["p_out"]
        if base_run is None:
            base_run = p
        elif np.max(np.abs(p - base_run)) > 1e-6 * base_run.max():
            failures.append(f"frame invariance at shift {shift * 1e12:+.0f} pm")
    counts["frame invariance"] = 4

    # linearity of the field map
    from resomod.solver import FieldSample, resonator_derivatives
    n = 1000
    for _ in range(n):
        v = rng.uniform(-1.0, 3.0)
        a1, a2 = (complex(*rng.normal(size=2)) for _ in range(2))
        e1, e2 = (complex(*rng.normal(size=2)) for _ in range(2))
        al, be = rng.normal(size=2)
        d1 = resonator_derivatives(rp, ResonatorState(a1.real, a1.imag), v, 0.0,
                                   FieldSample(e1.real, e1.imag))
        d2 = resonator_derivatives(rp, ResonatorState(a2.real, a2.imag), v, 0.0,
                                   FieldSample(e2.real, e2.imag))
        a3 = al * a1 + be * a2
        e3 = al * e1 + be * e2
        d3 = resonator_derivatives(rp, ResonatorState(a3.real, a3.imag), v, 0.0,
                                   FieldSample(e3.real, e3.imag))
        lhs = complex(d3.ax, d3.ay)
        rhs = al * complex(d1.ax, d1.ay) + be * complex(d2.ax, d2.ay)
        if abs(lhs - rhs) > 1e-10 * max(abs(lhs), 1.0) + 1e-12:
            failures.append("field linearity")
    counts["field linearity"] = n

    # maximal-length pattern period and balance
    for order in (7, 9, 13):
        period = 2 ** order - 1
        bits_p = prbs_bits(order, seed=1, n=2 * period)
        if not np.array_equal(bits_p[:period], bits_p[period:]):
            failures.append(f"PRBS-{order} period")
        if int(bits_p[:period].sum()) != (period + 1) // 2:
            failures.append(f"PRBS-{order} balance")
    counts["PRBS period/balance"] = 3

    # reflection passivity of random parasitic networks
    n = 1000
    for _ in range(n):
        net = ElectricalParams(
            Cj0=rng.uniform(20e-15, 400e-15), Vbi=rng.uniform(0.5, 2.0),
            mj=rng.uniform(0.3, 0.8), Rs=rng.uniform(10, 300),
            Cox=rng.uniform(10e-15, 200e-15), RSi=rng.uniform(100, 5e3),
            Cpad=rng.uniform(5e-15, 80e-15))
        if abs(net.s11(0.0, rng.uniform(0.1e9, 50e9))) > 1 + 1e-12:
            failures.append("S11 passivity")
    counts["S11 passivity"] = n

    total = sum(counts.values())
    ok = not failures
    _report("criterion 9 (property suites)", ok,
            f"{total} randomized cases across {len(counts)} properties, "
            f"{len(failures)} failures" + (f": {failures[:5]}" if failures else ""))
