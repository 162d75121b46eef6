import math
import warnings

import numpy as np
import pytest

from resomod.analysis import (benchmark_report, compare_solvers,
                              eye_metrics, fcm_spectrum, fold_eye,
                              pam4_level_metrics)
from resomod.errors import (ChirpTooFastWarning, InsufficientTransitions,
                            MisalignedTraces, TraceTooShort)
from resomod.solver import SolverConfig, Trace, integrate_adaptive
from resomod.stimulus import (Stimulus, chirp_laser, constant_drive, cw_laser,
                              nrz_waveform, offset_frequency, prbs_bits)

UI = 1 / 25e9


def synthetic_trace(t, power, v_m=None):
    """Uniform trace carrying a prescribed output power."""
    t = np.asarray(t, dtype=float)
    power = np.asarray(power, dtype=float)
    eout = np.sqrt(power).astype(complex)
    ein = np.ones_like(eout)
    return Trace(kind="uniform", t=t, y=np.zeros((t.size, 0)), columns=(),
                 ein=ein, eout=eout,
                 v_m=np.zeros_like(t) if v_m is None else np.asarray(v_m),
                 dlambda=np.zeros_like(t), p_in=np.abs(ein) ** 2, p_out=power,
                 stats={"method": "synthetic"})


def square_nrz_power(bits, ui, n_per_ui, p_low, p_high):
    t = np.arange(len(bits) * n_per_ui) * (ui / n_per_ui)
    p = np.where(np.repeat(np.asarray(bits), n_per_ui) > 0, p_high, p_low)
    return t, p.astype(float)


class TestFoldEye:
    def test_constant_power_single_row(self):
        t = np.linspace(0, 50 * UI, 20001)
        tr = synthetic_trace(t, np.full(t.size, 0.5e-3))
        eye = fold_eye(tr, UI, skip=10, n_t=32, n_p=16,
                       power_range=(0.0, 1e-3))
        occupied = np.nonzero(eye.grid.sum(axis=0))[0]
        assert occupied.size == 1

    def test_square_wave_two_rows_plus_edges(self):
        bits = [0, 1] * 30
        t, p = square_nrz_power(bits, UI, 64, 1e-4, 9e-4)
        eye = fold_eye(synthetic_trace(t, p), UI, skip=10, n_t=16, n_p=10,
                       power_range=(0.0, 1e-3))
        row_counts = eye.grid.sum(axis=0)
        assert np.count_nonzero(row_counts) == 2

    def test_count_conservation(self):
        t = np.linspace(0, 64 * UI, 30001)
        tr = synthetic_trace(t, 1e-4 * (1 + 0.5 * np.sin(2e9 * t)))
        skip = 12
        eye = fold_eye(tr, UI, skip=skip, samples_per_ui=64)
        assert eye.grid.sum() == eye.n_samples

    def test_even_ui_shift_bin_exact(self):
        bits = prbs_bits(7, seed=3, n=80)
        t, p = square_nrz_power(bits, UI, 64, 1e-4, 9e-4)
        tr = synthetic_trace(t, p)
        eye_a = fold_eye(tr, UI, skip=10, power_range=(0.0, 1e-3))
        # identical data shifted two unit intervals later in absolute time
        tr_b = synthetic_trace(t + 2 * UI, p)
        eye_b = fold_eye(tr_b, UI, skip=12, power_range=(0.0, 1e-3))
        trim = eye_a.grid.sum() - eye_b.grid.sum()
        assert abs(trim) <= 2 * 64  # boundary samples only
        # all interior mass lands in identical bins: compare occupancy pattern
        assert np.array_equal(eye_a.grid[2:-2] > 0, eye_b.grid[2:-2] > 0)

    def test_odd_ui_shift_rolls_half_grid(self):
        bits = prbs_bits(7, seed=5, n=80)
        t, p = square_nrz_power(bits, UI, 64, 1e-4, 9e-4)
        n_t = 64
        eye_a = fold_eye(synthetic_trace(t, p), UI, skip=10, n_t=n_t,
                         power_range=(0.0, 1e-3))
        eye_b = fold_eye(synthetic_trace(t + UI, p), UI, skip=11, n_t=n_t,
                         power_range=(0.0, 1e-3))
        rolled = np.roll(eye_b.grid, n_t // 2, axis=0)
        agree = (eye_a.grid > 0) == (rolled > 0)
        assert agree.mean() > 0.99

    def test_too_short(self):
        t = np.linspace(0, 5 * UI, 100)
        with pytest.raises(TraceTooShort):
            fold_eye(synthetic_trace(t, np.ones(100)), UI, skip=10)


class TestEyeMetrics:
    def test_er_anchor_4db(self):
        # power ratio 2.512 corresponds to 4.0 dB
        bits = prbs_bits(7, seed=1, n=120)
        t, p = square_nrz_power(bits, UI, 256, 1e-4, 2.512e-4)
        m = eye_metrics(synthetic_trace(t, p), bits, UI, skip=10)
        assert m["extinction_ratio_dB"] == pytest.approx(4.0, abs=0.01)

    def test_equal_levels_zero_db(self):
        bits = prbs_bits(7, seed=1, n=80)
        t, p = square_nrz_power(bits, UI, 64, 2e-4, 2e-4)
        m = eye_metrics(synthetic_trace(t, p), bits, UI, skip=10)
        assert m["extinction_ratio_dB"] == pytest.approx(0.0, abs=1e-9)

    def test_exponential_settling_rise_time(self):
        # first-order settling: 20-80% spans tau * ln(0.8/0.2) = 1.386 tau
        bits = np.array([0, 0, 0, 1, 1, 1, 1, 1, 0, 0, 0, 0, 1, 1, 1, 1] * 8)
        ui = UI
        tau_x = 6e-12
        n_per = 512
        t = np.arange(bits.size * n_per) * (ui / n_per)
        target = np.where(np.repeat(bits, n_per) > 0, 9e-4, 1e-4)
        p = np.empty_like(target)
        p[0] = target[0]
        dt = t[1] - t[0]
        alpha = 1 - math.exp(-dt / tau_x)
        for i in range(1, p.size):
            p[i] = p[i - 1] + alpha * (target[i] - p[i - 1])
        m = eye_metrics(synthetic_trace(t, p), bits, ui, skip=16,
                        samples_per_ui=n_per)
        expect = tau_x * math.log(0.8 / 0.2)
        assert m["rise_20_80_s"] == pytest.approx(expect, rel=0.03)
        assert m["fall_80_20_s"] == pytest.approx(expect, rel=0.03)

    def test_insufficient_transitions(self):
        bits = np.ones(60, dtype=int)
        t, p = square_nrz_power(bits, UI, 64, 1e-4, 9e-4)
        with pytest.raises(InsufficientTransitions):
            eye_metrics(synthetic_trace(t, p), bits, UI, skip=10)


class TestPam4Levels:
    def test_four_levels_recovered(self):
        symbols = np.array([0, 1, 2, 3] * 25 + [0, 0, 1, 1, 2, 2, 3, 3] * 25)
        levels = [1e-4, 3e-4, 6e-4, 9e-4]
        n_per = 64
        t = np.arange(symbols.size * n_per) * (UI / n_per)
        p = np.repeat([levels[s] for s in symbols], n_per).astype(float)
        m = pam4_level_metrics(synthetic_trace(t, p), symbols, UI, skip=10)
        assert m["levels_W"] == pytest.approx(levels, rel=1e-9)
        assert m["gap_ratio"] == pytest.approx(3e-4 / 2e-4, rel=1e-6)


class TestFcmSpectrum:
    def test_reproduces_static_curve(self, resonator, electrical, thermal):
        v = 0.5
        d = resonator.decay_times(v)
        lam0 = resonator.resonance_wavelength(v)
        span = 1.2e-9
        f_hi = offset_frequency(lam0 - span / 2, resonator.lambda_ref)
        f_lo = offset_frequency(lam0 + span / 2, resonator.lambda_ref)
        linewidth = 1 / (math.pi * d.tau)
        duration = abs(f_hi - f_lo) / (linewidth / (240 * d.tau))
        chirp = chirp_laser(1e-3, f_hi, f_lo, duration)
        stim = Stimulus(voltage_drive=constant_drive(v), laser=chirp,
                        t_end=duration)
        tr = integrate_adaptive(resonator, electrical, thermal,
                                SolverConfig(rel_tol=1e-7), stim)
        lam, t_sim = fcm_spectrum(tr, chirp, resonator.lambda_ref, tau_max=d.tau)
        t_ref = resonator.static_transmission(v, 0.0, lam)
        depth = 1 - t_ref.min()
        assert np.max(np.abs(t_sim - t_ref)) < 0.01 * depth

    def test_chirp_too_fast_warns_but_computes(self, resonator, electrical,
                                               thermal):
        v = 0.0
        d = resonator.decay_times(v)
        chirp = chirp_laser(1e-3, -40e9, 40e9, 1e-9)  # far too fast
        stim = Stimulus(voltage_drive=constant_drive(v), laser=chirp, t_end=1e-9)
        tr = integrate_adaptive(resonator, electrical, thermal,
                                SolverConfig(rel_tol=1e-6), stim)
        with pytest.warns(ChirpTooFastWarning):
            lam, t_sim = fcm_spectrum(tr, chirp, resonator.lambda_ref,
                                      tau_max=d.tau)
        assert lam.size > 0

    def test_zero_span_single_point(self, resonator, electrical, thermal):
        chirp = chirp_laser(1e-3, 5e9, 5e9, 1e-10)
        stim = Stimulus(voltage_drive=constant_drive(0.0), laser=chirp,
                        t_end=1e-10)
        tr = integrate_adaptive(resonator, electrical, thermal,
                                SolverConfig(rel_tol=1e-6), stim)
        lam, t_sim = fcm_spectrum(tr, chirp, resonator.lambda_ref, n_points=101)
        assert np.ptp(lam) == 0.0

    def test_halving_rate_halves_distortion(self, resonator, electrical,
                                            thermal):
        v = 0.0
        d = resonator.decay_times(v)
        lam0 = resonator.resonance_wavelength(v)
        span = 0.9e-9
        f_hi = offset_frequency(lam0 - span / 2, resonator.lambda_ref)
        f_lo = offset_frequency(lam0 + span / 2, resonator.lambda_ref)
        devs = []
        for dwell in (30.0, 60.0):
            linewidth = 1 / (math.pi * d.tau)
            duration = abs(f_hi - f_lo) / (linewidth / (dwell * d.tau))
            chirp = chirp_laser(1e-3, f_hi, f_lo, duration)
            stim = Stimulus(voltage_drive=constant_drive(v), laser=chirp,
                            t_end=duration)
            tr = integrate_adaptive(resonator, electrical, thermal,
                                    SolverConfig(rel_tol=1e-8), stim)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                lam, t_sim = fcm_spectrum(tr, chirp, resonator.lambda_ref)
            devs.append(np.max(np.abs(
                t_sim - resonator.static_transmission(v, 0.0, lam))))
        assert devs[0] / devs[1] == pytest.approx(2.0, rel=0.25)


class TestCompareSolvers:
    def test_identical_traces_zero_diff(self):
        t = np.linspace(0, 40 * UI, 4001)
        tr = synthetic_trace(t, 1e-4 * (1.2 + np.cos(3e9 * t)))
        rep = compare_solvers(tr, tr)
        assert rep["rms_power_diff_W"] == 0.0
        assert rep["max_power_diff_W"] == 0.0

    def test_misaligned_rejected(self):
        t1 = np.linspace(0, 40 * UI, 1001)
        t2 = np.linspace(0, 80 * UI, 1001)
        with pytest.raises(MisalignedTraces):
            compare_solvers(synthetic_trace(t1, np.ones(1001)),
                            synthetic_trace(t2, np.ones(1001)))

    def test_benchmark_report_fields(self, resonator, electrical, thermal):
        from resomod.solver import integrate_fixed_baseline
        bits = prbs_bits(7, seed=2, n=24)
        drv = nrz_waveform(bits, UI, -0.5, 1.5, 0.25 * UI)
        stim = Stimulus(voltage_drive=drv,
                        laser=cw_laser(1e-3, 1566.65e-9, 1566.7e-9),
                        t_end=24 * UI)
        adaptive = integrate_adaptive(resonator, electrical, thermal,
                                      SolverConfig(rel_tol=1e-5,
                                                   max_step=UI / 20), stim)
        baseline = integrate_fixed_baseline(resonator, electrical, thermal,
                                            100e-15, stim, nonlinear_cj=True,
                                            store_every=5)
        rep = benchmark_report(adaptive, baseline, t_skip=2 * UI)
        assert rep["baseline_ticks_per_adaptive_eval"] > 1.0
        assert rep["adaptive_vs_baseline"]["rms_over_peak"] < 5e-3
        assert rep["adaptive_vs_baseline"]["a"]["n_rhs_evals"] > 0
        assert rep["adaptive_vs_baseline"]["b"]["ticks"] == round(24 * UI / 100e-15)
