"""Post-processing: eye folding and metrics, swept spectra, solver reports.

Eye diagrams fold the resampled output power at two unit intervals and
accumulate a 2-D histogram.  Metrics use the known bit pattern: extinction
ratio from the settled levels, rise/fall times from 20-80% crossings of
isolated transitions.

The frequency-chirp method (FCM) turns one transient run with a slowly
swept laser offset into a static transmission spectrum; the chirp has to
dwell at least ``DWELL_FACTOR`` photon lifetimes per linewidth or the
sweep drags the resonance shape.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (ChirpTooFastWarning, InsufficientTransitions,
                     MisalignedTraces, TraceTooShort)
from .model import C_VACUUM
from .solver import Trace
from .stimulus import ChirpLaser

DWELL_FACTOR = 20.0  # minimum photon lifetimes of dwell per linewidth

DEFAULT_SAMPLES_PER_UI = 64
DEFAULT_BINS = 128


@dataclass
class EyeDiagram:
    """2-D histogram of output power folded at two unit intervals."""

    grid: np.ndarray          # counts, shape (n_t, n_p)
    ui: float
    t_edges: np.ndarray       # n_t + 1 fold-phase bin edges [s]
    p_edges: np.ndarray       # n_p + 1 power bin edges [W]
    n_samples: int
    metrics: dict = field(default_factory=dict)


def fold_eye(trace: Trace, ui: float, skip: int = 10,
             n_t: int = DEFAULT_BINS, n_p: int = DEFAULT_BINS,
             samples_per_ui: int = DEFAULT_SAMPLES_PER_UI,
             power_range: tuple[float, float] | None = None) -> EyeDiagram:
    """Fold the output power at 2 UI into a counts grid.

    The trace is resampled onto a uniform grid of ``samples_per_ui`` points
    per unit interval; the first ``skip`` unit intervals are discarded as
    startup.  Fold phase is anchored at t = 0, so shifting a trace by an
    even number of unit intervals leaves bin assignments unchanged.
    """
    t_end = trace.t_end
    if t_end <= (skip + 10) * ui:
        raise TraceTooShort(
            f"trace covers {t_end / ui:.1f} UI; need more than {skip + 10}")
    dt = ui / samples_per_ui
    t_grid = np.arange(skip * ui, t_end, dt)
    power = trace.power_on_grid(t_grid)
    phase = np.mod(t_grid, 2.0 * ui)
    if power_range is None:
        hi = float(power.max())
        lo = float(min(power.min(), 0.0))
        power_range = (lo, hi * 1.05 + 1e-30)
    t_edges = np.linspace(0.0, 2.0 * ui, n_t + 1)
    p_edges = np.linspace(power_range[0], power_range[1], n_p + 1)
    grid, _, _ = np.histogram2d(phase, power, bins=(t_edges, p_edges))
    return EyeDiagram(grid=grid.astype(np.int64), ui=ui, t_edges=t_edges,
                      p_edges=p_edges, n_samples=int(t_grid.size))


def _steady_window_means(power, t_grid, bits, ui, level):
    """Mean power over the center 20% of settled bits at the given level."""
    vals = []
    for k in range(1, len(bits)):
        if bits[k] != level or bits[k - 1] != level:
            continue
        w = (t_grid >= (k + 0.4) * ui) & (t_grid <= (k + 0.6) * ui)
        if np.any(w):
            vals.append(float(np.mean(power[w])))
    return vals


def _edge_windows(bits, rising: bool):
    """Bit indices of isolated transitions (settled before and after)."""
    out = []
    for k in range(2, len(bits) - 1):
        a, b = (0, 1) if rising else (1, 0)
        if bits[k - 2] == a and bits[k - 1] == a and bits[k] == b and bits[k + 1] == b:
            out.append(k)
    return out


def _crossing_time(t, p, level, upward: bool):
    """First crossing of ``level`` by linear interpolation, or None."""
    above = p > level
    if upward:
        hits = np.nonzero(~above[:-1] & above[1:])[0]
    else:
        hits = np.nonzero(above[:-1] & ~above[1:])[0]
    if hits.size == 0:
        return None
    i = int(hits[0])
    frac = (level - p[i]) / (p[i + 1] - p[i])
    return t[i] + frac * (t[i + 1] - t[i])


def eye_metrics(trace: Trace, bits, ui: float, skip: int = 10,
                samples_per_ui: int = 4 * DEFAULT_SAMPLES_PER_UI) -> dict:
    """Pattern-aware two-level eye metrics.

    Extinction ratio compares the mean power over the center 20% of
    settled bits (second and later bits of a run); rise/fall times are
    20-80% crossings of isolated transitions, averaged.
    """
    bits = np.asarray(bits, dtype=int)
    n_bits = min(int(trace.t_end / ui), len(bits))
    if trace.t_end <= (skip + 10) * ui:
        raise TraceTooShort(
            f"trace covers {trace.t_end / ui:.1f} UI; need more than {skip + 10}")
    bits = bits[:n_bits]
    dt = ui / samples_per_ui
    t_grid = np.arange(skip * ui, n_bits * ui, dt)
    power = trace.power_on_grid(t_grid)

    highs = _steady_window_means(power, t_grid, bits, ui, 1)
    lows = _steady_window_means(power, t_grid, bits, ui, 0)
    if not highs or not lows:
        raise InsufficientTransitions("pattern has no settled bits at both levels")
    p_high = float(np.mean(highs))
    p_low = float(np.mean(lows))
    er_db = 10.0 * np.log10(p_high / p_low)
    if p_high - p_low <= 1e-9 * max(p_high, 1e-300):
        # degenerate eye: levels coincide, edge metrics are meaningless
        return {"p_high_W": p_high, "p_low_W": p_low,
                "extinction_ratio_dB": er_db, "eye_height_W": 0.0,
                "rise_20_80_s": None, "fall_80_20_s": None,
                "n_rising_edges": 0, "n_falling_edges": 0}
    p20 = p_low + 0.2 * (p_high - p_low)
    p80 = p_low + 0.8 * (p_high - p_low)

    def mean_edge(rising: bool):
        times = []
        for k in _edge_windows(bits, rising):
            t_from = (k - 0.5) * ui
            t_to = (k + 1.5) * ui
            if t_from < skip * ui or t_to > n_bits * ui:
                continue
            w = (t_grid >= t_from) & (t_grid <= t_to)
            tt, pp = t_grid[w], power[w]
            if rising:
                t_a = _crossing_time(tt, pp, p20, True)
                t_b = _crossing_time(tt, pp, p80, True) if t_a is not None else None
            else:
                t_a = _crossing_time(tt, pp, p80, False)
                t_b = _crossing_time(tt, pp, p20, False) if t_a is not None else None
            if t_a is not None and t_b is not None and t_b > t_a:
                times.append(t_b - t_a)
        return times

    rises = mean_edge(True)
    falls = mean_edge(False)
    if not rises or not falls:
        raise InsufficientTransitions("pattern has no isolated transitions")
    eye_height = p80 - p20
    return {
        "p_high_W": p_high,
        "p_low_W": p_low,
        "extinction_ratio_dB": er_db,
        "eye_height_W": eye_height,
        "rise_20_80_s": float(np.mean(rises)),
        "fall_80_20_s": float(np.mean(falls)),
        "n_rising_edges": len(rises),
        "n_falling_edges": len(falls),
    }


def pam4_level_metrics(trace: Trace, symbols, ui: float, skip: int = 10,
                       samples_per_ui: int = DEFAULT_SAMPLES_PER_UI) -> dict:
    """Mean settled power per PAM4 level plus level-spacing statistics."""
    symbols = np.asarray(symbols, dtype=int)
    n_sym = min(int(trace.t_end / ui), len(symbols))
    symbols = symbols[:n_sym]
    dt = ui / samples_per_ui
    t_grid = np.arange(skip * ui, n_sym * ui, dt)
    power = trace.power_on_grid(t_grid)
    levels = []
    spreads = []
    for s in range(4):
        vals = _steady_window_means(power, t_grid, symbols, ui, s)
        if not vals:
            raise InsufficientTransitions(f"no settled symbols at level {s}")
        levels.append(float(np.mean(vals)))
        spreads.append(float(np.std(vals)))
    gaps = np.diff(levels)
    return {
        "levels_W": levels,
        "level_spreads_W": spreads,
        "gaps_W": gaps.tolist(),
        "gap_ratio": float(gaps.max() / gaps.min()),
    }


def fcm_spectrum(trace: Trace, chirp: ChirpLaser, lambda_ref: float,
                 tau_max: float | None = None,
                 n_points: int = 2001):
    """Static transmission spectrum from a chirped-laser transient.

    Maps sample time to instantaneous laser offset, then to absolute
    wavelength; transmission is the resampled output power over the source
    power.  Returns (wavelengths [m], transmission), sorted by wavelength.

    Emits :class:`ChirpTooFastWarning` (and still computes) when the sweep
    dwells fewer than ``DWELL_FACTOR`` photon lifetimes per linewidth.
    """
    if tau_max is not None:
        rate = abs(chirp.rate)
        linewidth = 1.0 / (np.pi * tau_max)
        if rate > 0:
            dwell = linewidth / rate
            if dwell < DWELL_FACTOR * tau_max:
                warnings.warn(
                    f"chirp dwells {dwell / tau_max:.1f} lifetimes per linewidth; "
                    f"need >= {DWELL_FACTOR:.0f} for a quasi-static sweep",
                    ChirpTooFastWarning)
    t_lo, t_hi = 0.0, min(trace.t_end, chirp.duration)
    t_grid = np.linspace(t_lo, t_hi, n_points)
    out = trace.resample(t_grid)
    transmission = out["p_out"] / out["p_in"]
    f_off = np.asarray(chirp.instantaneous_offset(t_grid), dtype=float)
    lam = C_VACUUM / (C_VACUUM / lambda_ref + f_off)
    order = np.argsort(lam)
    return lam[order], transmission[order]


def compare_solvers(trace_a: Trace, trace_b: Trace,
                    n_grid: int = 20001, t_skip: float = 0.0) -> dict:
    """Accuracy and cost report for two runs of the same scenario.

    Both traces are resampled onto a common uniform grid; the report
    carries the power-difference statistics together with each run's step,
    tick and derivative-evaluation counters and wall-clock times.
    """
    if trace_a.t.size < 2 or trace_b.t.size < 2:
        raise MisalignedTraces("both traces need at least two samples")
    end_a, end_b = trace_a.t_end, trace_b.t_end
    if abs(end_a - end_b) > 1e-6 * max(end_a, end_b):
        raise MisalignedTraces(
            f"traces cover different intervals: {end_a:.3e} vs {end_b:.3e} s")
    t0 = max(trace_a.t[0], trace_b.t[0], t_skip)
    grid = np.linspace(t0, min(end_a, end_b), n_grid)
    p_a = trace_a.power_on_grid(grid)
    p_b = trace_b.power_on_grid(grid)
    diff = p_a - p_b
    peak = float(max(p_a.max(), p_b.max()))
    report = {
        "rms_power_diff_W": float(np.sqrt(np.mean(diff ** 2))),
        "max_power_diff_W": float(np.max(np.abs(diff))),
        "peak_power_W": peak,
        "rms_over_peak": float(np.sqrt(np.mean(diff ** 2)) / peak) if peak else 0.0,
        "a": _cost_stats(trace_a),
        "b": _cost_stats(trace_b),
    }
    return report


def _cost_stats(trace: Trace) -> dict:
    s = trace.stats
    out = {"method": s.get("method", "unknown"),
           "wall_clock_s": s.get("wall_clock_s")}
    if "ticks" in s:
        out["ticks"] = s["ticks"]
        out["dt"] = s["dt"]
    else:
        out["n_accepted"] = s.get("n_accepted")
        out["n_rejected"] = s.get("n_rejected")
        out["n_rhs_evals"] = s.get("n_rhs_evals")
        out["n_jac_evals"] = s.get("n_jac_evals")
    return out


def benchmark_report(adaptive: Trace, baseline: Trace,
                     reference: Trace | None = None, t_skip: float = 0.0) -> dict:
    """Solver-comparison bundle: adaptive vs clocked baseline, optionally
    both against a fine-step reference run."""
    rep = {"adaptive_vs_baseline": compare_solvers(adaptive, baseline,
                                                   t_skip=t_skip)}
    ticks = baseline.stats.get("ticks")
    nfev = adaptive.stats.get("n_rhs_evals")
    if ticks and nfev:
        rep["baseline_ticks_per_adaptive_eval"] = ticks / nfev
    if reference is not None:
        rep["adaptive_vs_reference"] = compare_solvers(adaptive, reference,
                                                       t_skip=t_skip)
        rep["baseline_vs_reference"] = compare_solvers(baseline, reference,
                                                       t_skip=t_skip)
    return rep
