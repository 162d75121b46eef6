"""Drive-waveform and baseband laser sources.

Voltage drives are piecewise-linear functions with declared corner times so
the transient solver can place step boundaries exactly on slope
discontinuities.  Lasers are complex baseband envelopes referenced to the
model's reference wavelength: a CW source is a fixed-offset phasor, the
chirp source ramps the instantaneous offset linearly (continuous phase) to
trace static spectra from one transient run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadSeed, EdgeTooSlow, OffsetTooLarge
from .model import C_VACUUM

# Baseband validity guard: offsets beyond this defeat the point of the
# envelope representation and are almost certainly a configuration error.
MAX_BASEBAND_OFFSET = 100e9  # [Hz]

# Feedback taps (polynomial exponents) of maximal-length LFSRs.  13 uses the
# four-tap PRBS13Q generator polynomial x^13 + x^12 + x^2 + x + 1.
_LFSR_TAPS = {
    7: (7, 6),
    9: (9, 5),
    13: (13, 12, 2, 1),
    15: (15, 14),
    31: (31, 28),
}


def prbs_bits(order: int, seed: int, n: int) -> np.ndarray:
    """Generate ``n`` bits of a maximal-length pseudo-random sequence.

    Parameters
    ----------
    order : int
        LFSR length; one of 7, 9, 13, 15, 31.  Period is ``2**order - 1``.
    seed : int
        Nonzero initial register state (only the low ``order`` bits used).
    n : int
        Number of bits to emit.
    """
    if order not in _LFSR_TAPS:
        raise ValueError(f"order must be one of {sorted(_LFSR_TAPS)}, got {order}")
    mask = (1 << order) - 1
    state = seed & mask
    if state == 0:
        raise BadSeed("LFSR seed must be nonzero")
    taps = _LFSR_TAPS[order]
    out = np.empty(n, dtype=np.uint8)
    for i in range(n):
        bit = 0
        for t in taps:
            bit ^= state >> (t - 1)
        bit &= 1
        state = ((state << 1) | bit) & mask
        out[i] = bit
    return out


@dataclass(frozen=True)
class PiecewiseLinearDrive:
    """Piecewise-linear voltage waveform with explicit breakpoints.

    ``times`` must be strictly increasing; the waveform holds the first /
    last value outside the covered interval.  Breakpoints double as the
    corner times handed to the solver.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 1:
            raise ValueError("times and values must be equal-length 1-D arrays")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("breakpoint times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    def segment(self, t: float):
        """Linear piece containing ``t``: (t_start, t_end, v_start, slope).

        ``t_end`` is +inf after the last breakpoint.  The returned closed
        form is exact inside [t_start, t_end], which lets the solver avoid
        any ambiguity about one-sided slopes at corners.
        """
        times, values = self.times, self.values
        if t < times[0]:
            return -math.inf, times[0], values[0], 0.0
        idx = int(np.searchsorted(times, t, side="right")) - 1
        if idx >= times.size - 1:
            return times[-1], math.inf, values[-1], 0.0
        t0, t1 = times[idx], times[idx + 1]
        v0, v1 = values[idx], values[idx + 1]
        return t0, t1, v0, (v1 - v0) / (t1 - t0)

    @property
    def corner_times(self) -> np.ndarray:
        return self.times

    @property
    def max_abs_slope(self) -> float:
        if self.times.size < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.values) / np.diff(self.times))))


def _symbol_waveform(levels_per_symbol: np.ndarray, ui: float, t_edge: float
                     ) -> PiecewiseLinearDrive:
    """Build a PWL drive from per-symbol levels with ramps centered on boundaries."""
    n = levels_per_symbol.size
    times = [0.0]
    values = [levels_per_symbol[0]]
    half = 0.5 * t_edge
    for k in range(1, n):
        if levels_per_symbol[k] != levels_per_symbol[k - 1]:
            tb = k * ui
            times.extend([tb - half, tb + half])
            values.extend([levels_per_symbol[k - 1], levels_per_symbol[k]])
    times.append(n * ui)
    values.append(levels_per_symbol[-1])
    # first symbol shorter than half an edge cannot happen: t_edge < ui
    return PiecewiseLinearDrive(np.asarray(times), np.asarray(values))


def nrz_waveform(bits, ui: float, v_low: float, v_high: float,
                 t_edge: float) -> PiecewiseLinearDrive:
    """Two-level drive: bit k occupies [k*ui, (k+1)*ui), ramps of ``t_edge``
    centered on bit boundaries."""
    if t_edge >= ui:
        raise EdgeTooSlow(f"edge time {t_edge:.3g} s must be below one UI {ui:.3g} s")
    bits = np.asarray(bits, dtype=int)
    levels = np.where(bits > 0, v_high, v_low).astype(float)
    return _symbol_waveform(levels, ui, t_edge)


GRAY_PAM4 = {(0, 0): 0, (0, 1): 1, (1, 1): 2, (1, 0): 3}


def pam4_symbols(bits, gray: bool = True) -> np.ndarray:
    """Map consecutive bit pairs to PAM4 symbol indices (Gray by default)."""
    bits = np.asarray(bits, dtype=int)
    if bits.size % 2:
        bits = bits[:-1]
    pairs = bits.reshape(-1, 2)
    if gray:
        return np.array([GRAY_PAM4[(int(a), int(b))] for a, b in pairs], dtype=int)
    return pairs[:, 0] * 2 + pairs[:, 1]


def pam4_levels(vpp: float, v_bias: float) -> list[float]:
    """Equally spaced 4-level set spanning ``vpp`` around ``v_bias``."""
    lo = v_bias - vpp / 2.0
    return [lo + vpp * k / 3.0 for k in range(4)]


def pam4_waveform(bits, ui: float, levels, t_edge: float,
                  gray: bool = True) -> PiecewiseLinearDrive:
    """Four-level drive from a bit stream; ``ui`` is the symbol duration."""
    if t_edge >= ui:
        raise EdgeTooSlow(f"edge time {t_edge:.3g} s must be below one UI {ui:.3g} s")
    levels = [float(x) for x in levels]
    if len(levels) != 4 or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError(f"levels must be 4 strictly increasing voltages, got {levels}")
    symbols = pam4_symbols(bits, gray=gray)
    per_symbol = np.asarray([levels[s] for s in symbols], dtype=float)
    return _symbol_waveform(per_symbol, ui, t_edge)


# -- lasers ---------------------------------------------------------------------

def offset_frequency(lambda_laser: float, lambda_ref: float) -> float:
    """Baseband offset of an absolute laser wavelength: c (1/lambda_L - 1/lambda_R)."""
    return C_VACUUM * (1.0 / lambda_laser - 1.0 / lambda_ref)


@dataclass(frozen=True)
class CwLaser:
    """Constant-power, fixed-offset baseband source."""

    power: float        # [W]
    delta_f: float      # offset from the reference frequency [Hz]

    def __post_init__(self):
        if self.power < 0:
            raise ValueError(f"laser power must be >= 0, got {self.power}")
        if abs(self.delta_f) > MAX_BASEBAND_OFFSET:
            raise OffsetTooLarge(
                f"baseband offset {self.delta_f/1e9:.1f} GHz exceeds "
                f"{MAX_BASEBAND_OFFSET/1e9:.0f} GHz")

    def field(self, t):
        """Complex envelope sqrt(P) exp(j 2 pi delta_f t)."""
        amp = math.sqrt(self.power)
        phase = 2.0 * np.pi * self.delta_f * np.asarray(t, dtype=float)
        out = amp * np.exp(1j * phase)
        return complex(out) if out.ndim == 0 else out

    def dfield_dt(self, t):
        return 1j * 2.0 * np.pi * self.delta_f * self.field(t)

    def instantaneous_offset(self, t):
        return np.broadcast_to(self.delta_f, np.shape(t)).astype(float) \
            if np.ndim(t) else self.delta_f


def cw_laser(power: float, lambda_laser: float, lambda_ref: float) -> CwLaser:
    """CW source from absolute wavelengths; offset must stay in the baseband window."""
    return CwLaser(power=power, delta_f=offset_frequency(lambda_laser, lambda_ref))


@dataclass(frozen=True)
class ChirpLaser:
    """Linear frequency chirp with continuous phase.

    The instantaneous offset ramps from ``f_start`` to ``f_stop`` over
    ``duration`` and holds afterwards; the phase is the exact integral of
    the offset, so there are no phase jumps anywhere.
    """

    power: float
    f_start: float
    f_stop: float
    duration: float

    def __post_init__(self):
        if self.power < 0:
            raise ValueError(f"laser power must be >= 0, got {self.power}")
        if self.duration <= 0:
            raise ValueError(f"chirp duration must be positive, got {self.duration}")
        if max(abs(self.f_start), abs(self.f_stop)) > MAX_BASEBAND_OFFSET:
            raise OffsetTooLarge("chirp endpoints exceed the baseband offset window")

    @property
    def rate(self) -> float:
        return (self.f_stop - self.f_start) / self.duration

    def instantaneous_offset(self, t):
        t = np.asarray(t, dtype=float)
        tc = np.clip(t, 0.0, self.duration)
        out = self.f_start + self.rate * tc
        return float(out) if out.ndim == 0 else out

    def phase(self, t):
        t = np.asarray(t, dtype=float)
        tc = np.clip(t, 0.0, self.duration)
        ph = 2.0 * np.pi * (self.f_start * tc + 0.5 * self.rate * tc * tc)
        # after the chirp the offset holds at f_stop
        ph = ph + 2.0 * np.pi * self.f_stop * np.maximum(t - self.duration, 0.0)
        return float(ph) if ph.ndim == 0 else ph

    def field(self, t):
        out = math.sqrt(self.power) * np.exp(1j * self.phase(t))
        return complex(out) if np.ndim(t) == 0 else out

    def dfield_dt(self, t):
        return 1j * 2.0 * np.pi * self.instantaneous_offset(t) * self.field(t)


def chirp_laser(power: float, f_start: float, f_stop: float,
                duration: float) -> ChirpLaser:
    return ChirpLaser(power=power, f_start=f_start, f_stop=f_stop, duration=duration)


# -- heater drive -----------------------------------------------------------------

@dataclass(frozen=True)
class HeaterDrive:
    """Piecewise-constant heater power [W]; switch times are solver corners."""

    times: np.ndarray = field(default_factory=lambda: np.array([0.0]))
    powers: np.ndarray = field(default_factory=lambda: np.array([0.0]))

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.powers, dtype=float)
        if t.shape != p.shape or t.ndim != 1 or t.size < 1:
            raise ValueError("times and powers must be equal-length 1-D arrays")
        if np.any(p < 0):
            raise ValueError("heater power must be non-negative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "powers", p)

    @classmethod
    def constant(cls, p_h: float) -> "HeaterDrive":
        return cls(np.array([0.0]), np.array([float(p_h)]))

    def power(self, t: float) -> float:
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return float(self.powers[max(idx, 0)])

    @property
    def corner_times(self) -> np.ndarray:
        return self.times


# -- combined stimulus ---------------------------------------------------------

@dataclass(frozen=True)
class Stimulus:
    """Everything that drives one transient run.

    ``t_end`` is the end of the defined drive interval; solvers integrate
    over [0, t_end] unless told otherwise.
    """

    voltage_drive: PiecewiseLinearDrive
    laser: CwLaser | ChirpLaser
    t_end: float
    heater_drive: HeaterDrive = field(default_factory=HeaterDrive)

    def __post_init__(self):
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")

    def corner_times(self) -> np.ndarray:
        """Sorted unique corner times inside [0, t_end], including both ends."""
        pts = [np.array([0.0, self.t_end]),
               self.voltage_drive.corner_times,
               self.heater_drive.corner_times]
        if isinstance(self.laser, ChirpLaser):
            pts.append(np.array([self.laser.duration]))
        t = np.unique(np.concatenate(pts))
        return t[(t >= 0.0) & (t <= self.t_end)]


def constant_drive(v: float) -> PiecewiseLinearDrive:
    return PiecewiseLinearDrive(np.array([0.0]), np.array([float(v)]))


def step_drive(v0: float, v1: float, t_step: float, t_edge: float) -> PiecewiseLinearDrive:
    """Single edge from v0 to v1, ramping over ``t_edge`` starting at ``t_step``."""
    return PiecewiseLinearDrive(np.array([0.0, t_step, t_step + t_edge]),
                                np.array([v0, v0, v1], dtype=float))
