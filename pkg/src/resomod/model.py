"""Lumped resonator model: fitted parameters and closed-form optics.

The modulator is described by an energy amplitude whose squared magnitude
is the optical energy stored in the disk or ring.  Two decay channels act
on it: intrinsic loss (time constant ``tau_l``) and coupling into the bus
waveguide (``tau_c``), combining as ``1/tau = 1/tau_c + 1/tau_l``.  The
resonance wavelength and both time constants are low-order polynomials of
the junction voltage, obtained by fitting measured wavelength sweeps (see
:mod:`resomod.extraction`).

All quantities are SI internally: wavelengths in meters, times in seconds.
Conversions from nm / ps / fF happen at the file-format boundary only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import NonPhysicalFit, OutOfRangeBias

C_VACUUM = 299792458.0  # speed of light in vacuum [m/s]

SCHEMA_VERSION = 1


def _polyval(coeffs, v):
    """Evaluate a polynomial with ascending coefficients by Horner's rule."""
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * v + c
    return acc


def _poly_min_on_interval(coeffs, lo: float, hi: float) -> float:
    """Minimum of a degree<=2 polynomial on [lo, hi] (endpoints + vertex)."""
    candidates = [_polyval(coeffs, lo), _polyval(coeffs, hi)]
    if len(coeffs) == 3 and coeffs[2] != 0.0:
        vertex = -coeffs[1] / (2.0 * coeffs[2])
        if lo < vertex < hi:
            candidates.append(_polyval(coeffs, vertex))
    return min(candidates)


class DecayTimes(NamedTuple):
    """Decay time constants and coupling factor at one bias point."""

    tau_c: float   # coupling decay time [s]
    tau_l: float   # intrinsic-loss decay time [s]
    tau: float     # net amplitude decay time [s]
    mu: float      # energy cross-coupling factor [sqrt(1/s)]


class QualityMetrics(NamedTuple):
    q: float       # loaded quality factor
    f_opt: float   # optical 3 dB bandwidth [Hz]
    fwhm: float    # resonance full width at half depth [Hz]


@dataclass(frozen=True)
class ResonatorParams:
    """Fitted optical model of one resonant modulator.

    Parameters
    ----------
    lambda_ref : float
        Reference wavelength of the baseband (analytic-signal) frame [m].
        Must lie within 1 nm of the zero-bias resonance so baseband
        offsets stay small.
    lambda0_coeffs : sequence of float
        Resonance wavelength polynomial, ascending: [m, m/V] or
        [m, m/V, m/V^2].
    tau_c_coeffs, tau_l_coeffs : sequence of float
        Quadratic voltage polynomials of the two decay times, ascending:
        [s, s/V, s/V^2].
    v_range : (float, float)
        Validity window of the polynomial fits [V].  Evaluation outside
        raises :class:`OutOfRangeBias`; quadratic extrapolation of decay
        times can go negative, so no extrapolation is offered.
    gamma : float or None
        Heater tuning efficiency [m/W].  ``None`` when no thermo-optic
        data was available to the fit.
    """

    lambda_ref: float
    lambda0_coeffs: tuple[float, ...]
    tau_c_coeffs: tuple[float, ...]
    tau_l_coeffs: tuple[float, ...]
    v_range: tuple[float, float]
    gamma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "lambda0_coeffs", tuple(float(c) for c in self.lambda0_coeffs))
        object.__setattr__(self, "tau_c_coeffs", tuple(float(c) for c in self.tau_c_coeffs))
        object.__setattr__(self, "tau_l_coeffs", tuple(float(c) for c in self.tau_l_coeffs))
        object.__setattr__(self, "v_range", (float(self.v_range[0]), float(self.v_range[1])))

        if len(self.lambda0_coeffs) not in (2, 3):
            raise ValueError("lambda0_coeffs must have degree 1 or 2 (2 or 3 coefficients)")
        for name, coeffs in (("tau_c_coeffs", self.tau_c_coeffs),
                             ("tau_l_coeffs", self.tau_l_coeffs)):
            if len(coeffs) != 3:
                raise ValueError(f"{name} must be quadratic (3 coefficients)")
        lo, hi = self.v_range
        if not lo < hi:
            raise ValueError(f"v_range must be ordered, got {self.v_range}")
        for name, coeffs in (("tau_c", self.tau_c_coeffs), ("tau_l", self.tau_l_coeffs),
                             ("lambda0", self.lambda0_coeffs)):
            if _poly_min_on_interval(coeffs, lo, hi) <= 0.0:
                raise ValueError(f"{name}(v) must stay positive over v_range {self.v_range}")
        lam00 = _polyval(self.lambda0_coeffs, 0.0)
        if abs(self.lambda_ref - lam00) > 1e-9:
            raise ValueError(
                f"lambda_ref must be within 1 nm of the zero-bias resonance "
                f"({lam00*1e9:.4f} nm), got {self.lambda_ref*1e9:.4f} nm")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    # -- polynomial evaluation ------------------------------------------

    def _check_bias(self, v: float) -> None:
        lo, hi = self.v_range
        if not (lo - 1e-12 <= v <= hi + 1e-12):
            raise OutOfRangeBias(
                f"bias {v:.4g} V outside fitted window [{lo:.4g}, {hi:.4g}] V")

    def resonance_wavelength(self, v: float, dlambda: float = 0.0) -> float:
        """Resonance wavelength [m] at bias ``v`` with thermo-optic shift ``dlambda``."""
        self._check_bias(v)
        return dlambda + _polyval(self.lambda0_coeffs, v)

    def decay_times(self, v: float) -> DecayTimes:
        """Evaluate the decay-time polynomials at bias ``v``.

        Returns
        -------
        DecayTimes
            ``tau = 1/(1/tau_c + 1/tau_l)`` and ``mu = sqrt(2/tau_c)``.

        Raises
        ------
        NonPhysicalFit
            If either polynomial evaluates non-positive at ``v``.
        """
        self._check_bias(v)
        tau_c = _polyval(self.tau_c_coeffs, v)
        tau_l = _polyval(self.tau_l_coeffs, v)
        if tau_c <= 0.0 or tau_l <= 0.0:
            raise NonPhysicalFit(
                f"decay time non-positive at v={v:.4g} V "
                f"(tau_c={tau_c:.3g} s, tau_l={tau_l:.3g} s)")
        tau = 1.0 / (1.0 / tau_c + 1.0 / tau_l)
        mu = math.sqrt(2.0 / tau_c)
        return DecayTimes(tau_c, tau_l, tau, mu)

    # -- closed-form optics ----------------------------------------------

    def resonance_omega(self, v: float, dlambda: float = 0.0) -> float:
        """Absolute resonance angular frequency [rad/s]."""
        return 2.0 * math.pi * C_VACUUM / self.resonance_wavelength(v, dlambda)

    def steady_state_amplitude(self, v: float, dlambda: float,
                               omega_laser: float, e_in: complex) -> complex:
        """Steady-state energy amplitude for a CW drive at ``omega_laser``.

        ``a = -j sqrt(2/tau_c) / (j (omega - omega_0) + 1/tau) * e_in``
        """
        d = self.decay_times(v)
        omega0 = self.resonance_omega(v, dlambda)
        return (-1j * d.mu) / (1j * (omega_laser - omega0) + 1.0 / d.tau) * e_in

    def static_transmission(self, v: float, dlambda: float, lambda_laser):
        """Lorentzian power transmission at the given laser wavelength(s).

        Accepts a scalar or an ndarray of wavelengths [m]; returns the
        matching shape.  Values lie in [0, 1].
        """
        d = self.decay_times(v)
        omega0 = self.resonance_omega(v, dlambda)
        omega = 2.0 * np.pi * C_VACUUM / np.asarray(lambda_laser, dtype=float)
        det2 = (omega - omega0) ** 2
        diff = 1.0 / d.tau_l - 1.0 / d.tau_c
        summ = 1.0 / d.tau_l + 1.0 / d.tau_c
        t = (det2 + diff * diff) / (det2 + summ * summ)
        if np.isscalar(lambda_laser):
            return float(t)
        return t

    def quality_metrics(self, v: float, dlambda: float = 0.0) -> QualityMetrics:
        """Loaded Q, optical 3 dB bandwidth and linewidth at bias ``v``.

        Loaded Q is defined from the amplitude decay time as
        ``Q = omega_0 tau / 2``, which makes the optical bandwidth
        ``f_opt = omega_0 / (2 pi Q) = 1/(pi tau)`` coincide with the
        full width at half depth of the power dip.
        """
        d = self.decay_times(v)
        omega0 = self.resonance_omega(v, dlambda)
        q = omega0 * d.tau / 2.0
        fwhm = 1.0 / (math.pi * d.tau)
        return QualityMetrics(q, fwhm, fwhm)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "lambda_ref": self.lambda_ref,
            "lambda0_coeffs": list(self.lambda0_coeffs),
            "tau_c_coeffs": list(self.tau_c_coeffs),
            "tau_l_coeffs": list(self.tau_l_coeffs),
            "v_range": list(self.v_range),
            "gamma": self.gamma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ResonatorParams":
        return cls(
            lambda_ref=float(d["lambda_ref"]),
            lambda0_coeffs=tuple(d["lambda0_coeffs"]),
            tau_c_coeffs=tuple(d["tau_c_coeffs"]),
            tau_l_coeffs=tuple(d["tau_l_coeffs"]),
            v_range=tuple(d["v_range"]),
            gamma=None if d.get("gamma") is None else float(d["gamma"]),
        )


@dataclass(frozen=True)
class ResonatorGeometry:
    """Optional geometric description; informational only.

    The runtime model never needs geometry: the coupling factor is always
    derived from ``tau_c``.  When geometry is known this type lets the two
    descriptions be cross-checked.
    """

    radius: float          # [m]
    group_velocity: float  # [m/s]
    kappa_sq: float        # power coupling coefficient
    n_eff: float           # effective index
    resonance_order: int

    @property
    def circumference(self) -> float:
        return 2.0 * math.pi * self.radius

    def mu_sq(self) -> float:
        """Energy cross-coupling rate from geometry: kappa^2 vg / (2 pi R)."""
        return self.kappa_sq * self.group_velocity / self.circumference

    def consistent_with(self, params: ResonatorParams, rel_tol: float = 0.01) -> bool:
        """True when geometry matches the fitted zero-bias coupling within rel_tol."""
        d = params.decay_times(0.0)
        return abs(self.mu_sq() - 2.0 / d.tau_c) <= rel_tol * (2.0 / d.tau_c)


# -- model card I/O -----------------------------------------------------------
#
# A "model card" is the JSON bundle consumed by the simulator: the fitted
# optical parameters plus the electrical parasitic network and the heater
# description.  Wavelengths are stored in meters as plain decimal floats.

def model_card_dict(resonator: ResonatorParams, electrical=None, thermal=None) -> dict:
    card = {"schema_version": SCHEMA_VERSION, "resonator": resonator.to_dict()}
    if electrical is not None:
        card["electrical"] = electrical.to_dict()
    if thermal is not None:
        card["thermal"] = thermal.to_dict()
    return card


def save_model_card(path, resonator: ResonatorParams, electrical=None, thermal=None) -> None:
    Path(path).write_text(json.dumps(model_card_dict(resonator, electrical, thermal), indent=2)
                          + "\n")


def load_model_card(path):
    """Load a model card; returns (ResonatorParams, ElectricalParams|None, ThermalParams|None)."""
    from .electrical import ElectricalParams
    from .thermal import ThermalParams

    d = json.loads(Path(path).read_text())
    resonator = ResonatorParams.from_dict(d["resonator"])
    electrical = ElectricalParams.from_dict(d["electrical"]) if "electrical" in d else None
    thermal = ThermalParams.from_dict(d["thermal"]) if "thermal" in d else None
    return resonator, electrical, thermal
