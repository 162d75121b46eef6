"""Microheater model: electrical branch, static tuning and optional lag.

The heater red-shifts the resonance proportionally to dissipated power,
``dlambda = gamma * P_h``.  The static model applies the shift instantly,
matching how the device is normally characterized.  An opt-in first-order
lag with time constant ``tau_h`` is available for wavelength-stabilization
studies; it settles to the static value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import HeaterOverdrive

HEATER_V_MAX = 8.0  # rated heater drive [V]


class HeaterPower(NamedTuple):
    p_h: float  # dissipated power [W]
    i_h: float  # heater current [A]


@dataclass(frozen=True)
class ThermalParams:
    gamma: float        # tuning efficiency [m/W]
    Rh: float           # heater resistance [ohm], constant
    tau_h: float        # thermal time constant [s]
    dynamic: bool = False

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.Rh <= 0:
            raise ValueError(f"Rh must be positive, got {self.Rh}")
        if self.tau_h <= 0:
            raise ValueError(f"tau_h must be positive, got {self.tau_h}")

    def heater_power(self, v_h: float) -> HeaterPower:
        """Dissipated power and current for heater voltage ``v_h`` (0..8 V)."""
        if not 0.0 <= v_h <= HEATER_V_MAX:
            raise HeaterOverdrive(f"heater voltage {v_h:.3g} V outside 0..{HEATER_V_MAX:g} V")
        return HeaterPower(v_h * v_h / self.Rh, v_h / self.Rh)

    def static_shift(self, p_h: float) -> float:
        """Steady-state resonance shift [m] for heater power ``p_h`` >= 0."""
        if p_h < 0:
            raise ValueError(f"heater power must be non-negative, got {p_h}")
        return self.gamma * p_h

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "Rh": self.Rh, "tau_h": self.tau_h,
                "dynamic": self.dynamic}

    @classmethod
    def from_dict(cls, d: dict) -> "ThermalParams":
        return cls(gamma=float(d["gamma"]), Rh=float(d["Rh"]),
                   tau_h=float(d["tau_h"]), dynamic=bool(d.get("dynamic", False)))


@dataclass
class ThermalState:
    """Current thermo-optic resonance shift [m]; non-negative."""

    dlambda: float = 0.0


def shift_step(tp: ThermalParams, st: ThermalState, p_h: float, dt: float) -> ThermalState:
    """Advance the lagged shift over ``dt`` with constant heater power.

    Integrates d(dlambda)/dt = (gamma*p_h - dlambda)/tau_h exactly.
    """
    if not tp.dynamic:
        raise ValueError("shift_step requires ThermalParams.dynamic")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    target = tp.static_shift(p_h)
    decay = math.exp(-dt / tp.tau_h)
    return ThermalState(dlambda=target + (st.dlambda - target) * decay)
