"""Lumped electrical parasitic network of the modulator pads and junction.

Topology (all relative to the probe pad node ``v1``):

* source ``v_src`` drives ``v1`` through the source impedance ``Z0``
  (unterminated probe: ``Z0`` appears only in series, no shunt at the device),
* ``Cpad`` from ``v1`` to ground,
* substrate branch: ``RSi`` from ``v1`` to an internal node, ``Cox`` from
  that node to ground (``v_cox`` is the voltage across ``Cox``),
* junction branch: ``Rs`` from ``v1`` to the junction node, the
  voltage-dependent depletion capacitance ``Cj(v_m)`` to ground.

Positive ``v_m`` means reverse bias.  The depletion formula
``Cj = Cj0 / (1 + v_m/Vbi)^mj`` loses validity near forward conduction, so
the junction voltage is limited to ``v_m > -0.9 Vbi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ForwardBiasLimit

# Fraction of Vbi kept as a guard band before forward conduction.
CLAMP_FRACTION = 0.1


@dataclass(frozen=True)
class ElectricalParams:
    """Extracted parasitic network values.

    All capacitances in farads, resistances in ohms.  ``Z0`` is the source
    (reference) impedance, ``Rh`` the heater resistance carried along for
    the model card.
    """

    Cj0: float
    Vbi: float
    mj: float
    Rs: float
    Cox: float
    RSi: float
    Cpad: float
    Z0: float = 50.0
    Rh: float | None = None

    def __post_init__(self):
        for name in ("Cj0", "Vbi", "Rs", "Cox", "RSi", "Cpad", "Z0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.mj < 1.0:
            raise ValueError(f"mj must be in (0, 1), got {self.mj}")
        if self.Rh is not None and self.Rh <= 0:
            raise ValueError(f"Rh must be positive, got {self.Rh}")

    @property
    def v_m_floor(self) -> float:
        """Most negative junction voltage the depletion formula accepts."""
        return -(1.0 - CLAMP_FRACTION) * self.Vbi

    def junction_capacitance(self, v_m: float) -> float:
        """Depletion capacitance [F] at junction voltage ``v_m`` (reverse positive).

        Raises
        ------
        ForwardBiasLimit
            If ``v_m`` is within the guard band of forward conduction.
        """
        if v_m <= self.v_m_floor:
            raise ForwardBiasLimit(
                f"junction voltage {v_m:.4g} V below depletion-model floor "
                f"{self.v_m_floor:.4g} V")
        return self.Cj0 / (1.0 + v_m / self.Vbi) ** self.mj

    def junction_capacitance_dv(self, v_m: float) -> float:
        """d Cj / d v_m [F/V], used by the solver Jacobian."""
        cj = self.junction_capacitance(v_m)
        return -self.mj * cj / (self.Vbi + v_m)

    def input_impedance(self, v_bias: float, f):
        """Small-signal input impedance [ohm] of the pad network at bias ``v_bias``.

        ``f`` may be a scalar or ndarray of frequencies [Hz], all > 0.
        """
        f = np.asarray(f, dtype=float)
        if np.any(f <= 0):
            raise ValueError("frequency must be positive")
        jw = 1j * 2.0 * np.pi * f
        cj = self.junction_capacitance(v_bias)
        y = jw * self.Cpad
        y = y + 1.0 / (self.RSi + 1.0 / (jw * self.Cox))
        y = y + 1.0 / (self.Rs + 1.0 / (jw * cj))
        z = 1.0 / y
        return complex(z) if z.ndim == 0 else z

    def s11(self, v_bias: float, f):
        """One-port reflection coefficient against ``Z0``."""
        z = self.input_impedance(v_bias, f)
        return (z - self.Z0) / (z + self.Z0)

    def electrical_bandwidth(self, v_bias: float) -> float:
        """Self-bandwidth of the Rs-Cj branch: ``1 / (2 pi Rs Cj(v_bias))`` [Hz]."""
        return 1.0 / (2.0 * math.pi * self.Rs * self.junction_capacitance(v_bias))

    def to_dict(self) -> dict:
        d = {"Cj0": self.Cj0, "Vbi": self.Vbi, "mj": self.mj, "Rs": self.Rs,
             "Cox": self.Cox, "RSi": self.RSi, "Cpad": self.Cpad, "Z0": self.Z0}
        if self.Rh is not None:
            d["Rh"] = self.Rh
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ElectricalParams":
        return cls(Cj0=float(d["Cj0"]), Vbi=float(d["Vbi"]), mj=float(d["mj"]),
                   Rs=float(d["Rs"]), Cox=float(d["Cox"]), RSi=float(d["RSi"]),
                   Cpad=float(d["Cpad"]), Z0=float(d.get("Z0", 50.0)),
                   Rh=None if d.get("Rh") is None else float(d["Rh"]))


@dataclass
class ElectricalState:
    """Node voltages of the parasitic network.

    ``v1`` is the pad node, ``v_cox`` the voltage across the substrate
    capacitor and ``v_m`` the voltage across the junction (the modulating
    voltage seen by the optics).
    """

    v1: float = 0.0
    v_cox: float = 0.0
    v_m: float = 0.0


def network_derivatives(ep: ElectricalParams, st: ElectricalState,
                        v_src: float) -> ElectricalState:
    """Time derivatives of the three node voltages for source value ``v_src``.

    Returns an :class:`ElectricalState` whose fields hold d/dt values [V/s].
    """
    i_sub = (st.v1 - st.v_cox) / ep.RSi
    i_j = (st.v1 - st.v_m) / ep.Rs
    dv1 = ((v_src - st.v1) / ep.Z0 - i_sub - i_j) / ep.Cpad
    dv_cox = i_sub / ep.Cox
    dv_m = i_j / ep.junction_capacitance(st.v_m)
    return ElectricalState(v1=dv1, v_cox=dv_cox, v_m=dv_m)


# -- S11 CSV interchange -------------------------------------------------------

S11_HEADER = "f_Hz,re_s11,im_s11"


def write_s11_csv(path, f, s11_values) -> None:
    """Write an S11 response as CSV with columns f_Hz, re_s11, im_s11."""
    f = np.asarray(f, dtype=float)
    s = np.asarray(s11_values, dtype=complex)
    lines = [S11_HEADER]
    for fi, si in zip(f, s):
        lines.append(f"{float(fi)!r},{float(si.real)!r},{float(si.imag)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_s11_csv(path):
    """Read an S11 CSV; returns (f [Hz], complex s11) arrays.

    Raises :class:`ValueError` naming the offending row on malformed data.
    """
    freqs = []
    vals = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header.replace(" ", "") != S11_HEADER:
            raise ValueError(f"{path}: expected header '{S11_HEADER}', got '{header}'")
        for row_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"{path}: row {row_no}: expected 3 columns, got {len(parts)}")
            try:
                fi, re, im = (float(p) for p in parts)
            except ValueError:
                raise ValueError(f"{path}: row {row_no}: non-numeric value") from None
            freqs.append(fi)
            vals.append(complex(re, im))
    return np.asarray(freqs), np.asarray(vals)
