"""Compact-model simulation and parameter extraction for resonant
electro-optic modulators (microdisks and microrings)."""

from .analysis import (EyeDiagram, benchmark_report, compare_solvers,
                       eye_metrics, fcm_spectrum, fold_eye)
from .electrical import ElectricalParams, ElectricalState, network_derivatives
from .extraction import (TransmissionSweep, deembed, extract_per_bias, fit_cv,
                         fit_gamma, fit_s11, fit_tau, fit_voltage_polys,
                         find_resonance)
from .model import (C_VACUUM, DecayTimes, QualityMetrics, ResonatorGeometry,
                    ResonatorParams, load_model_card, model_card_dict,
                    save_model_card)
from .solver import (FieldSample, ResonatorState, SimState, SolverConfig, Trace,
                     integrate_adaptive, integrate_fixed_baseline,
                     output_field, resonator_derivatives)
from .stimulus import (ChirpLaser, CwLaser, HeaterDrive, PiecewiseLinearDrive,
                       Stimulus, chirp_laser, constant_drive, cw_laser,
                       nrz_waveform, offset_frequency, pam4_levels,
                       pam4_waveform, prbs_bits, step_drive)
from .thermal import ThermalParams, ThermalState, shift_step

__version__ = "0.1.0"
