"""Exception hierarchy shared by all resomod modules.

Two families exist so the CLI can map failures to exit codes without
inspecting messages: `InputError` covers bad user-supplied data (exit 2),
`NumericalError` covers solver and fitting failures (exit 3).
"""


class ResomodError(Exception):
    """Base class for all package errors."""


class InputError(ResomodError):
    """Invalid user input: bad schema, bad file, out-of-domain request."""


class NumericalError(ResomodError):
    """A numerical procedure failed: divergence, underflow, degeneracy."""


# -- model / parameter domain ----------------------------------------------

class OutOfRangeBias(InputError):
    """Bias voltage outside the validity window of the fitted polynomials."""


class NonPhysicalFit(NumericalError):
    """A fitted decay-time polynomial evaluated to a non-positive value."""


class ForwardBiasLimit(InputError):
    """Junction driven too far into forward bias for the depletion formula."""


class HeaterOverdrive(InputError):
    """Heater voltage above the rated maximum."""


# -- stimulus ---------------------------------------------------------------

class BadSeed(InputError):
    """Zero seed handed to the LFSR pattern generator."""


class EdgeTooSlow(InputError):
    """Requested edge time does not fit inside one unit interval."""


class OffsetTooLarge(InputError):
    """Laser offset outside the baseband validity window."""


# -- solver -----------------------------------------------------------------

class StepSizeUnderflow(NumericalError):
    """Adaptive controller pushed the step below the configured minimum."""


# -- extraction -------------------------------------------------------------

class NoResonanceFound(InputError):
    """Transmission sweep has no usable resonance dip."""


class FitDiverged(NumericalError):
    """Least-squares fit failed to reach an acceptable residual."""


class DegenerateT0(NumericalError):
    """Resonance too shallow to separate coupling from loss."""


class InsufficientPoints(InputError):
    """Not enough data points for the requested fit."""


class BadDomain(NumericalError):
    """Fit iterate left the domain where the model is defined."""


# -- analysis ---------------------------------------------------------------

class TraceTooShort(InputError):
    """Trace does not cover enough unit intervals for the requested analysis."""


class InsufficientTransitions(InputError):
    """Bit pattern contains too few usable transitions for edge metrics."""


class MisalignedTraces(InputError):
    """Two traces do not cover the same time interval."""


class ChirpTooFastWarning(UserWarning):
    """Chirp sweep rate violates the quasi-static dwell criterion."""
