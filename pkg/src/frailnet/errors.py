"""Exception types shared across the package.

Everything raised intentionally derives from FrailnetError so callers
(and the command line front end) can distinguish our failures from
genuine bugs.
"""


class FrailnetError(Exception):
    """Base class for all errors raised by this package."""


class SpecError(FrailnetError, ValueError):
    """A configuration object (frailty spec, net spec, train config...) is invalid."""


class DomainError(FrailnetError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class NonFiniteError(FrailnetError, FloatingPointError):
    """A computation produced NaN or infinity where a finite value is required."""


class DataFormatError(FrailnetError, ValueError):
    """Input data (CSV, schema, config file) could not be parsed or validated."""


class HorizonError(FrailnetError, ValueError):
    """A prediction was requested beyond the model's supported time horizon."""


class NoComparablePairsError(FrailnetError, ValueError):
    """A ranking metric was asked for on data with no usable pairs."""


class CalibrationError(FrailnetError, RuntimeError):
    """Iterative calibration (e.g. censoring-rate search) failed to converge."""
