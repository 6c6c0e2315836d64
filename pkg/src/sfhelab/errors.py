"""Exception types raised across the package.

Every error that the command-line layer maps to a "numerical contract"
failure derives from :class:`NumericalContractError`; configuration and
argument problems derive from :class:`ConfigError`.
"""


class SfheError(Exception):
    """Base class for all package errors."""


class ConfigError(SfheError, ValueError):
    """Malformed configuration file or command-line arguments."""


class OutOfRange(ConfigError):
    """A model parameter lies outside its open admissible interval."""

    def __init__(self, which, value, interval):
        self.which = which
        self.value = value
        self.interval = interval
        lo, hi = interval
        super().__init__(f"{which}={value!r} outside admissible open interval ({lo:.6g}, {hi:.6g})")


class NumericalContractError(SfheError):
    """A numerical guarantee could not be met."""


class NotIntegrable(NumericalContractError, ValueError):
    def __init__(self, end, exponent):
        self.end = end
        self.exponent = exponent
        super().__init__(f"integrand not integrable at {end}: effective power exponent {exponent:.6g}")


class ToleranceNotMet(NumericalContractError):
    pass


class PSDRepairExceeded(NumericalContractError):
    pass


class NyquistViolation(NumericalContractError, ValueError):
    pass


class TruncationBudgetExceeded(NumericalContractError):
    pass


class EdgeTooClose(NumericalContractError, ValueError):
    pass


class RegionViolation(NumericalContractError, ValueError):
    pass


class SeparationViolated(NumericalContractError):
    def __init__(self, pair, value, delta):
        self.pair = pair
        self.value = value
        self.delta = delta
        super().__init__(f"pair {pair} has metric {value:.6g} < separation {delta:.6g}")


class DivergentSeries(NumericalContractError):
    pass


class ValidityWindowViolated(ConfigError):
    pass


class ResolutionInsufficient(NumericalContractError):
    pass
