"""Exception hierarchy.

Validation problems (bad parameters, out-of-domain inputs, malformed configs)
derive from :class:`ValidationError`; failures of a numerical procedure on
valid input derive from :class:`NumericalError`.  The CLI maps them to exit
codes 2 and 3.
"""


class HypKPPError(Exception):
    exit_code = 1


class ValidationError(HypKPPError, ValueError):
    exit_code = 2


class NumericalError(HypKPPError, ArithmeticError):
    exit_code = 3


class InvalidParameter(ValidationError):
    pass


class InvalidDimension(ValidationError):
    pass


class InvalidTime(ValidationError):
    pass


class OutOfDomain(ValidationError):
    pass


class NotKPP(ValidationError):
    pass


class NoMonotoneFront(ValidationError):
    """Requested speed is below the minimal speed 2*sqrt(f'(0))."""


class NotNormalizable(ValidationError):
    pass


class InvalidDatum(ValidationError):
    pass


class InvalidData(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class CoverageError(ValidationError):
    """A requested coordinate range leaves the simulated window."""


class NoFront(ValidationError):
    pass


class SeedFailure(NumericalError):
    pass


class IllConditionedFit(NumericalError):
    pass


class SolverFailure(NumericalError):
    """Linear solve breakdown or non-finite state."""


class OverflowGuard(NumericalError):
    pass


class AmbiguousBeta(NumericalError):
    pass
