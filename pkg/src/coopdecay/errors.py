"""Exception hierarchy.

Every failure raised by the library derives from :class:`CoopDecayError` so the
command line layer can map it onto an exit code without catching unrelated
bugs.
"""


class CoopDecayError(Exception):
    """Base class for all library errors."""


class InvalidParameters(CoopDecayError, ValueError):
    pass


class InvalidState(CoopDecayError, ValueError):
    pass


class DenominatorUnderflow(CoopDecayError, ArithmeticError):
    pass


class OverflowGuard(CoopDecayError, OverflowError):
    """Exponent would overflow; the decay-rate guess is far too small."""


class QuadratureFailure(CoopDecayError):
    pass


class NoRoot(CoopDecayError):
    pass


class GridTooNarrow(CoopDecayError):
    pass


class StepSizeUnderflow(CoopDecayError):
    pass


class NegativeSpectralDensity(CoopDecayError):
    pass


class NoHalfCrossing(CoopDecayError):
    pass


class NoPlateau(CoopDecayError):
    pass


class ConfigError(CoopDecayError):
    pass
