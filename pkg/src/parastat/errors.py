"""Exception types shared across the package.

Each error carries the CLI exit code it maps to, so the command layer
does not need a lookup table.
"""


class ParastatError(Exception):
    exit_code = 4


class DivergentIntegral(ParastatError, ValueError):
    pass


class PoleAtZero(ParastatError, ValueError):
    pass


class OutOfRange(ParastatError, ValueError):
    pass


class InfeasibleProblem(ParastatError, ValueError):
    pass


class NoConvergence(ParastatError, RuntimeError):
    exit_code = 5


class BudgetExceeded(ParastatError, RuntimeError):
    exit_code = 3


class HypothesisUnmet(ParastatError, ValueError):
    pass


class InsufficientData(ParastatError, ValueError):
    pass


class NonPositiveValue(ParastatError, ValueError):
    pass


class EmptySeries(ParastatError, ValueError):
    pass


class WindowOutOfRange(ParastatError, ValueError):
    pass


class NonlinearWindow(ParastatError, ValueError):
    pass


class DivergenceUndetermined(ParastatError, ValueError):
    pass


class DegenerateSeries(ParastatError, ValueError):
    pass


class ZeroEnergy(ParastatError, ValueError):
    pass


class IllConditionedFit(ParastatError, ValueError):
    pass


class UnsupportedAlpha(ParastatError, ValueError):
    pass
