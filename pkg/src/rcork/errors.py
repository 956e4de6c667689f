"""Exception types shared across the solver stack."""


class RcorkError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(RcorkError):
    """Matrix or vector shapes are not conformal with the problem."""


class PoleError(RcorkError):
    """The evaluation point is a pole of R: (C - lambda*D) is singular
    or numerically singular (condition estimate beyond the configured bound)."""


class SingularShiftError(RcorkError):
    """R(mu) is singular at the requested shift: mu is (numerically) an
    eigenvalue and cannot be used for shift-and-invert."""


class ZeroVectorError(RcorkError):
    """A vector required to be nonzero is numerically zero."""


class SizeCapError(RcorkError):
    """A dense test-oracle assembly was requested above the size cap."""


class BreakdownError(RcorkError):
    """The Krylov iteration broke down: the candidate basis vector lies in
    the current subspace (h_{j+1,j} below the breakdown tolerance).

    When raised from a full solver run, the partial result accumulated so
    far is attached as the ``result`` attribute (may be None).
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NumericalError(RcorkError):
    """A dense kernel (QZ, Schur reordering, SVD) failed to converge."""


class RankCollapseError(RcorkError):
    """Restart compression produced an empty polynomial-block basis."""


class ParseError(RcorkError):
    """A manifest or matrix file could not be parsed."""


class BudgetExhausted(RcorkError):
    """Iteration or restart budget ran out before the requested number of
    eigenpairs converged.  Carries the partial result as ``result``."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
