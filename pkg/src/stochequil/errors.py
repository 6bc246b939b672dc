"""Exception vocabulary shared across the package.

Every error raised deliberately by stochequil derives from
:class:`StochequilError`, so callers can catch the package's failures
without also swallowing programming bugs.
"""

from __future__ import annotations


class StochequilError(Exception):
    """Base class for all stochequil errors."""


# --- model / validation -------------------------------------------------

class NotOnSimplex(StochequilError):
    """Coordinates are not a valid point of the price simplex."""


class DimensionMismatch(StochequilError):
    """Array shapes disagree with the model's dimensions."""


# --- equilibrium solvers ------------------------------------------------

class ZeroEndowmentColumn(StochequilError):
    """Some commodity has zero total endowment; the share matrix is undefined."""


class EigenvectorFailure(StochequilError):
    """Stationary-vector computation failed or the residual check did not pass."""


class NoSignChange(StochequilError):
    """Bisection found no bracketing interval for the excess-demand root."""


class NonCDModel(StochequilError):
    """Operation requires a Cobb-Douglas structure (or an l=1 fallback)."""


# --- cumulant generating function / entropy -----------------------------

class EmptySupport(StochequilError):
    """Distribution has no atoms / quadrature nodes to sum over."""


class InexactDistribution(StochequilError):
    """Operation needs exact support (atoms or quadrature), not a bare sampler."""


class NotPossibleEquilibriumPrice(StochequilError):
    """Zero is not interior to the convex hull of the excess-demand support."""


class NotPossibleCompositeEquilibrium(StochequilError):
    """The (price, macro observation) pair is not jointly attainable."""


class SingularHessian(StochequilError):
    """Tilted covariance is singular; the Newton step is undefined."""


class SolverStalled(StochequilError):
    """Iteration budget exhausted without meeting the convergence tolerance."""


class AllInfeasible(StochequilError):
    """No grid point admits a conjugate solution."""


# --- canonical distributions --------------------------------------------

class UnboundedTilt(StochequilError):
    """No finite rejection envelope for the tilted density could be found."""


# --- Monte Carlo --------------------------------------------------------

class NonUniqueEquilibrium(StochequilError):
    """Model admits multiple equilibria; the hit indicator is ill-defined."""


class TooLarge(StochequilError):
    """Exact enumeration would exceed the state budget."""


class NoAcceptedConfigurations(StochequilError):
    """No replica landed in the conditioning event."""


class SingularSigma(StochequilError):
    """Covariance matrix is singular; the quadratic form is undefined."""


# --- ideal gas fixtures -------------------------------------------------

class TruncationTooTight(StochequilError):
    """Momentum box too small; truncated mass exceeds the error budget."""
