"""Cumulant generating functions, conjugate tilts, and entropy (rate
function) evaluation.

The probability that a random economy of ``n`` i.i.d. agents admits an
equilibrium price near ``p`` decays exponentially, and the decay rate is
obtained from the per-agent moment generating function of excess demand

    lambda(alpha; p) = E exp(alpha . z(theta; p)).

Minimizing over ``alpha`` (equivalently, solving ``E_tilted z = 0`` for the
conjugate parameter) yields the partition value ``lambda(p)`` and the
entropy ``I(p) = -n log lambda(p)``.  A finite minimum exists exactly when
the origin lies in the topological interior of the convex hull of the
support of ``z(theta; p)`` — the "possible equilibrium price" test.

The bivariate variants additionally constrain a macro observable
``X = sum_i x(theta_i; p)`` to a target mean, giving
``I(p, x) = n (-log lambda(alpha, beta; p) + beta . x)``.

Everything here is exact log-space arithmetic over discrete support
(atoms or quadrature nodes); no sampling is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from .equilibrium import expected_equilibrium
from .errors import (
    AllInfeasible,
    DimensionMismatch,
    EmptySupport,
    InexactDistribution,
    NonCDModel,
    NotOnSimplex,
    NotPossibleCompositeEquilibrium,
    NotPossibleEquilibriumPrice,
    SingularHessian,
    SolverStalled,
)
from .model import (
    Continuous,
    Discrete,
    EconomyModel,
    Price,
    StructureFunction,
    cd_view,
    validate_price,
)

GRAD_TOL = 1e-10
_MAX_NEWTON = 200
_MAX_HALVINGS = 60
_RANK_RTOL = 1e-10
_LP_TOL = 1e-12


# --- results ------------------------------------------------------------

@dataclass(frozen=True)
class CGFValue:
    """Log moment generating value with tilted moments.

    ``grad`` is the mean of the support statistic under the exponentially
    tilted distribution, ``hess`` its covariance; both are exact sums.
    """

    log_lambda: float
    grad: np.ndarray
    hess: np.ndarray


@dataclass(frozen=True)
class ConjugateSolution:
    """Minimizer of the per-agent CGF at a fixed price."""

    alpha: np.ndarray
    log_lambda_min: float
    grad_norm: float
    iterations: int


@dataclass(frozen=True)
class BivariateConjugate:
    """Joint tilt hitting zero excess demand and a macro target mean."""

    alpha: np.ndarray
    beta: np.ndarray
    log_lambda: float
    grad_norm: float
    iterations: int


@dataclass(frozen=True)
class PepFeasibility:
    """Outcome of the possible-equilibrium-price test.

    Truthiness follows ``possible``; when impossible, ``certificate`` is a
    direction ``d`` with ``d . z <= 0`` across the whole support (the open
    half-space around ``d`` misses the support entirely).
    """

    possible: bool
    certificate: np.ndarray | None = None

    def __bool__(self) -> bool:
        return self.possible


@dataclass(frozen=True)
class EntropyReport:
    """Entropy of an equilibrium observation (optionally composite).

    ``total`` is the full-economy value ``n * per_agent_rate``; for the
    composite form the macro target and its conjugate ``beta`` are set.
    """

    p: Price
    total: float
    per_agent_rate: float
    alpha: np.ndarray
    log_lambda: float
    x: np.ndarray | None = None
    beta: np.ndarray | None = None


@dataclass(frozen=True)
class CdTldReport:
    """Support bounds backing the scalar Cobb-Douglas rate statement.

    ``perturbation_bound`` is the admissible price-perturbation radius
    ``min(a^1) * min(e^2) / max(e^2)``; ``pivot_gap`` measures how close
    some atom comes to the zero-excess-demand characteristics ``(p, 1)``.
    """

    share1_min: float
    endow2_min: float
    endow2_max: float
    perturbation_bound: float
    conditions_hold: bool
    pivot_gap: float
    pivot_within_radius: bool


@dataclass(frozen=True)
class RankReport:
    """Rank of the characteristics Jacobian at the flattest support atom."""

    atom_index: int
    z_norm: float
    rank: int
    smallest_singular_value: float
    full_rank: bool


# --- support extraction -------------------------------------------------

def support_points(model: EconomyModel) -> tuple[np.ndarray, np.ndarray]:
    """Exact support of the micro distribution: ``(points, weights)``.

    Discrete models contribute their atoms; continuous models must carry a
    quadrature rule.  Bare samplers are rejected — estimators may use them,
    but entropy arithmetic requires exact expectations.
    """
    micro = model.micro
    if isinstance(micro, Discrete):
        points, weights = micro.atoms, micro.weights
    elif isinstance(micro, Continuous):
        if micro.quadrature is None:
            raise InexactDistribution(
                "continuous micro distribution has no quadrature; "
                "exact tilting is unavailable"
            )
        points, weights = micro.quadrature
    else:  # pragma: no cover - union is closed
        raise InexactDistribution(f"unsupported micro distribution {type(micro)!r}")
    if points.shape[0] == 0:
        raise EmptySupport("micro distribution has empty support")
    return points, weights


def _interior(p: Price) -> Price:
    if not p.interior:
        raise NotOnSimplex(f"price {p.coords!r} must be interior")
    return p


def support_values(
    model: EconomyModel, p: Price
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Support points, weights, and the structure values at ``p``."""
    points, weights = support_points(model)
    values = model.structure.eval(points, p.coords)
    return points, weights, values


# --- log-space CGF core -------------------------------------------------

def cgf_from_support(
    values: np.ndarray, log_weights: np.ndarray, tilt: np.ndarray
) -> CGFValue:
    """CGF of a finitely supported statistic, accumulated in log space.

    Parameters
    ----------
    values : ndarray, shape (K, d)
    log_weights : ndarray, shape (K,)
        Log probabilities; ``-inf`` entries are permitted and drop out.
    tilt : ndarray, shape (d,)
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    tilt = np.asarray(tilt, dtype=float)
    if tilt.shape != (values.shape[1],):
        raise DimensionMismatch(
            f"tilt has shape {tilt.shape}, support dimension is {values.shape[1]}"
        )
    scores = log_weights + values @ tilt
    log_lambda = float(logsumexp(scores))
    tilted = np.exp(scores - log_lambda)
    grad = tilted @ values
    centered = values - grad
    hess = (tilted[:, None] * centered).T @ centered
    return CGFValue(log_lambda, grad, 0.5 * (hess + hess.T))


def cgf(model: EconomyModel, alpha: np.ndarray, p: Price) -> CGFValue:
    """Per-agent CGF of excess demand at price ``p`` and tilt ``alpha``."""
    _interior(p)
    _, weights, values = support_values(model, p)
    return cgf_from_support(values, np.log(weights), alpha)


# --- possible equilibrium prices ----------------------------------------

def _hull_certificate(values: np.ndarray) -> np.ndarray:
    """A direction ``d != 0`` with ``d . z <= 0`` for every support value."""
    k, l = values.shape
    # Maximize sum_k (-d . z_k) subject to d . z_k <= 0 and |d_i| <= 1.
    res = linprog(
        c=values.sum(axis=0),
        A_ub=values,
        b_ub=np.zeros(k),
        bounds=[(-1.0, 1.0)] * l,
        method="highs",
    )
    if res.status == 0 and -res.fun > _LP_TOL:
        d = res.x
        return d / np.linalg.norm(d, np.inf)
    # All feasible directions annihilate the support: it spans a proper
    # subspace, and any orthogonal direction certifies non-interiority.
    _, s, vt = np.linalg.svd(values, full_matrices=True)
    return vt[-1]


def check_pep_values(values: np.ndarray) -> PepFeasibility:
    """Is the origin interior to the convex hull of the given support?

    ``l = 1`` reduces to a sign check.  For higher dimensions two facts are
    verified on the atom coordinates directly (no floating-point hull is
    built): a strictly positive convex combination of the support equals
    zero, and the support spans the full space.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    k, l = values.shape
    if l == 1:
        lo, hi = float(values.min()), float(values.max())
        if lo < 0.0 < hi:
            return PepFeasibility(True)
        return PepFeasibility(False, np.array([1.0]) if hi <= 0.0 else np.array([-1.0]))

    full_span = np.linalg.matrix_rank(values) == l
    if full_span:
        # max t  s.t.  sum_k mu_k z_k = 0, sum mu = 1, mu_k >= t
        c = np.zeros(k + 1)
        c[-1] = -1.0
        a_eq = np.zeros((l + 1, k + 1))
        a_eq[:l, :k] = values.T
        a_eq[l, :k] = 1.0
        b_eq = np.zeros(l + 1)
        b_eq[l] = 1.0
        a_ub = np.hstack([-np.eye(k), np.ones((k, 1))])
        res = linprog(
            c,
            A_ub=a_ub,
            b_ub=np.zeros(k),
            A_eq=a_eq,
            b_eq=b_eq,
            bounds=[(0.0, 1.0)] * k + [(-1.0, 1.0 / k)],
            method="highs",
        )
        if res.status == 0 and res.x[-1] > _LP_TOL:
            return PepFeasibility(True)
    return PepFeasibility(False, _hull_certificate(values))


def check_pep(model: EconomyModel, p: Price) -> PepFeasibility:
    """Possible-equilibrium-price test at ``p`` (see :func:`check_pep_values`)."""
    _interior(p)
    _, _, values = support_values(model, p)
    return check_pep_values(values)


# --- Newton minimization of the CGF -------------------------------------

def _newton_tilt(
    values: np.ndarray,
    log_weights: np.ndarray,
    target: np.ndarray,
) -> tuple[np.ndarray, CGFValue, int]:
    """Minimize ``log lambda(tilt) - tilt . target`` by damped Newton.

    The objective is convex with gradient ``E_tilted v - target`` and
    Hessian the tilted covariance.  Steps are halved until the objective
    decreases (at most 60 halvings, 200 iterations).
    """
    dim = values.shape[1]
    tilt = np.zeros(dim)
    current = cgf_from_support(values, log_weights, tilt)
    objective = current.log_lambda - float(tilt @ target)
    for iteration in range(_MAX_NEWTON):
        grad = current.grad - target
        if np.linalg.norm(grad, np.inf) < GRAD_TOL:
            return tilt, current, iteration
        try:
            step = np.linalg.solve(current.hess, -grad)
        except np.linalg.LinAlgError as exc:
            raise SingularHessian("tilted covariance is singular") from exc
        if not np.all(np.isfinite(step)):
            raise SingularHessian("tilted covariance is numerically singular")
        predicted = -0.5 * float(grad @ step)
        if predicted <= 1e-13 * (1.0 + abs(objective)):
            # The quadratic model predicts a decrease below float resolution:
            # take the full step and let the gradient test decide.
            tilt = tilt + step
            current = cgf_from_support(values, log_weights, tilt)
            objective = current.log_lambda - float(tilt @ target)
            continue
        scale = 1.0
        for _ in range(_MAX_HALVINGS):
            trial = tilt + scale * step
            cand = cgf_from_support(values, log_weights, trial)
            cand_obj = cand.log_lambda - float(trial @ target)
            if cand_obj < objective:
                tilt, current, objective = trial, cand, cand_obj
                break
            scale *= 0.5
        else:
            raise SolverStalled(
                f"no decrease after {_MAX_HALVINGS} halvings "
                f"(gradient norm {np.linalg.norm(grad, np.inf):.3e})"
            )
    raise SolverStalled(f"Newton budget of {_MAX_NEWTON} iterations exhausted")


def solve_conjugate(model: EconomyModel, p: Price) -> ConjugateSolution:
    """Conjugate tilt ``alpha(p)`` solving ``E_tilted z(theta; p) = 0``.

    Raises
    ------
    NotPossibleEquilibriumPrice
        If the origin is not interior to the hull of the excess-demand
        support, in which case the CGF has no finite minimizer.
    SingularHessian
        If the tilted covariance degenerates along the way.
    """
    _interior(p)
    _, weights, values = support_values(model, p)
    feas = check_pep_values(values)
    if not feas:
        raise NotPossibleEquilibriumPrice(
            f"no conjugate tilt at p={p.coords!r}; "
            f"separating direction {feas.certificate!r}"
        )
    target = np.zeros(values.shape[1])
    alpha, value, iters = _newton_tilt(values, np.log(weights), target)
    return ConjugateSolution(
        alpha=alpha,
        log_lambda_min=value.log_lambda,
        grad_norm=float(np.linalg.norm(value.grad, np.inf)),
        iterations=iters,
    )


def entropy(model: EconomyModel, p: Price) -> EntropyReport:
    """Entropy ``I(p) = -n log lambda(p)`` of observing equilibrium near ``p``."""
    sol = solve_conjugate(model, p)
    rate = -sol.log_lambda_min
    return EntropyReport(
        p=p,
        total=model.n * rate,
        per_agent_rate=rate,
        alpha=sol.alpha,
        log_lambda=sol.log_lambda_min,
    )


# --- bivariate (price + macro observable) -------------------------------

def _stacked_support(
    model: EconomyModel, p: Price, x_structure: StructureFunction
) -> tuple[np.ndarray, np.ndarray]:
    points, weights = support_points(model)
    z_vals = model.structure.eval(points, p.coords)
    x_vals = x_structure.eval(points, p.coords)
    return np.hstack([z_vals, x_vals]), weights


def bivariate_cgf(
    model: EconomyModel,
    alpha: np.ndarray,
    beta: np.ndarray,
    p: Price,
    x_structure: StructureFunction,
) -> CGFValue:
    """Joint CGF of ``(z, x)``; at ``beta = 0`` it reduces exactly to the
    excess-demand CGF padded with the macro moments."""
    _interior(p)
    stacked, weights = _stacked_support(model, p, x_structure)
    tilt = np.concatenate([np.asarray(alpha, float).ravel(),
                           np.asarray(beta, float).ravel()])
    return cgf_from_support(stacked, np.log(weights), tilt)


def solve_bivariate_conjugate(
    model: EconomyModel,
    p: Price,
    x: np.ndarray,
    x_structure: StructureFunction,
) -> BivariateConjugate:
    """Joint tilt with tilted mean excess demand zero and tilted mean macro
    value equal to ``x`` (both within ``GRAD_TOL``)."""
    _interior(p)
    stacked, weights = _stacked_support(model, p, x_structure)
    l = model.structure.out_dim
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != x_structure.out_dim:
        raise DimensionMismatch(
            f"target has dimension {x.shape[0]}, macro structure {x_structure.out_dim}"
        )
    target = np.concatenate([np.zeros(l), x])
    feas = check_pep_values(stacked - target)
    if not feas:
        raise NotPossibleCompositeEquilibrium(
            f"(p, x) = ({p.coords!r}, {x!r}) is not jointly attainable; "
            f"separating direction {feas.certificate!r}"
        )
    tilt, value, iters = _newton_tilt(stacked, np.log(weights), target)
    grad_norm = float(np.linalg.norm(value.grad - target, np.inf))
    return BivariateConjugate(
        alpha=tilt[:l],
        beta=tilt[l:],
        log_lambda=value.log_lambda,
        grad_norm=grad_norm,
        iterations=iters,
    )


def bivariate_entropy(
    model: EconomyModel,
    p: Price,
    x: np.ndarray,
    x_structure: StructureFunction,
) -> EntropyReport:
    """Composite entropy ``I(p, x) = n (-log lambda(alpha, beta; p) + beta . x)``."""
    x = np.asarray(x, dtype=float).ravel()
    sol = solve_bivariate_conjugate(model, p, x, x_structure)
    rate = -sol.log_lambda + float(sol.beta @ x)
    return EntropyReport(
        p=p,
        total=model.n * rate,
        per_agent_rate=rate,
        alpha=sol.alpha,
        log_lambda=sol.log_lambda,
        x=x,
        beta=sol.beta,
    )


def _golden_section(f, lo: float, hi: float, xtol: float = 1e-6) -> float:
    """Golden-section minimizer; infeasible evaluations count as +inf."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def minimize_entropy_over_price(
    model: EconomyModel,
    x: np.ndarray,
    grid: np.ndarray,
    x_structure: StructureFunction,
) -> Price:
    """Price minimizing the composite entropy ``I(p, x)`` (``l = 1`` only).

    Feasible points of ``grid`` (values of the first price coordinate) are
    scanned, then the minimum is refined by golden section between the
    bracketing neighbors to an argument tolerance of 1e-6.

    Raises
    ------
    AllInfeasible
        If no grid point admits a joint conjugate tilt.
    """
    if model.structure.out_dim != 1:
        raise NonCDModel("price-entropy minimization is scalar only")
    grid = np.sort(np.asarray(grid, dtype=float).ravel())
    x = np.asarray(x, dtype=float).ravel()

    def rate_at(p1: float) -> float:
        if not 0.0 < p1 < 1.0:
            return np.inf
        try:
            report = bivariate_entropy(
                model, validate_price([p1, 1.0 - p1]), x, x_structure
            )
        except (NotPossibleCompositeEquilibrium, SingularHessian, SolverStalled):
            return np.inf
        return report.per_agent_rate

    rates = np.array([rate_at(p1) for p1 in grid])
    if not np.any(np.isfinite(rates)):
        raise AllInfeasible("no grid point admits a joint conjugate tilt")
    best = int(np.argmin(rates))
    lo = grid[best - 1] if best > 0 else grid[best]
    hi = grid[best + 1] if best < grid.size - 1 else grid[best]
    if hi - lo < 1e-12:
        p1 = grid[best]
    else:
        p1 = _golden_section(rate_at, lo, hi)
    return validate_price([p1, 1.0 - p1])


# --- diagnostics --------------------------------------------------------

def cd_tld_diagnostic(
    model: EconomyModel, p: Price | None = None, pivot_radius: float = 0.1
) -> CdTldReport:
    """Support bounds for the scalar Cobb-Douglas rate statement.

    Checks that first-commodity shares and second-commodity endowments are
    bounded away from zero on the support, and reports the perturbation
    radius ``min(a^1) min(e^2) / max(e^2)`` within which shifted prices
    remain possible equilibrium prices.  Also reported (not enforced): the
    distance from the support to the pivot characteristics ``(p, 1)`` whose
    excess demand vanishes identically.
    """
    if model.structure.kind != "cobb_douglas" or model.structure.out_dim != 1:
        raise NonCDModel("diagnostic applies to scalar Cobb-Douglas models")
    if not isinstance(model.micro, Discrete):
        raise InexactDistribution("diagnostic needs a discrete support")
    if p is None:
        p = expected_equilibrium(model)
    a, e = cd_view(model.micro.atoms, 1)
    share1_min = float(a[:, 0].min())
    endow2_min = float(e[:, 1].min())
    endow2_max = float(e[:, 1].max())
    ok = share1_min > 0.0 and endow2_min > 0.0
    bound = share1_min * endow2_min / endow2_max if endow2_max > 0.0 else 0.0
    pivot = np.concatenate([p.coords, np.ones(p.coords.shape[0])])
    gaps = np.abs(model.micro.atoms[:, :4] - pivot).max(axis=1)
    pivot_gap = float(gaps.min())
    return CdTldReport(
        share1_min=share1_min,
        endow2_min=endow2_min,
        endow2_max=endow2_max,
        perturbation_bound=bound,
        conditions_hold=ok,
        pivot_gap=pivot_gap,
        pivot_within_radius=pivot_gap <= pivot_radius,
    )


def full_rank_diagnostic(model: EconomyModel, p: Price) -> RankReport:
    """Rank of ``dz/dtheta`` at the support point with smallest ``|z|``.

    The Jacobian is taken by central differences in every characteristics
    coordinate; singular values below ``1e-10`` of the largest are treated
    as zero.  Full row rank at a zero of ``z`` is the smoothness input to
    the local rate statements.
    """
    _interior(p)
    points, _, values = support_values(model, p)
    idx = int(np.argmin(np.linalg.norm(values, axis=1)))
    theta = points[idx]
    out_dim = model.structure.out_dim
    jac = np.empty((out_dim, theta.shape[0]))
    for i in range(theta.shape[0]):
        h = 1e-6 * max(abs(theta[i]), 1.0)
        up = theta.copy()
        dn = theta.copy()
        up[i] += h
        dn[i] -= h
        jac[:, i] = (
            model.structure.eval(up[None, :], p.coords)[0]
            - model.structure.eval(dn[None, :], p.coords)[0]
        ) / (2.0 * h)
    svals = np.linalg.svd(jac, compute_uv=False)
    top = svals[0] if svals.size else 0.0
    rank = int(np.sum(svals > _RANK_RTOL * max(top, 1e-300)))
    return RankReport(
        atom_index=idx,
        z_norm=float(np.linalg.norm(values[idx])),
        rank=rank,
        smallest_singular_value=float(svals[-1]) if svals.size else 0.0,
        full_rank=rank == out_dim,
    )
