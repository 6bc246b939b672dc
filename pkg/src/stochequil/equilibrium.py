"""Equilibrium prices of realized and expected exchange economies.

For the Cobb-Douglas economy the market-clearing condition reduces to a
stationary-vector problem: build the row-stochastic share matrix

    A[j, k] = (sum_i e_i^j)^{-1} sum_i a_i^k e_i^j,

find the left eigenvector ``W A = W`` with eigenvalue one, and read off the
price ``p^j`` proportional to ``W^j / sum_i e_i^j``.  Uniqueness is tied to
irreducibility of ``A``.  The same construction with expectations in place
of sums yields the expected equilibrium price.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.sparse import csr_array
from scipy.sparse.csgraph import connected_components

from .errors import (
    DimensionMismatch,
    EigenvectorFailure,
    InexactDistribution,
    NoSignChange,
    NonCDModel,
    ZeroEndowmentColumn,
)
from .model import (
    Continuous,
    Discrete,
    EconomyModel,
    Price,
    StructureFunction,
    cd_view,
    make_cd_structure,
    validate_price,
)

_POWER_TOL = 1e-14
_POWER_MAXIT = 100_000
_EDGE_TOL = 1e-14
_RESIDUAL_FACTOR = 1e-8
_MEAN_RESIDUAL_TOL = 1e-10
_INTERVAL_TOL = 1e-12


@dataclass(frozen=True)
class EquilibriumResult:
    """Equilibrium price plus solution diagnostics.

    ``residual`` is the excess demand at the returned price (first ``l``
    coordinates); ``method`` is ``"eigenvector"`` or ``"bisection"``;
    ``unique`` reports whether the solution is provably the only one.
    """

    price: Price
    residual: np.ndarray
    method: str
    unique: bool
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class SurvivalSpec:
    """Wealth floor ``w(p)`` below which an agent does not survive."""

    wealth_floor: Callable[[Price], float]


# --- stationary vectors -------------------------------------------------

def _strong_components(A: np.ndarray) -> tuple[int, np.ndarray]:
    mask = csr_array(A > _EDGE_TOL)
    return connected_components(mask, directed=True, connection="strong")


def _inverse_iteration(A: np.ndarray) -> np.ndarray:
    """Stationary vector of an irreducible stochastic matrix by shifted
    inverse iteration (robust to periodicity)."""
    g = A.shape[0]
    shifted = A.T - (1.0 + 1e-10) * np.eye(g)
    w = np.full(g, 1.0 / g)
    for _ in range(50):
        try:
            nxt = np.linalg.solve(shifted, w)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - shift guards this
            raise EigenvectorFailure("shifted solve failed") from exc
        nxt = nxt / np.abs(nxt).sum()
        if np.linalg.norm(A.T @ np.abs(nxt) - np.abs(nxt), np.inf) < 1e-13:
            w = np.abs(nxt)
            return w / w.sum()
        w = nxt
    raise EigenvectorFailure("inverse iteration did not converge")


def left_stationary(A: np.ndarray) -> tuple[np.ndarray, bool]:
    """Left eigenvector of a row-stochastic matrix at eigenvalue one.

    Returns ``(w, irreducible)`` with ``w`` nonnegative and summing to one.
    Power iteration from the uniform start is the fast path; on stalls
    (periodic or reducible chains) the computation falls back to a dense
    solve restricted to the first recurrent class.
    """
    A = np.asarray(A, dtype=float)
    g = A.shape[0]
    ncomp, labels = _strong_components(A)
    irreducible = ncomp == 1

    w = np.full(g, 1.0 / g)
    for _ in range(_POWER_MAXIT):
        nxt = A.T @ w
        s = nxt.sum()
        if s <= 0:
            break
        nxt /= s
        if np.abs(nxt - w).sum() < _POWER_TOL:
            return nxt, irreducible
        w = nxt

    if irreducible:
        return _inverse_iteration(A), True

    # Reducible: restrict to the first recurrent class (no edges leaving it).
    edges = A > _EDGE_TOL
    for c in range(ncomp):
        members = labels == c
        if not edges[members][:, ~members].any():
            sub, _ = left_stationary(A[np.ix_(members, members)])
            out = np.zeros(g)
            out[members] = sub
            return out, False
    raise EigenvectorFailure("no recurrent class found")  # pragma: no cover


# --- Cobb-Douglas equilibria --------------------------------------------

def _weighted_cd_price(
    a: np.ndarray, e: np.ndarray, wts: np.ndarray
) -> tuple[Price, bool, tuple[str, ...]]:
    """Equilibrium price from share/endowment moments under agent weights."""
    endow = wts @ e                      # total endowment per commodity
    if np.any(endow <= 0.0):
        bad = int(np.argmin(endow))
        raise ZeroEndowmentColumn(f"commodity {bad} has total endowment {endow[bad]!r}")
    moments = (wts[:, None] * e).T @ a   # moments[j, k] = sum_i w_i e_i^j a_i^k
    share_matrix = moments / endow[:, None]
    w, irreducible = left_stationary(share_matrix)
    coords = w / endow
    total = coords.sum()
    if total <= 0:
        raise EigenvectorFailure("stationary vector degenerate")
    warnings: tuple[str, ...] = ()
    if not irreducible:
        warnings = ("share matrix reducible; equilibrium may not be unique",)
    return validate_price(coords / total), irreducible, warnings


def cd_equilibrium(thetas: np.ndarray, l: int) -> EquilibriumResult:
    """Equilibrium of a realized Cobb-Douglas configuration.

    Parameters
    ----------
    thetas : ndarray, shape (n, 2(l+1))
        Agent characteristics in the packed ``(a, e)`` layout.
    l : int
        Number of relative prices.

    Raises
    ------
    ZeroEndowmentColumn
        If some commodity is completely absent from the economy.
    EigenvectorFailure
        If the residual check ``|Z(p*)|_inf < 1e-8 n`` fails.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    g = l + 1
    if thetas.shape[1] < 2 * g:
        raise DimensionMismatch(
            f"characteristics have length {thetas.shape[1]}, expected >= {2 * g}"
        )
    a, e = cd_view(thetas, l)
    n = thetas.shape[0]
    price, unique, warns = _weighted_cd_price(a, e, np.ones(n))
    structure = make_cd_structure(l, thetas.shape[1])
    if price.interior:
        residual = structure.eval(thetas, price.coords).sum(axis=0)
        if unique and np.linalg.norm(residual, np.inf) >= _RESIDUAL_FACTOR * n:
            raise EigenvectorFailure(
                f"residual {np.linalg.norm(residual, np.inf)!r} exceeds {_RESIDUAL_FACTOR * n!r}"
            )
    else:
        residual = np.full(l, np.nan)
        warns = warns + ("equilibrium price on simplex boundary; residual skipped",)
    return EquilibriumResult(price, residual, "eigenvector", unique, warns)


def cd_equilibrium_from_counts(
    atoms: np.ndarray, counts: np.ndarray, l: int
) -> EquilibriumResult:
    """Equilibrium of a configuration given as atom multiplicities.

    Exchangeability makes the equilibrium a function of the count vector
    only; estimators and the enumeration oracle use this entry point.
    """
    atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
    counts = np.asarray(counts, dtype=float)
    a, e = cd_view(atoms, l)
    price, unique, warns = _weighted_cd_price(a, e, counts)
    structure = make_cd_structure(l, atoms.shape[1])
    if price.interior:
        z = structure.eval(atoms, price.coords)
        residual = counts @ z
        n = counts.sum()
        if unique and np.linalg.norm(residual, np.inf) >= _RESIDUAL_FACTOR * max(n, 1.0):
            raise EigenvectorFailure(
                f"residual {np.linalg.norm(residual, np.inf)!r} too large for n={n}"
            )
    else:
        residual = np.full(l, np.nan)
        warns = warns + ("equilibrium price on simplex boundary; residual skipped",)
    return EquilibriumResult(price, residual, "eigenvector", unique, warns)


def expected_equilibrium_result(model: EconomyModel) -> EquilibriumResult:
    """Equilibrium of the expected economy (moment form), with diagnostics.

    For Cobb-Douglas micro-models this replaces agent sums with moments
    ``E(a^j e^k)`` and solves the same stationary-vector problem; the mean
    individual excess demand at the result is checked against 1e-10.
    Non-CD structures fall back to bisection on the mean excess demand when
    ``l = 1`` and raise :class:`NonCDModel` otherwise.
    """
    micro = model.micro
    if isinstance(micro, Discrete):
        support, weights = micro.atoms, micro.weights
    elif isinstance(micro, Continuous) and micro.quadrature is not None:
        support, weights = micro.quadrature
    else:
        raise InexactDistribution("expected equilibrium needs atoms or quadrature")

    structure = model.structure
    if structure.kind != "cobb_douglas":
        if structure.out_dim != 1:
            raise NonCDModel("moment form needs a Cobb-Douglas structure for l >= 2")

        def mean_excess(p1: float) -> float:
            coords = np.array([p1, 1.0 - p1])
            return float(weights @ structure.eval(support, coords)[:, 0])

        warns: tuple[str, ...] = ()
        unique = True
        for p1 in np.linspace(0.03, 0.97, 16):
            coords = np.array([p1, 1.0 - p1])
            slope = float(weights @ structure.deriv_p(support, coords)[:, 0, 0])
            if slope >= 0.0:
                warns = ("mean excess demand not strictly decreasing",)
                unique = False
                break
        root, fval = _bisect_root(mean_excess, _MEAN_RESIDUAL_TOL)
        return EquilibriumResult(
            validate_price([root, 1.0 - root]), np.array([fval]),
            "bisection", unique, warns,
        )

    a, e = cd_view(support, structure.out_dim)
    price, unique, warns = _weighted_cd_price(a, e, weights)
    if price.interior:
        residual = weights @ structure.eval(support, price.coords)
        if unique and np.linalg.norm(residual, np.inf) >= _MEAN_RESIDUAL_TOL:
            raise EigenvectorFailure(
                f"mean excess demand {np.linalg.norm(residual, np.inf)!r} at expected price"
            )
    else:
        residual = np.full(structure.out_dim, np.nan)
        warns = warns + ("expected price on simplex boundary; residual skipped",)
    return EquilibriumResult(price, residual, "eigenvector", unique, warns)


def expected_equilibrium(model: EconomyModel) -> Price:
    """Equilibrium price of the expected economy; see
    :func:`expected_equilibrium_result` for the full diagnostics."""
    return expected_equilibrium_result(model).price


# --- scalar bisection ---------------------------------------------------

def _bisect_root(f: Callable[[float], float], tol: float) -> tuple[float, float]:
    """Root of a scalar function on (0, 1) by bracketing bisection.

    Returns ``(root, f(root))``.  Stops when ``|f| < tol`` or the bracket
    is narrower than 1e-12.
    """
    grid = np.concatenate(([1e-9], np.linspace(1.0 / 64, 63.0 / 64, 63), [1.0 - 1e-9]))
    vals = np.array([f(p) for p in grid])
    if np.any(np.isnan(vals)):
        raise NoSignChange("excess demand not finite on the bracketing grid")
    sign = np.sign(vals)
    idx = np.nonzero(sign[:-1] * sign[1:] <= 0)[0]
    hit = np.nonzero(sign == 0)[0]
    if hit.size:
        return float(grid[hit[0]]), float(vals[hit[0]])
    if not idx.size:
        raise NoSignChange("mean excess demand has constant sign on (0, 1)")
    lo, hi = float(grid[idx[0]]), float(grid[idx[0] + 1])
    flo = float(vals[idx[0]])
    mid, fmid = lo, flo
    while hi - lo > _INTERVAL_TOL:
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if abs(fmid) < tol:
            return mid, fmid
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi = mid
    return mid, fmid


def bisection_equilibrium(
    thetas: np.ndarray, structure: StructureFunction, tol: float = 1e-10
) -> EquilibriumResult:
    """Scalar equilibrium by bisection on total excess demand (``l = 1``).

    Monotonicity of ``Z`` is checked by sampling the on-simplex derivative
    at 16 interior grid points; a violation is reported as a warning with
    ``unique=False`` rather than an error.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if structure.out_dim != 1:
        raise NonCDModel(f"bisection needs out_dim 1, got {structure.out_dim}")

    def total(p1: float) -> float:
        coords = np.array([p1, 1.0 - p1])
        return float(structure.eval(thetas, coords)[:, 0].sum())

    warns: tuple[str, ...] = ()
    unique = True
    for p1 in np.linspace(0.03, 0.97, 16):
        coords = np.array([p1, 1.0 - p1])
        slope = float(structure.deriv_p(thetas, coords)[:, 0, 0].sum())
        if slope >= 0.0:
            warns = ("total excess demand not strictly decreasing; root may not be unique",)
            unique = False
            break

    root, fval = _bisect_root(total, tol)
    price = validate_price([root, 1.0 - root])
    return EquilibriumResult(price, np.array([fval]), "bisection", unique, warns)


# --- survival -----------------------------------------------------------

def survival_count(thetas: np.ndarray, p: Price, spec: SurvivalSpec) -> int:
    """Number of agents whose endowment wealth falls strictly below the floor."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    _, e = cd_view(thetas, p.l)
    wealth = e @ p.coords
    floor = float(spec.wealth_floor(p))
    return int(np.sum(wealth < floor))
