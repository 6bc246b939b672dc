"""Core domain types: prices, agent characteristics, micro distributions,
structure functions, and economy models.

Conventions used throughout the package:

* A price for ``l`` relative prices is a point of the ``l``-simplex, stored
  as ``l + 1`` nonnegative coordinates summing to one.  Excess demand and
  all derived quantities refer to the first ``l`` coordinates; the last one
  is determined by Walras' law.
* Agent characteristics are flat real vectors of length ``m``.  For the
  Cobb-Douglas exchange economy ``m = 2(l + 1)`` and the vector splits into
  preference shares ``a`` (a simplex point) and endowments ``e``.
* Structure functions map a batch of characteristics and a price to a batch
  of per-agent excess demands (or any other per-agent statistic).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, NotOnSimplex

SIMPLEX_TOL = 1e-12
_FD_STEP = 1e-6


def _frozen(arr: np.ndarray) -> np.ndarray:
    """Return a float64 copy marked read-only."""
    out = np.array(arr, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Price:
    """A point of the price simplex.

    Attributes
    ----------
    coords : ndarray, shape (l + 1,)
        Nonnegative coordinates summing to one (within ``SIMPLEX_TOL``).
    """

    coords: np.ndarray

    @property
    def l(self) -> int:
        return self.coords.shape[0] - 1

    @property
    def interior(self) -> bool:
        """True when every coordinate is strictly positive."""
        return bool(np.all(self.coords > 0.0))

    def head(self) -> np.ndarray:
        """The first ``l`` coordinates (the ones events are measured on)."""
        return self.coords[:-1]

    def __iter__(self):
        return iter(self.coords)


def validate_price(coords) -> Price:
    """Validate simplex coordinates and wrap them in a :class:`Price`.

    Raises
    ------
    NotOnSimplex
        If any coordinate is negative or the sum is off one by more than
        ``SIMPLEX_TOL``, or fewer than two coordinates are given.
    """
    arr = np.asarray(coords, dtype=float)
    if arr.ndim != 1 or arr.shape[0] < 2:
        raise NotOnSimplex(f"price needs >= 2 coordinates, got shape {arr.shape}")
    if np.any(arr < 0.0):
        raise NotOnSimplex(f"negative coordinate in {arr!r}")
    total = float(arr.sum())
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise NotOnSimplex(f"coordinates sum to {total!r}, not 1")
    return Price(_frozen(arr))


def interior_price(coords) -> Price:
    """Like :func:`validate_price` but additionally requires interiority."""
    p = validate_price(coords)
    if not p.interior:
        raise NotOnSimplex(f"price {p.coords!r} lies on the simplex boundary")
    return p


# --- characteristics ----------------------------------------------------

def cd_characteristics(a, e) -> np.ndarray:
    """Pack Cobb-Douglas shares and endowments into one flat vector.

    ``a`` must be a simplex point of the same length as ``e``; ``e`` must be
    nonnegative.
    """
    a = np.asarray(a, dtype=float)
    e = np.asarray(e, dtype=float)
    if a.shape != e.shape or a.ndim != 1:
        raise DimensionMismatch(f"shares {a.shape} and endowments {e.shape} disagree")
    if np.any(a < 0.0) or abs(a.sum() - 1.0) > SIMPLEX_TOL:
        raise NotOnSimplex(f"shares {a!r} are not a simplex point")
    if np.any(e < 0.0):
        raise DimensionMismatch(f"negative endowment in {e!r}")
    return np.concatenate([a, e])


def cd_view(theta: np.ndarray, l: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Split flat characteristics into ``(a, e)``; works on batches too.

    With ``l`` given, the first ``2(l+1)`` entries are read and any trailing
    coordinates (labels that custom structure functions consume) are ignored;
    otherwise the vector is split in half.
    """
    theta = np.asarray(theta, dtype=float)
    if l is None:
        half = theta.shape[-1] // 2
        if theta.shape[-1] != 2 * half:
            raise DimensionMismatch(
                f"characteristics length {theta.shape[-1]} is odd; no CD view"
            )
    else:
        half = l + 1
        if theta.shape[-1] < 2 * half:
            raise DimensionMismatch(
                f"characteristics length {theta.shape[-1]} < {2 * half}"
            )
    return theta[..., :half], theta[..., half:2 * half]


# --- micro distributions ------------------------------------------------

@dataclass(frozen=True)
class Discrete:
    """Finitely supported distribution of agent characteristics.

    Attributes
    ----------
    atoms : ndarray, shape (K, m)
        Pairwise-distinct support points.
    weights : ndarray, shape (K,)
        Strictly positive probabilities summing to one.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        if atoms.shape[0] != weights.shape[0] or weights.ndim != 1:
            raise DimensionMismatch(
                f"{atoms.shape[0]} atoms but weight shape {weights.shape}"
            )
        if atoms.shape[0] == 0:
            raise DimensionMismatch("need at least one atom")
        if np.any(weights <= 0.0):
            raise DimensionMismatch("atom weights must be strictly positive")
        if abs(weights.sum() - 1.0) > SIMPLEX_TOL:
            raise DimensionMismatch(f"weights sum to {weights.sum()!r}, not 1")
        if np.unique(atoms, axis=0).shape[0] != atoms.shape[0]:
            raise DimensionMismatch("atoms must be pairwise distinct")
        object.__setattr__(self, "atoms", _frozen(atoms))
        object.__setattr__(self, "weights", _frozen(weights))

    @property
    def k(self) -> int:
        return self.atoms.shape[0]

    @property
    def m(self) -> int:
        return self.atoms.shape[1]

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Draw ``count`` i.i.d. characteristics by inverse CDF."""
        idx = self.sample_indices(rng, count)
        return self.atoms[idx]

    def sample_indices(self, rng: np.random.Generator, count: int) -> np.ndarray:
        cdf = np.cumsum(self.weights)
        cdf[-1] = 1.0
        return np.searchsorted(cdf, rng.random(count), side="right")


@dataclass(frozen=True)
class Continuous:
    """Continuously distributed characteristics.

    ``sampler(rng, count)`` must return a ``(count, m)`` array.  The optional
    quadrature pair ``(nodes, weights)`` supports exact-expectation code
    paths; weights must sum to one within 1e-9.  ``box`` optionally records
    the support as ``(lo, hi)`` corner vectors for envelope construction.
    """

    sampler: Callable[[np.random.Generator, int], np.ndarray]
    quadrature: tuple[np.ndarray, np.ndarray] | None = None
    box: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        if self.quadrature is not None:
            nodes = np.atleast_2d(np.asarray(self.quadrature[0], dtype=float))
            weights = np.asarray(self.quadrature[1], dtype=float)
            if nodes.shape[0] != weights.shape[0]:
                raise DimensionMismatch(
                    f"{nodes.shape[0]} nodes but weight shape {weights.shape}"
                )
            if abs(weights.sum() - 1.0) > 1e-9:
                raise DimensionMismatch(
                    f"quadrature weights sum to {weights.sum()!r}, not 1"
                )
            object.__setattr__(self, "quadrature", (_frozen(nodes), _frozen(weights)))
        if self.box is not None:
            lo = np.asarray(self.box[0], dtype=float)
            hi = np.asarray(self.box[1], dtype=float)
            if lo.shape != hi.shape or np.any(lo > hi):
                raise DimensionMismatch("invalid support box")
            object.__setattr__(self, "box", (_frozen(lo), _frozen(hi)))

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        out = np.asarray(self.sampler(rng, count), dtype=float)
        if out.ndim != 2 or out.shape[0] != count:
            raise DimensionMismatch(
                f"sampler returned shape {out.shape}, expected ({count}, m)"
            )
        return out


MicroDistribution = Discrete | Continuous


# --- structure functions ------------------------------------------------

@dataclass(frozen=True)
class StructureFunction:
    """Per-agent statistic ``z(theta; p)`` with batched evaluation.

    Attributes
    ----------
    m : int
        Length of a characteristics vector.
    out_dim : int
        Output dimension (``l`` for excess demand on ``l`` relative prices).
    kind : str
        ``"cobb_douglas"`` enables closed-form paths; anything else is
        treated as a black box.
    """

    m: int
    out_dim: int
    kind: str = "custom"
    _eval: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False, default=None)
    _deriv_p: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(
        repr=False, default=None
    )

    def eval(self, thetas: np.ndarray, coords: np.ndarray) -> np.ndarray:
        """Evaluate on a batch.

        Parameters
        ----------
        thetas : ndarray, shape (N, m)
        coords : ndarray, shape (l + 1,)
            Raw simplex coordinates.  Evaluation accepts any positive
            scaling of a price (degree-zero homogeneity is a property the
            tests check, not an input restriction).

        Returns
        -------
        ndarray, shape (N, out_dim)
        """
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if thetas.shape[1] != self.m:
            raise DimensionMismatch(
                f"characteristics have length {thetas.shape[1]}, structure wants {self.m}"
            )
        coords = np.asarray(coords, dtype=float)
        out = np.asarray(self._eval(thetas, coords), dtype=float)
        return out.reshape(thetas.shape[0], self.out_dim)

    def deriv_p(self, thetas: np.ndarray, coords: np.ndarray) -> np.ndarray:
        """On-simplex Jacobian in the first ``l`` price coordinates.

        The final coordinate is eliminated via ``p^{l+1} = 1 - sum_j p^j``,
        so a step ``+h`` in coordinate ``k`` is paired with ``-h`` in the
        last coordinate.  Analytic for Cobb-Douglas; otherwise central
        differences with relative step 1e-6.

        Returns
        -------
        ndarray, shape (N, out_dim, l)  where l = len(coords) - 1
        """
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        coords = np.asarray(coords, dtype=float)
        if self._deriv_p is not None:
            return np.asarray(self._deriv_p(thetas, coords), dtype=float)
        l = coords.shape[0] - 1
        out = np.empty((thetas.shape[0], self.out_dim, l))
        for k in range(l):
            h = _FD_STEP * max(abs(coords[k]), 1.0)
            up = coords.copy()
            dn = coords.copy()
            up[k] += h
            up[-1] -= h
            dn[k] -= h
            dn[-1] += h
            out[:, :, k] = (self.eval(thetas, up) - self.eval(thetas, dn)) / (2.0 * h)
        return out


def structure_from_pointwise(
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    m: int,
    out_dim: int,
    kind: str = "custom",
) -> StructureFunction:
    """Wrap a per-agent callable ``fn(theta, coords) -> out_dim vector``."""

    def batched(thetas, coords):
        return np.stack([np.asarray(fn(t, coords), dtype=float).reshape(out_dim)
                         for t in thetas])

    return StructureFunction(m=m, out_dim=out_dim, kind=kind, _eval=batched)


def make_cd_structure(l: int, m: int | None = None) -> StructureFunction:
    """Cobb-Douglas excess demand on ``l`` relative prices.

    Agent ``(a, e)`` demands a share ``a^j`` of wealth ``p . e`` in each
    commodity, so the excess demand in commodity ``j <= l`` is
    ``(a^j / p^j) (p . e) - e^j``.  Characteristics beyond the first
    ``2(l+1)`` entries are ignored (labels for other structure functions).
    """
    if l < 1:
        raise DimensionMismatch(f"need l >= 1, got {l}")
    g = l + 1
    if m is None:
        m = 2 * g
    elif m < 2 * g:
        raise DimensionMismatch(f"need m >= {2 * g} characteristics, got {m}")

    def ev(thetas, coords):
        a, e = cd_view(thetas, l)
        if coords.shape[0] != g:
            raise DimensionMismatch(
                f"price has {coords.shape[0]} coordinates, structure wants {g}"
            )
        wealth = e @ coords
        return a[:, :l] * wealth[:, None] / coords[:l][None, :] - e[:, :l]

    def dp(thetas, coords):
        a, e = cd_view(thetas, l)
        wealth = e @ coords
        # d z^j / d p^k on the simplex: a^j (e^k - e^g) / p^j minus the
        # diagonal wealth term a^j (p.e) / (p^j)^2.
        out = (a[:, :l, None] * (e[:, None, :l] - e[:, None, -1:])
               / coords[:l][None, :, None])
        j = np.arange(l)
        out[:, j, j] -= a[:, :l] * wealth[:, None] / coords[:l][None, :] ** 2
        return out

    return StructureFunction(m=m, out_dim=l, kind="cobb_douglas", _eval=ev, _deriv_p=dp)


# Named structures the cli's "custom-reference" model kind can look up.
STRUCTURE_REGISTRY: dict[str, Callable[..., StructureFunction]] = {}


def register_structure(name: str, factory: Callable[..., StructureFunction]) -> None:
    STRUCTURE_REGISTRY[name] = factory


register_structure("cobb_douglas", make_cd_structure)


# --- economy model ------------------------------------------------------

@dataclass(frozen=True)
class EconomyModel:
    """A structure function, a micro distribution, and a population size."""

    structure: StructureFunction
    micro: MicroDistribution
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise DimensionMismatch(f"population size must be >= 1, got {self.n}")
        if isinstance(self.micro, Discrete) and self.micro.m != self.structure.m:
            raise DimensionMismatch(
                f"atoms have length {self.micro.m}, structure wants {self.structure.m}"
            )


def total_excess_demand(model: EconomyModel, thetas: np.ndarray, p: Price) -> np.ndarray:
    """Sum of per-agent excess demands ``Z(p) = sum_i z(theta_i; p)``."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if thetas.shape[1] != model.structure.m:
        raise DimensionMismatch(
            f"configuration has characteristic length {thetas.shape[1]}, "
            f"structure wants {model.structure.m}"
        )
    return model.structure.eval(thetas, p.coords).sum(axis=0)


def walras_completion(z: np.ndarray, p: Price) -> np.ndarray:
    """Append the dependent coordinate ``-(p^{l+1})^{-1} sum_j p^j z^j``.

    Accepts a single value of shape ``(l,)`` or a batch ``(N, l)``.
    """
    z = np.asarray(z, dtype=float)
    head = p.coords[:-1]
    if z.ndim == 1:
        last = -(head @ z) / p.coords[-1]
        return np.concatenate([z, [last]])
    last = -(z @ head) / p.coords[-1]
    return np.concatenate([z, last[:, None]], axis=1)
