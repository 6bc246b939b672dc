"""Monte Carlo and exact-enumeration verification of the rate statements.

Three estimators of the equilibrium-observation probability
``P(exists p*: |p* - p|_inf < delta)`` live here:

* ``naive_probability`` — plain indicator frequency under the prior;
* ``importance_probability`` — sampling under the canonical (tilted)
  distribution with exact likelihood-ratio weights
  ``exp(n log lambda(p) - alpha(p) . Z)``, unbiased for the naive target;
* ``oracle_probability`` — exact summation over atom-count vectors
  (configurations of i.i.d. discrete agents are exchangeable, so the
  equilibrium price depends on the multiset of characteristics only).

Conditional distributions, macro means under conditioning, and the
CLT-scale covariance of equilibrium prices reuse the same machinery.

Determinism: replicas are processed in fixed chunks of 4096; chunk ``c``
draws from a counter-based Philox stream keyed by ``(seed, c)``, and chunk
partials are reduced in index order.  Results are therefore bit-identical
for a given ``(seed, replicas)`` regardless of the thread count.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from math import comb
from typing import Callable

import numpy as np
from scipy.special import gammaln, logsumexp

from .canonical import CanonicalMicro, CanonicalSampler, make_canonical
from .entropy import support_points
from .equilibrium import (
    EquilibriumResult,
    _bisect_root,
    bisection_equilibrium,
    cd_equilibrium,
    cd_equilibrium_from_counts,
    expected_equilibrium,
    expected_equilibrium_result,
)
from .errors import (
    DimensionMismatch,
    InexactDistribution,
    NoAcceptedConfigurations,
    NonCDModel,
    NonUniqueEquilibrium,
    NoSignChange,
    SingularSigma,
    TooLarge,
    ZeroEndowmentColumn,
)
from .model import Continuous, Discrete, EconomyModel, Price, StructureFunction

CHUNK_SIZE = 4096
_ORACLE_BUDGET = 2_000_000


@dataclass(frozen=True)
class Estimate:
    """A probability (or conditional-mean) estimate with its uncertainty.

    ``log_value`` is the natural log of ``value`` (``-inf`` for zero,
    ``nan`` for negative conditional means).  ``zero_hits`` distinguishes
    "estimated zero because nothing was observed" from a genuine zero.
    """

    value: float
    std_error: float
    log_value: float
    replicas: int
    method: str
    zero_hits: bool = False


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Per-atom frequencies across agent slots plus the accepted count."""

    frequencies: np.ndarray
    accepted: int
    method: str


@dataclass(frozen=True)
class CltTrend:
    """Covariance of ``sqrt(n) (p* - p*_e)`` with its per-``n`` series."""

    sigma: np.ndarray
    per_n: dict[int, np.ndarray]
    replicas: int
    dropped: int


# --- replica streams ----------------------------------------------------

def _chunk_rng(seed: int, stream: int, chunk_index: int) -> np.random.Generator:
    key = np.array([np.uint64(seed), np.uint64((stream << 32) + chunk_index)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _map_chunks(replicas: int, threads: int, fn: Callable[[int, int], object]) -> list:
    """Apply ``fn(chunk_index, chunk_size)`` to every chunk; partials come
    back in chunk order no matter how the work was scheduled."""
    plan = [
        (i, min(CHUNK_SIZE, replicas - i * CHUNK_SIZE))
        for i in range((replicas + CHUNK_SIZE - 1) // CHUNK_SIZE)
    ]
    if threads <= 1:
        return [fn(i, size) for i, size in plan]
    out: list = [None] * len(plan)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(fn, i, size): idx for idx, (i, size) in enumerate(plan)}
        for fut in as_completed(futures):
            out[futures[fut]] = fut.result()
    return out


def _log_value(value: float) -> float:
    if value > 0.0:
        return float(np.log(value))
    return -np.inf if value == 0.0 else np.nan


def _lse(terms: list[float]) -> float:
    return float(logsumexp(terms)) if terms else -np.inf


# --- realized equilibria ------------------------------------------------

def _head_from_result(res: EquilibriumResult) -> np.ndarray | None:
    if not res.unique:
        raise NonUniqueEquilibrium(
            "a realized configuration admits multiple equilibria"
        )
    if not res.price.interior:
        return None
    return res.price.head()


class _CountSolver:
    """Equilibrium heads per atom-count vector, memoized.

    ``None`` records "this configuration has no equilibrium" (for example
    a commodity nobody is endowed with, or excess demand with constant
    sign); the existence event is simply false there.
    """

    def __init__(self, model: EconomyModel):
        self.atoms, _ = support_points(model)
        self.structure = model.structure
        self.l = model.structure.out_dim
        self.cache: dict[bytes, np.ndarray | None] = {}

    def head(self, counts: np.ndarray) -> np.ndarray | None:
        key = counts.tobytes()
        if key in self.cache:
            return self.cache[key]
        head = self._solve(np.asarray(counts, dtype=float))
        self.cache[key] = head
        return head

    def _solve(self, counts: np.ndarray) -> np.ndarray | None:
        if self.structure.kind == "cobb_douglas":
            try:
                res = cd_equilibrium_from_counts(self.atoms, counts, self.l)
            except ZeroEndowmentColumn:
                return None
            return _head_from_result(res)
        if self.l != 1:
            raise NonCDModel("count-based equilibria need Cobb-Douglas or l = 1")

        def f(p1: float) -> float:
            coords = np.array([p1, 1.0 - p1])
            return float(counts @ self.structure.eval(self.atoms, coords)[:, 0])

        try:
            root, _ = _bisect_root(f, 1e-10)
        except NoSignChange:
            return None
        return np.array([root])


def _thetas_head(model: EconomyModel, thetas: np.ndarray) -> np.ndarray | None:
    if model.structure.kind == "cobb_douglas":
        try:
            res = cd_equilibrium(thetas, model.structure.out_dim)
        except ZeroEndowmentColumn:
            return None
        return _head_from_result(res)
    if model.structure.out_dim != 1:
        raise NonCDModel("realized equilibria need Cobb-Douglas or l = 1")
    try:
        res = bisection_equilibrium(thetas, model.structure)
    except NoSignChange:
        return None
    return _head_from_result(res)


def _ensure_unique(model: EconomyModel) -> None:
    res = expected_equilibrium_result(model)
    if not res.unique:
        raise NonUniqueEquilibrium(
            "expected economy does not have a provably unique equilibrium"
        )


def _hit(head: np.ndarray | None, p: Price, delta: float) -> bool:
    return head is not None and float(np.max(np.abs(head - p.head()))) < delta


# --- probability estimators ---------------------------------------------

def naive_probability(
    model: EconomyModel,
    p: Price,
    delta: float,
    replicas: int,
    seed: int,
    threads: int = 1,
) -> Estimate:
    """Fraction of prior-sampled economies with an equilibrium near ``p``.

    The standard error is binomial.  Zero observed hits are flagged via
    ``zero_hits`` rather than raised: the value 0.0 is then a statement
    about the replica budget, and importance sampling is the tool to reach
    further into the tail.
    """
    _ensure_unique(model)
    micro = model.micro
    if isinstance(micro, Discrete):
        solver = _CountSolver(model)
        weights = micro.weights

        def chunk(i: int, size: int) -> int:
            rng = _chunk_rng(seed, 0, i)
            counts = rng.multinomial(model.n, weights, size=size)
            uniq, mult = np.unique(counts, axis=0, return_counts=True)
            return int(sum(
                int(m) for c, m in zip(uniq, mult) if _hit(solver.head(c), p, delta)
            ))

        hits = sum(_map_chunks(replicas, threads, chunk))
    else:

        def chunk(i: int, size: int) -> int:
            rng = _chunk_rng(seed, 0, i)
            total = 0
            for _ in range(size):
                thetas = micro.sample(rng, model.n)
                if _hit(_thetas_head(model, thetas), p, delta):
                    total += 1
            return total

        hits = sum(_map_chunks(replicas, threads, chunk))

    value = hits / replicas
    std_error = float(np.sqrt(value * (1.0 - value) / replicas))
    return Estimate(value, std_error, _log_value(value), replicas, "naive",
                    zero_hits=hits == 0)


def importance_probability(
    model: EconomyModel,
    p: Price,
    delta: float,
    replicas: int,
    seed: int,
    threads: int = 1,
) -> Estimate:
    """Unbiased estimate of the naive target under canonical sampling.

    Each replica draws all ``n`` agents from the tilted distribution at
    ``p`` and carries the exact likelihood ratio
    ``exp(n log lambda(p) - alpha(p) . Z(omega; p))``; the weighted hit
    indicator is averaged by log-sum-exp and the standard error comes from
    the delta method on the weighted mean.
    """
    _ensure_unique(model)
    canon = make_canonical(model, p)
    n = model.n

    if isinstance(canon, CanonicalMicro):
        solver = _CountSolver(model)
        z_vals = model.structure.eval(canon.atoms, p.coords)
        scores = z_vals @ canon.alpha  # alpha . z per atom

        def chunk(i: int, size: int) -> tuple[float, float, int]:
            rng = _chunk_rng(seed, 0, i)
            counts = rng.multinomial(n, canon.weights, size=size)
            uniq, mult = np.unique(counts, axis=0, return_counts=True)
            one, two, hits = [], [], 0
            for c, m in zip(uniq, mult):
                if _hit(solver.head(c), p, delta):
                    lw = n * canon.log_lambda - float(c @ scores)
                    one.append(np.log(m) + lw)
                    two.append(np.log(m) + 2.0 * lw)
                    hits += int(m)
            return _lse(one), _lse(two), hits
    else:

        def chunk(i: int, size: int) -> tuple[float, float, int]:
            rng = _chunk_rng(seed, 0, i)
            one, two, hits = [], [], 0
            for _ in range(size):
                thetas = canon.sample(rng, n)
                if _hit(_thetas_head(model, thetas), p, delta):
                    z_total = model.structure.eval(thetas, p.coords).sum(axis=0)
                    lw = n * canon.log_lambda - float(z_total @ canon.alpha)
                    one.append(lw)
                    two.append(2.0 * lw)
                    hits += 1
            return _lse(one), _lse(two), hits

    partials = _map_chunks(replicas, threads, chunk)
    lse_one = float(logsumexp([part[0] for part in partials]))
    lse_two = float(logsumexp([part[1] for part in partials]))
    hits = sum(part[2] for part in partials)

    log_value = lse_one - np.log(replicas)
    value = float(np.exp(log_value))
    second = float(np.exp(lse_two - np.log(replicas)))
    variance = max(second - value * value, 0.0)
    std_error = float(np.sqrt(variance / replicas))
    return Estimate(value, std_error, float(log_value), replicas, "importance",
                    zero_hits=hits == 0)


# --- exact enumeration --------------------------------------------------

def _compositions(n: int, k: int) -> np.ndarray:
    """All count vectors of ``k`` nonnegative integers summing to ``n``."""
    if k == 1:
        return np.array([[n]], dtype=np.int64)
    blocks = []
    for first in range(n + 1):
        rest = _compositions(n - first, k - 1)
        blocks.append(
            np.hstack([np.full((rest.shape[0], 1), first, dtype=np.int64), rest])
        )
    return np.vstack(blocks)


def _count_states(model: EconomyModel) -> tuple[np.ndarray, np.ndarray]:
    """Count vectors and their log multinomial probabilities."""
    micro = model.micro
    if not isinstance(micro, Discrete):
        raise InexactDistribution("enumeration needs a discrete micro distribution")
    n, k = model.n, micro.k
    states = comb(n + k - 1, k - 1)
    if states > _ORACLE_BUDGET:
        raise TooLarge(
            f"{states} count vectors exceed the enumeration budget {_ORACLE_BUDGET}"
        )
    counts = _compositions(n, k)
    logpmf = (
        gammaln(n + 1)
        - gammaln(counts + 1.0).sum(axis=1)
        + counts @ np.log(micro.weights)
    )
    return counts, logpmf


def oracle_probability(model: EconomyModel, p: Price, delta: float) -> Estimate:
    """Exact equilibrium-observation probability by count enumeration.

    Exchangeability collapses the ``k^n`` configurations onto
    ``C(n+k-1, k-1)`` count vectors, each carrying its multinomial mass;
    the result is exact up to floating point and has ``std_error`` zero.
    """
    _ensure_unique(model)
    counts, logpmf = _count_states(model)
    solver = _CountSolver(model)
    mask = np.array([_hit(solver.head(c), p, delta) for c in counts])
    log_value = float(logsumexp(logpmf[mask])) if mask.any() else -np.inf
    return Estimate(
        value=float(np.exp(log_value)),
        std_error=0.0,
        log_value=log_value,
        replicas=counts.shape[0],
        method="oracle",
        zero_hits=not mask.any(),
    )


def oracle_conditional(model: EconomyModel, p: Price, delta: float) -> EmpiricalDistribution:
    """Exact conditional per-atom frequencies given the equilibrium event."""
    _ensure_unique(model)
    counts, logpmf = _count_states(model)
    solver = _CountSolver(model)
    mask = np.array([_hit(solver.head(c), p, delta) for c in counts])
    if not mask.any():
        raise NoAcceptedConfigurations(
            f"no count vector has an equilibrium within {delta} of p"
        )
    log_total = logsumexp(logpmf[mask])
    cond = np.exp(logpmf[mask] - log_total)
    freq = cond @ (counts[mask] / model.n)
    return EmpiricalDistribution(freq, int(mask.sum()), "oracle")


# --- conditional sampling -----------------------------------------------

def _accepted_counts(
    model: EconomyModel,
    p: Price,
    delta: float,
    replicas: int,
    seed: int,
    use_importance: bool,
    threads: int,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Accepted unique count vectors with log(multiplicity * weight).

    Returns ``(counts, log_mass, accepted_replicas)`` with chunk blocks
    concatenated in chunk order (deterministic under any scheduling).
    """
    micro = model.micro
    if not isinstance(micro, Discrete):
        raise InexactDistribution("conditional statistics need a discrete micro")
    _ensure_unique(model)
    n = model.n
    solver = _CountSolver(model)
    if use_importance:
        canon = make_canonical(model, p)
        sample_weights = canon.weights
        scores = model.structure.eval(canon.atoms, p.coords) @ canon.alpha
        base = n * canon.log_lambda
    else:
        sample_weights = micro.weights
        scores = None

    def chunk(i: int, size: int):
        rng = _chunk_rng(seed, 0, i)
        counts = rng.multinomial(n, sample_weights, size=size)
        uniq, mult = np.unique(counts, axis=0, return_counts=True)
        rows, masses, hits = [], [], 0
        for c, m in zip(uniq, mult):
            if _hit(solver.head(c), p, delta):
                lw = 0.0 if scores is None else base - float(c @ scores)
                rows.append(c)
                masses.append(np.log(m) + lw)
                hits += int(m)
        return rows, masses, hits

    partials = _map_chunks(replicas, threads, chunk)
    rows = [row for part in partials for row in part[0]]
    masses = [mass for part in partials for mass in part[1]]
    accepted = sum(part[2] for part in partials)
    if accepted == 0:
        raise NoAcceptedConfigurations(
            f"no replica produced an equilibrium within {delta} of p"
        )
    return np.array(rows), np.array(masses), accepted


def conditional_empirical(
    model: EconomyModel,
    p: Price,
    delta: float,
    replicas: int,
    seed: int,
    use_importance: bool = False,
    threads: int = 1,
) -> EmpiricalDistribution:
    """Per-atom frequencies among economies conditioned on the event.

    Under importance sampling the frequencies are likelihood-ratio
    weighted, so they estimate the same prior-conditional distribution the
    naive mode targets.
    """
    counts, log_mass, accepted = _accepted_counts(
        model, p, delta, replicas, seed, use_importance, threads
    )
    log_total = logsumexp(log_mass)
    freq = np.exp(log_mass - log_total) @ (counts / model.n)
    return EmpiricalDistribution(
        freq, accepted, "importance" if use_importance else "naive"
    )


def conditional_macro_mean(
    model: EconomyModel,
    p: Price,
    delta: float,
    x_structure: StructureFunction,
    replicas: int,
    seed: int,
    use_importance: bool = True,
    threads: int = 1,
) -> Estimate:
    """Conditional mean of the macro variable ``n^{-1} X`` at the realized
    equilibrium price of each accepted economy.

    This is a ratio estimator; its standard error uses the delta method
    ``sqrt(sum w^2 (y - est)^2) / sum w``.  Compare against
    ``canonical_expectation`` of ``x(theta; p)`` to check conditional
    limit statements.
    """
    counts, log_mass, accepted = _accepted_counts(
        model, p, delta, replicas, seed, use_importance, threads
    )
    atoms, _ = support_points(model)
    solver = _CountSolver(model)
    d = x_structure.out_dim
    y = np.empty((counts.shape[0], d))
    for idx, c in enumerate(counts):
        head = solver.head(np.asarray(c))
        coords = np.concatenate([head, [1.0 - head.sum()]])
        y[idx] = (c @ x_structure.eval(atoms, coords)) / model.n

    shift = log_mass.max()
    w = np.exp(log_mass - shift)
    total = w.sum()
    est = (w @ y) / total
    resid = y - est
    se = np.sqrt(w**2 @ resid**2) / total
    if d == 1:
        value, std_error = float(est[0]), float(se[0])
        return Estimate(
            value, std_error, _log_value(value), replicas,
            "importance" if use_importance else "naive",
        )
    return Estimate(est, se, np.nan, replicas,
                    "importance" if use_importance else "naive")


# --- CLT-scale comparison -----------------------------------------------

def clt_covariance(
    model: EconomyModel,
    n_grid: list[int],
    replicas: int,
    seed: int,
    threads: int = 1,
) -> CltTrend:
    """Empirical covariance of ``sqrt(n) (p* - p*_e)`` for each ``n``.

    The second moment is taken about the expected equilibrium price (a
    known center, not the sample mean).  Replicas without an equilibrium
    are dropped and tallied.
    """
    _ensure_unique(model)
    p_e = expected_equilibrium(model)
    center = p_e.head()
    l = center.shape[0]
    per_n: dict[int, np.ndarray] = {}
    total_dropped = 0
    for stream, n in enumerate(sorted(n_grid)):
        model_n = dataclasses.replace(model, n=n)
        micro = model_n.micro
        if not isinstance(micro, Discrete):
            raise InexactDistribution("CLT comparison needs a discrete micro")
        solver = _CountSolver(model_n)

        def chunk(i: int, size: int, _n=n, _solver=solver, _stream=stream):
            rng = _chunk_rng(seed, _stream, i)
            counts = rng.multinomial(_n, micro.weights, size=size)
            uniq, mult = np.unique(counts, axis=0, return_counts=True)
            moment = np.zeros((l, l))
            dropped = 0
            for c, m in zip(uniq, mult):
                head = _solver.head(c)
                if head is None:
                    dropped += int(m)
                    continue
                dev = np.sqrt(_n) * (head - center)
                moment += m * np.outer(dev, dev)
            return moment, dropped

        partials = _map_chunks(replicas, threads, chunk)
        moment = np.zeros((l, l))
        dropped = 0
        for part_moment, part_dropped in partials:
            moment += part_moment
            dropped += part_dropped
        used = replicas - dropped
        per_n[n] = moment / max(used, 1)
        total_dropped += dropped
    return CltTrend(per_n[max(per_n)], per_n, replicas, total_dropped)


def clt_entropy_approx(model: EconomyModel, p: Price, sigma: np.ndarray) -> float:
    """Gaussian entropy surrogate ``(n/2) dp' Sigma^{-1} dp`` on the first
    ``l`` coordinates, ``dp = p - p*_e``."""
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise SingularSigma(f"covariance {sigma!r} is not positive definite") from exc
    p_e = expected_equilibrium(model)
    dp = p.head() - p_e.head()
    if dp.shape[0] != sigma.shape[0]:
        raise DimensionMismatch(
            f"displacement has dimension {dp.shape[0]}, sigma {sigma.shape}"
        )
    return 0.5 * model.n * float(dp @ np.linalg.solve(sigma, dp))
