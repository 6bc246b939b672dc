"""Canonical (exponentially tilted) micro distributions.

Conditioning a large economy on an equilibrium observation near ``p``
reweights each agent's characteristics by ``exp(alpha(p) . z(theta; p))``
with the conjugate tilt from :mod:`stochequil.entropy`.  This module builds
those tilted distributions, samples from them, and evaluates expectations
under them exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .entropy import solve_bivariate_conjugate, solve_conjugate, support_values
from .errors import DimensionMismatch, UnboundedTilt
from .model import Continuous, Discrete, EconomyModel, Price, StructureFunction

_CLAMP = 1e-300
_ENVELOPE_SAFETY = 1.001
_ENVELOPE_GRID = 64
_ENVELOPE_BUDGET = 1_000_000


@dataclass(frozen=True)
class CanonicalMicro:
    """Exactly tilted discrete distribution of characteristics.

    Invariants: ``weights`` sum to one within 1e-12 and the tilted mean of
    the excess-demand values is zero within 1e-9 (for the composite form,
    the tilted macro mean equals ``x_target`` within 1e-9 as well).
    Weights that underflow 1e-300 are clamped to zero with a warning.
    """

    atoms: np.ndarray
    weights: np.ndarray
    base_weights: np.ndarray
    alpha: np.ndarray
    p: Price
    log_lambda: float
    beta: np.ndarray | None = None
    x_target: np.ndarray | None = None


@dataclass(frozen=True)
class CanonicalSampler:
    """Best-effort rejection sampler for tilted continuous distributions.

    Proposals come from the base sampler and are accepted with probability
    ``exp(alpha . z - envelope)``, the envelope being a grid maximum of the
    tilt score over the support box times a 1.001 safety factor.
    """

    base: Continuous
    structure: StructureFunction
    alpha: np.ndarray
    p: Price
    log_lambda: float
    log_envelope: float

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        out = np.empty((count, self.structure.m))
        filled = 0
        for _ in range(10_000):
            draw = self.base.sample(rng, max(count, 256))
            scores = self.structure.eval(draw, self.p.coords) @ self.alpha
            keep = np.log(rng.random(draw.shape[0])) < scores - self.log_envelope
            take = draw[keep][: count - filled]
            out[filled : filled + take.shape[0]] = take
            filled += take.shape[0]
            if filled == count:
                return out
        raise UnboundedTilt("rejection sampler acceptance rate is effectively zero")


def _clamped_weights(log_base: np.ndarray, scores: np.ndarray) -> tuple[np.ndarray, float]:
    """Tilted weights from log base weights and tilt scores, with underflow
    clamping; returns ``(weights, log_lambda)``."""
    total = log_base + scores
    log_lambda = float(logsumexp(total))
    weights = np.exp(total - log_lambda)
    tiny = (weights < _CLAMP) & (weights > 0.0)
    if np.any(tiny):
        warnings.warn(
            f"{int(tiny.sum())} tilted atom weight(s) below {_CLAMP}; clamped to zero",
            RuntimeWarning,
            stacklevel=3,
        )
        weights = np.where(tiny, 0.0, weights)
        weights = weights / weights.sum()
    return weights, log_lambda


def tilt_micro(micro: Discrete, values: np.ndarray, alpha: np.ndarray) -> Discrete:
    """Tilt a discrete distribution by ``exp(alpha . value)`` per atom.

    Returns a plain :class:`Discrete`; atoms whose weight clamps to zero
    are dropped from the support.  Tilting by ``alpha1`` then ``alpha2``
    equals tilting once by ``alpha1 + alpha2``.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    weights, _ = _clamped_weights(np.log(micro.weights), values @ np.asarray(alpha, float))
    keep = weights > 0.0
    return Discrete(micro.atoms[keep], weights[keep] / weights[keep].sum())


def make_canonical(model: EconomyModel, p: Price) -> CanonicalMicro | CanonicalSampler:
    """Canonical micro distribution at the conjugate tilt ``alpha(p)``.

    Discrete models yield an exact :class:`CanonicalMicro`; continuous
    models with a support box (explicit or inferred from quadrature nodes)
    yield a :class:`CanonicalSampler`.

    Raises
    ------
    UnboundedTilt
        For continuous models without any bounded support information.
    """
    if isinstance(model.micro, Continuous) and model.micro.quadrature is None:
        raise UnboundedTilt("cannot tilt a bare sampler; no quadrature or box")
    sol = solve_conjugate(model, p)
    if isinstance(model.micro, Discrete):
        atoms, base_weights, values = support_values(model, p)
        weights, log_lambda = _clamped_weights(np.log(base_weights), values @ sol.alpha)
        _check_canonical(weights, values, None, None)
        return CanonicalMicro(
            atoms=atoms,
            weights=weights,
            base_weights=base_weights,
            alpha=sol.alpha,
            p=p,
            log_lambda=log_lambda,
        )
    return _continuous_canonical(model, p, sol.alpha, sol.log_lambda_min)


def make_composite_canonical(
    model: EconomyModel,
    p: Price,
    x: np.ndarray,
    x_structure: StructureFunction,
) -> CanonicalMicro:
    """Joint tilt fixing both zero excess demand and a macro target mean."""
    if not isinstance(model.micro, Discrete):
        raise UnboundedTilt("composite canonical distributions need discrete support")
    x = np.asarray(x, dtype=float).ravel()
    sol = solve_bivariate_conjugate(model, p, x, x_structure)
    atoms, base_weights, values = support_values(model, p)
    x_vals = x_structure.eval(atoms, p.coords)
    scores = values @ sol.alpha + x_vals @ sol.beta
    weights, log_lambda = _clamped_weights(np.log(base_weights), scores)
    _check_canonical(weights, values, x_vals, x)
    return CanonicalMicro(
        atoms=atoms,
        weights=weights,
        base_weights=base_weights,
        alpha=sol.alpha,
        p=p,
        log_lambda=log_lambda,
        beta=sol.beta,
        x_target=x,
    )


def _check_canonical(
    weights: np.ndarray,
    values: np.ndarray,
    x_vals: np.ndarray | None,
    x: np.ndarray | None,
) -> None:
    if abs(weights.sum() - 1.0) > 1e-12:
        raise DimensionMismatch("tilted weights do not sum to one")  # pragma: no cover
    mean_z = weights @ values
    if np.linalg.norm(mean_z, np.inf) > 1e-9:
        raise DimensionMismatch(
            f"tilted mean excess demand {mean_z!r} is not zero"
        )  # pragma: no cover
    if x_vals is not None:
        gap = np.linalg.norm(weights @ x_vals - x, np.inf)
        if gap > 1e-9:
            raise DimensionMismatch(
                f"tilted macro mean misses target by {gap!r}"
            )  # pragma: no cover


def _continuous_canonical(
    model: EconomyModel, p: Price, alpha: np.ndarray, log_lambda: float
) -> CanonicalSampler:
    micro: Continuous = model.micro
    if micro.box is not None:
        lo, hi = micro.box
    else:
        nodes = micro.quadrature[0]
        lo, hi = nodes.min(axis=0), nodes.max(axis=0)
    m = lo.shape[0]
    per_dim = min(_ENVELOPE_GRID, max(2, int(_ENVELOPE_BUDGET ** (1.0 / m))))
    axes = [np.linspace(lo[i], hi[i], per_dim) for i in range(m)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    scores = model.structure.eval(grid, p.coords) @ alpha
    log_env = float(scores.max()) + np.log(_ENVELOPE_SAFETY)
    return CanonicalSampler(
        base=micro,
        structure=model.structure,
        alpha=alpha,
        p=p,
        log_lambda=log_lambda,
        log_envelope=log_env,
    )


def sample_canonical(
    canon: CanonicalMicro | CanonicalSampler, count: int, seed: int
) -> np.ndarray:
    """Draw ``count`` characteristics; deterministic in ``(seed, count)``.

    Discrete canonicals sample by inverse CDF on the tilted weights; the
    stream is counter-based (Philox), so repeated calls with the same seed
    reproduce byte-identical output.
    """
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    if isinstance(canon, CanonicalSampler):
        return canon.sample(rng, count)
    cdf = np.cumsum(canon.weights)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, rng.random(count), side="right")
    return canon.atoms[idx]


def canonical_expectation(canon: CanonicalMicro, g: Callable[[np.ndarray], float]):
    """Exact expectation of ``g(theta)`` under the tilted weights."""
    total = None
    for weight, atom in zip(canon.weights, canon.atoms):
        if weight == 0.0:
            continue
        term = weight * np.asarray(g(atom), dtype=float)
        total = term if total is None else total + term
    out = np.asarray(total)
    return float(out) if out.ndim == 0 else out
