"""Monatomic ideal gas fixtures with closed-form answers.

The same entropy machinery that handles random economies applies to a gas
of ``n`` particles with kinetic energy ``|theta|^2 / 2m`` per particle:
the Laplace transform of the energy has the closed form

    log lambda(beta) = (3/2) (log 2 pi m - log beta),

internal energy is ``3n / (2 beta)``, and the entropy
``S = n (log lambda + beta e)`` reduces to ``(3n/2) log(2 pi e m / beta)``.
These exact values anchor the generic log-space CGF engine: evaluated on a
boxed quadrature model of one particle, it must reproduce them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .entropy import CGFValue, cgf
from .errors import DimensionMismatch, TruncationTooTight
from .model import Continuous, EconomyModel, StructureFunction, validate_price

_RADIUS_FACTOR = 8.0


@dataclass(frozen=True)
class GasSpec:
    """Particle mass ``m``, particle count ``n``, inverse temperature ``beta``."""

    m: float
    n: int
    beta: float

    def __post_init__(self):
        if self.m <= 0 or self.beta <= 0 or self.n < 1:
            raise DimensionMismatch(
                f"need m > 0, beta > 0, n >= 1; got {self.m}, {self.beta}, {self.n}"
            )


class GasEntropy(NamedTuple):
    from_partition: float
    closed_form: float


def gas_partition(spec: GasSpec) -> float:
    """Per-particle ``log lambda(beta)``; the full gas has ``n`` times this."""
    return 1.5 * (np.log(2.0 * np.pi * spec.m) - np.log(spec.beta))


def gas_internal_energy(spec: GasSpec) -> float:
    """Total mean energy ``n * 3 / (2 beta)`` under the canonical law."""
    return spec.n * 1.5 / spec.beta


def gas_entropy(spec: GasSpec) -> GasEntropy:
    """Entropy via the partition identity and via the closed form.

    The two must agree to 1e-12; both are returned so callers can assert
    the identity rather than trust it.
    """
    per_particle_energy = 1.5 / spec.beta
    from_partition = spec.n * (gas_partition(spec) + spec.beta * per_particle_energy)
    closed = 1.5 * spec.n * (np.log(2.0 * np.pi * np.e * spec.m) - np.log(spec.beta))
    return GasEntropy(float(from_partition), float(closed))


def gas_canonical_pdf(theta, spec: GasSpec):
    """Single-particle canonical momentum density; accepts (3,) or (N, 3)."""
    theta = np.asarray(theta, dtype=float)
    sq = np.sum(np.atleast_2d(theta) ** 2, axis=1)
    norm = (2.0 * np.pi * spec.m) ** -1.5 * spec.beta**1.5
    out = norm * np.exp(-spec.beta * sq / (2.0 * spec.m))
    return float(out[0]) if theta.ndim == 1 else out


def box_quadrature(radius: float, points_per_dim: int = 48) -> Continuous:
    """Gauss-Legendre product rule on the momentum box ``[-r, r]^3``.

    The weights are normalized to the uniform probability on the box, so
    expectations under the returned model are ``V^{-1}`` times Lebesgue
    integrals with ``V = (2r)^3``.
    """
    x, w = np.polynomial.legendre.leggauss(points_per_dim)
    x = radius * x
    w = radius * w  # plain Lebesgue weights on [-r, r]
    nodes = np.stack(
        [g.ravel() for g in np.meshgrid(x, x, x, indexing="ij")], axis=-1
    )
    weights = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    volume = (2.0 * radius) ** 3
    lo = np.full(3, -radius)
    hi = np.full(3, radius)

    def sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(-radius, radius, size=(count, 3))

    return Continuous(sampler=sampler, quadrature=(nodes, weights / volume),
                      box=(lo, hi))


def gas_cgf_fixture(spec: GasSpec, quadrature: Continuous) -> CGFValue:
    """Run the generic CGF engine on the boxed gas at tilt ``-beta``.

    Returns the physical Laplace transform: the engine's uniform-box
    expectation plus the log box volume.  ``grad`` is the canonical mean
    energy per particle and should match ``3/(2 beta)``.

    Raises
    ------
    TruncationTooTight
        If the box radius is below ``8 sqrt(m / beta)`` (the truncated
        canonical mass then exceeds the 1e-4 error budget).
    """
    if quadrature.box is None or quadrature.quadrature is None:
        raise DimensionMismatch("fixture needs a boxed quadrature model")
    lo, hi = quadrature.box
    radius = float(np.max(np.abs(np.concatenate([lo, hi]))))
    needed = _RADIUS_FACTOR * np.sqrt(spec.m / spec.beta)
    if radius < needed:
        raise TruncationTooTight(
            f"box radius {radius} below {needed:.4g} = 8 sqrt(m/beta)"
        )
    log_volume = float(np.sum(np.log(hi - lo)))

    def ev(thetas, coords):
        return np.sum(thetas**2, axis=1, keepdims=True) / (2.0 * spec.m)

    structure = StructureFunction(m=3, out_dim=1, kind="kinetic_energy", _eval=ev)
    model = EconomyModel(structure=structure, micro=quadrature, n=spec.n)
    raw = cgf(model, np.array([-spec.beta]), validate_price([0.5, 0.5]))
    return CGFValue(raw.log_lambda + log_volume, raw.grad, raw.hess)
