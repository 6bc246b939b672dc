"""Reference models shared by the tests, the demos, and the CLI configs.

The symmetric two-commodity economy is deliberately simple enough to work
out by hand: both atoms want the two goods equally (``a = (1/2, 1/2)``)
but each atom is endowed with exactly one good.  A configuration with
``c2`` holders of good two out of ``n`` agents clears at ``p* = c2 / n``,
so every Monte Carlo number in the package can be checked against plain
binomial arithmetic.
"""

from __future__ import annotations

import numpy as np

from .equilibrium import SurvivalSpec
from .model import Discrete, EconomyModel, Price, cd_characteristics, make_cd_structure


def symmetric_two_atom_economy(n: int) -> EconomyModel:
    """Two atoms, equal weights: ``(a=(.5,.5), e=(1,0))`` and ``(a=(.5,.5), e=(0,1))``."""
    atoms = np.stack([
        cd_characteristics([0.5, 0.5], [1.0, 0.0]),
        cd_characteristics([0.5, 0.5], [0.0, 1.0]),
    ])
    micro = Discrete(atoms, np.array([0.5, 0.5]))
    return EconomyModel(structure=make_cd_structure(1), micro=micro, n=n)


def survival_economy(n: int, floor: float = 0.4) -> tuple[EconomyModel, SurvivalSpec]:
    """Three-atom economy with a constant survival wealth floor.

    Atom three (weight 0.2) holds a small balanced endowment worth 0.3 at
    every price and sits below the default floor 0.4, so the non-survival
    fraction is non-degenerate at the expected equilibrium ``(0.5, 0.5)``.
    """
    atoms = np.stack([
        cd_characteristics([0.5, 0.5], [1.2, 0.0]),
        cd_characteristics([0.5, 0.5], [0.0, 1.2]),
        cd_characteristics([0.5, 0.5], [0.3, 0.3]),
    ])
    micro = Discrete(atoms, np.array([0.4, 0.4, 0.2]))
    model = EconomyModel(structure=make_cd_structure(1), micro=micro, n=n)
    return model, SurvivalSpec(wealth_floor=lambda p: floor)


def nonsurvival_structure(spec: SurvivalSpec, goods: int = 2):
    """Indicator structure ``x(theta; p) = 1{p . e < w(p)}`` (CD layout)."""
    from .model import StructureFunction, cd_view

    def ev(thetas, coords):
        _, e = cd_view(thetas, goods - 1)
        total = float(np.asarray(coords).sum())
        p = Price(np.asarray(coords, dtype=float) / total)
        wealth = e @ p.coords
        return (wealth < spec.wealth_floor(p)).astype(float)[:, None]

    return StructureFunction(m=2 * goods, out_dim=1, kind="survival_indicator", _eval=ev)


def tagged_two_atom_economy(n: int, q: float = 0.3):
    """Symmetric two-atom economy with an independent Bernoulli(``q``) label.

    Each atom carries a fifth coordinate ``s`` in ``{0, 1}`` that the demand
    map ignores; the returned companion structure reads it back.  Because
    the label is independent of the endowment, conditioning jointly on
    market clearing at the expected price and on a shifted label mean
    splits into two one-dimensional tilts.

    Returns
    -------
    (EconomyModel, StructureFunction)
        The economy and the label structure ``x(theta; p) = s``.
    """
    from .model import StructureFunction

    base = np.stack([
        cd_characteristics([0.5, 0.5], [1.0, 0.0]),
        cd_characteristics([0.5, 0.5], [0.0, 1.0]),
    ])
    atoms = np.vstack([
        np.concatenate([base[0], [0.0]]),
        np.concatenate([base[0], [1.0]]),
        np.concatenate([base[1], [0.0]]),
        np.concatenate([base[1], [1.0]]),
    ])
    weights = np.array([0.5 * (1 - q), 0.5 * q, 0.5 * (1 - q), 0.5 * q])
    micro = Discrete(atoms, weights)
    model = EconomyModel(structure=make_cd_structure(1, m=5), micro=micro, n=n)
    label = StructureFunction(
        m=5, out_dim=1, kind="label",
        _eval=lambda thetas, coords: thetas[:, 4:5],
        _deriv_p=lambda thetas, coords: np.zeros((thetas.shape[0], 1, 1)),
    )
    return model, label
