"""Randomized invariant checks for the core transforms and estimators."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochequil.canonical import make_canonical, tilt_micro
from stochequil.entropy import (
    cgf_from_support,
    check_pep_values,
    solve_conjugate,
)
from stochequil.equilibrium import cd_equilibrium
from stochequil.errors import NotPossibleEquilibriumPrice
from stochequil.model import (
    Discrete,
    EconomyModel,
    Price,
    cd_view,
    make_cd_structure,
    walras_completion,
)
from stochequil.montecarlo import naive_probability
from stochequil.reference import symmetric_two_atom_economy


def _random_support(rng, size, dim):
    values = rng.normal(size=(size, dim))
    weights = rng.dirichlet(np.ones(size))
    return values, np.log(weights)


def test_log_lambda_convex_in_tilt():
    rng = np.random.default_rng(31)
    for _ in range(50):
        size = rng.integers(2, 7)
        values, logw = _random_support(rng, size, 1)
        a, b = rng.normal(size=2) * 2.0
        lam = rng.uniform()
        mix = lam * a + (1.0 - lam) * b
        fa = cgf_from_support(values, logw, np.array([a])).log_lambda
        fb = cgf_from_support(values, logw, np.array([b])).log_lambda
        fm = cgf_from_support(values, logw, np.array([mix])).log_lambda
        assert fm <= lam * fa + (1.0 - lam) * fb + 1e-12


def test_cgf_grad_hess_match_finite_differences():
    rng = np.random.default_rng(77)
    h = 1e-5
    for _ in range(100):
        dim = int(rng.integers(1, 4))
        values, logw = _random_support(rng, int(rng.integers(2, 8)), dim)
        tilt = rng.normal(size=dim)
        val = cgf_from_support(values, logw, tilt)
        for axis in range(dim):
            step = np.zeros(dim)
            step[axis] = h
            up = cgf_from_support(values, logw, tilt + step)
            dn = cgf_from_support(values, logw, tilt - step)
            fd_grad = (up.log_lambda - dn.log_lambda) / (2.0 * h)
            assert abs(fd_grad - val.grad[axis]) < 1e-6 * (1.0 + abs(fd_grad))
            fd_hess = (up.grad[axis] - dn.grad[axis]) / (2.0 * h)
            assert abs(fd_hess - val.hess[axis, axis]) < 1e-5 * (1.0 + abs(fd_hess))


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_walras_and_homogeneity_random_cd_agents(seed):
    rng = np.random.default_rng(seed)
    l = int(rng.integers(1, 4))
    count = int(rng.integers(1, 5))
    shares = rng.dirichlet(np.ones(l + 1), size=count)
    endow = rng.uniform(0.1, 2.0, size=(count, l + 1))
    thetas = np.hstack([shares, endow])
    structure = make_cd_structure(l)
    coords = rng.dirichlet(np.ones(l + 1))
    p = Price(coords)
    z = structure.eval(thetas, coords)
    full = walras_completion(z, p)
    # Walras' law: demand value equals endowment value at any price.
    assert np.max(np.abs(full @ p.coords)) < 1e-10
    for s in (0.5, 2.0):
        scaled = structure.eval(thetas, s * coords)
        assert np.allclose(z, scaled, atol=1e-11)


def test_tilt_composition_random_tilts():
    rng = np.random.default_rng(9)
    model = symmetric_two_atom_economy(8)
    p = Price(np.array([0.6, 0.4]))
    support = model.structure.eval(model.micro.atoms, p.coords)
    for _ in range(20):
        a1, a2 = rng.normal(size=2)
        once = tilt_micro(model.micro, support, np.array([a1]))
        twice = tilt_micro(once, support, np.array([a2]))
        direct = tilt_micro(model.micro, support, np.array([a1 + a2]))
        assert np.allclose(twice.weights, direct.weights, atol=1e-12)
    canon = make_canonical(model, p)
    assert canon.weights.shape == model.micro.weights.shape


def test_pep_feasibility_matches_solver_on_scalar_supports():
    rng = np.random.default_rng(123)
    for _ in range(40):
        size = int(rng.integers(1, 6))
        raw = rng.normal(size=size)
        if rng.uniform() < 0.4:
            raw = np.abs(raw) + 0.05  # force a one-sided support
        values = raw.reshape(-1, 1)
        feasible = check_pep_values(values)
        atoms = np.column_stack(
            [np.full(size, 0.5), np.full(size, 0.5), raw + 1.0, np.ones(size)]
        )
        weights = rng.dirichlet(np.ones(size)) if size > 1 else np.ones(1)
        model = EconomyModel(
            micro=Discrete(atoms=atoms, weights=weights),
            structure=_shifted_structure(),
            n=4,
        )
        p = Price(np.array([0.5, 0.5]))
        if feasible:
            sol = solve_conjugate(model, p)
            assert sol.grad_norm < 1e-8
        else:
            with pytest.raises(NotPossibleEquilibriumPrice):
                solve_conjugate(model, p)


def _shifted_structure():
    from stochequil.model import structure_from_pointwise

    # excess demand of good 1 is theta_3 - 1 regardless of price, so the
    # support of z is exactly the raw draw used to build the atoms.
    return structure_from_pointwise(
        lambda theta, coords: np.array([theta[2] - 1.0]), m=4, out_dim=1, kind="shifted"
    )


def test_estimates_independent_of_thread_count():
    model = symmetric_two_atom_economy(8)
    p = Price(np.array([0.66, 0.34]))
    single = naive_probability(model, p, 0.05, replicas=20000, seed=3, threads=1)
    multi = naive_probability(model, p, 0.05, replicas=20000, seed=3, threads=5)
    assert single.value == multi.value
    assert single.std_error == multi.std_error


def test_cd_equilibrium_price_on_random_economies():
    rng = np.random.default_rng(2024)
    for _ in range(25):
        l = int(rng.integers(1, 4))
        count = int(rng.integers(2, 5))
        shares = rng.dirichlet(np.ones(l + 1), size=count)
        endow = rng.uniform(0.2, 1.5, size=(count, l + 1))
        thetas = np.hstack([shares, endow])
        result = cd_equilibrium(thetas, l)
        structure = make_cd_structure(l)
        residual = structure.eval(thetas, result.price.coords).sum(axis=0)
        assert np.max(np.abs(residual)) < 1e-8
        assert np.all(result.price.coords > 0.0)
        assert abs(result.price.coords.sum() - 1.0) < 1e-12
