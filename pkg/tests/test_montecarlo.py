import dataclasses

import numpy as np
import pytest
from scipy.stats import binom

from stochequil import (
    Discrete,
    EconomyModel,
    cd_characteristics,
    clt_covariance,
    clt_entropy_approx,
    conditional_empirical,
    conditional_macro_mean,
    importance_probability,
    make_cd_structure,
    naive_probability,
    oracle_conditional,
    oracle_probability,
    structure_from_pointwise,
    validate_price,
)
from stochequil.errors import NonUniqueEquilibrium, TooLarge
from stochequil.reference import survival_economy, symmetric_two_atom_economy

P66 = validate_price([0.66, 0.34])

# On the two-atom reference economy every configuration with c2 holders of
# good two clears at p1 = c2/n, so the event {|p* - p| < delta} is a plain
# binomial statement and everything below checks against binom arithmetic.


def test_oracle_probability_exact_single_count():
    # n=8, delta=0.05: only c2=5 lands in (0.61, 0.71); P = C(8,5)/2^8
    model = symmetric_two_atom_economy(8)
    est = oracle_probability(model, P66, 0.05)
    assert est.std_error == 0.0
    assert abs(est.value - 56.0 / 256.0) < 1e-15
    assert abs(est.value - binom.pmf(5, 8, 0.5)) < 1e-13


def test_oracle_probability_two_counts():
    # delta=0.13 widens the window to c2 in {5, 6}
    model = symmetric_two_atom_economy(8)
    est = oracle_probability(model, P66, 0.13)
    assert abs(est.value - 84.0 / 256.0) < 1e-15


def test_oracle_probability_empty_event():
    model = symmetric_two_atom_economy(8)
    est = oracle_probability(model, P66, 1e-4)
    assert est.value == 0.0
    assert est.zero_hits
    assert est.log_value == -np.inf


def test_naive_within_four_se():
    model = symmetric_two_atom_economy(8)
    est = naive_probability(model, P66, 0.05, replicas=20_000, seed=7)
    assert abs(est.value - 0.21875) < 4 * est.std_error
    assert est.method == "naive"


def test_naive_zero_hits_is_flag_not_error():
    model = symmetric_two_atom_economy(8)
    est = naive_probability(model, P66, 1e-4, replicas=500, seed=7)
    assert est.zero_hits
    assert est.value == 0.0


def test_importance_within_four_se():
    model = symmetric_two_atom_economy(8)
    est = importance_probability(model, P66, 0.05, replicas=20_000, seed=11)
    assert est.method == "importance"
    assert abs(est.value - 0.21875) < 4 * est.std_error


def test_importance_reaches_deep_tail():
    # at n=200 the naive probability is ~2e-4-ish of a percent; importance
    # sampling still resolves it tightly and agrees with the oracle
    model = symmetric_two_atom_economy(200)
    exact = oracle_probability(model, P66, 0.02)
    est = importance_probability(model, P66, 0.02, replicas=20_000, seed=3)
    assert exact.value < 1e-4
    assert abs(est.value - exact.value) < 4 * est.std_error
    rel = est.std_error / est.value
    assert rel < 0.05


def test_estimates_independent_of_thread_count():
    model = symmetric_two_atom_economy(8)
    kw = dict(replicas=9000, seed=21)
    n1 = naive_probability(model, P66, 0.05, threads=1, **kw)
    n8 = naive_probability(model, P66, 0.05, threads=8, **kw)
    assert n1.value == n8.value and n1.std_error == n8.std_error
    i1 = importance_probability(model, P66, 0.05, threads=1, **kw)
    i8 = importance_probability(model, P66, 0.05, threads=8, **kw)
    assert i1.value == i8.value and i1.log_value == i8.log_value


def test_seed_changes_draws():
    model = symmetric_two_atom_economy(8)
    a = naive_probability(model, P66, 0.05, replicas=4000, seed=1)
    b = naive_probability(model, P66, 0.05, replicas=4000, seed=2)
    assert a.value != b.value


def test_oracle_conditional_frozen():
    model = symmetric_two_atom_economy(8)
    cond = oracle_conditional(model, P66, 0.05)
    np.testing.assert_allclose(cond.frequencies, [3.0 / 8.0, 5.0 / 8.0], atol=1e-14)
    cond2 = oracle_conditional(model, P66, 0.13)
    # mix of c2=5 (mass 56) and c2=6 (mass 28): mean frequency (1/3, 2/3)
    np.testing.assert_allclose(cond2.frequencies, [1.0 / 3.0, 2.0 / 3.0], atol=1e-14)


def test_conditional_empirical_matches_oracle():
    model = symmetric_two_atom_economy(8)
    cond = oracle_conditional(model, P66, 0.13)
    naive = conditional_empirical(model, P66, 0.13, replicas=8000, seed=5)
    imp = conditional_empirical(
        model, P66, 0.13, replicas=8000, seed=5, use_importance=True
    )
    assert np.abs(naive.frequencies - cond.frequencies).max() < 0.02
    assert np.abs(imp.frequencies - cond.frequencies).max() < 0.02
    assert naive.accepted > 0 and imp.accepted > naive.accepted


def test_conditional_macro_mean_frozen():
    # x = second endowment coordinate; conditional mean at delta=0.13 is
    # exactly 2/3 by the same binomial mixture as above
    model = symmetric_two_atom_economy(8)
    e2 = structure_from_pointwise(
        lambda theta, coords: np.array([theta[3]]), m=4, out_dim=1
    )
    est = conditional_macro_mean(model, P66, 0.13, e2, replicas=8000, seed=9)
    assert abs(est.value - 2.0 / 3.0) < 4 * max(est.std_error, 1e-12) + 1e-3


def test_conditional_macro_mean_degenerate_window():
    # single accepted count: the conditional value is exact, SE collapses
    model = symmetric_two_atom_economy(8)
    e2 = structure_from_pointwise(
        lambda theta, coords: np.array([theta[3]]), m=4, out_dim=1
    )
    est = conditional_macro_mean(model, P66, 0.05, e2, replicas=4000, seed=9)
    assert abs(est.value - 5.0 / 8.0) < 1e-12
    assert est.std_error < 1e-10


def test_clt_covariance_binomial_variance():
    # Var(sqrt(n)(p* - 1/2)) = 1/4 exactly for every n (given interior)
    model = symmetric_two_atom_economy(100)
    trend = clt_covariance(model, [100, 400], replicas=20_000, seed=13)
    for n, sig in trend.per_n.items():
        assert abs(sig[0, 0] - 0.25) < 0.012  # ~4 SE of the variance estimate
    assert trend.dropped == 0


def test_clt_covariance_counts_boundary_drops():
    # at n=10 the all-one-good configurations (p* on the boundary) occur
    # with probability 2^-9 per replica and must be dropped and tallied
    model = symmetric_two_atom_economy(10)
    trend = clt_covariance(model, [10], replicas=20_000, seed=17)
    assert trend.dropped > 0


def test_clt_entropy_approx_quadratic():
    model = symmetric_two_atom_economy(100)
    sigma = np.array([[0.25]])
    val = clt_entropy_approx(model, validate_price([0.52, 0.48]), sigma)
    assert abs(val - 100 * 0.02**2 / (2 * 0.25)) < 1e-12


def test_non_unique_expected_equilibrium_refused():
    # two isolated wealth blocks: estimators must refuse to average over an
    # ambiguous equilibrium selection
    atoms = np.stack([
        cd_characteristics([1.0, 0.0], [1.0, 0.0]),
        cd_characteristics([0.0, 1.0], [0.0, 1.0]),
    ])
    micro = Discrete(atoms, np.array([0.5, 0.5]))
    model = EconomyModel(structure=make_cd_structure(1), micro=micro, n=6)
    with pytest.raises(NonUniqueEquilibrium):
        naive_probability(model, validate_price([0.5, 0.5]), 0.1, 100, seed=0)


def test_oracle_budget_gate():
    model, _ = survival_economy(4000)  # C(4002, 2) ~ 8e6 count vectors
    with pytest.raises(TooLarge):
        oracle_probability(model, validate_price([0.5, 0.5]), 0.05)
