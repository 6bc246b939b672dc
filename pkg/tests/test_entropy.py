import numpy as np
import pytest
from scipy.special import logsumexp

from stochequil import (
    Discrete,
    EconomyModel,
    bivariate_cgf,
    bivariate_entropy,
    cd_characteristics,
    cd_tld_diagnostic,
    cgf,
    cgf_from_support,
    check_pep,
    check_pep_values,
    entropy,
    full_rank_diagnostic,
    make_cd_structure,
    minimize_entropy_over_price,
    solve_bivariate_conjugate,
    solve_conjugate,
    structure_from_pointwise,
    validate_price,
)
from stochequil.errors import (
    NotPossibleCompositeEquilibrium,
    NotPossibleEquilibriumPrice,
)
from stochequil.reference import (
    nonsurvival_structure,
    survival_economy,
    symmetric_two_atom_economy,
    tagged_two_atom_economy,
)


def _support_model(values, weights):
    """Scalar model whose excess demand takes the given values, any price."""
    atoms = np.array([[v, 0.0] for v in values])
    f = structure_from_pointwise(
        lambda theta, coords: np.array([theta[0]]), m=2, out_dim=1
    )
    return EconomyModel(
        structure=f, micro=Discrete(atoms, np.asarray(weights, float)), n=1
    )


P_HALF = validate_price([0.5, 0.5])


# --- CGF -----------------------------------------------------------------

def test_cgf_matches_direct_logsumexp():
    model = _support_model([2.0, -1.0], [0.5, 0.5])
    alpha = np.array([0.3])
    val = cgf(model, alpha, P_HALF)
    direct = logsumexp([np.log(0.5) + 0.6, np.log(0.5) - 0.3])
    assert abs(val.log_lambda - direct) < 1e-14


def test_cgf_tilted_moments():
    # gradient = tilted mean, hessian = tilted variance, by hand
    values = np.array([[2.0], [-1.0]])
    lw = np.log([0.5, 0.5])
    out = cgf_from_support(values, lw, np.array([0.3]))
    w = np.array([0.5 * np.e**0.6, 0.5 * np.e**-0.3])
    w /= w.sum()
    mean = w @ values[:, 0]
    var = w @ (values[:, 0] - mean) ** 2
    np.testing.assert_allclose(out.grad, [mean], rtol=1e-13)
    np.testing.assert_allclose(out.hess, [[var]], rtol=1e-12)


# --- conjugate variables -------------------------------------------------

def test_conjugate_frozen_two_point_support():
    # support {+2, -1} with equal weights: minimizing E e^{az} gives
    # e^{3a} = 1/2, i.e. a = -ln(2)/3 = -0.2310490602, and the minimized
    # value is (3/2) 2^{-2/3} = 0.9449407874211549.
    model = _support_model([2.0, -1.0], [0.5, 0.5])
    sol = solve_conjugate(model, P_HALF)
    assert abs(sol.alpha[0] - (-np.log(2.0) / 3.0)) < 1e-12
    assert abs(np.exp(sol.log_lambda_min) - 1.5 * 2.0 ** (-2.0 / 3.0)) < 1e-12
    assert sol.grad_norm < 1e-10


def test_conjugate_tilted_weights_two_thirds():
    # the tilted distribution reweights to (1/3, 2/3)
    model = _support_model([2.0, -1.0], [0.5, 0.5])
    sol = solve_conjugate(model, P_HALF)
    out = cgf_from_support(
        np.array([[2.0], [-1.0]]), np.log([0.5, 0.5]), sol.alpha
    )
    tilted = np.array([
        0.5 * np.exp(2.0 * sol.alpha[0]),
        0.5 * np.exp(-sol.alpha[0]),
    ])
    tilted /= tilted.sum()
    np.testing.assert_allclose(tilted, [1.0 / 3.0, 2.0 / 3.0], rtol=1e-12)
    assert abs(out.grad[0]) < 1e-10  # tilted mean of z vanishes


def test_economy_alpha_closed_form():
    # alpha(p) = 2 p ln(p / (1-p)) on the two-atom reference economy
    model = symmetric_two_atom_economy(8)
    for p1 in (0.55, 0.6, 0.66, 0.7):
        sol = solve_conjugate(model, validate_price([p1, 1.0 - p1]))
        closed = 2.0 * p1 * np.log(p1 / (1.0 - p1))
        assert abs(sol.alpha[0] - closed) < 1e-10


def test_economy_rate_closed_form():
    # per-agent rate ln 2 + p ln p + (1-p) ln(1-p); at p = 0.66 this is
    # 0.05211170267878967
    model = symmetric_two_atom_economy(100)
    rep = entropy(model, validate_price([0.66, 0.34]))
    assert abs(rep.per_agent_rate - 0.05211170267878967) < 1e-12
    assert abs(rep.total - 5.211170267878967) < 1e-10
    assert abs(rep.alpha[0] - 0.8755483669815489) < 1e-10


def test_entropy_vanishes_at_expected_price():
    model = symmetric_two_atom_economy(1000)
    rep = entropy(model, P_HALF)
    assert abs(rep.alpha[0]) < 1e-10
    assert abs(rep.total) < 1e-8 * model.n


def test_conjugate_extreme_price():
    model = symmetric_two_atom_economy(8)
    sol = solve_conjugate(model, validate_price([0.9, 0.1]))
    assert abs(sol.alpha[0] - 1.8 * np.log(9.0)) < 1e-9
    rate = np.log(2.0) + 0.9 * np.log(0.9) + 0.1 * np.log(0.1)
    assert abs(-sol.log_lambda_min - rate) < 1e-12


# --- possible equilibrium prices ----------------------------------------

def test_pep_interior_support():
    model = symmetric_two_atom_economy(8)
    assert bool(check_pep(model, validate_price([0.66, 0.34])))


def test_pep_one_sided_support_certificate():
    # support {+1, +2}: no sign change, certificate direction is -1
    fea = check_pep_values(np.array([[1.0], [2.0]]))
    assert not fea
    assert fea.certificate[0] < 0.0
    assert np.all(fea.certificate[0] * np.array([1.0, 2.0]) <= 1e-12)


def test_impossible_price_raises_with_certificate():
    atoms = cd_characteristics([0.3, 0.7], [1.0, 1.0])[None, :]
    micro = Discrete(atoms, np.array([1.0]))
    model = EconomyModel(structure=make_cd_structure(1), micro=micro, n=4)
    with pytest.raises(NotPossibleEquilibriumPrice):
        solve_conjugate(model, P_HALF)
    with pytest.raises(NotPossibleEquilibriumPrice):
        entropy(model, P_HALF)


def test_pep_rank_deficiency_two_dim():
    # both support points on the diagonal: 0 is in the hull segment but the
    # span is one-dimensional, so no interior point exists
    fea = check_pep_values(np.array([[1.0, 1.0], [-1.0, -1.0]]))
    assert not fea


# --- bivariate -----------------------------------------------------------

def test_bivariate_cgf_beta_zero_reduces():
    model, label = tagged_two_atom_economy(8)
    p = validate_price([0.6, 0.4])
    alpha = np.array([0.4])
    plain = cgf(model, alpha, p)
    joint = bivariate_cgf(model, alpha, np.zeros(1), p, label)
    assert abs(joint.log_lambda - plain.log_lambda) < 1e-14
    np.testing.assert_allclose(joint.grad[:1], plain.grad, atol=1e-13)


def test_bivariate_bernoulli_laplace_transform():
    # with alpha = 0, beta = 1 the joint transform is the Bernoulli one:
    # log(0.7 + 0.3 e)
    model, label = tagged_two_atom_economy(8, q=0.3)
    val = bivariate_cgf(model, np.zeros(1), np.ones(1), P_HALF, label)
    assert abs(val.log_lambda - np.log(0.7 + 0.3 * np.e)) < 1e-14


def test_bivariate_entropy_bernoulli_kl():
    # independent label: conditioning the label mean from 0.3 to 0.5 at the
    # expected price costs exactly KL(Ber(0.5) || Ber(0.3)) per agent,
    # 0.5 ln(0.5/0.3) + 0.5 ln(0.5/0.7) = 0.08717669357238891
    model, label = tagged_two_atom_economy(8, q=0.3)
    rep = bivariate_entropy(model, P_HALF, np.array([0.5]), label)
    assert abs(rep.per_agent_rate - 0.08717669357238891) < 1e-12
    assert abs(rep.alpha[0]) < 1e-9
    assert abs(rep.beta[0] - np.log(7.0 / 3.0)) < 1e-10


def test_bivariate_self_consistency():
    # I(p,x) must reproduce from its own report: n(-log lambda + beta . x)
    model, spec = survival_economy(100)
    x = nonsurvival_structure(spec)
    rep = bivariate_entropy(model, validate_price([0.55, 0.45]), np.array([0.3]), x)
    again = model.n * (-rep.log_lambda + float(rep.beta @ rep.x))
    assert abs(again - rep.total) < 1e-10


def test_bivariate_zero_at_expected_point():
    model, spec = survival_economy(100)
    x = nonsurvival_structure(spec)
    rep = bivariate_entropy(model, P_HALF, np.array([0.2]), x)
    assert abs(rep.total) < 1e-8


def test_survival_composite_rate_closed_form():
    # the non-survival set is {atom 3} at every interior price, so pushing
    # its probability 0.2 -> 0.3 at p*_e is the three-point reweighting
    # KL((0.35,0.35,0.3) || (0.4,0.4,0.2)) = 0.7 ln(7/8) + 0.3 ln(3/2)
    model, spec = survival_economy(50)
    x = nonsurvival_structure(spec)
    rep = bivariate_entropy(model, P_HALF, np.array([0.3]), x)
    closed = 0.7 * np.log(7.0 / 8.0) + 0.3 * np.log(1.5)
    assert abs(rep.per_agent_rate - closed) < 1e-10


def test_joint_conditioning_infeasible_without_label():
    # two atoms only: z and any label are affinely dependent, so a joint
    # (clearing, shifted-mean) condition admits no tilt
    model = symmetric_two_atom_economy(8)
    e1 = structure_from_pointwise(
        lambda theta, coords: np.array([theta[2]]), m=4, out_dim=1
    )
    with pytest.raises(NotPossibleCompositeEquilibrium):
        solve_bivariate_conjugate(model, P_HALF, np.array([0.3]), e1)


def test_minimize_over_price_tagged():
    # the label is independent of demand, so the composite entropy is
    # minimized exactly at the expected equilibrium price
    model, label = tagged_two_atom_economy(20, q=0.3)
    best = minimize_entropy_over_price(
        model, np.array([0.5]), np.linspace(0.2, 0.8, 13), label
    )
    assert abs(best.coords[0] - 0.5) < 1e-6


# --- diagnostics ---------------------------------------------------------

def test_cd_tld_diagnostic_bounds():
    atoms = np.stack([
        cd_characteristics([0.3, 0.7], [1.0, 1.0]),
        cd_characteristics([0.6, 0.4], [0.5, 2.0]),
    ])
    micro = Discrete(atoms, np.array([0.5, 0.5]))
    model = EconomyModel(structure=make_cd_structure(1), micro=micro, n=10)
    rep = cd_tld_diagnostic(model, P_HALF)
    assert rep.conditions_hold
    assert abs(rep.share1_min - 0.3) < 1e-15
    assert abs(rep.perturbation_bound - 0.3 * 1.0 / 2.0) < 1e-15
    assert abs(rep.pivot_gap - 0.2) < 1e-15


def test_cd_tld_diagnostic_degenerate_endowments():
    model = symmetric_two_atom_economy(10)
    rep = cd_tld_diagnostic(model, P_HALF)
    assert not rep.conditions_hold  # e^2 hits zero on the support
    assert rep.perturbation_bound == 0.0


def test_full_rank_diagnostic():
    model = symmetric_two_atom_economy(10)
    rep = full_rank_diagnostic(model, P_HALF)
    assert rep.full_rank
    assert rep.rank == 1
    assert rep.smallest_singular_value > 1e-8
