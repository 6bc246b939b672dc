import numpy as np
import pytest

from stochequil import (
    Discrete,
    EconomyModel,
    Price,
    cd_characteristics,
    cd_view,
    make_cd_structure,
    register_structure,
    structure_from_pointwise,
    total_excess_demand,
    validate_price,
    walras_completion,
    STRUCTURE_REGISTRY,
)
from stochequil.errors import DimensionMismatch, NotOnSimplex


def test_validate_price_interior():
    p = validate_price([0.3, 0.7])
    assert isinstance(p, Price)
    assert p.l == 1
    assert p.interior
    np.testing.assert_allclose(p.head(), [0.3])


def test_validate_price_rejects_off_simplex():
    with pytest.raises(NotOnSimplex):
        validate_price([0.5, 0.6])
    with pytest.raises(NotOnSimplex):
        validate_price([-0.1, 1.1])


def test_boundary_price_not_interior():
    p = validate_price([0.0, 1.0])
    assert not p.interior


def test_cd_characteristics_roundtrip():
    theta = cd_characteristics([0.3, 0.7], [2.0, 1.0])
    np.testing.assert_allclose(theta, [0.3, 0.7, 2.0, 1.0])
    a, e = cd_view(theta)
    np.testing.assert_allclose(a, [0.3, 0.7])
    np.testing.assert_allclose(e, [2.0, 1.0])


def test_cd_characteristics_validation():
    with pytest.raises(NotOnSimplex):
        cd_characteristics([0.4, 0.7], [1.0, 1.0])
    with pytest.raises(DimensionMismatch):
        cd_characteristics([0.3, 0.7], [1.0, -1.0])


def test_cd_view_with_trailing_label():
    # explicit l reads the leading CD block and ignores the label column
    theta = np.array([0.5, 0.5, 1.0, 0.0, 1.0])
    a, e = cd_view(theta, 1)
    np.testing.assert_allclose(a, [0.5, 0.5])
    np.testing.assert_allclose(e, [1.0, 0.0])
    with pytest.raises(DimensionMismatch):
        cd_view(theta)  # odd length has no half/half split


def test_cd_eval_frozen_values():
    # (0.3/0.5)*(0.5*1 + 0.5*1) - 1 = -0.4 and (0.3/0.5)*(0.5*2) - 2 = -1.4
    s = make_cd_structure(1)
    p = np.array([0.5, 0.5])
    z1 = s.eval(cd_characteristics([0.3, 0.7], [1.0, 1.0]), p)
    z2 = s.eval(cd_characteristics([0.3, 0.7], [2.0, 0.0]), p)
    np.testing.assert_allclose(z1, [[-0.4]], atol=1e-15)
    np.testing.assert_allclose(z2, [[-1.4]], atol=1e-15)


def test_cd_eval_batch_shape():
    s = make_cd_structure(2)
    thetas = np.stack([
        cd_characteristics([0.2, 0.3, 0.5], [1.0, 1.0, 1.0]),
        cd_characteristics([0.5, 0.25, 0.25], [0.0, 2.0, 0.0]),
    ])
    out = s.eval(thetas, np.array([0.4, 0.3, 0.3]))
    assert out.shape == (2, 2)


def test_cd_eval_rejects_wrong_width():
    s = make_cd_structure(1)
    with pytest.raises(DimensionMismatch):
        s.eval(np.ones((3, 6)), np.array([0.5, 0.5]))


def test_homogeneity_degree_zero():
    # z(theta; c p) == z(theta; p) for any positive scale c
    s = make_cd_structure(1)
    theta = cd_characteristics([0.3, 0.7], [2.0, 1.0])
    p = np.array([0.4, 0.6])
    base = s.eval(theta, p)
    for c in (0.1, 3.0, 250.0):
        np.testing.assert_allclose(s.eval(theta, c * p), base, rtol=1e-13)


def test_walras_completion_orthogonal():
    # p . (z, completion) = 0: the omitted coordinate is determined by the
    # budget identity, for single agents and for batches alike.
    s = make_cd_structure(1)
    rng = np.random.default_rng(0)
    for _ in range(25):
        a1 = rng.uniform(0.05, 0.95)
        e = rng.uniform(0.0, 3.0, size=2)
        p1 = rng.uniform(0.05, 0.95)
        p = validate_price([p1, 1.0 - p1])
        theta = cd_characteristics([a1, 1.0 - a1], e)
        z = s.eval(theta, p.coords)
        full = walras_completion(z, p)
        assert full.shape == (1, 2)
        assert abs(full @ p.coords) < 1e-12


def test_cd_deriv_p_matches_finite_differences():
    s = make_cd_structure(1)
    thetas = np.stack([
        cd_characteristics([0.5, 0.5], [0.0, 1.0]),
        cd_characteristics([0.3, 0.7], [2.0, 1.0]),
    ])
    coords = np.array([0.4, 0.6])
    analytic = s.deriv_p(thetas, coords)
    h = 1e-6
    up = s.eval(thetas, coords + np.array([h, -h]))
    dn = s.eval(thetas, coords + np.array([-h, h]))
    fd = (up - dn) / (2.0 * h)
    np.testing.assert_allclose(analytic[:, :, 0], fd, rtol=1e-7)


def test_cd_deriv_p_closed_form_corner():
    # a = (1/2, 1/2), e = (0, 1): on-simplex slope -a e2 / p^2 + a(e1-e2)/p
    # at p = 0.5 equals -2.
    s = make_cd_structure(1)
    theta = cd_characteristics([0.5, 0.5], [0.0, 1.0])
    d = s.deriv_p(theta, np.array([0.5, 0.5]))
    np.testing.assert_allclose(d, [[[-2.0]]], rtol=1e-13)


def test_cd_structure_ignores_label_column():
    base = cd_characteristics([0.5, 0.5], [1.0, 0.0])
    s4 = make_cd_structure(1)
    s5 = make_cd_structure(1, m=5)
    tagged = np.concatenate([base, [1.0]])
    p = np.array([0.66, 0.34])
    np.testing.assert_allclose(s5.eval(tagged, p), s4.eval(base, p))
    np.testing.assert_allclose(s5.deriv_p(tagged[None, :], p), s4.deriv_p(base[None, :], p))


def test_discrete_validation():
    atoms = np.array([[0.5, 0.5, 1.0, 0.0], [0.5, 0.5, 0.0, 1.0]])
    Discrete(atoms, np.array([0.5, 0.5]))  # fine
    with pytest.raises(Exception):
        Discrete(atoms, np.array([0.5, 0.4]))  # weights must sum to one
    with pytest.raises(Exception):
        Discrete(atoms, np.array([1.0, 0.0]))  # weights strictly positive
    with pytest.raises(Exception):
        Discrete(np.vstack([atoms[0], atoms[0]]), np.array([0.5, 0.5]))  # distinct atoms


def test_discrete_sampling_deterministic():
    atoms = np.array([[0.5, 0.5, 1.0, 0.0], [0.5, 0.5, 0.0, 1.0]])
    micro = Discrete(atoms, np.array([0.25, 0.75]))
    draw1 = micro.sample(np.random.default_rng(42), 1000)
    draw2 = micro.sample(np.random.default_rng(42), 1000)
    np.testing.assert_array_equal(draw1, draw2)
    frac = (draw1[:, 3] == 1.0).mean()
    assert abs(frac - 0.75) < 4 * np.sqrt(0.25 * 0.75 / 1000)


def test_total_excess_demand_sums_agents():
    s = make_cd_structure(1)
    atoms = np.array([[0.5, 0.5, 1.0, 0.0], [0.5, 0.5, 0.0, 1.0]])
    micro = Discrete(atoms, np.array([0.5, 0.5]))
    model = EconomyModel(structure=s, micro=micro, n=4)
    thetas = atoms[[0, 0, 1, 1]]
    p = validate_price([0.5, 0.5])
    total = total_excess_demand(model, thetas, p)
    np.testing.assert_allclose(total, s.eval(thetas, p.coords).sum(axis=0))
    np.testing.assert_allclose(total, [0.0], atol=1e-15)


def test_structure_from_pointwise_wraps():
    f = structure_from_pointwise(
        lambda theta, coords: np.array([theta[0] - coords[0]]), m=2, out_dim=1
    )
    out = f.eval(np.array([[1.0, 0.0], [3.0, 0.0]]), np.array([0.5, 0.5]))
    np.testing.assert_allclose(out, [[0.5], [2.5]])


def test_structure_registry():
    assert "cobb_douglas" in STRUCTURE_REGISTRY
    made = STRUCTURE_REGISTRY["cobb_douglas"](l=1)
    assert made.kind == "cobb_douglas"
    register_structure("unit_test_probe", lambda: None)
    assert "unit_test_probe" in STRUCTURE_REGISTRY
    del STRUCTURE_REGISTRY["unit_test_probe"]


def test_economy_model_checks_atom_width():
    s = make_cd_structure(1)
    atoms = np.array([[0.2, 0.3, 0.5, 1.0, 1.0, 1.0]])
    with pytest.raises(DimensionMismatch):
        EconomyModel(structure=s, micro=Discrete(atoms, np.array([1.0])), n=3)
