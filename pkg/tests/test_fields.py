import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpnxray.fields import (
    DIRECT_FORM_FACTOR,
    FieldSpec,
    _METRIC_CACHE,
    _bcast,
    coefficient_identities,
    connection,
    cov_deriv,
    d_perp,
    d_perp2,
    exterior_derivative,
    factor_sequence,
    generate,
    iterated_cov_deriv,
    metric_field,
    metric_only,
    nabla2_direct,
    nabla_ell,
    nabla_ell_perp_CP,
    nabla_ell_RP,
    pullback_field,
    restrict_field,
    sym_cov_deriv,
)
from cpnxray.geometry import Isometry, ModelEmbedding, random_special_unitary, space
from cpnxray.jets import Jet, jein, mat_inverse, stack
from cpnxray.tractors import chart_transition_jacobian
from cpnxray.tensor_algebra import RIEMANN, SymplecticData, perp_project, pi_map, standard_J


def _chart0_points(S, count, seed):
    rng = np.random.default_rng(seed)
    return 0.6 * rng.standard_normal((count, S.m))


def _scalar_field(S, seed):
    return generate(FieldSpec("homogeneous-hermitian", S.kind, S.n, 0, seed))


# ---------------------------------------------------------------- generator records


def test_field_spec_record_round_trip():
    spec = FieldSpec("random-trig", "CP", 2, 3, 17, (("freq", "3.5"),))
    line = spec.to_record()
    assert line == "kind=random-trig space=CP n=2 valence=3 seed=17 freq=3.5"
    assert FieldSpec.from_record(line) == spec


def test_field_spec_rejects_unknown_kind():
    with pytest.raises(ValueError):
        FieldSpec("mystery", "CP", 2, 1, 0)


def test_generation_is_reproducible():
    x = _chart0_points(space("CP", 2), 3, 0)
    rec = "kind=homogeneous-hermitian space=CP n=2 valence=2 seed=5"
    np.testing.assert_array_equal(generate(rec).values(0, x), generate(rec).values(0, x))


@pytest.mark.parametrize("kind,valence", [("potential", 0), ("metric-multiple", 3), ("killing", 2)])
def test_generator_valence_checks(kind, valence):
    with pytest.raises(ValueError):
        generate(FieldSpec(kind, "CP", 2, valence, 0))


def test_fields_agree_across_charts():
    """A generated field is a global tensor: two charts related by their Jacobian."""
    S = space("CP", 2)
    om = generate(FieldSpec("homogeneous-hermitian", "CP", 2, 2, 9))
    Z = np.array([0.7 + 0.2j, 0.5 - 0.4j, 0.3 + 0.1j])
    c = {}
    for k in (0, 1):
        w = np.delete(Z / Z[k], k)
        c[k] = np.concatenate([w.real, w.imag])
    D = chart_transition_jacobian(S, 0, 1, c[1])
    w0, w1 = om.values(0, c[0])[0], om.values(1, c[1])[0]
    np.testing.assert_allclose(D.T @ w0 @ D, w1, atol=1e-12)


def test_metric_cache_matches_fresh_evaluation():
    S = space("CP", 2)
    x = _chart0_points(S, 4, 1)
    g1, J1 = metric_only(S, x, 2)
    g2, J2 = metric_only(S, x, 2)
    assert g1 is g2
    _METRIC_CACHE.clear()
    g3, J3 = metric_only(S, x, 2)
    np.testing.assert_array_equal(g1.c, g3.c)
    np.testing.assert_array_equal(J1.c, J3.c)


def test_jet_of_field_derivative_matches_derivative_of_jet():
    S = space("CP", 2)
    phi = _scalar_field(S, 3)
    x = _chart0_points(S, 2, 4)
    d1 = sym_cov_deriv(phi).jet(0, x, 1)
    d2 = phi.jet(0, x, 2).grad()
    np.testing.assert_allclose(d1.c, d2.c, atol=1e-13)


# ---------------------------------------------------------------- symmetrised derivative


def test_sym_cov_deriv_at_origin_is_symmetrised_partial():
    S = space("CP", 2)
    om = generate(FieldSpec("homogeneous-hermitian", "CP", 2, 1, 6))
    origin = np.zeros((1, 4))
    assert np.abs(connection(S, origin, 0).christoffel.value).max() < 1e-15
    partial = om.jet(0, origin, 1).grad().value[0]
    np.testing.assert_allclose(sym_cov_deriv(om).values(0, origin)[0], 0.5 * (partial + partial.T), atol=1e-14)


def test_hessian_is_symmetric():
    S = space("CP", 2)
    x = _chart0_points(S, 5, 7)
    df = sym_cov_deriv(_scalar_field(S, 8))
    H = cov_deriv(df.jet(0, x, 1), connection(S, x, 0).christoffel).value
    np.testing.assert_allclose(H, np.swapaxes(H, 1, 2), atol=1e-13)


@pytest.mark.parametrize("kind", ["CP", "RP"])
def test_killing_forms_are_in_kernel(kind):
    S = space(kind, 2)
    k = generate(FieldSpec("killing", kind, 2, 1, 10))
    x = _chart0_points(S, 50, 11)
    assert np.abs(k.values(0, x)).max() > 1e-2
    assert np.abs(sym_cov_deriv(k).values(0, x)).max() < 1e-9


def test_killing_form_generates_isometries():
    """Oracle: the flow of the dual vector field preserves the metric.

    Rebuild the generator the same way the catalogue does, integrate it to an
    isometry ``exp(tX)`` and compare ``d/dt`` of the pulled back metric at
    ``t = 0`` by a central difference.
    """
    from scipy.linalg import expm

    S = space("CP", 2)
    rng = np.random.default_rng(10)
    X = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    X = (X - X.conj().T) / 2
    X = X - np.trace(X) / 3 * np.eye(3)
    g = metric_field(S)
    x = _chart0_points(S, 3, 12)
    h = 1e-4
    plus = pullback_field(g, Isometry(S, expm(h * X))).values(0, x)
    minus = pullback_field(g, Isometry(S, expm(-h * X))).values(0, x)
    assert np.abs(plus - minus).max() / (2 * h) < 1e-7


def test_isometry_naturality():
    S = space("CP", 2)
    iso = Isometry(S, random_special_unitary(3, 13))
    phi = generate(FieldSpec("homogeneous-hermitian", "CP", 2, 1, 14))
    x = _chart0_points(S, 6, 15)
    a = sym_cov_deriv(pullback_field(phi, iso)).values(0, x)
    b = pullback_field(sym_cov_deriv(phi), iso).values(0, x)
    np.testing.assert_allclose(a, b, atol=1e-10)
    om = sym_cov_deriv(phi)
    ra = nabla_ell_perp_CP(pullback_field(om, iso), 2, 0, x)
    assert np.abs(ra).max() < 1e-9 * np.abs(iterated_cov_deriv(om, 2, 0, x)).max()


def test_field_linearity():
    S = space("CP", 2)
    a = generate(FieldSpec("homogeneous-hermitian", "CP", 2, 2, 1))
    b = generate(FieldSpec("homogeneous-hermitian", "CP", 2, 2, 2))
    x = _chart0_points(S, 4, 3)
    lhs = nabla_ell(a + 3.0 * b, 2, 0, x)
    rhs = nabla_ell(a, 2, 0, x) + 3 * nabla_ell(b, 2, 0, x)
    np.testing.assert_allclose(lhs, rhs, atol=1e-11)
    with pytest.raises(ValueError):
        a + generate(FieldSpec("homogeneous-hermitian", "CP", 2, 1, 1))


# ---------------------------------------------------------------- product formula


def test_factor_sequence():
    assert factor_sequence(1) == [0]
    assert factor_sequence(2) == [1]
    assert factor_sequence(3) == [0, 2]
    assert factor_sequence(5) == [0, 2, 4]
    assert factor_sequence(6) == [1, 3, 5]
    with pytest.raises(ValueError):
        factor_sequence(0)


def _oracle_coefficients(ell):
    poly = np.array([1], dtype=object)
    for p in factor_sequence(ell):
        if p:
            poly = np.convolve(poly, np.array([1, p * p], dtype=object))
    return [int(c) for c in poly]


@given(st.integers(1, 12))
def test_coefficient_identities(ell):
    c = coefficient_identities(ell)
    assert list(c.expanded) == _oracle_coefficients(ell)
    assert c.ok


def test_coefficients_at_ell5():
    c = coefficient_identities(5)
    assert (c.first_trace, c.second_trace) == (20, 64)
    assert c.expanded == (1, 20, 64)


def test_direct_form_is_twice_product_on_rp():
    S = space("RP", 2)
    x = _chart0_points(S, 10, 21)
    om = generate(FieldSpec("homogeneous-hermitian", "RP", 2, 2, 22))
    direct = nabla2_direct(om, 0, x)
    np.testing.assert_allclose(direct, DIRECT_FORM_FACTOR * nabla_ell(om, 2, 0, x), atol=1e-10 * np.abs(direct).max())


@pytest.mark.parametrize("ell", [1, 2, 3])
def test_rp_operator_kills_potentials(ell):
    S = space("RP", 2)
    x = _chart0_points(S, 50, 30 + ell)
    om = generate(FieldSpec("potential", "RP", 2, ell, 40 + ell))
    assert np.abs(om.values(0, x)).max() > 1e-3
    assert np.abs(nabla_ell_RP(om, ell, 0, x)).max() < 1e-8


def test_rp_operator_detects_non_potential():
    S = space("RP", 2)
    om = generate(FieldSpec("homogeneous-hermitian", "RP", 2, 2, 50))
    assert np.abs(nabla_ell_RP(om, 2, 0, _chart0_points(S, 5, 51))).max() > 1e-3


@pytest.mark.parametrize("ell", [1, 2, 3])
def test_cp_complex_property(ell):
    S = space("CP", 2)
    x = _chart0_points(S, 20, 60 + ell)
    om = generate(FieldSpec("potential", "CP", 2, ell, 70 + ell))
    val = np.abs(nabla_ell_perp_CP(om, ell, 0, x)).max()
    scale = np.abs(iterated_cov_deriv(om, ell, 0, x)).max()
    assert val / scale < 1e-7


def test_operators_check_space():
    with pytest.raises(ValueError):
        nabla_ell_RP(metric_field(space("CP", 2)), 2, 0, np.zeros(4))
    with pytest.raises(ValueError):
        nabla_ell_perp_CP(metric_field(space("RP", 2)), 2, 0, np.zeros(2))


@pytest.mark.parametrize("n,oracle", [(2, np.sqrt(24 / 5)), (3, np.sqrt(96 / 7))])
def test_metric_is_not_in_kernel(n, oracle):
    S = space("CP", n)
    m = 2 * n
    # pointwise oracle: trace-free part of pi(g (x) g) in the standard frame
    gg = pi_map(np.einsum("ab,cd->abcd", np.eye(m), np.eye(m)), 2)
    ref = perp_project(gg, RIEMANN, SymplecticData.standard(n))
    assert np.sqrt((ref**2).sum()) == pytest.approx(oracle, rel=1e-12)
    x = _chart0_points(S, 4, 80)
    R = nabla_ell_perp_CP(metric_field(S), 2, 0, x)
    ginv = np.linalg.inv(S.metric_jet(x, 0).g.value)
    norms = np.sqrt(np.einsum("zabcd,zAbcd,zaA->z", np.einsum("zabcd,zbB,zcC,zdD->zaBCD", R, ginv, ginv, ginv), R, ginv))
    np.testing.assert_allclose(norms, oracle, rtol=1e-12)


@pytest.mark.parametrize("ell", [1, 2, 3])
def test_restriction_commutes_with_operator(ell):
    n = 2
    E = ModelEmbedding(random_special_unitary(n + 1, 90 + ell))
    om = generate(FieldSpec("homogeneous-hermitian", "CP", n, ell, 95 + ell))
    r = restrict_field(om, E)
    x = np.array([[0.2, -0.3]])
    a = nabla_ell_RP(r, ell, 0, x)[0]
    k, H = E.map_jet(0, x, 0)
    b = E.pullback_tensor(nabla_ell(om, ell, int(k[0]), H.value)[0], 0, x)
    np.testing.assert_allclose(a, b, atol=1e-10 * max(1.0, np.abs(a).max()))


def test_restrict_field_requires_cp():
    with pytest.raises(ValueError):
        restrict_field(metric_field(space("RP", 2)), ModelEmbedding(np.eye(3)))


# ---------------------------------------------------------------- the complex on CP_2


def _jup(S, coords, order):
    g, J = metric_only(S, coords, order)
    ginv = mat_inverse(g)
    return J, jein("ac,cb->ab", jein("ac,cd->ad", ginv, J), ginv)


def _d_perp_jet(alpha_fn, S):
    """``d alpha`` minus its J-trace part, as a jet function."""

    def fn(chart, coords, order):
        da = exterior_derivative(alpha_fn(chart, coords, order + 1))
        J, Jup = _jup(S, coords, order)
        tr = jein("ab,ab->", Jup, da)
        return da - J * _bcast(tr, 2) * (1.0 / (2 * S.n))

    return fn


def test_d_perp2_kills_theta_J():
    S = space("CP", 2)
    theta = _scalar_field(S, 100)

    def xi(chart, coords, order):
        return metric_only(S, coords, order)[1] * _bcast(theta.jet(chart, coords, order), 2)

    x = _chart0_points(S, 10, 101)
    res = d_perp2(xi, S, 0, x)
    assert np.abs(res.value).max() < 1e-10
    dtheta = theta.jet(0, x, 1).grad().value
    np.testing.assert_allclose(res.mu, dtheta, atol=1e-12)


def test_d_perp2_after_d_perp_vanishes():
    S = space("CP", 2)
    alpha = generate(FieldSpec("homogeneous-hermitian", "CP", 2, 1, 102))
    x = _chart0_points(S, 10, 103)
    xi = _d_perp_jet(alpha.jet, S)
    np.testing.assert_allclose(xi(0, x, 0).value, d_perp(alpha.jet, S, 0, x), atol=1e-12)
    res = d_perp2(xi, S, 0, x)
    assert np.abs(xi(0, x, 0).value).max() > 1e-3
    assert np.abs(res.value).max() < 1e-8
    assert res.wedge_residual < 1e-10


def test_d_perp_output_is_trace_free():
    S = space("CP", 2)
    alpha = generate(FieldSpec("homogeneous-hermitian", "CP", 2, 1, 104))
    x = _chart0_points(S, 5, 105)
    out = d_perp(alpha.jet, S, 0, x)
    sd = S.symplectic_data(x)
    assert np.abs(np.einsum("zab,zab->z", sd.J_upper, out)).max() < 1e-12


def test_d_perp2_requires_cp2():
    with pytest.raises(ValueError):
        d_perp2(lambda c, x, r: None, space("CP", 3), 0, np.zeros(6))


def test_d_perp_kernel_structure():
    """``omega = d phi + theta alpha`` with ``d alpha = J`` locally has ``d omega = theta J``.

    Near the origin ``alpha = sum x_j dy_j`` has ``d alpha`` equal to the
    standard form, which agrees with ``J`` only at the origin; check there.
    """
    S = space("CP", 2)
    phi = _scalar_field(S, 106)
    theta = 0.7

    def omega(chart, coords, order):
        X = Jet.variables(coords, order + 1)
        zero = X[0] * 0.0
        alpha = stack([zero, zero, X[0], X[1]], axis=0)
        return phi.jet(chart, coords, order + 1).grad() + alpha.truncate(order) * theta

    origin = np.zeros((1, 4))
    dw = exterior_derivative(omega(0, origin, 1)).value[0]
    np.testing.assert_allclose(dw, theta * standard_J(2), atol=1e-13)
    assert np.abs(d_perp(omega, S, 0, origin)).max() < 1e-13
