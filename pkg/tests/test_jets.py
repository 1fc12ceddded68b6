import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from cpnxray.jets import Jet, compose, jein, jmul, mat_inverse


def _poly_jet(x0, order):
    X = Jet.variables(np.atleast_2d(x0), order)
    x, y = X[0], X[1]
    return x, y, x * x * y + y.sin() * x.exp()


def test_product_and_chain_rule_match_closed_form():
    x0 = np.array([0.3, -0.7])
    x, y, f = _poly_jet(x0, 3)
    a, b = x0
    g = f.grad().value[0]
    np.testing.assert_allclose(g, [2 * a * b + np.sin(b) * np.exp(a), a * a + np.cos(b) * np.exp(a)], atol=1e-14)
    H = f.grad().grad().value[0]
    np.testing.assert_allclose(H[0, 0], 2 * b + np.sin(b) * np.exp(a), atol=1e-14)
    np.testing.assert_allclose(H[0, 1], 2 * a + np.cos(b) * np.exp(a), atol=1e-14)
    np.testing.assert_allclose(H[1, 1], -np.sin(b) * np.exp(a), atol=1e-14)


@given(st.floats(-1, 1), st.floats(-1, 1), st.integers(1, 4))
def test_taylor_shift_consistency(a, b, order):
    """The jet at x0 predicts values at a nearby point to the jet order."""
    x0 = np.array([a, b])
    h = np.array([1e-2, -2e-2])
    _, _, f0 = _poly_jet(x0, order)
    _, _, f1 = _poly_jet(x0 + h, 0)
    derivs = f0.derivatives()
    approx = 0.0
    fact = 1.0
    for k, D in enumerate(derivs):
        if k:
            fact *= k
        T = D[0]
        for _ in range(k):
            T = T @ h
        approx += T / fact
    assert abs(approx - f1.value[0]) < 40 * np.linalg.norm(h) ** (order + 1)


def test_leibniz_fast_path_agrees_with_general_product():
    x0 = np.array([[0.2, 0.4], [-0.1, 0.5]])
    X1 = Jet.variables(x0, 1)
    X3 = Jet.variables(x0, 3)
    p1 = jmul(X1[0].exp(), X1[1].cos())
    p3 = jmul(X3[0].exp(), X3[1].cos()).truncate(1)
    np.testing.assert_allclose(p1.c, p3.c, atol=1e-15)


def test_matrix_inverse_jet():
    X = Jet.variables(np.array([[0.1, 0.2]]), 2)
    one = Jet.constant(np.ones(1), 2, 2)
    rows = [[one + X[0] * X[0], X[1]], [X[1], one * 2.0 + X[0]]]
    from cpnxray.jets import stack

    g = stack([stack(r, axis=0) for r in rows], axis=0)
    prod = jein("ab,bc->ac", g, mat_inverse(g))
    np.testing.assert_allclose(prod.value[0], np.eye(2), atol=1e-14)
    assert np.abs(prod.grad().c).max() < 1e-13


def test_compose_with_identity_is_noop():
    X = Jet.variables(np.array([[0.3, -0.4]]), 3)
    f = X[0] * X[1].exp()
    np.testing.assert_allclose(compose(f, X).c, f.c, atol=1e-14)
