"""Tractor-type bundles and their connections.

Sections are tuples of jets.  A section may carry extra *passive* form
indices in front of its own slot indices (``k`` of them); every connection
below differentiates all indices with Levi-Civita and adds the algebraic
terms on the slot indices only.  The new derivative index is always first.

Index convention: ``J_a^b = g^{bc} J_ac`` and ``J^{ab} = g^{ac} g^{bd} J_cd``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .fields import SymmetricField, cov_deriv, nabla_ell_perp_CP
from .geometry import ProjectiveSpace, space
from .jets import Jet, jein, monomials
from .tensor_algebra import (
    _linear_map_matrix,
    _nullspace,
    _rank,
    antisymmetrize,
    lemma10_solve,
    rho_insertion,
    standard_J,
    SymplecticData,
)

PASSIVE = "pqrstuvw"


@dataclass
class Background:
    """Metric, Kaehler form and Christoffel jets at a batch of points."""

    space: ProjectiveSpace
    g: Jet
    ginv: Jet
    Gamma: Jet
    J: Jet | None = None
    Jm: Jet | None = None
    Jup: Jet | None = None

    @classmethod
    def at(cls, S: ProjectiveSpace, coords, order: int) -> "Background":
        mj = S.metric_jet(np.atleast_2d(coords), order)
        bg = cls(S, mj.g, mj.ginv, mj.christoffel)
        if mj.J is not None:
            bg.J = mj.J
            bg.Jm = jein("ac,cb->ab", mj.J, mj.ginv)
            bg.Jup = jein("ac,cb->ab", jein("ac,cd->ad", mj.ginv, mj.J), mj.ginv)
        return bg

    @property
    def batch(self) -> int:
        return self.g.batch


def random_section(bg: Background, shapes, order: int, seed: int, skew=()) -> tuple[Jet, ...]:
    """Random polynomial jets for each slot; slots listed in ``skew`` are made 2-forms."""
    rng = np.random.default_rng(seed)
    m = bg.space.m
    M = len(monomials(m, order))
    out = []
    for i, shp in enumerate(shapes):
        c = rng.standard_normal((bg.batch,) + tuple(shp) + (M,))
        if i in skew:
            c = 0.5 * (c - np.swapaxes(c, -2, -3))
        out.append(Jet(c, m, order))
    return tuple(out)


def _own_first(t: Jet, k: int) -> Jet:
    """Move the first slot index (after ``k`` passive ones) to the front."""
    axes = [k] + list(range(k)) + list(range(k + 1, len(t.tshape)))
    return t.transpose(*axes)


# ---------------------------------------------------------------------------
# T on RP_n


def connT(sec, bg: Background, k: int = 0):
    """``(sigma, mu_b) -> (D_a sigma - mu_a, D_a mu_b + g_ab sigma)``."""
    sig, mu = sec
    P = PASSIVE[:k]
    s1 = cov_deriv(sig, bg.Gamma) - _own_first(mu, k)
    m1 = cov_deriv(mu, bg.Gamma) + jein(f"ab,{P}->a{P}b", bg.g, sig)
    return s1, m1


def _commutator(x: Jet) -> Jet:
    axes = [1, 0] + list(range(2, len(x.tshape)))
    return x - x.transpose(*axes)


def connT_flatness(bg: Background, seed: int = 0) -> float:
    sec = random_section(bg, [(), (bg.space.m,)], 2, seed)
    twice = connT(connT(sec, bg), bg, k=1)
    return max(float(np.abs(_commutator(s).value).max()) for s in twice)


# ---------------------------------------------------------------------------
# U on CP_n


def connU(sec, bg: Background, k: int = 0):
    """``(sigma, mu_b, rho) -> (D sigma - mu, D mu + g sigma + J rho, D rho - J_a^c mu_c)``."""
    sig, mu, rho = sec
    P = PASSIVE[:k]
    G = bg.Gamma
    s1 = cov_deriv(sig, G) - _own_first(mu, k)
    m1 = cov_deriv(mu, G) + jein(f"ab,{P}->a{P}b", bg.g, sig) + jein(f"ab,{P}->a{P}b", bg.J, rho)
    r1 = cov_deriv(rho, G) - jein(f"ac,{P}c->a{P}", bg.Jm, mu)
    return s1, m1, r1


def phiU(sec, bg: Background, k: int = 0):
    """``(sigma, mu_c, rho) -> (rho, J_c^d mu_d, -sigma)``."""
    sig, mu, rho = sec
    P = PASSIVE[:k]
    return rho, jein(f"cd,{P}d->{P}c", bg.Jm, mu), -sig


def _jab_times(bg: Background, sec, k: int):
    """``2 J_ab`` times each slot (new indices ``a b`` first)."""
    out = []
    for s in sec:
        rest = "cdefgh"[: len(s.tshape)]
        out.append(jein(f"ab,{rest}->ab{rest}", bg.J, s) * 2.0)
    return out


def curvature_U_check(bg: Background, seed: int = 0) -> float:
    m = bg.space.m
    sec = random_section(bg, [(), (m,), ()], 2, seed)
    twice = connU(connU(sec, bg), bg, k=1)
    expect = _jab_times(bg, phiU(sec, bg), 0)
    return max(float(np.abs(_commutator(a).value - b.value).max()) for a, b in zip(twice, expect))


def skew_form(a, b, bg: Background) -> Jet:
    """``sigma rho~ + J^{ab} mu_a mu~_b - rho sigma~``."""
    return a[0] * b[2] + (jein("a,ab->b", a[1], bg.Jup) * b[1]).sum(0) - a[2] * b[0]


def skew_form_compatibility(bg: Background, seed: int = 0) -> float:
    m = bg.space.m
    A = random_section(bg, [(), (m,), ()], 2, seed)
    B = random_section(bg, [(), (m,), ()], 2, seed + 1)
    lhs = skew_form(A, B, bg).grad()
    dA, dB = connU(A, bg), connU(B, bg)
    rhs = [skew_form(tuple(s[a] for s in dA), B, bg) + skew_form(A, tuple(s[a] for s in dB), bg) for a in range(m)]
    rhs_v = np.stack([r.value for r in rhs], axis=1)
    return float(np.abs(lhs.value - rhs_v).max())


def phi_parallel_U(bg: Background, seed: int = 0) -> float:
    m = bg.space.m
    sec = random_section(bg, [(), (m,), ()], 2, seed)
    a = connU(phiU(sec, bg), bg)
    b = phiU(connU(sec, bg), bg, k=1)
    return max(float(np.abs(x.value - y.value).max()) for x, y in zip(a, b))


def phiU_matrix(J: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Matrix of Phi on the fibre ``(sigma, mu, rho)`` at one point."""
    m = J.shape[0]
    Jm = np.einsum("ac,cb->ab", J, np.linalg.inv(g))
    P = np.zeros((m + 2, m + 2))
    P[0, m + 1] = 1.0
    P[1 : m + 1, 1 : m + 1] = Jm
    P[m + 1, 0] = -1.0
    return P


def skew_form_matrix(J: np.ndarray, g: np.ndarray) -> np.ndarray:
    m = J.shape[0]
    ginv = np.linalg.inv(g)
    Om = np.zeros((m + 2, m + 2))
    Om[0, m + 1] = 1.0
    Om[m + 1, 0] = -1.0
    Om[1 : m + 1, 1 : m + 1] = ginv @ J @ ginv
    return Om


@dataclass
class PhiFormReport:
    symmetric_residual: float
    eigenvalues: list[float]
    signature: tuple[int, int, int]


def phi_form_signature(J: np.ndarray, g: np.ndarray) -> PhiFormReport:
    """Signature of ``<Phi x, y>`` on the fibre of U."""
    Om, P = skew_form_matrix(J, g), phiU_matrix(J, g)
    B = P.T @ Om  # B[x, y] = <Phi e_x, e_y>
    ev = np.linalg.eigvalsh(0.5 * (B + B.T))
    tol = 1e-10 * max(1.0, np.abs(ev).max())
    sig = (int((ev > tol).sum()), int((ev < -tol).sum()), int((np.abs(ev) <= tol).sum()))
    return PhiFormReport(float(np.abs(B - B.T).max()), ev.tolist(), sig)


# ---------------------------------------------------------------------------
# the trace-free part of Lambda^2 U:  slots (sigma_b, mu_bc, rho_b)


def conn_lambda2perpU(sec, bg: Background, k: int = 0):
    sig, mu, rho = sec
    P = PASSIVE[:k]
    G = bg.Gamma
    g, J, Jm = bg.g, bg.J, bg.Jm
    s1 = cov_deriv(sig, G) - _own_first(mu, k)
    m1 = (
        cov_deriv(mu, G)
        + jein(f"ab,{P}c->a{P}bc", g, sig)
        - jein(f"ac,{P}b->a{P}bc", g, sig)
        + jein(f"ab,{P}c->a{P}bc", J, rho)
        - jein(f"ac,{P}b->a{P}bc", J, rho)
        - jein(f"bc,{P}a->a{P}bc", J, rho)
        + jein(f"bc,a{P}->a{P}bc", J, jein(f"ad,{P}d->a{P}", Jm, sig))
    )
    r1 = cov_deriv(rho, G) + jein(f"ad,{P}bd->a{P}b", Jm, mu)
    return s1, m1, r1


def psi_lambda2(sec, bg: Background, k: int = 0):
    """Induced endomorphism read off from the curvature of ``conn_lambda2perpU``."""
    sig, mu, rho = sec
    P = PASSIVE[:k]
    Jm = bg.Jm
    s = rho + jein(f"ce,{P}e->{P}c", Jm, sig)
    mm = jein(f"ce,{P}ed->{P}cd", Jm, mu) + jein(f"de,{P}ce->{P}cd", Jm, mu)
    r = -sig + jein(f"ce,{P}e->{P}c", Jm, rho)
    return s, mm, r


def _l2_section(bg: Background, seed: int, order: int = 2, passive: int = 0):
    m = bg.space.m
    pre = (m,) * passive
    return random_section(bg, [pre + (m,), pre + (m, m), pre + (m,)], order, seed, skew=(1,))


def curvature_lambda2perpU_check(bg: Background, seed: int = 0) -> float:
    sec = _l2_section(bg, seed)
    twice = conn_lambda2perpU(conn_lambda2perpU(sec, bg), bg, k=1)
    expect = _jab_times(bg, psi_lambda2(sec, bg), 0)
    return max(float(np.abs(_commutator(a).value - b.value).max()) for a, b in zip(twice, expect))


def coupled_lambda2perpU(sec, bg: Background):
    """``Lambda^1 (x) Lambda^2_perp U -> Lambda^2 (x) Lambda^2_perp U`` by the explicit three-row formula."""
    sig, mu, rho = sec  # sigma_bc, mu_bcd, rho_bc
    G = bg.Gamma
    g, J, Jm = bg.g, bg.J, bg.Jm

    def skew(t: Jet) -> Jet:
        axes = [1, 0] + list(range(2, len(t.tshape)))
        return (t - t.transpose(*axes)) * 0.5

    s1 = skew(cov_deriv(sig, G)) + skew(mu)
    m1 = (
        skew(cov_deriv(mu, G))
        + skew(jein("ca,bd->abcd", g, sig))
        - skew(jein("da,bc->abcd", g, sig))
        - skew(jein("ca,bd->abcd", J, rho))
        + skew(jein("da,bc->abcd", J, rho))
        + jein("cd,ab->abcd", J, skew(rho))
        + jein("cd,ab->abcd", J, skew(jein("ae,be->ab", Jm, sig)))
    )
    r1 = skew(cov_deriv(rho, G)) + skew(jein("ae,bce->abc", Jm, mu))
    return s1, m1, r1


def coupled_formula_check(bg: Background, seed: int = 0) -> dict[str, float]:
    """Explicit coupled formula vs. skew part of the coupled connection, and on an image."""
    Om = _l2_section(bg, seed, passive=1)
    explicit = coupled_lambda2perpU(Om, bg)
    generic = conn_lambda2perpU(Om, bg, k=1)
    r1 = max(float(np.abs(0.5 * _commutator(a).value - b.value).max()) for a, b in zip(generic, explicit))
    sec = _l2_section(bg, seed + 7)
    image = coupled_lambda2perpU(conn_lambda2perpU(sec, bg), bg)
    expect = _jab_times(bg, psi_lambda2(sec, bg), 0)
    r2 = max(float(np.abs(a.value - 0.5 * b.value).max()) for a, b in zip(image, expect))
    return {"explicit_vs_generic": r1, "image_is_J_psi": r2}


def split_projector(sec, bg: Background, sign: int, k: int = 0):
    """``1/2 (sigma +- J rho, mu +- J J mu, rho -+ J sigma)``."""
    sig, mu, rho = sec
    P = PASSIVE[:k]
    Jm = bg.Jm
    Jr = jein(f"ce,{P}e->{P}c", Jm, rho)
    Js = jein(f"ce,{P}e->{P}c", Jm, sig)
    JJm = jein(f"ce,{P}ed->{P}cd", Jm, jein(f"df,{P}ef->{P}ed", Jm, mu))
    return ((sig + Jr * sign) * 0.5, (mu + JJm * sign) * 0.5, (rho - Js * sign) * 0.5)


def projector_checks(bg: Background, seed: int = 0) -> dict[str, float]:
    sec = _l2_section(bg, seed)
    out = {}
    plus = split_projector(sec, bg, 1)
    minus = split_projector(sec, bg, -1)
    out["sum_to_identity"] = max(float(np.abs((a + b - c).value).max()) for a, b, c in zip(plus, minus, sec))
    pp = split_projector(plus, bg, 1)
    out["idempotent"] = max(float(np.abs((a - b).value).max()) for a, b in zip(pp, plus))
    comm = 0.0
    for sign in (1, -1):
        a = conn_lambda2perpU(split_projector(sec, bg, sign), bg)
        b = split_projector(conn_lambda2perpU(sec, bg), bg, sign, k=1)
        comm = max(comm, max(float(np.abs((x - y).value).max()) for x, y in zip(a, b)))
    out["commutes_with_connection"] = comm
    # Psi^2 vanishes on the + part and is -4 on the - part
    psi2p = psi_lambda2(psi_lambda2(plus, bg), bg)
    psi2m = psi_lambda2(psi_lambda2(minus, bg), bg)
    out["psi2_zero_on_plus"] = max(float(np.abs(x.value).max()) for x in psi2p)
    out["psi2_minus4_on_minus"] = max(float(np.abs((x + y * 4.0).value).max()) for x, y in zip(psi2m, minus))
    a = conn_lambda2perpU(psi_lambda2(sec, bg), bg)
    b = psi_lambda2(conn_lambda2perpU(sec, bg), bg, k=1)
    out["psi_parallel"] = max(float(np.abs((x - y).value).max()) for x, y in zip(a, b))
    return out


def psi_fiber_matrix(J: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Matrix of Psi on ``Lambda^1 + Lambda^2 + Lambda^1`` (2-forms by ``a < b`` basis)."""
    m = J.shape[0]
    Jm = np.einsum("ac,cb->ab", J, np.linalg.inv(g))
    pairs = list(itertools.combinations(range(m), 2))
    dim = 2 * m + len(pairs)

    def unpack(v):
        mu = np.zeros((m, m))
        for i, (a, b) in enumerate(pairs):
            mu[a, b], mu[b, a] = v[m + i], -v[m + i]
        return v[:m], mu, v[m + len(pairs) :]

    def pack(s, mu, r):
        return np.concatenate([s, [mu[a, b] for a, b in pairs], r])

    cols = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        s, mu, r = unpack(e)
        cols.append(pack(r + Jm @ s, Jm @ mu + mu @ Jm.T, -s + Jm @ r))
    return np.array(cols).T


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    max_distance: float
    multiplicities: dict[int, int]


def psi_squared_spectrum(J: np.ndarray, g: np.ndarray) -> SpectrumReport:
    Psi = psi_fiber_matrix(J, g)
    ev = np.linalg.eigvals(Psi @ Psi)
    d0 = np.abs(ev)
    d4 = np.abs(ev + 4.0)
    dist = float(np.minimum(d0, d4).max())
    mult = {0: int((d0 < 1e-8).sum()), -4: int((d4 < 1e-8).sum())}
    return SpectrumReport(ev, dist, mult)


def induced_lambda2_multiplicities(n: int) -> dict[int, int]:
    """Eigenvalue multiplicities of the square of the induced action of Phi on trace-free Lambda^2 U."""
    J = standard_J(n)
    m = 2 * n
    P = phiU_matrix(J, np.eye(m))
    Om = skew_form_matrix(J, np.eye(m))
    d = m + 2
    pairs = list(itertools.combinations(range(d), 2))
    A = np.zeros((len(pairs), len(pairs)))
    for j, (a, b) in enumerate(pairs):
        F = np.zeros((d, d))
        F[a, b], F[b, a] = 1.0, -1.0
        G = P @ F + F @ P.T
        A[:, j] = [G[x, y] for x, y in pairs]
    # remove the skew-form trace direction
    trace_row = np.array([Om[x, y] for x, y in pairs])
    K = _nullspace(trace_row[None, :])
    Ak = np.linalg.lstsq(K, A @ K, rcond=None)[0]
    ev = np.linalg.eigvals(Ak @ Ak)
    return {0: int((np.abs(ev) < 1e-8).sum()), -4: int((np.abs(ev + 4) < 1e-8).sum())}


# ---------------------------------------------------------------------------
# the operator L and the structure of the coupled image


@dataclass
class LOperatorResult:
    rho: np.ndarray  # (B, m, m)
    tau: np.ndarray
    X: np.ndarray
    row1: np.ndarray
    row2: np.ndarray
    T: np.ndarray
    precondition: float
    split_residual: float

    def row1_norm(self) -> float:
        return float(np.abs(self.row1).max())

    def row2_x_part(self) -> np.ndarray:
        """X-component of the second row (its ``lemma10_solve`` split)."""
        return self.X


def ell2_tractor_data(omega: SymmetricField, bg: Background, chart: int, coords):
    """``(omega_bc, D_c omega_bd - D_d omega_bc)`` as jets of order 1 and 0-ready."""
    W = omega.jet(chart, coords, 2)
    D = cov_deriv(W, bg.Gamma)  # D[c, b, d] = D_c omega_bd
    mu = D.transpose(1, 0, 2) - D.transpose(1, 2, 0)
    return W, mu


def build_L_operator(omega: SymmetricField, chart: int, coords) -> LOperatorResult:
    """Pointwise ``rho = L(omega)`` and the first two rows of the coupled image."""
    S = omega.space
    if not S.complex or omega.valence != 2:
        raise ValueError("L is defined for symmetric 2-tensors on CP_n")
    coords = np.atleast_2d(coords)
    bg = Background.at(S, coords, 1)
    W, mu = ell2_tractor_data(omega, bg, chart, coords)
    zero = Jet(np.zeros(W.c.shape[:1] + W.tshape + (W.c.shape[-1],)), W.m, W.order)
    s1, m1, _ = coupled_lambda2perpU((W, mu, zero), bg)
    row1 = s1.value
    T = m1.value
    B, m = T.shape[0], T.shape[1]
    rho = np.empty((B, m, m))
    tau = np.empty((B, m, m))
    X = np.empty_like(T)
    pre = 0.0
    resid = 0.0
    J = bg.J.value
    g = bg.g.value
    for i in range(B):
        sd = SymplecticData(J[i], g[i])
        sol = lemma10_solve(T[i], sd)
        rho[i], tau[i], X[i] = sol.rho, sol.tau, sol.X
        pre = max(pre, sol.precondition_residual)
        resid = max(resid, sol.residual)
    row2 = T - np.stack([rho_insertion(rho[i], J[i]) for i in range(B)])
    return LOperatorResult(rho, tau, X, row1, row2, T, pre, resid)


def obstruction_structure(omega: SymmetricField, chart: int, coords) -> dict[str, float]:
    """Residuals of the structural claims about the coupled image.

    ``row1``: first row of the image.  ``row2_split``: the second row minus
    ``X + J tau``.  ``X_vs_obstruction``: X minus twice the trace-free
    valence-2 compatibility operator.
    """
    res = build_L_operator(omega, chart, coords)
    J = Background.at(omega.space, coords, 0).J.value
    jtau = np.einsum("zab,zcd->zabcd", J, res.tau)
    X2 = 2.0 * nabla_ell_perp_CP(omega, 2, chart, coords)
    scale = max(1.0, float(np.abs(res.T).max()))
    return {
        "row1": res.row1_norm(),
        "row2_split": float(np.abs(res.row2 - res.X - jtau).max()),
        "X_vs_obstruction": float(np.abs(res.X - X2).max()),
        "X_norm": float(np.abs(res.X).max()),
        "scale": scale,
        "precondition": res.precondition,
    }


def leading_rho_estimate(omega: SymmetricField, chart: int, coords) -> np.ndarray:
    """Second-order part ``-(S - J^{cd} S_cd J / (2n+1)) / (2(n+1))`` of ``L(omega)``."""
    S = omega.space
    bg = Background.at(S, coords, 1)
    W = omega.jet(chart, coords, 2)
    DD = cov_deriv(cov_deriv(W, bg.Gamma), bg.Gamma).value  # [a, c, b, d]
    Jup = bg.Jup.value
    Sab = np.einsum("zcd,zacbd->zab", Jup, DD) - np.einsum("zcd,zbcad->zab", Jup, DD)
    tr = np.einsum("zcd,zcd->z", Jup, Sab)
    J = bg.J.value
    n = S.n
    return -(Sab - tr[:, None, None] * J / (2 * n + 1)) / (2 * (n + 1))


# ---------------------------------------------------------------------------
# algebraic checks


def recover_mu_check(m: int, seed: int = 0) -> dict[str, float]:
    """Vanishing of ``D_[a w_b]c + nu_[ab]c`` forces ``nu_abc = D_b w_ca - D_c w_ba``."""
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((m, m, m))
    D = 0.5 * (D + D.transpose(0, 2, 1))  # D[a, b, c] = D_a w_bc
    skD = 0.5 * (D - D.transpose(1, 0, 2))

    def lhs(nu):
        nu = 0.5 * (nu - nu.transpose(0, 2, 1))
        return 0.5 * (nu - nu.transpose(1, 0, 2))

    A = _linear_map_matrix(lhs, (m, m, m), m**3)
    # restrict to nu = nu_a[bc]
    skew_basis = _linear_map_matrix(lambda t: 0.5 * (t - t.transpose(0, 2, 1)), (m, m, m), m**3)
    U, s, _ = np.linalg.svd(skew_basis)
    basis = U[:, : _rank(skew_basis)]
    coef, *_ = np.linalg.lstsq(A @ basis, -skD.ravel(), rcond=None)
    nu = (basis @ coef).reshape(m, m, m)
    expected = np.einsum("bca->abc", D) - np.einsum("cba->abc", D)
    return {
        "residual": float(np.abs(nu - expected).max()),
        "nullity": int(basis.shape[1] - _rank(A @ basis)),
    }


@dataclass
class KnowReport:
    n: int
    solution_dim: int
    j_theta_dim: int
    contains_j_theta: bool
    equals_j_theta: bool


def know_constraint(n: int) -> KnowReport:
    """Solutions ``rho_[bc]e`` of the third-row constraint versus ``J_bc theta_e``."""
    m = 2 * n
    J = standard_J(n)
    nr = m**3
    npsi = m**3

    def lhs(rho):
        rho = 0.5 * (rho - rho.transpose(1, 0, 2))
        e = np.einsum
        t1 = antisymmetrize(e("da,bce->abcde", J, rho), [0, 1, 2], valence=5)
        t2 = antisymmetrize(e("ea,bcd->abcde", J, rho), [0, 1, 2], valence=5)
        t3 = e("de,abc->abcde", J, antisymmetrize(rho, [0, 1, 2], valence=3))
        return -t1 + t2 - t3

    def rhs(psi):
        psi = 0.5 * (psi - psi.transpose(0, 2, 1))
        return antisymmetrize(np.einsum("ab,cde->abcde", J, psi), [0, 1, 2], valence=5)

    A = np.hstack([_linear_map_matrix(lhs, (m, m, m), m**5), -_linear_map_matrix(rhs, (m, m, m), m**5)])
    N = _nullspace(A)
    rho_part = N[:nr]
    rho_skew = np.array([(0.5 * (v.reshape(m, m, m) - v.reshape(m, m, m).transpose(1, 0, 2))).ravel() for v in rho_part.T]).T
    sol_dim = _rank(rho_skew) if rho_skew.size else 0
    jt = np.array([np.einsum("bc,e->bce", J, np.eye(m)[k]).ravel() for k in range(m)]).T
    r_union = _rank(np.hstack([rho_skew, jt]))
    contains = r_union == sol_dim
    return KnowReport(n, sol_dim, m, bool(contains), bool(contains and sol_dim == m))


# ---------------------------------------------------------------------------
# parallel transport on RP_n


def _chart_data(S: ProjectiveSpace, Z: np.ndarray, dZ: np.ndarray, k: int):
    w = Z / Z[k]
    dw = (dZ * Z[k] - Z * dZ[k]) / Z[k] ** 2
    w, dw = np.delete(w, k), np.delete(dw, k)
    if S.complex:
        return np.concatenate([w.real, w.imag]), np.concatenate([dw.real, dw.imag])
    return w.real, dw.real


def chart_transition_jacobian(S: ProjectiveSpace, src: int, dst: int, coords_dst) -> np.ndarray:
    """``d x_src / d x_dst`` at a point given in chart ``dst``."""
    X = Jet.variables(np.atleast_2d(coords_dst), 1)
    z = S.homogeneous(dst, X)
    inv = z[src].reciprocal()
    w = [z[j] * inv for j in range(len(z)) if j != src]
    comps = [c.real() for c in w] + ([c.imag() for c in w] if S.complex else [])
    return np.stack([c.grad().value[0] for c in comps], axis=0)  # [src coord, dst coord]


def transport_T(S: ProjectiveSpace, curve, t1: float, steps: int, frame0: np.ndarray):
    """RK4 parallel transport for the connection on T along ``curve(t) -> (Z, dZ)``.

    ``frame0`` has shape ``(n+1, n+1)``: columns ``(sigma, mu)`` in the chart
    chosen at ``t = 0``.  Returns the transported frame expressed in that chart.
    """
    Z0, _ = curve(0.0)
    chart0 = int(np.argmax(np.abs(Z0)))
    h = t1 / steps
    starts = h * np.arange(steps)
    charts = np.array([int(np.argmax(np.abs(curve(t)[0]))) for t in starts])
    # connection data at every RK4 stage time, batched per chart
    times = np.stack([starts, starts + h / 2, starts + h], axis=1)
    G = np.empty((steps, 3, S.m, S.m, S.m))
    g = np.empty((steps, 3, S.m, S.m))
    V = np.empty((steps, 3, S.m))
    for k in np.unique(charts):
        idx = np.nonzero(charts == k)[0]
        xs, vs = zip(*(_chart_data(S, *curve(t), k) for t in times[idx].ravel()))
        mj = S.metric_jet(np.array(xs), 0)
        G[idx] = mj.christoffel.value.reshape(len(idx), 3, S.m, S.m, S.m)
        g[idx] = mj.g.value.reshape(len(idx), 3, S.m, S.m)
        V[idx] = np.array(vs).reshape(len(idx), 3, S.m)

    def rhs(i, j, Y):
        v = V[i, j]
        sig, mu = Y[0], Y[1:]
        dmu = np.einsum("a,cab,cz->bz", v, G[i, j], mu) - np.outer(g[i, j] @ v, sig)
        return np.vstack([(v @ mu)[None], dmu])

    def recast(Y, src, dst, t):
        Z, _ = curve(t)
        x, _ = _chart_data(S, Z, Z, dst)
        Jac = chart_transition_jacobian(S, src, dst, x)
        return np.vstack([Y[:1], Jac.T @ Y[1:]])

    Y = np.array(frame0, dtype=float)
    chart = chart0
    for i in range(steps):
        if charts[i] != chart:
            Y = recast(Y, chart, charts[i], starts[i])
            chart = charts[i]
        k1 = rhs(i, 0, Y)
        k2 = rhs(i, 1, Y + h / 2 * k1)
        k3 = rhs(i, 1, Y + h / 2 * k2)
        k4 = rhs(i, 2, Y + h * k3)
        Y = Y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    if chart != chart0:
        Y = recast(Y, chart, chart0, t1)
    return Y


@dataclass
class HolonomyReport:
    holonomy: np.ndarray
    deviation_from_identity: float
    deviation_from_minus_identity: float
    steps: int
    resolution_gap: float


def holonomy_T(S: ProjectiveSpace, z: np.ndarray, w: np.ndarray, turns: int = 2, tol: float = 1e-9, start_steps: int = 64, max_steps: int = 8192) -> HolonomyReport:
    """Holonomy of T along ``[cos t z + sin t w]`` for ``t`` in ``[0, turns * pi]``.

    Step counts double until two successive resolutions agree to ``tol``.
    """
    if S.complex:
        raise ValueError("transport of T is on RP_n")
    d = S.n + 1

    def curve(t):
        return np.cos(t) * z + np.sin(t) * w, -np.sin(t) * z + np.cos(t) * w

    t1 = turns * np.pi
    steps = start_steps
    prev = transport_T(S, curve, t1, steps, np.eye(d))
    while True:
        steps *= 2
        cur = transport_T(S, curve, t1, steps, np.eye(d))
        gap = float(np.abs(cur - prev).max())
        if gap < tol or steps >= max_steps:
            break
        prev = cur
    eye = np.eye(d)
    return HolonomyReport(cur, float(np.abs(cur - eye).max()), float(np.abs(cur + eye).max()), steps, gap)


# ---------------------------------------------------------------------------
# reporting


def residual_table(n: int = 2, points: int = 20, seed: int = 0) -> list[dict]:
    """Residuals of every connection and curvature identity keyed by a tag."""
    rows = []
    rp = space("RP", n)
    ch, X = rp.random_points(points, seed)
    bg_rp = Background.at(rp, X[ch == ch[0]], 1)
    rows.append({"tag": "T-flatness", "n": n, "residual": connT_flatness(bg_rp, seed)})
    cp = space("CP", n)
    ch, X = cp.random_points(points, seed)
    bg = Background.at(cp, X[ch == ch[0]], 1)
    rows.append({"tag": "U-curvature", "n": n, "residual": curvature_U_check(bg, seed)})
    rows.append({"tag": "U-skew-form-compatibility", "n": n, "residual": skew_form_compatibility(bg, seed)})
    rows.append({"tag": "U-phi-parallel", "n": n, "residual": phi_parallel_U(bg, seed)})
    rows.append({"tag": "lambda2perp-curvature", "n": n, "residual": curvature_lambda2perpU_check(bg, seed)})
    cf = coupled_formula_check(bg, seed)
    rows.append({"tag": "lambda2perp-coupled-formula", "n": n, "residual": max(cf.values())})
    pc = projector_checks(bg, seed)
    rows.append({"tag": "splitting-projectors", "n": n, "residual": max(pc.values())})
    return rows


def residual_jsonl(rows: list[dict]) -> str:
    return "\n".join(json.dumps(r, sort_keys=True) for r in rows)
