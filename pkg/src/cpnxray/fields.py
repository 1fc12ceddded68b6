"""Jet-evaluable tensor fields and the differential operators acting on them.

Every field is evaluated on a batch of points of one chart and returns a
:class:`~cpnxray.jets.Jet` of covariant components in that chart's real
coordinates.  Test fields come from :class:`FieldGenerator`, which only uses
U(1)-invariant homogeneous data ``z_i conj(z_j) / |z|^2`` (or its real
analogue on RP_n), so every generated field is globally defined.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .geometry import ProjectiveSpace, space
from .jets import Jet, jein, jein_const, mat_inverse, stack
from .tensor_algebra import SymClass, SymplecticData, perp_project, pi_map

JetFn = Callable[[int, np.ndarray, int], Jet]

# overall factor relating the product form of the valence-2 operator to the
# classical second-order compatibility operator (see ``nabla2_direct``)
DIRECT_FORM_FACTOR = 2.0


# ---------------------------------------------------------------------------
# geometric jets


_METRIC_CACHE: dict = {}
_METRIC_CACHE_SIZE = 8


def metric_only(S: ProjectiveSpace, coords, order: int) -> tuple[Jet, Jet | None]:
    """Metric and Kaehler form jets of the requested order.

    Field builders ask for the same metric jet many times per evaluation, so
    the last few results are memoised on the coordinate bytes.
    """
    coords = np.ascontiguousarray(np.atleast_2d(coords), dtype=float)
    key = (S.kind, S.n, order, coords.shape, coords.tobytes())
    hit = _METRIC_CACHE.get(key)
    if hit is not None:
        return hit
    X = Jet.variables(coords, order + 2)
    out = S.metric_and_form(X)
    if len(_METRIC_CACHE) >= _METRIC_CACHE_SIZE:
        _METRIC_CACHE.pop(next(iter(_METRIC_CACHE)))
    _METRIC_CACHE[key] = out
    return out


def connection(S: ProjectiveSpace, coords, order: int):
    """Christoffel symbols of the given order (plus g, J one order higher)."""
    return S.metric_jet(coords, order)


def cov_deriv(T: Jet, Gamma: Jet) -> Jet:
    """Levi-Civita derivative of a covariant tensor jet; new index first."""
    k = len(T.tshape)
    out = T.grad()
    if k == 0:
        return out
    G = Gamma.truncate(out.order)
    letters = "bcdefghijk"[:k]
    for s in range(k):
        src = letters[:s] + "z" + letters[s + 1 :]
        out = out - jein(f"za{letters[s]},{src}->a{letters}", G, T.truncate(out.order))
    return out


@lru_cache(maxsize=None)
def _sorted_index_map(m: int, p: int) -> np.ndarray:
    idx = np.arange(m**p).reshape((m,) * p) if p else np.arange(1)
    out = np.empty(m**p, dtype=np.int64)
    for multi in itertools.product(range(m), repeat=p):
        out[np.ravel_multi_index(multi, (m,) * p)] = idx[tuple(sorted(multi))]
    return out


def canonical_symmetric(T: Jet) -> Jet:
    """Copy sorted-index components to every permutation (exact symmetry)."""
    p = len(T.tshape)
    if p < 2:
        return T
    m = T.tshape[0]
    flat = T.c.reshape(T.batch, m**p, -1)[:, _sorted_index_map(m, p), :]
    return Jet(flat.reshape(T.c.shape), T.m, T.order)


def symmetrize_jet(T: Jet, slots) -> Jet:
    slots = list(slots)
    if len(slots) < 2:
        return T
    k = len(T.tshape)
    acc = None
    count = 0
    for perm in itertools.permutations(slots):
        axes = list(range(k))
        for src, dst in zip(slots, perm):
            axes[src] = dst
        term = T.transpose(*axes)
        acc = term if acc is None else acc + term
        count += 1
    return acc * (1.0 / count)


# ---------------------------------------------------------------------------
# scalars and fields


@dataclass
class SmoothScalar:
    """A scalar function given by its jets in any chart."""

    space: ProjectiveSpace
    fn: JetFn
    tag: str = ""

    def jet(self, chart: int, coords, order: int) -> Jet:
        return self.fn(chart, np.atleast_2d(coords), order)

    def __call__(self, chart: int, coords) -> np.ndarray:
        return self.jet(chart, coords, 0).value


@dataclass
class SymmetricField:
    """A symmetric covariant tensor field of valence ``p``."""

    space: ProjectiveSpace
    valence: int
    fn: JetFn
    tag: str = ""

    def jet(self, chart: int, coords, order: int) -> Jet:
        T = self.fn(chart, np.atleast_2d(coords), order)
        return canonical_symmetric(T)

    def values(self, chart: int, coords) -> np.ndarray:
        return self.jet(chart, coords, 0).value

    def components(self, chart: int, coords) -> dict[tuple[int, ...], np.ndarray]:
        """Stored (sorted multi-index) components at the given points."""
        vals = self.values(chart, coords)
        m = self.space.m
        return {
            idx: vals[(slice(None),) + idx]
            for idx in itertools.combinations_with_replacement(range(m), self.valence)
        }

    def __add__(self, other: "SymmetricField") -> "SymmetricField":
        if other.valence != self.valence:
            raise ValueError("valence mismatch")
        return SymmetricField(self.space, self.valence, lambda c, x, r: self.fn(c, x, r) + other.fn(c, x, r), f"({self.tag})+({other.tag})")

    def scale(self, a: float) -> "SymmetricField":
        return SymmetricField(self.space, self.valence, lambda c, x, r: self.fn(c, x, r) * a, f"{a}*({self.tag})")

    def __rmul__(self, a: float) -> "SymmetricField":
        return self.scale(a)


def metric_field(S: ProjectiveSpace) -> SymmetricField:
    return SymmetricField(S, 2, lambda c, x, r: metric_only(S, x, r)[0], "g")


def kaehler_form(S: ProjectiveSpace, coords, order: int) -> Jet:
    J = metric_only(S, coords, order)[1]
    if J is None:
        raise ValueError("no Kaehler form on RP_n")
    return J


# ---------------------------------------------------------------------------
# operators


def sym_cov_deriv(phi: SymmetricField) -> SymmetricField:
    """``phi -> nabla_(a phi_b..c)`` as a new field of valence ``p + 1``."""
    S = phi.space

    def fn(chart, coords, order):
        T = phi.jet(chart, coords, order + 1)
        mj = connection(S, coords, order)
        D = cov_deriv(T, mj.christoffel)
        return symmetrize_jet(D, range(phi.valence + 1))

    return SymmetricField(S, phi.valence + 1, fn, f"sym_nabla({phi.tag})")


def _factor(Om: Jet, p: int, Gamma: Jet, g: Jet) -> Jet:
    """One factor ``nabla^2 + p^2 g`` of the compatibility operator."""
    D2 = cov_deriv(cov_deriv(Om, Gamma), Gamma)
    k = len(Om.tshape)
    gt = g.truncate(D2.order)
    lead = "tu"
    rest = "abcdefghij"[:k]
    gterm = jein(f"{lead},{rest}->{lead}{rest}", gt, Om.truncate(D2.order))
    out = D2 + gterm * float(p * p)
    return symmetrize_jet(out, range(p + 1))


def factor_sequence(ell: int) -> list[int]:
    """The ``p`` values of the factors, in order of application (0 = plain nabla)."""
    if ell < 1:
        raise ValueError("ell must be positive")
    if ell % 2 == 0:
        return list(range(1, ell, 2))
    return [0] + list(range(2, ell, 2))


@dataclass(frozen=True)
class CoefficientCheck:
    ell: int
    expanded: tuple[int, ...]  # coefficients of x^k, x^{k-1}, ... with x = nabla^2
    first_trace: int
    second_trace: int
    first_expected: int
    second_expected: int

    @property
    def ok(self) -> bool:
        return self.first_trace == self.first_expected and self.second_trace == self.second_expected


def coefficient_identities(ell: int) -> CoefficientCheck:
    """Expand the factor product symbolically; compare its two leading trace terms with closed forms.

    With ``x`` standing for ``nabla^2`` and ``g`` set to 1, the product of
    ``(x + p^2)`` over the even-order factors has ``x^{k-1}`` coefficient
    ``(ell-1) ell (ell+1) / 6`` and ``x^{k-2}`` coefficient
    ``(ell-3)(ell-2)(ell-1) ell (ell+1)(5 ell + 7) / 360``.
    """
    import sympy

    x = sympy.Symbol("x")
    poly = sympy.Integer(1)
    for p in factor_sequence(ell):
        if p:
            poly *= x + p * p
    coeffs = [int(c) for c in sympy.Poly(sympy.expand(poly), x).all_coeffs()]
    padded = coeffs + [0, 0]
    e1 = (ell - 1) * ell * (ell + 1)
    e2 = (ell - 3) * (ell - 2) * (ell - 1) * ell * (ell + 1) * (5 * ell + 7)
    if e1 % 6 or e2 % 360:
        raise ArithmeticError("closed forms are not integral")
    return CoefficientCheck(ell, tuple(coeffs), padded[1], padded[2], e1 // 6, e2 // 360)


def _product_form(S: ProjectiveSpace, omega: SymmetricField, ell: int, chart: int, coords) -> np.ndarray:
    coords = np.atleast_2d(coords)
    mj = connection(S, coords, max(ell - 1, 0))
    Gamma, g = mj.christoffel, mj.g
    Om = omega.jet(chart, coords, ell)
    for p in factor_sequence(ell):
        if p == 0:
            Om = cov_deriv(Om, Gamma)
        else:
            Om = _factor(Om, p, Gamma, g)
    return Om.value


def nabla_ell_RP(omega: SymmetricField, ell: int, chart: int, coords) -> np.ndarray:
    """The Y^ell-valued compatibility operator on RP_n at a batch of points."""
    S = omega.space
    if S.complex:
        raise ValueError("use nabla_ell_perp_CP on CP_n")
    return pi_map(_product_form(S, omega, ell, chart, coords), ell)


def nabla_ell(omega: SymmetricField, ell: int, chart: int, coords) -> np.ndarray:
    """Same product formula on either space, without the trace-free projection."""
    return pi_map(_product_form(omega.space, omega, ell, chart, coords), ell)


def nabla_ell_perp_CP(omega: SymmetricField, ell: int, chart: int, coords) -> np.ndarray:
    """Trace-free part of the compatibility operator on CP_n."""
    S = omega.space
    if not S.complex:
        raise ValueError("the trace-free operator lives on CP_n")
    coords = np.atleast_2d(coords)
    R = nabla_ell(omega, ell, chart, coords)
    sd = S.symplectic_data(coords)
    return perp_project(R, SymClass("Y", ell), sd)


def iterated_cov_deriv(omega: SymmetricField, k: int, chart: int, coords) -> np.ndarray:
    """``nabla_{a_1} ... nabla_{a_k} omega`` at the points (no symmetrisation)."""
    S = omega.space
    coords = np.atleast_2d(coords)
    Gamma = connection(S, coords, max(k - 1, 0)).christoffel
    T = omega.jet(chart, coords, k)
    for _ in range(k):
        T = cov_deriv(T, Gamma)
    return T.value


def nabla2_direct(omega: SymmetricField, chart: int, coords) -> np.ndarray:
    """``nabla_[a nabla_|c| w_b]d - nabla_[a nabla_|d| w_b]c + g_c[a w_b]d - g_d[a w_b]c``."""
    S = omega.space
    coords = np.atleast_2d(coords)
    mj = connection(S, coords, 1)
    W = omega.jet(chart, coords, 2)
    D2 = cov_deriv(cov_deriv(W, mj.christoffel), mj.christoffel).value  # [a, c, b, d]
    w = W.value
    g = mj.g.value
    e = np.einsum
    t1 = 0.5 * (e("Zacbd->Zabcd", D2) - e("Zbcad->Zabcd", D2))
    t2 = 0.5 * (e("Zadbc->Zabcd", D2) - e("Zbdac->Zabcd", D2))
    t3 = 0.5 * (e("Zca,Zbd->Zabcd", g, w) - e("Zcb,Zad->Zabcd", g, w))
    t4 = 0.5 * (e("Zda,Zbc->Zabcd", g, w) - e("Zdb,Zac->Zabcd", g, w))
    return t1 - t2 + t3 - t4


def exterior_derivative(alpha: Jet) -> Jet:
    """Standard ``d`` on a k-form jet: ``(k+1) d_[a alpha_b..]``."""
    k = len(alpha.tshape)
    D = alpha.grad()
    out = None
    for perm in itertools.permutations(range(k + 1)):
        sign = _sign(perm)
        term = D.transpose(*perm) * float(sign)
        out = term if out is None else out + term
    return out * (1.0 / math.factorial(k))


def _sign(perm) -> int:
    perm = list(perm)
    s = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            s = -s
    return s


def wedge_1_2(mu: np.ndarray, J: np.ndarray) -> np.ndarray:
    """``(mu ^ J)_abc = mu_a J_bc + mu_b J_ca + mu_c J_ab``."""
    e = np.einsum
    return e("...a,...bc->...abc", mu, J) + e("...b,...ca->...abc", mu, J) + e("...c,...ab->...abc", mu, J)


def d_perp(alpha_fn: JetFn, S: ProjectiveSpace, chart: int, coords) -> np.ndarray:
    """Trace-free part of ``d alpha`` for a 1-form given by its jets."""
    coords = np.atleast_2d(coords)
    da = exterior_derivative(alpha_fn(chart, coords, 1)).value
    return perp_project(da, SymClass("form", 2), S.symplectic_data(coords))


@dataclass
class DPerp2Result:
    value: np.ndarray
    mu: np.ndarray
    wedge_residual: float


def d_perp2(xi_fn: JetFn, S: ProjectiveSpace, chart: int, coords) -> DPerp2Result:
    """Second operator of the complex on CP_2: ``d mu`` with ``mu ^ J = d xi``."""
    if not S.complex or S.n != 2:
        raise ValueError("d_perp2 is defined on CP_2 only")
    coords = np.atleast_2d(coords)
    xi = xi_fn(chart, coords, 2)
    dxi = exterior_derivative(xi)  # order 1
    g, J = metric_only(S, coords, 1)
    Jup = _raise_both(J, mat_inverse(g))
    # contracting mu ^ J with J^{bc} gives (2n - 2) mu_a
    mu = jein("abc,bc->a", dxi, Jup) * (1.0 / (2 * S.n - 2))
    dmu = exterior_derivative(mu).value
    resid = float(np.abs(wedge_1_2(mu.value, J.value) - dxi.value).max())
    return DPerp2Result(dmu, mu.value, resid)


def _raise_both(J: Jet, ginv: Jet) -> Jet:
    return jein("ac,cb->ab", jein("ac,cd->ad", ginv, J), ginv)


# ---------------------------------------------------------------------------
# the generator catalogue


@dataclass(frozen=True)
class FieldSpec:
    """Plain-text reproducible description of a generated field."""

    kind: str
    space: str
    n: int
    valence: int
    seed: int
    params: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    KINDS = ("potential", "metric-multiple", "killing", "homogeneous-hermitian", "random-trig")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")

    def param(self, key: str, default: str | None = None) -> str | None:
        return dict(self.params).get(key, default)

    def to_record(self) -> str:
        parts = [f"kind={self.kind}", f"space={self.space}", f"n={self.n}", f"valence={self.valence}", f"seed={self.seed}"]
        parts += [f"{k}={v}" for k, v in sorted(self.params)]
        return " ".join(parts)

    @classmethod
    def from_record(cls, line: str) -> "FieldSpec":
        kv = dict(tok.split("=", 1) for tok in line.split())
        core = {k: kv.pop(k) for k in ("kind", "space", "n", "valence", "seed")}
        return cls(core["kind"], core["space"], int(core["n"]), int(core["valence"]), int(core["seed"]), tuple(sorted(kv.items())))


class FieldGenerator:
    """Builds globally defined test fields from a :class:`FieldSpec`."""

    def __init__(self, spec: FieldSpec):
        self.spec = spec
        self.S = space(spec.space, spec.n)
        self.rng = np.random.default_rng(spec.seed)

    # -- scalar building blocks -------------------------------------------
    def _hermitian(self) -> np.ndarray:
        d = self.S.n + 1
        if self.S.complex:
            A = self.rng.standard_normal((d, d)) + 1j * self.rng.standard_normal((d, d))
            return (A + A.conj().T) / 2
        A = self.rng.standard_normal((d, d))
        return (A + A.T) / 2

    def quadratic_scalar(self, A: np.ndarray | None = None) -> SmoothScalar:
        """``conj(z)^T A z / |z|^2`` for Hermitian (or symmetric) ``A``."""
        A = self._hermitian() if A is None else A
        S = self.S

        def fn(chart, coords, order):
            X = Jet.variables(coords, order)
            z = stack(S.homogeneous(chart, X))
            if not np.iscomplexobj(z.c) and np.iscomplexobj(A):
                z = Jet(z.c.astype(complex), z.m, z.order)
            zc = z.conj()
            num = jein("i,i->", zc, jein_const("j,ij->i", z, A))
            den = jein("i,i->", zc, z)
            return (num * den.reciprocal()).real()

        return SmoothScalar(S, fn, "quad")

    def trig_scalar(self) -> SmoothScalar:
        base = self.quadratic_scalar()
        freq = float(self.spec.param("freq", "2.0"))
        phase = float(self.rng.uniform(0, 2 * np.pi))
        return SmoothScalar(self.S, lambda c, x, r: (base.jet(c, x, r) * freq + phase).sin(), "trig")

    def scalar(self) -> SmoothScalar:
        return self.trig_scalar() if self.spec.kind == "random-trig" else self.quadratic_scalar()

    # -- 1-forms -------------------------------------------------------------
    def one_form_fn(self) -> JetFn:
        """``f1 df2 + f3 J(df4)`` (the J-term only on CP_n)."""
        S = self.S
        f1, f2 = self.scalar(), self.scalar()
        if S.complex:
            f3, f4 = self.scalar(), self.scalar()

        def fn(chart, coords, order):
            d2 = f2.jet(chart, coords, order + 1).grad()
            out = d2 * _bcast(f1.jet(chart, coords, order), 1)
            if S.complex:
                d4 = f4.jet(chart, coords, order + 1).grad()
                g, J = metric_only(S, coords, order)
                Jm = jein("ac,cb->ab", J, mat_inverse(g))  # J_a^b
                out = out + jein("ab,b->a", Jm, d4) * _bcast(f3.jet(chart, coords, order), 1)
            return out

        return fn

    def killing_fn(self) -> JetFn:
        """Metric dual of the vector field induced by a random skew-Hermitian generator."""
        S = self.S
        d = S.n + 1
        if S.complex:
            X = self.rng.standard_normal((d, d)) + 1j * self.rng.standard_normal((d, d))
            X = (X - X.conj().T) / 2
            X = X - np.trace(X) / d * np.eye(d)
        else:
            X = self.rng.standard_normal((d, d))
            X = (X - X.T) / 2

        def fn(chart, coords, order):
            Xj = Jet.variables(coords, order)
            z = S.homogeneous(chart, Xj)
            Xz = [sum((z[j] * X[i, j] for j in range(d)), Jet.constant(np.zeros(Xj.batch, complex if S.complex else float), Xj.m, order)) for i in range(d)]
            comps = [Xz[i] - z[i] * Xz[chart] for i in range(d) if i != chart]
            if S.complex:
                V = stack([c.real() for c in comps] + [c.imag() for c in comps], axis=0)
            else:
                V = stack([c.real() if np.iscomplexobj(c.c) else c for c in comps], axis=0)
            g, _ = metric_only(S, coords, order)
            return jein("ab,b->a", g, V)

        return fn

    # -- symmetric fields ------------------------------------------------
    def hermitian_field(self, valence: int) -> SymmetricField:
        S = self.S
        if valence == 0:
            f = self.scalar()
            return SymmetricField(S, 0, f.fn, self.spec.to_record())
        forms = [self.one_form_fn() for _ in range(valence)]
        forms2 = [self.one_form_fn() for _ in range(valence)]
        coef = self.scalar()
        gmul = self.scalar() if valence >= 2 else None
        rest = [self.one_form_fn() for _ in range(max(valence - 2, 0))]

        def fn(chart, coords, order):
            prod = _sym_product([f(chart, coords, order) for f in forms])
            prod2 = _sym_product([f(chart, coords, order) for f in forms2])
            out = prod + prod2 * _bcast(coef.jet(chart, coords, order), valence)
            if gmul is not None:
                g, _ = metric_only(S, coords, order)
                extra = [g] + [r(chart, coords, order) for r in rest]
                out = out + _sym_tensor(extra) * _bcast(gmul.jet(chart, coords, order), valence)
            return out

        return SymmetricField(S, valence, fn, self.spec.to_record())

    def build(self) -> SymmetricField:
        spec = self.spec
        S = self.S
        if spec.kind == "potential":
            if spec.valence < 1:
                raise ValueError("potential fields have valence >= 1")
            phi = self.hermitian_field(spec.valence - 1)
            out = sym_cov_deriv(phi)
            out.tag = spec.to_record()
            return out
        if spec.kind == "metric-multiple":
            if spec.valence != 2:
                raise ValueError("metric multiples have valence 2")
            c = float(spec.param("const", "1.0"))
            if spec.param("scalar", "none") == "none":
                return SymmetricField(S, 2, lambda ch, x, r: metric_only(S, x, r)[0] * c, spec.to_record())
            f = self.quadratic_scalar()
            return SymmetricField(S, 2, lambda ch, x, r: metric_only(S, x, r)[0] * _bcast(f.jet(ch, x, r) + c, 2), spec.to_record())
        if spec.kind == "killing":
            if spec.valence != 1:
                raise ValueError("Killing forms have valence 1")
            return SymmetricField(S, 1, self.killing_fn(), spec.to_record())
        return self.hermitian_field(spec.valence)


def generate(spec: FieldSpec | str) -> SymmetricField:
    if isinstance(spec, str):
        spec = FieldSpec.from_record(spec)
    return FieldGenerator(spec).build()


def _bcast(s: Jet, k: int) -> Jet:
    """Give a scalar jet ``k`` broadcastable tensor axes."""
    return Jet(s.c.reshape((s.batch,) + (1,) * k + (s.c.shape[-1],)), s.m, s.order)


def _outer(a: Jet, b: Jet) -> Jet:
    ka, kb = len(a.tshape), len(b.tshape)
    la = "abcdefgh"[:ka]
    lb = "ijklmnop"[:kb]
    return jein(f"{la},{lb}->{la}{lb}", a, b)


def _sym_product(ones: list[Jet]) -> Jet:
    out = ones[0]
    for f in ones[1:]:
        out = _outer(out, f)
    return symmetrize_jet(out, range(len(ones)))


def _sym_tensor(parts: list[Jet]) -> Jet:
    out = parts[0]
    for f in parts[1:]:
        out = _outer(out, f)
    return symmetrize_jet(out, range(len(out.tshape)))


def pullback_field(omega: SymmetricField, iso) -> SymmetricField:
    """``iso^* omega`` for an :class:`~cpnxray.geometry.Isometry` of the same space."""
    if iso.space is not omega.space:
        raise ValueError("isometry acts on a different space")

    def fn(chart, coords, order):
        return iso.pullback_jet(chart, coords, omega.jet, omega.valence, order)

    return SymmetricField(omega.space, omega.valence, fn, f"pullback({omega.tag})")


def restrict_field(omega: SymmetricField, embedding) -> SymmetricField:
    """Pull a CP_n field back to RP_n along a :class:`~cpnxray.geometry.ModelEmbedding`."""
    if not omega.space.complex:
        raise ValueError("restriction starts from a field on CP_n")
    rp = space("RP", omega.space.n)

    def fn(chart, coords, order):
        return embedding.pullback_jet(chart, coords, omega.jet, omega.valence, order)

    return SymmetricField(rp, omega.valence, fn, f"restrict({omega.tag})")
