"""Truncated multivariate Taylor arithmetic on batches of tensors.

A :class:`Jet` stores the Taylor coefficients of a tensor-valued function of
``m`` real variables around a base point, truncated at total degree
``order``.  The coefficient array has shape ``(B, *tshape, M)`` where ``B``
is a batch of base points, ``tshape`` the tensor shape and ``M`` the number
of monomials of degree at most ``order``.  Monomials are graded by degree, so
truncation to a lower order is a prefix slice.

Coefficients are stored in the monomial basis ``h**alpha`` (not divided by
``alpha!``); the value of the function is coefficient 0 and the first partial
in variable ``i`` is coefficient ``1 + i``.
"""

from __future__ import annotations

import itertools
import math
import string
from functools import lru_cache

import numpy as np
import scipy.sparse as sp


@lru_cache(maxsize=None)
def monomials(m: int, order: int) -> tuple[tuple[int, ...], ...]:
    """Exponent vectors of all monomials in ``m`` variables, graded by degree."""
    out: list[tuple[int, ...]] = []
    for deg in range(order + 1):
        level = []
        for combo in itertools.combinations_with_replacement(range(m), deg):
            alpha = [0] * m
            for v in combo:
                alpha[v] += 1
            level.append(tuple(alpha))
        # reverse-lex inside a degree keeps x_0 powers first
        level.sort(reverse=True)
        out.extend(level)
    return tuple(out)


def n_monomials(m: int, order: int) -> int:
    return math.comb(m + order, order)


class JetSpace:
    """Index tables for products and derivatives in a fixed (m, order)."""

    def __init__(self, m: int, order: int):
        self.m = m
        self.order = order
        self.mons = monomials(m, order)
        self.size = len(self.mons)
        self.index = {a: i for i, a in enumerate(self.mons)}
        exps = np.array(self.mons, dtype=np.int64).reshape(self.size, m)
        degs = exps.sum(axis=1)
        ii, jj, kk = [], [], []
        for i, a in enumerate(self.mons):
            da = degs[i]
            for j, b in enumerate(self.mons):
                if da + degs[j] > order:
                    break  # graded ordering: the rest have higher degree
                ii.append(i)
                jj.append(j)
                kk.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self.pi = np.array(ii, dtype=np.int64)
        self.pj = np.array(jj, dtype=np.int64)
        npairs = len(ii)
        self.scatter = sp.csr_matrix(
            (np.ones(npairs), (np.arange(npairs), np.array(kk))), shape=(npairs, self.size)
        )
        self.degree = degs
        if order >= 1:
            lower = monomials(m, order - 1)
            src = np.zeros((m, len(lower)), dtype=np.int64)
            fac = np.zeros((m, len(lower)))
            for t, b in enumerate(lower):
                for v in range(m):
                    a = list(b)
                    a[v] += 1
                    src[v, t] = self.index[tuple(a)]
                    fac[v, t] = a[v]
            self.dsrc = src
            self.dfac = fac


@lru_cache(maxsize=None)
def jet_space(m: int, order: int) -> JetSpace:
    return JetSpace(m, order)


def _letters(k: int, skip: str = "") -> str:
    pool = [c for c in string.ascii_letters if c not in skip and c not in "ZP"]
    return "".join(pool[:k])


class Jet:
    """Batch of tensor-valued truncated Taylor expansions."""

    __array_priority__ = 100

    def __init__(self, coef: np.ndarray, m: int, order: int):
        self.c = coef
        self.m = m
        self.order = order
        if coef.shape[-1] != n_monomials(m, order):
            raise ValueError("coefficient axis does not match (m, order)")

    # -- construction -------------------------------------------------
    @classmethod
    def constant(cls, values, m: int, order: int) -> "Jet":
        values = np.asarray(values)
        c = np.zeros(values.shape + (n_monomials(m, order),), dtype=values.dtype)
        c[..., 0] = values
        return cls(c, m, order)

    @classmethod
    def variables(cls, base: np.ndarray, order: int) -> "Jet":
        """The coordinate functions ``x_i = base_i + h_i``; shape ``(B, m)``."""
        base = np.atleast_2d(np.asarray(base, dtype=float))
        bsz, m = base.shape
        c = np.zeros((bsz, m, n_monomials(m, order)))
        c[..., 0] = base
        if order >= 1:
            for i in range(m):
                c[:, i, 1 + i] = 1.0
        return cls(c, m, order)

    # -- basic structure ----------------------------------------------
    @property
    def batch(self) -> int:
        return self.c.shape[0]

    @property
    def tshape(self) -> tuple[int, ...]:
        return self.c.shape[1:-1]

    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError(f"cannot raise jet order {self.order} to {order}")
        if order == self.order:
            return self
        return Jet(self.c[..., : n_monomials(self.m, order)], self.m, order)

    def __getitem__(self, idx) -> "Jet":
        """Index the tensor axes (the batch axis is kept)."""
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.c[(slice(None),) + idx], self.m, self.order)

    def reshape(self, *tshape) -> "Jet":
        return Jet(self.c.reshape((self.batch,) + tuple(tshape) + (self.c.shape[-1],)), self.m, self.order)

    def transpose(self, *axes) -> "Jet":
        k = len(self.tshape)
        perm = (0,) + tuple(a + 1 for a in axes) + (k + 1,)
        return Jet(self.c.transpose(perm), self.m, self.order)

    def real(self) -> "Jet":
        return Jet(self.c.real.copy(), self.m, self.order)

    def imag(self) -> "Jet":
        return Jet(self.c.imag.copy(), self.m, self.order)

    def conj(self) -> "Jet":
        return Jet(self.c.conj(), self.m, self.order)

    def sum(self, axis: int) -> "Jet":
        return Jet(self.c.sum(axis=axis + 1), self.m, self.order)

    # -- arithmetic -----------------------------------------------------
    def _align(self, other: "Jet") -> tuple["Jet", "Jet"]:
        k = min(self.order, other.order)
        return self.truncate(k), other.truncate(k)

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return Jet(_bcast_add(a.c, b.c), a.m, a.order)
        out = self.c.copy() if np.isscalar(other) else self.c.astype(np.result_type(self.c, other))
        out[..., 0] = out[..., 0] + other
        return Jet(out, self.m, self.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.m, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return jmul(self, other)
        other = np.asarray(other)
        return Jet(self.c * other[..., None], self.m, self.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return jmul(self, other.reciprocal())
        return self * (1.0 / np.asarray(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    # -- calculus -------------------------------------------------------
    def partial(self, v: int) -> "Jet":
        if self.order < 1:
            raise ValueError("jet order exhausted")
        sp_ = jet_space(self.m, self.order)
        c = self.c[..., sp_.dsrc[v]] * sp_.dfac[v]
        return Jet(c, self.m, self.order - 1)

    def grad(self) -> "Jet":
        """All first partials, stacked as a new leading tensor axis."""
        if self.order < 1:
            raise ValueError("jet order exhausted")
        sp_ = jet_space(self.m, self.order)
        c = self.c[..., sp_.dsrc] * sp_.dfac  # (B, *t, m, M')
        k = c.ndim
        perm = (0, k - 2) + tuple(range(1, k - 2)) + (k - 1,)
        return Jet(c.transpose(perm), self.m, self.order - 1)

    def derivatives(self) -> list[np.ndarray]:
        """Value, gradient, Hessian, ... as dense arrays (for checks)."""
        out = []
        j = self
        for _ in range(self.order + 1):
            out.append(j.value)
            if j.order == 0:
                break
            j = j.grad()
        return out

    # -- univariate functions ------------------------------------------
    def _series(self, coeffs: list[np.ndarray]) -> "Jet":
        """Evaluate ``sum_k coeffs[k] * N**k`` with ``N`` the nilpotent part."""
        nil = Jet(self.c.copy(), self.m, self.order)
        nil.c[..., 0] = 0
        out = Jet.constant(coeffs[-1], self.m, self.order)
        for ck in reversed(coeffs[:-1]):
            out = jmul(out, nil) + ck
        return out

    def reciprocal(self) -> "Jet":
        a = self.value
        return self._series([(-1) ** k / a ** (k + 1) for k in range(self.order + 1)])

    def log(self) -> "Jet":
        a = self.value
        coeffs = [np.log(a)] + [(-1) ** (k + 1) / (k * a**k) for k in range(1, self.order + 1)]
        return self._series(coeffs)

    def power(self, p: float) -> "Jet":
        a = self.value
        coeffs = []
        binom = 1.0
        for k in range(self.order + 1):
            coeffs.append(binom * a ** (p - k))
            binom *= (p - k) / (k + 1)
        return self._series(coeffs)

    def sqrt(self) -> "Jet":
        return self.power(0.5)

    def exp(self) -> "Jet":
        a = np.exp(self.value)
        return self._series([a / math.factorial(k) for k in range(self.order + 1)])

    def sin(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cyc = [s, c, -s, -c]
        return self._series([cyc[k % 4] / math.factorial(k) for k in range(self.order + 1)])

    def cos(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cyc = [c, -s, -c, s]
        return self._series([cyc[k % 4] / math.factorial(k) for k in range(self.order + 1)])


def _bcast_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a + b


def jmul(a: Jet, b: Jet) -> Jet:
    """Elementwise product with numpy broadcasting over tensor axes."""
    a, b = a._align(b)
    sp_ = jet_space(a.m, a.order)
    if a.order == 0:
        return Jet(a.c * b.c, a.m, 0)
    if a.order == 1:
        # Leibniz rule directly; avoids the generic gather/scatter
        a0, b0 = a.c[..., :1], b.c[..., :1]
        out = a0 * b.c + a.c * b0
        out[..., :1] -= a0 * b0
        return Jet(out, a.m, 1)
    prod = a.c[..., sp_.pi] * b.c[..., sp_.pj]
    return Jet(_scatter(prod, sp_), a.m, a.order)


def _scatter(prod: np.ndarray, sp_: JetSpace) -> np.ndarray:
    lead = prod.shape[:-1]
    flat = prod.reshape(-1, prod.shape[-1])
    if np.iscomplexobj(flat):
        out = (sp_.scatter.T @ flat.real.T).T + 1j * (sp_.scatter.T @ flat.imag.T).T
    else:
        out = (sp_.scatter.T @ flat.T).T
    return np.asarray(out).reshape(lead + (sp_.size,))


def jein(spec: str, a: Jet, b: Jet) -> Jet:
    """``einsum`` over the tensor axes of two jets (batch and series handled).

    ``spec`` uses only the tensor indices, e.g. ``"ab,bc->ac"``.
    """
    a, b = a._align(b)
    sp_ = jet_space(a.m, a.order)
    lhs, out = spec.split("->")
    sa, sb = lhs.split(",")
    full = f"Z{sa}P,Z{sb}P->Z{out}P"
    if a.order == 0:
        return Jet(np.einsum(full, a.c, b.c), a.m, 0)
    if a.order == 1:
        a0, b0 = a.c[..., :1], b.c[..., :1]
        out = np.einsum(full, a0, b.c, optimize=True) + np.einsum(full, a.c, b0, optimize=True)
        out[..., :1] -= np.einsum(full, a0, b0, optimize=True)
        return Jet(out, a.m, 1)
    prod = np.einsum(full, a.c[..., sp_.pi], b.c[..., sp_.pj], optimize=True)
    return Jet(_scatter(prod, sp_), a.m, a.order)


def jein_const(spec: str, a: Jet, const: np.ndarray) -> Jet:
    """Contract a jet with a batch-independent constant tensor."""
    sa, rest = spec.split(",")
    sc, out = rest.split("->")
    return Jet(np.einsum(f"Z{sa}P,{sc}->Z{out}P", a.c, const, optimize=True), a.m, a.order)


def stack(jets: list[Jet], axis: int = 0) -> Jet:
    k = min(j.order for j in jets)
    jets = [j.truncate(k) for j in jets]
    return Jet(np.stack([j.c for j in jets], axis=axis + 1), jets[0].m, k)


def mat_inverse(g: Jet) -> Jet:
    """Inverse of a batch of square matrix jets by a Neumann series."""
    g0 = g.value
    inv0 = np.linalg.inv(g0)
    nil = Jet(g.c.copy(), g.m, g.order)
    nil.c[..., 0] = 0
    x = -jein("ab,bc->ac", Jet.constant(inv0, g.m, g.order), nil)
    eye = np.broadcast_to(np.eye(g0.shape[-1]), g0.shape).astype(g0.dtype)
    term = Jet.constant(eye, g.m, g.order)
    total = term
    for _ in range(g.order):
        term = jein("ab,bc->ac", x, term)
        total = total + term
    return jein("ab,bc->ac", total, Jet.constant(inv0, g.m, g.order))


def compose(f: Jet, h: Jet) -> Jet:
    """Substitute jets ``h`` (shape ``(B, f.m)``) for the variables of ``f``.

    ``f`` is expanded about ``h.value``; the result is a jet in the variables
    of ``h`` truncated at ``min(f.order, h.order)``.
    """
    k = min(f.order, h.order)
    f = f.truncate(k)
    h = h.truncate(k)
    nil = Jet(h.c.copy(), h.m, k)
    nil.c[..., 0] = 0
    mons = monomials(f.m, k)
    powers: dict[tuple[int, ...], Jet] = {}
    one = Jet.constant(np.ones(h.batch), h.m, k)
    tshape = f.tshape
    acc = np.zeros((f.batch,) + tshape + (n_monomials(h.m, k),), dtype=np.result_type(f.c, h.c))
    for idx, alpha in enumerate(mons):
        if sum(alpha) == 0:
            p = one
        else:
            v = next(i for i, e in enumerate(alpha) if e)
            prev = list(alpha)
            prev[v] -= 1
            p = jmul(powers[tuple(prev)], nil[v])
        powers[alpha] = p
        coef = f.c[..., idx]  # (B, *t)
        acc = acc + coef[..., None] * p.c.reshape((h.batch,) + (1,) * len(tshape) + (-1,))
    return Jet(acc, h.m, k)
