"""Pointwise multilinear algebra over R^m with a symplectic form.

Conventions
-----------
* Tensors are numpy arrays whose trailing ``k`` axes are the tensor slots;
  leading axes, when present, are batch axes.
* Symmetrisation and skew-symmetrisation average over permutations
  (weight ``1/k!``), so both are idempotent.  As a consequence the pair map
  :func:`pi_map` at valence one returns ``(e1 ^ e2) / 2`` rather than the
  unnormalised wedge product.
* Real coordinates on C^n are ordered ``(x_1..x_n, y_1..y_n)`` and the
  standard form is ``J = [[0, I], [-I, 0]]``.  The inverse form is fixed by
  ``J^{ac} J_{bc} = delta^a_b``; for a compatible metric this means
  ``J^{ab} = g^{ac} g^{bd} J_{cd}``.  In the standard frame ``J^{ab}`` and
  ``J_{ab}`` have the same matrix.
* The trace-free part of a tensor in a declared symmetry class is the
  component in the joint kernel of all J-traces taken along the span of all
  J-insertions.  In an adapted (orthonormal Darboux) frame the J-insertions
  are orthogonal to the trace-free tensors, so the projector is orthogonal
  there; other frames are handled by changing frame first.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

RANK_RTOL = 1e-10
RANK_ATOL = 1e-12


def _count_rank(s: np.ndarray, rtol: float = RANK_RTOL, atol: float = RANK_ATOL) -> int:
    """Singular values above ``rtol * s_max`` (and above ``atol``) count."""
    if s.size == 0:
        return 0
    return int((s > max(rtol * s[0], atol)).sum())


# ---------------------------------------------------------------------------
# containers


@dataclass(frozen=True)
class DenseTensor:
    """A single real tensor over R^m with validated shape."""

    components: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.components, dtype=float)
        if arr.ndim and len(set(arr.shape)) != 1:
            raise ValueError("all slots of a DenseTensor must have the same dimension")
        if not np.all(np.isfinite(arr)):
            raise ValueError("DenseTensor entries must be finite")
        object.__setattr__(self, "components", arr)

    @property
    def dim(self) -> int:
        return self.components.shape[0] if self.components.ndim else 0

    @property
    def valence(self) -> int:
        return self.components.ndim


def _arr(t) -> np.ndarray:
    return t.components if isinstance(t, DenseTensor) else np.asarray(t)


def standard_J(n: int) -> np.ndarray:
    z, e = np.zeros((n, n)), np.eye(n)
    return np.block([[z, e], [-e, z]])


@dataclass(frozen=True)
class SymplecticData:
    """A compatible pair (g, J) on R^{2n}, possibly batched over points.

    ``J_lower`` and ``g_lower`` have shape ``(..., 2n, 2n)``.  ``J_upper`` is
    the inverse form with ``J^{ac} J_{bc} = delta^a_b``.
    """

    J_lower: np.ndarray
    g_lower: np.ndarray
    J_upper: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.J_upper is None:
            # J^{ac} J_{bc} = delta  <=>  Jup @ J.T = I
            jup = np.linalg.inv(np.swapaxes(self.J_lower, -1, -2))
            object.__setattr__(self, "J_upper", jup)

    @classmethod
    def standard(cls, n: int) -> "SymplecticData":
        J = standard_J(n)
        return cls(J, np.eye(2 * n), J.copy())

    @property
    def dim(self) -> int:
        return self.J_lower.shape[-1]

    @property
    def n(self) -> int:
        return self.dim // 2

    @property
    def J_mixed(self) -> np.ndarray:
        """``J_a^b = g^{bc} J_ac`` as an array indexed ``[a, b]``."""
        ginv = np.linalg.inv(self.g_lower)
        return np.einsum("...bc,...ac->...ab", ginv, self.J_lower)

    def is_standard(self) -> bool:
        if self.J_lower.ndim != 2:
            return False
        return bool(
            np.allclose(self.J_lower, standard_J(self.n), atol=1e-14)
            and np.allclose(self.g_lower, np.eye(self.dim), atol=1e-14)
        )

    def table_residual(self) -> float:
        """Residual of ``g_ab = J_a^c J_bc`` and of the inverse convention."""
        Jm = self.J_mixed
        r1 = np.einsum("...ac,...bc->...ab", Jm, self.J_lower) - self.g_lower
        eye = np.broadcast_to(np.eye(self.dim), self.J_lower.shape)
        r2 = np.einsum("...ac,...bc->...ab", self.J_upper, self.J_lower) - eye
        return float(max(np.abs(r1).max(), np.abs(r2).max()))

    def adapted_frame(self) -> np.ndarray:
        """Frames ``E`` (columns) with ``E^T g E = I`` and ``E^T J E = J_std``."""
        g = np.asarray(self.g_lower)
        J = np.asarray(self.J_lower)
        flat_g = g.reshape(-1, self.dim, self.dim)
        flat_J = J.reshape(-1, self.dim, self.dim)
        out = np.empty_like(flat_g)
        for i, (gi, Ji) in enumerate(zip(flat_g, flat_J)):
            out[i] = _darboux_frame(gi, Ji)
        return out.reshape(g.shape)


def _darboux_frame(g: np.ndarray, J: np.ndarray) -> np.ndarray:
    m = g.shape[0]
    n = m // 2
    L = np.linalg.cholesky(g)
    Linv = np.linalg.inv(L)
    Jp = Linv @ J @ Linv.T
    T, Z = sla.schur(Jp, output="real")
    U = np.zeros((m, m))
    for k in range(n):
        u, v = Z[:, 2 * k], Z[:, 2 * k + 1]
        if T[2 * k, 2 * k + 1] > 0:
            U[:, k], U[:, n + k] = u, v
        else:
            U[:, k], U[:, n + k] = v, u
    return Linv.T @ U


# ---------------------------------------------------------------------------
# symmetrisers and the pair map


def _slot_axes(t: np.ndarray, valence: int | None) -> tuple[int, int]:
    k = t.ndim if valence is None else valence
    return t.ndim - k, k


def symmetrize(t, slots, valence: int | None = None, sign: bool = False) -> np.ndarray:
    """Average ``t`` over all permutations of the given tensor slots.

    With ``sign=True`` the average is weighted by the permutation sign
    (skew-symmetrisation).  Slots count within the trailing ``valence`` axes.
    """
    t = _arr(t)
    off, k = _slot_axes(t, valence)
    slots = list(slots)
    if any(s < 0 or s >= k for s in slots):
        raise IndexError(f"slot out of range for valence {k}: {slots}")
    if len(set(slots)) != len(slots):
        raise IndexError("repeated slot")
    acc = np.zeros_like(t, dtype=float)
    count = 0
    for perm in itertools.permutations(range(len(slots))):
        axes = list(range(t.ndim))
        for src, dst in zip(slots, perm):
            axes[off + src] = off + slots[dst]
        s = _perm_sign(perm) if sign else 1
        acc = acc + s * np.transpose(t, axes)
        count += 1
    return acc / count


def antisymmetrize(t, slots, valence: int | None = None) -> np.ndarray:
    return symmetrize(t, slots, valence, sign=True)


def _perm_sign(perm) -> int:
    perm = list(perm)
    s = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            s = -s
    return s


def pi_map(T, ell: int) -> np.ndarray:
    """Regroup two symmetric blocks of ``ell`` slots into ``ell`` skew pairs.

    ``T_{pq..r ab..c}`` becomes ``S_{pa qb .. rc}`` and each pair is then
    skew-symmetrised with weight 1/2.  Trailing ``2*ell`` axes are used.
    """
    T = _arr(T)
    if T.ndim < 2 * ell or ell < 1:
        raise ValueError(f"pi_map needs valence 2*ell = {2 * ell}")
    off = T.ndim - 2 * ell
    perm = list(range(off))
    for i in range(ell):
        perm += [off + i, off + ell + i]
    S = np.transpose(T, perm)
    for i in range(ell):
        a, b = off + 2 * i, off + 2 * i + 1
        S = 0.5 * (S - np.swapaxes(S, a, b))
    return S


def ungroup_pairs(R, ell: int) -> np.ndarray:
    """Inverse of the regrouping step of :func:`pi_map` (no skewing)."""
    R = _arr(R)
    off = R.ndim - 2 * ell
    perm = list(range(off)) + [off + 2 * i for i in range(ell)] + [off + 2 * i + 1 for i in range(ell)]
    return np.transpose(R, perm)


def y_projector_raw(R, ell: int) -> np.ndarray:
    """GL-equivariant map onto Y^ell: symmetrise both blocks, then ``pi_map``.

    It acts as a fixed positive multiple of the identity on Y^ell.
    """
    R = _arr(R)
    T = ungroup_pairs(R, ell)
    off = T.ndim - 2 * ell
    if ell > 1:
        T = symmetrize(T, range(ell), valence=2 * ell)
        T = symmetrize(T, range(ell, 2 * ell), valence=2 * ell)
    return pi_map(T, ell)


def y_symmetry_residual(R, ell: int) -> float:
    """Max violation of pair skewness, pair symmetry and the Bianchi identity."""
    R = _arr(R)
    off = R.ndim - 2 * ell
    worst = 0.0
    for i in range(ell):
        worst = max(worst, np.abs(R + np.swapaxes(R, off + 2 * i, off + 2 * i + 1)).max())
    for i in range(ell - 1):
        axes = list(range(R.ndim))
        a, b = off + 2 * i, off + 2 * i + 2
        axes[a], axes[a + 1], axes[b], axes[b + 1] = b, b + 1, a, a + 1
        worst = max(worst, np.abs(R - np.transpose(R, axes)).max())
    if ell >= 2:
        # R_{[paq]b...} = 0 on the first two pairs suffices with the pair symmetry
        worst = max(worst, np.abs(antisymmetrize(R, [0, 1, 2], valence=2 * ell)).max())
    return float(worst)


# ---------------------------------------------------------------------------
# J-traces and insertions


def j_trace(t, i: int, j: int, S: SymplecticData, valence: int | None = None) -> np.ndarray:
    """Contract slots ``i`` and ``j`` with ``J^{ab}`` (slot i gets ``a``)."""
    t = _arr(t)
    off, k = _slot_axes(t, valence)
    if i == j or not (0 <= i < k and 0 <= j < k):
        raise IndexError(f"invalid slot pair ({i}, {j}) for valence {k}")
    Jup = np.asarray(S.J_upper)
    letters = "abcdefghijklmnop"[:k]
    batch = "ZYXWV"[:off]
    src = batch + letters
    jl = ("" if Jup.ndim == 2 else batch) + letters[i] + letters[j]
    out = batch + "".join(c for s, c in enumerate(letters) if s not in (i, j))
    return np.einsum(f"{src},{jl}->{out}", t, Jup)


def insert_J(theta, i: int, j: int, S: SymplecticData) -> np.ndarray:
    """Tensor product of ``J_lower`` into slots ``(i, j)`` with ``theta`` elsewhere."""
    theta = np.asarray(theta)
    J = np.asarray(S.J_lower)
    k = theta.ndim + 2
    prod = np.multiply.outer(J, theta)
    rest = [s for s in range(k) if s not in (i, j)]
    axes = [0] * k
    axes[i], axes[j] = 0, 1
    for pos, s in enumerate(rest):
        axes[s] = 2 + pos
    inv = np.argsort(axes)
    return np.transpose(prod, inv)


# ---------------------------------------------------------------------------
# symmetry classes


@dataclass(frozen=True)
class SymClass:
    """A declared symmetry class: ``form`` (k-forms), ``sym`` (symmetric
    k-tensors) or ``Y`` (the pair-type class Y^k of valence 2k)."""

    kind: str
    k: int

    def __post_init__(self):
        if self.kind not in ("form", "sym", "Y"):
            raise ValueError(f"unsupported symmetry class {self.kind!r}")
        if self.k < 0:
            raise ValueError("negative degree")

    @property
    def valence(self) -> int:
        return 2 * self.k if self.kind == "Y" else self.k

    def equivariant_projection(self, t: np.ndarray) -> np.ndarray:
        """A GL-equivariant map whose image is the class (trailing axes)."""
        v = self.valence
        if self.kind == "form":
            return antisymmetrize(t, range(v), valence=v) if v > 1 else t
        if self.kind == "sym":
            return symmetrize(t, range(v), valence=v) if v > 1 else t
        return y_projector_raw(t, self.k)

    def membership_residual(self, t: np.ndarray) -> float:
        t = np.asarray(t)
        if self.kind == "Y":
            return y_symmetry_residual(t, self.k)
        v = self.valence
        if v < 2:
            return 0.0
        return float(np.abs(t - self.equivariant_projection(t)).max())


RIEMANN = SymClass("Y", 2)
TWO_FORMS = SymClass("form", 2)


@lru_cache(maxsize=None)
def class_basis(cls: SymClass, m: int) -> np.ndarray:
    """Orthonormal basis (columns) of the class inside ``(R^m)^{valence}``."""
    v = cls.valence
    if v == 0:
        return np.ones((1, 1))
    if cls.kind in ("form", "sym"):
        combos = (
            itertools.combinations(range(m), v)
            if cls.kind == "form"
            else itertools.combinations_with_replacement(range(m), v)
        )
        cols = []
        for c in combos:
            e = np.zeros((m,) * v)
            e[c] = 1.0
            cols.append(cls.equivariant_projection(e).ravel())
        A = np.array(cols).T
    else:
        ell = cls.k
        blocks = list(itertools.combinations_with_replacement(range(m), ell))
        cols = []
        for p in blocks:
            for q in blocks:
                T = np.zeros((m,) * (2 * ell))
                T[p + q] = 1.0
                T = symmetrize(T, range(ell), valence=2 * ell)
                T = symmetrize(T, range(ell, 2 * ell), valence=2 * ell)
                cols.append(pi_map(T, ell).ravel())
        A = np.array(cols).T
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    r = int((s > RANK_RTOL * s[0]).sum())
    return U[:, :r]


@dataclass(frozen=True)
class PerpData:
    cls: SymClass
    m: int
    basis: np.ndarray  # B_V
    kernel: np.ndarray  # B_K, orthonormal, trace-free part
    insertions: np.ndarray  # orthonormal basis of J-insertion part of V
    split_ok: bool

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.basis.shape[1], self.kernel.shape[1], self.insertions.shape[1]


@lru_cache(maxsize=None)
def perp_data(cls: SymClass, m: int, seed: int = 20240101) -> PerpData:
    """Trace-free / insertion splitting of a symmetry class in the standard frame."""
    if m % 2:
        raise ValueError("symplectic dimension must be even")
    v = cls.valence
    BV = class_basis(cls, m)
    J = standard_J(m // 2)
    if v < 2:
        return PerpData(cls, m, BV, BV, np.zeros((BV.shape[0], 0)), True)
    tens = BV.T.reshape((BV.shape[1],) + (m,) * v)
    S = SymplecticData.standard(m // 2)
    rows = [j_trace(tens, i, j, S, valence=v).reshape(BV.shape[1], -1) for i, j in itertools.combinations(range(v), 2)]
    TrB = np.concatenate(rows, axis=1).T  # (ntraces, dimV)
    _, s, Vh = np.linalg.svd(TrB, full_matrices=True)
    null = Vh[_count_rank(s):].T
    BK = BV @ null
    # insertion subspace: equivariant projection of random J-insertions
    rng = np.random.default_rng(seed)
    dimV = BV.shape[1]
    ins = []
    per_pair = dimV + 4
    for i, j in itertools.combinations(range(v), 2):
        theta = rng.standard_normal((per_pair,) + (m,) * (v - 2))
        for th in theta:
            ins.append(cls.equivariant_projection(insert_J(th, i, j, S)).ravel())
    C = BV.T @ np.array(ins).T
    U, s2, _ = np.linalg.svd(C, full_matrices=False)
    r2 = _count_rank(s2)
    BI = BV @ U[:, :r2]
    joint = np.linalg.matrix_rank(np.hstack([BK, BI]), tol=1e-8) if (BK.size or BI.size) else 0
    split_ok = (BK.shape[1] + r2 == dimV) and joint == dimV
    # insertions must be orthogonal to the trace-free part in this frame
    if BI.size and BK.size:
        split_ok = split_ok and np.abs(BK.T @ BI).max() < 1e-8
    return PerpData(cls, m, BV, BK, BI, bool(split_ok))


def _to_frame(t: np.ndarray, E: np.ndarray, v: int) -> np.ndarray:
    """Components in the frame ``E`` (columns): ``t'_{i..} = t_{a..} E^a_i``."""
    off = t.ndim - v
    batch = "ZYXWV"[:off]
    eb = batch if E.ndim > 2 else ""
    for s in range(v):
        letters = list("abcdefghijklmnop"[:v])
        src = batch + "".join(letters)
        letters[s] = "q"
        dst = batch + "".join(letters)
        t = np.einsum(f"{src},{eb}{'abcdefghijklmnop'[s]}q->{dst}", t, E)
    return t


def perp_project(t, cls: SymClass, S: SymplecticData | None = None, tol: float = 1e-8) -> np.ndarray:
    """Trace-free part of ``t`` (declared to lie in ``cls``).

    Raises ``ValueError`` if ``t`` is not in the declared class and
    ``np.linalg.LinAlgError`` if the class does not split numerically.
    """
    t = np.asarray(_arr(t), dtype=float)
    v = cls.valence
    m = t.shape[-1]
    scale = max(np.abs(t).max(), 1.0)
    if cls.membership_residual(t) > tol * scale:
        raise ValueError(f"tensor is not in the declared class {cls}")
    data = perp_data(cls, m)
    if not data.split_ok:
        raise np.linalg.LinAlgError(f"trace/insertion subspaces fail to split for {cls}, m={m}")
    if S is None or S.is_standard():
        tf = t
        E = None
    else:
        E = S.adapted_frame()
        tf = _to_frame(t, E, v)
    off = tf.ndim - v
    flat = tf.reshape(tf.shape[:off] + (-1,))
    BK = data.kernel
    proj = (flat @ BK) @ BK.T
    out = proj.reshape(tf.shape)
    if E is not None:
        out = _to_frame(out, np.linalg.inv(E), v)
    return out


def trace_norm(t, cls: SymClass, S: SymplecticData) -> float:
    """Largest absolute J-trace of ``t`` over all slot pairs."""
    t = np.asarray(t)
    v = cls.valence
    worst = 0.0
    for i, j in itertools.combinations(range(v), 2):
        worst = max(worst, float(np.abs(j_trace(t, i, j, S, valence=v)).max()))
    return worst


# ---------------------------------------------------------------------------
# symplectic decomposition of Riemann-type tensors


@dataclass(frozen=True)
class RiemannDecomposition:
    X: np.ndarray
    Psi: np.ndarray
    L: float


def psi_insertion(Psi: np.ndarray, J: np.ndarray) -> np.ndarray:
    """The Psi-dependent part of the symplectic Riemann decomposition."""
    e = np.einsum
    return (
        e("ac,bd->abcd", Psi, J)
        - e("bc,ad->abcd", Psi, J)
        - e("ad,bc->abcd", Psi, J)
        + e("bd,ac->abcd", Psi, J)
        + 2 * e("ab,cd->abcd", Psi, J)
        + 2 * e("cd,ab->abcd", Psi, J)
    )


def l_tensor(J: np.ndarray) -> np.ndarray:
    e = np.einsum
    return e("ac,bd->abcd", J, J) - e("bc,ad->abcd", J, J) + 2 * e("ab,cd->abcd", J, J)


def reconstruct_riemann(dec: RiemannDecomposition, S: SymplecticData) -> np.ndarray:
    J = np.asarray(S.J_lower)
    return dec.X + psi_insertion(dec.Psi, J) + dec.L * l_tensor(J)


def decompose_symplectic_riemann(R, S: SymplecticData, tol: float = 1e-9) -> RiemannDecomposition:
    """Split a Riemann-type tensor into trace-free X, trace-free skew Psi and L."""
    R = np.asarray(_arr(R), dtype=float)
    if y_symmetry_residual(R, 2) > tol * max(1.0, np.abs(R).max()):
        raise ValueError("input lacks Riemann symmetries")
    E = None
    if not S.is_standard():
        E = S.adapted_frame()
        R = _to_frame(R, E, 4)
    m = R.shape[-1]
    n = m // 2
    Sstd = SymplecticData.standard(n)
    J = Sstd.J_lower
    data = perp_data(RIEMANN, m)
    # trace-free skew 2-forms
    tf2 = perp_data(TWO_FORMS, m).kernel
    cols = [data.kernel]
    psi_cols = np.array(
        [psi_insertion(tf2[:, k].reshape(m, m), J).ravel() for k in range(tf2.shape[1])]
    ).T
    cols += [psi_cols, l_tensor(J).reshape(-1, 1)]
    A = np.hstack(cols)
    coef, *_ = np.linalg.lstsq(A, R.ravel(), rcond=None)
    nk, npsi = data.kernel.shape[1], psi_cols.shape[1]
    X = (data.kernel @ coef[:nk]).reshape((m,) * 4)
    Psi = (tf2 @ coef[nk : nk + npsi]).reshape(m, m)
    L = float(coef[-1])
    if E is not None:
        Einv = np.linalg.inv(E)
        X = _to_frame(X, Einv, 4)
        Psi = _to_frame(Psi, Einv, 2)
    return RiemannDecomposition(X, Psi, L)


# ---------------------------------------------------------------------------
# Lagrangian subspaces


@dataclass(frozen=True)
class LagrangianFrame:
    basis: np.ndarray  # (2n, n), columns are the basis vectors

    def residual(self, S: SymplecticData | None = None) -> float:
        n = self.basis.shape[1]
        J = standard_J(n) if S is None else S.J_lower
        return float(np.abs(self.basis.T @ J @ self.basis).max())


def unitary_to_real(U: np.ndarray) -> np.ndarray:
    """Real 2n x 2n matrix of a complex n x n matrix in (x, y) coordinates."""
    A, B = U.real, U.imag
    return np.block([[A, -B], [B, A]])


def lagrangian_from_unitary(U: np.ndarray) -> LagrangianFrame:
    n = U.shape[0]
    return LagrangianFrame(unitary_to_real(U)[:, :n])


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def random_lagrangian(n: int, seed: int) -> LagrangianFrame:
    """Lagrangian frame obtained from a seeded random unitary acting on span{e_1..e_n}."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    return lagrangian_from_unitary(random_unitary(n, rng))


def restrict_to_lagrangian(psi, F: LagrangianFrame) -> np.ndarray:
    """Evaluate every slot of ``psi`` on the basis vectors of ``F``."""
    t = np.asarray(_arr(psi), dtype=float)
    v = t.ndim
    return _to_frame(t, F.basis, v)


def vanishes_on_all_lagrangians(psi, trials: int, seed: int, S: SymplecticData | None = None) -> float:
    """Maximum restriction to ``trials`` random Lagrangian subspaces."""
    t = np.asarray(_arr(psi), dtype=float)
    if S is not None and not S.is_standard():
        t = _to_frame(t, S.adapted_frame(), t.ndim)
    n = t.shape[0] // 2
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        F = lagrangian_from_unitary(random_unitary(n, rng))
        worst = max(worst, float(np.abs(restrict_to_lagrangian(t, F)).max(initial=0.0)))
    return worst


# ---------------------------------------------------------------------------
# the algebraic splitting lemma for T_{abcd}


def rho_insertion(rho: np.ndarray, J: np.ndarray) -> np.ndarray:
    """``J_c[a rho_b]d - J_d[a rho_b]c - J_cd rho_[ab]`` with averaging brackets."""
    e = np.einsum
    t1 = 0.5 * (e("ca,bd->abcd", J, rho) - e("cb,ad->abcd", J, rho))
    t2 = 0.5 * (e("da,bc->abcd", J, rho) - e("db,ac->abcd", J, rho))
    t3 = e("cd,ab->abcd", J, 0.5 * (rho - rho.T))
    return t1 - t2 - t3


def tau_insertion(tau: np.ndarray, J: np.ndarray) -> np.ndarray:
    return np.einsum("ab,cd->abcd", J, tau)


def j_wedge(psi: np.ndarray, J: np.ndarray) -> np.ndarray:
    """``J_[ab psi_c]d`` (skew-symmetrised over the first three slots)."""
    return antisymmetrize(np.einsum("ab,cd->abcd", J, psi), [0, 1, 2], valence=4)


def _nullspace(A: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    _, s, Vh = np.linalg.svd(A, full_matrices=A.shape[0] < A.shape[1])
    return Vh[_count_rank(s, rtol):].T


def _rank(A: np.ndarray, rtol: float = RANK_RTOL) -> int:
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    return _count_rank(s, rtol)


def _linear_map_matrix(fn, in_shape, m_out_size) -> np.ndarray:
    size = int(np.prod(in_shape))
    cols = []
    for i in range(size):
        e = np.zeros(size)
        e[i] = 1.0
        cols.append(np.asarray(fn(e.reshape(in_shape))).ravel())
    return np.array(cols).T


@lru_cache(maxsize=None)
def x_space_basis(n: int) -> np.ndarray:
    """Basis of X with X_[ab][cd], X_[abc]d = 0 and J^{ab} X_abcd = 0."""
    m = 2 * n
    S = SymplecticData.standard(n)
    N = m**4
    I = np.eye(N)
    eyeT = I.reshape((N,) + (m,) * 4)
    cons = [
        (eyeT + np.swapaxes(eyeT, 1, 2)).reshape(N, N),
        (eyeT + np.swapaxes(eyeT, 3, 4)).reshape(N, N),
        antisymmetrize(eyeT, [0, 1, 2], valence=4).reshape(N, N),
        j_trace(eyeT, 0, 1, S, valence=4).reshape(N, -1),
    ]
    A = np.hstack(cons).T
    return _nullspace(A)


@dataclass(frozen=True)
class Lemma10Dims:
    A: int
    B: int
    C: int
    H: int
    injective: bool
    surjective: bool


@lru_cache(maxsize=None)
def lemma10_dimensions(n: int) -> Lemma10Dims:
    """Dimensions of the spaces in ``0 -> A -> B -> C -> 0`` computed by rank."""
    m = 2 * n
    J = standard_J(n)
    f2 = math.comb(m, 2)
    tau_mat = _linear_map_matrix(lambda t: tau_insertion(t - t.T, J), (m, m), m**4)
    rho_mat = _linear_map_matrix(lambda r: rho_insertion(r, J), (m, m), m**4)
    jt = _rank(tau_mat)  # = dim Lambda^2
    dimA = m * m
    inj = _rank(np.hstack([rho_mat, tau_mat])) - jt == dimA
    dimB = f2 * f2 - jt
    wedge_mat = _linear_map_matrix(lambda p: j_wedge(p, J), (m, m), m**4)
    dimC = math.comb(m, 3) * m - _rank(wedge_mat)
    # B -> C surjective: skew parts of pair-skew T span all of Lambda^3 (x) Lambda^1
    pair_skew = antisymmetrize(antisymmetrize(np.eye(m**4).reshape((m**4,) + (m,) * 4), [0, 1], 4), [2, 3], 4)
    img = antisymmetrize(pair_skew, [0, 1, 2], 4).reshape(m**4, -1)
    surj = _rank(np.hstack([img.T, wedge_mat])) == math.comb(m, 3) * m
    H = x_space_basis(n).shape[1]
    return Lemma10Dims(dimA, dimB, dimC, H, bool(inj), bool(surj))


def lemma10_formula_dims(n: int) -> tuple[int, int, int, int]:
    A = 4 * n * n
    B = (n - 1) * n * (2 * n - 1) * (2 * n + 1)
    C = 4 * (n - 2) * n * n * (2 * n + 1) // 3
    H = (n - 1) * n * (2 * n - 1) * (2 * n + 3) // 3
    return A, B, C, H


@dataclass(frozen=True)
class Lemma10Solution:
    rho: np.ndarray
    tau: np.ndarray
    X: np.ndarray
    residual: float
    nullity: int
    precondition_residual: float


def lemma10_precondition(T: np.ndarray, J: np.ndarray) -> float:
    """Residual of ``T = T_[ab][cd]`` and ``T_[abc]d in J ^ psi``."""
    m = T.shape[0]
    r1 = np.abs(T + np.swapaxes(T, 0, 1)).max()
    r2 = np.abs(T + np.swapaxes(T, 2, 3)).max()
    skew3 = antisymmetrize(T, [0, 1, 2], valence=4).ravel()
    W = _wedge_matrix(m // 2)
    coef, *_ = np.linalg.lstsq(W, skew3, rcond=None)
    r3 = np.abs(W @ coef - skew3).max()
    return float(max(r1, r2, r3))


@lru_cache(maxsize=None)
def _wedge_matrix(n: int) -> np.ndarray:
    m = 2 * n
    return _linear_map_matrix(lambda p: j_wedge(p, standard_J(n)), (m, m), m**4)


@lru_cache(maxsize=None)
def _lemma10_system(n: int) -> np.ndarray:
    m = 2 * n
    J = standard_J(n)
    BX = x_space_basis(n)
    rho_mat = _linear_map_matrix(lambda r: rho_insertion(r, J), (m, m), m**4)
    tf = class_basis(TWO_FORMS, m)
    tau_cols = np.array([tau_insertion(tf[:, k].reshape(m, m), J).ravel() for k in range(tf.shape[1])]).T
    return np.hstack([BX, rho_mat, tau_cols])


def lemma10_solve(T, S: SymplecticData | None = None, tol: float = 1e-8) -> Lemma10Solution:
    """Unique ``(rho, tau, X)`` with ``T = X + rho-terms + J tau``.

    Works in the standard frame; pass ``S`` to transform a tensor given in
    another frame first (outputs are transformed back).
    """
    T = np.asarray(_arr(T), dtype=float)
    E = None
    if S is not None and not S.is_standard():
        E = S.adapted_frame()
        T = _to_frame(T, E, 4)
    m = T.shape[0]
    n = m // 2
    J = standard_J(n)
    scale = max(1.0, np.abs(T).max())
    pre = lemma10_precondition(T, J)
    if pre > tol * scale:
        raise ValueError(f"precondition fails (residual {pre:.3e})")
    A = _lemma10_system(n)
    coef, *_ = np.linalg.lstsq(A, T.ravel(), rcond=None)
    resid = float(np.abs(A @ coef - T.ravel()).max())
    nullity = A.shape[1] - _rank(A)
    if nullity:
        raise np.linalg.LinAlgError("splitting system is rank deficient")
    nh = x_space_basis(n).shape[1]
    X = (x_space_basis(n) @ coef[:nh]).reshape((m,) * 4)
    rho = coef[nh : nh + m * m].reshape(m, m)
    tf = class_basis(TWO_FORMS, m)
    tau = (tf @ coef[nh + m * m :]).reshape(m, m)
    if E is not None:
        Einv = np.linalg.inv(E)
        X = _to_frame(X, Einv, 4)
        rho = _to_frame(rho, Einv, 2)
        tau = _to_frame(tau, Einv, 2)
    return Lemma10Solution(rho, tau, X, resid, nullity, pre)
