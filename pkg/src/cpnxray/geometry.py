"""Charts, Fubini-Study and round metrics, curvature, closed geodesics and
model embeddings for CP_n and RP_n.

Normalisation: both metrics are the quotient metrics of the unit sphere
(S^{2n+1} -> CP_n, S^n -> RP_n).  In an affine chart the metric is the
Hessian of a potential:

* CP_n: Kaehler potential ``log(1 + |w|^2)``; the Riemannian metric is
  ``Re h`` with ``h_{jk} = d_j dbar_k log(1 + |w|^2)``, the Kaehler form is
  ``J = -Im h``.  At the chart origin ``g = I`` and ``J = [[0, I], [-I, 0]]``.
* RP_n: ``g = ((1 + |x|^2) I - x x^T) / (1 + |x|^2)^2`` (no potential).

Geodesics are ``t -> [cos t z + sin t w]`` with orthonormal (and, for CP_n,
Hermitian-orthogonal) ``z, w``; they close up after ``t = pi``.

Curvature convention: ``[nabla_a, nabla_b] V^c = R_ab^c_d V^d`` and
``R_abcd = g_ce R_ab^e_d``, so that the unit round sphere has
``R_abcd = g_ac g_bd - g_bc g_ad``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .jets import Jet, compose, jein, mat_inverse, stack
from .tensor_algebra import SymplecticData, pi_map, random_unitary, standard_J

SAFE_ZONE = 10.0


@dataclass(frozen=True)
class ChartPoint:
    space: str  # "CP" or "RP"
    n: int
    chart_id: int
    coords: np.ndarray

    def __post_init__(self):
        if self.space not in ("CP", "RP"):
            raise ValueError("space must be 'CP' or 'RP'")
        if not 0 <= self.chart_id <= self.n:
            raise ValueError("chart id out of range")
        c = np.asarray(self.coords, dtype=float)
        m = 2 * self.n if self.space == "CP" else self.n
        if c.shape != (m,) or not np.all(np.isfinite(c)):
            raise ValueError(f"expected {m} finite coordinates")
        object.__setattr__(self, "coords", c)


@dataclass
class MetricJet:
    """Metric data on a batch of points of one chart.

    ``g``, ``ginv`` (and ``J`` on CP_n) are jets of order ``order + 1``;
    ``christoffel[c, a, b] = Gamma^c_ab`` is a jet of order ``order``.
    """

    g: Jet
    ginv: Jet
    christoffel: Jet
    J: Jet | None
    order: int

    def riemann(self) -> Jet:
        """``R_abcd`` as a jet of order ``order - 1``."""
        G = self.christoffel
        dG = G.grad()  # dG[e, c, a, b] = d_e Gamma^c_ab
        # R_ab^c_d = d_a G^c_bd - d_b G^c_ad + G^c_ae G^e_bd - G^c_be G^e_ad
        d_a = dG.transpose(0, 2, 1, 3)  # [a, b, c, d] = d_a Gamma^c_bd
        quad = jein("cae,ebd->abcd", G, G)
        Rup = d_a - d_a.transpose(1, 0, 2, 3) + quad - quad.transpose(1, 0, 2, 3)
        return jein("ce,abed->abcd", self.g, Rup)


def _real_pack(wj: list[Jet]) -> Jet:
    re = [w.real() for w in wj]
    im = [w.imag() for w in wj]
    return stack(re + im, axis=0)


class ProjectiveSpace:
    """Common interface of :class:`CPn` and :class:`RPn`."""

    kind = ""
    complex = False

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("n must be positive")
        self.n = n

    @property
    def m(self) -> int:
        return 2 * self.n if self.complex else self.n

    # -- coordinates ----------------------------------------------------
    def chart_to_affine(self, X: Jet) -> list[Jet]:
        """Affine coordinates ``w_j`` (complex on CP_n) from real chart jets."""
        if self.complex:
            n = self.n
            return [X[j] + 1j * X[n + j] for j in range(n)]
        return [X[j] for j in range(self.n)]

    def homogeneous(self, chart: int, X: Jet) -> list[Jet]:
        w = self.chart_to_affine(X)
        one = Jet.constant(np.ones(X.batch, dtype=complex if self.complex else float), X.m, X.order)
        return w[:chart] + [one] + w[chart:]

    def homogeneous_values(self, chart: int, coords: np.ndarray) -> np.ndarray:
        coords = np.atleast_2d(coords)
        n = self.n
        w = coords[:, :n] + 1j * coords[:, n:] if self.complex else coords
        ones = np.ones((coords.shape[0], 1), dtype=w.dtype)
        return np.concatenate([w[:, :chart], ones, w[:, chart:]], axis=1)

    def best_chart(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Chart with the largest-modulus denominator and coordinates there."""
        Z = np.atleast_2d(Z)
        k = np.argmax(np.abs(Z), axis=1)
        rows = np.arange(Z.shape[0])
        w = Z / Z[rows, k][:, None]
        mask = np.ones_like(w, dtype=bool)
        mask[rows, k] = False
        w = w[mask].reshape(Z.shape[0], self.n)
        coords = np.concatenate([w.real, w.imag], axis=1) if self.complex else w.real
        return k, coords

    def point(self, chart: int, coords) -> ChartPoint:
        return ChartPoint(self.kind, self.n, chart, np.asarray(coords, dtype=float))

    def random_points(self, count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        """Seeded points; returns (chart ids, coords) in the best chart."""
        rng = np.random.default_rng(seed)
        if self.complex:
            Z = rng.standard_normal((count, self.n + 1)) + 1j * rng.standard_normal((count, self.n + 1))
        else:
            Z = rng.standard_normal((count, self.n + 1))
        return self.best_chart(Z)

    # -- metric -----------------------------------------------------------
    def metric_and_form(self, X: Jet) -> tuple[Jet, Jet | None]:
        """Metric (and Kaehler form) jets, two orders below ``X``."""
        raise NotImplementedError

    def metric_jet(self, coords, order: int) -> MetricJet:
        """Metric, inverse, Kaehler form (order+1) and Christoffels (order)."""
        if order < 0:
            raise ValueError("order must be non-negative")
        X = Jet.variables(np.atleast_2d(coords), order + 3)
        g, J = self.metric_and_form(X)
        ginv = mat_inverse(g)
        dg = g.grad()  # dg[e, a, b] = d_e g_ab
        # low[a, b, d] = 1/2 (d_a g_bd + d_b g_ad - d_d g_ab)
        low = (dg + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0)) * 0.5
        Gamma = jein("cd,abd->cab", ginv, low)
        return MetricJet(g.truncate(order + 1), ginv.truncate(order + 1), Gamma, None if J is None else J.truncate(order + 1), order)

    def symplectic_data(self, coords) -> SymplecticData:
        mj = self.metric_jet(coords, 0)
        if mj.J is None:
            raise ValueError("RP_n carries no Kaehler form")
        return SymplecticData(mj.J.value, mj.g.value)

    def curvature_formula(self, g: np.ndarray, J: np.ndarray | None) -> np.ndarray:
        e = np.einsum
        R = e("...ac,...bd->...abcd", g, g) - e("...bc,...ad->...abcd", g, g)
        if J is not None:
            R = R + e("...ac,...bd->...abcd", J, J) - e("...bc,...ad->...abcd", J, J) + 2 * e("...ab,...cd->...abcd", J, J)
        return R

    def riemann_at(self, coords) -> np.ndarray:
        mj = self.metric_jet(coords, 1)
        return mj.riemann().value

    def verify_curvature_formula(self, coords) -> float:
        """Max deviation of the computed curvature from the closed formula."""
        mj = self.metric_jet(coords, 1)
        R = mj.riemann().value
        J = None if mj.J is None else mj.J.value
        return float(np.abs(R - self.curvature_formula(mj.g.value, J)).max())

    # -- geodesics ---------------------------------------------------------
    def geodesic_through(self, chart: int, coords, v) -> "Geodesic":
        coords = np.asarray(coords, dtype=float)
        v = np.asarray(v, dtype=float)
        zhat = self.homogeneous_values(chart, coords)[0]
        n = self.n
        dw = v[:n] + 1j * v[n:] if self.complex else v
        dz = np.insert(dw, chart, 0.0)
        nz = np.linalg.norm(zhat)
        z = zhat / nz
        W = (dz - np.vdot(z, dz) * z) / nz
        speed = np.linalg.norm(W)
        if abs(speed - 1.0) > 1e-8:
            raise ValueError(f"tangent is not unit length (|v|_g = {speed:.6g})")
        return Geodesic(self, z, W / speed)

    def sample_geodesics(self, count: int, seed: int) -> list["Geodesic"]:
        rng = np.random.default_rng(seed)
        out = []
        d = self.n + 1
        for _ in range(count):
            if self.complex:
                z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
                w = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            else:
                z = rng.standard_normal(d)
                w = rng.standard_normal(d)
            z = z / np.linalg.norm(z)
            w = w - np.vdot(z, w) * z
            w = w / np.linalg.norm(w)
            out.append(Geodesic(self, z, w))
        return out


class CPn(ProjectiveSpace):
    kind = "CP"
    complex = True

    def potential(self, X: Jet) -> Jet:
        r2 = X[0] * X[0]
        for i in range(1, self.m):
            r2 = r2 + X[i] * X[i]
        return (r2 + 1.0).log()

    def metric_and_form(self, X: Jet) -> tuple[Jet, Jet]:
        H = self.potential(X).grad().grad()
        n = self.n
        xx = H[:n, :n]
        yy = H[n:, n:]
        xy = H[:n, n:]
        yx = H[n:, :n]
        A = (xx + yy) * 0.25
        B = (xy - yx) * 0.25
        g = _block(A, B, -B, A)
        J = _block(-B, A, -A, -B)
        return g, J


class RPn(ProjectiveSpace):
    kind = "RP"
    complex = False

    def metric_and_form(self, X: Jet) -> tuple[Jet, None]:
        X = X.truncate(X.order - 2)
        r2 = X[0] * X[0]
        for i in range(1, self.m):
            r2 = r2 + X[i] * X[i]
        inv = (r2 + 1.0).reciprocal()
        outer = jein("a,b->ab", X, X)
        eye = Jet.constant(np.broadcast_to(np.eye(self.m), (X.batch, self.m, self.m)).copy(), X.m, X.order)
        g = _round_metric(eye, outer, inv)
        return g, None


def _round_metric(eye: Jet, outer: Jet, inv: Jet) -> Jet:
    inv1 = Jet(inv.c[:, None, None, :], inv.m, inv.order)
    return eye * inv1 - outer * (inv1 * inv1)


def _block(a: Jet, b: Jet, c: Jet, d: Jet) -> Jet:
    top = np.concatenate([a.c, b.c], axis=2)
    bot = np.concatenate([c.c, d.c], axis=2)
    return Jet(np.concatenate([top, bot], axis=1), a.m, a.order)


@lru_cache(maxsize=None)
def space(kind: str, n: int) -> ProjectiveSpace:
    if kind == "CP":
        return CPn(n)
    if kind == "RP":
        return RPn(n)
    raise ValueError(f"unknown space {kind!r}")


@dataclass
class Geodesic:
    """``t -> [cos t z + sin t w]``; closed with period pi."""

    space: ProjectiveSpace
    z: np.ndarray
    w: np.ndarray

    def invariants_residual(self) -> float:
        z, w = self.z, self.w
        return float(max(abs(np.linalg.norm(z) - 1), abs(np.linalg.norm(w) - 1), abs(np.vdot(z, w))))

    def homogeneous(self, t) -> tuple[np.ndarray, np.ndarray]:
        t = np.atleast_1d(np.asarray(t, dtype=float))[:, None]
        Z = np.cos(t) * self.z + np.sin(t) * self.w
        dZ = -np.sin(t) * self.z + np.cos(t) * self.w
        return Z, dZ

    def evaluate(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Chart ids, chart coordinates and chart velocities at times ``t``."""
        Z, dZ = self.homogeneous(t)
        k, coords = self.space.best_chart(Z)
        rows = np.arange(Z.shape[0])
        Zk, dZk = Z[rows, k][:, None], dZ[rows, k][:, None]
        dw = (dZ * Zk - Z * dZk) / Zk**2
        mask = np.ones_like(dw, dtype=bool)
        mask[rows, k] = False
        dw = dw[mask].reshape(Z.shape[0], self.space.n)
        vel = np.concatenate([dw.real, dw.imag], axis=1) if self.space.complex else dw.real
        if np.abs(coords).max(initial=0.0) > SAFE_ZONE:
            raise RuntimeError("geodesic point outside every chart's safe zone")
        return k, coords, vel

    def closure_distance(self) -> float:
        """Fubini-Study (or round) distance between gamma(0) and gamma(pi)."""
        Z0, _ = self.homogeneous(0.0)
        Z1, _ = self.homogeneous(np.pi)
        a, b = Z0[0] / np.linalg.norm(Z0), Z1[0] / np.linalg.norm(Z1)
        inner = np.vdot(a, b)
        # atan2 keeps full precision near zero distance, where arccos does not
        return float(np.arctan2(np.linalg.norm(b - inner * a), abs(inner)))

    def is_real(self, tol: float = 1e-12) -> bool:
        """Whether the geodesic lies in the standard RP_n (up to a phase)."""
        phase = self.z[np.argmax(np.abs(self.z))]
        phase = phase / abs(phase)
        z, w = self.z / phase, self.w / phase
        return bool(np.abs(z.imag).max() < tol and np.abs(w.imag).max() < tol)


def geodesic_eval(gamma: Geodesic, t) -> tuple[ChartPoint, np.ndarray]:
    k, coords, vel = gamma.evaluate(np.atleast_1d(t))
    return gamma.space.point(int(k[0]), coords[0]), vel[0]


# ---------------------------------------------------------------------------
# model embeddings RP_n -> CP_n


@dataclass(frozen=True)
class ModelEmbedding:
    """The totally geodesic embedding ``[x] -> [U x]`` for ``U`` in SU(n+1)."""

    U: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=complex)
        d = U.shape[0]
        if U.shape != (d, d):
            raise ValueError("U must be square")
        if np.abs(U.conj().T @ U - np.eye(d)).max() > 1e-12 or abs(np.linalg.det(U) - 1) > 1e-12:
            raise ValueError("U must be special unitary")
        object.__setattr__(self, "U", U)

    @property
    def n(self) -> int:
        return self.U.shape[0] - 1

    def map_jet(self, chart: int, coords, order: int) -> tuple[np.ndarray, Jet]:
        """CP chart ids and the real CP chart coordinates as jets in RP coordinates."""
        rp, cp = space("RP", self.n), space("CP", self.n)
        X = Jet.variables(np.atleast_2d(coords), order)
        x_h = rp.homogeneous(chart, X)
        Z = [sum((x_h[j] * self.U[i, j] for j in range(self.n + 1)), Jet.constant(np.zeros(X.batch, complex), X.m, order)) for i in range(self.n + 1)]
        Zval = np.stack([z.value for z in Z], axis=1)
        k = np.argmax(np.abs(Zval), axis=1)
        if np.any(k != k[0]):
            raise ValueError("batch straddles several CP charts; group points first")
        k0 = int(k[0])
        inv = Z[k0].reciprocal()
        w = [Z[j] * inv for j in range(self.n + 1) if j != k0]
        return k, _real_pack(w)

    def embed_point(self, chart: int, coords) -> ChartPoint:
        k, H = self.map_jet(chart, coords, 0)
        return space("CP", self.n).point(int(k[0]), H.value[0])

    def pullback_jet(self, chart: int, coords, field_jet_fn, valence: int, order: int) -> Jet:
        """Pull back a covariant tensor field along the embedding.

        ``field_jet_fn(cp_chart, cp_coords, order)`` must return the field's
        jet in CP chart coordinates.  The result is a jet of the requested
        order in the RP chart variables.
        """
        return _grouped_pullback(self, chart, coords, field_jet_fn, valence, order)

    def target_charts(self, chart: int, coords) -> np.ndarray:
        x = space("RP", self.n).homogeneous_values(chart, coords)
        return np.argmax(np.abs(np.atleast_2d(x) @ self.U.T), axis=1)

    def pullback_tensor(self, T: np.ndarray, chart: int, coords) -> np.ndarray:
        """Pull back a pointwise tensor given at the image point."""
        k, H = self.map_jet(chart, coords, 1)
        D = H.grad().value[0]  # (i, a)
        out = np.asarray(T)
        for s in range(out.ndim):
            out = np.moveaxis(np.tensordot(out, D, axes=([s], [1])), -1, s)
        return out


def pullback_along(target_chart: int, H: Jet, field_jet_fn, valence: int, order: int) -> Jet:
    """Pull back a covariant field through a chart map given by jets ``H``.

    ``H`` holds the target chart coordinates as jets of order ``order + 1``.
    """
    F = field_jet_fn(target_chart, H.value, order)
    out = compose(F, H.truncate(order))
    D = H.grad().truncate(order)  # D[i, a] = d_i H^a
    letters = "abcdefgh"[:valence]
    for s in range(valence):
        spec_in = "".join("ijklmnop"[t] if t < s else letters[t] for t in range(valence))
        spec_out = "".join("ijklmnop"[t] if t <= s else letters[t] for t in range(valence))
        out = jein(f"{spec_in},{'ijklmnop'[s]}{letters[s]}->{spec_out}", out, D)
    return out


@dataclass(frozen=True)
class Isometry:
    """The isometry ``[z] -> [U z]`` of CP_n (unitary U) or RP_n (orthogonal U)."""

    space: ProjectiveSpace
    U: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=complex if self.space.complex else float)
        d = self.space.n + 1
        if U.shape != (d, d) or np.abs(U.conj().T @ U - np.eye(d)).max() > 1e-12:
            raise ValueError("U must be unitary of size n + 1")
        object.__setattr__(self, "U", U)

    def inverse(self) -> "Isometry":
        return Isometry(self.space, self.U.conj().T)

    def apply_homogeneous(self, Z: np.ndarray) -> np.ndarray:
        return np.atleast_2d(Z) @ self.U.T

    def apply_geodesic(self, gamma: "Geodesic") -> "Geodesic":
        return Geodesic(self.space, self.U @ gamma.z, self.U @ gamma.w)

    def map_jet(self, chart: int, coords, order: int) -> tuple[np.ndarray, Jet]:
        """Target chart ids and target coordinates as jets; batch must share a target chart."""
        S = self.space
        X = Jet.variables(np.atleast_2d(coords), order)
        zh = S.homogeneous(chart, X)
        d = S.n + 1
        zero = Jet.constant(np.zeros(X.batch, self.U.dtype), X.m, order)
        Z = [sum((zh[j] * self.U[i, j] for j in range(d)), zero) for i in range(d)]
        k = np.argmax(np.abs(np.stack([z.value for z in Z], axis=1)), axis=1)
        if np.any(k != k[0]):
            raise ValueError("batch straddles several target charts; group points first")
        k0 = int(k[0])
        inv = Z[k0].reciprocal()
        w = [Z[j] * inv for j in range(d) if j != k0]
        return k, (_real_pack(w) if S.complex else stack(w, axis=0))

    def target_charts(self, chart: int, coords) -> np.ndarray:
        Z = self.apply_homogeneous(self.space.homogeneous_values(chart, coords))
        return np.argmax(np.abs(Z), axis=1)

    def pullback_jet(self, chart: int, coords, field_jet_fn, valence: int, order: int) -> Jet:
        return _grouped_pullback(self, chart, coords, field_jet_fn, valence, order)


def _grouped_pullback(mapping, chart: int, coords, field_jet_fn, valence: int, order: int) -> Jet:
    """Pull back through ``mapping`` (an embedding or isometry), one target chart at a time."""
    coords = np.atleast_2d(coords)
    ks = mapping.target_charts(chart, coords)
    parts = []
    for k in np.unique(ks):
        sel = np.nonzero(ks == k)[0]
        _, H = mapping.map_jet(chart, coords[sel], order + 1)
        parts.append((sel, pullback_along(int(k), H, field_jet_fn, valence, order)))
    first = parts[0][1]
    c = np.zeros((coords.shape[0],) + first.c.shape[1:], dtype=first.c.dtype)
    for sel, jet in parts:
        c[sel] = jet.c
    return Jet(c, first.m, first.order)


def model_embedding(U) -> ModelEmbedding:
    return ModelEmbedding(np.asarray(U))


def random_special_unitary(d: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    U = random_unitary(d, rng)
    det = np.linalg.det(U)
    return U / det ** (1.0 / d)


def pi_commutes_with_pullback(E: ModelEmbedding, T: np.ndarray, ell: int, chart: int, coords) -> float:
    """Residual of ``pi(pullback T) - pullback(pi T)``."""
    a = pi_map(E.pullback_tensor(T, chart, coords), ell)
    b = E.pullback_tensor(pi_map(T, ell), chart, coords)
    return float(np.abs(a - b).max())


__all__ = [
    "ChartPoint",
    "CPn",
    "Geodesic",
    "MetricJet",
    "Isometry",
    "ModelEmbedding",
    "pullback_along",
    "ProjectiveSpace",
    "RPn",
    "geodesic_eval",
    "model_embedding",
    "random_special_unitary",
    "space",
    "standard_J",
]
