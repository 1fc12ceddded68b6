"""Geodesic X-ray transform by periodic trapezoidal quadrature."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .fields import SymmetricField
from .geometry import Geodesic, ProjectiveSpace

CLOSURE_TOL = 1e-12
CHUNK = 4096


def _check_nodes(N: int) -> None:
    if N < 16 or N & (N - 1):
        raise ValueError("N must be a power of two >= 16")


def _contract(omega: SymmetricField, ks: np.ndarray, coords: np.ndarray, vel: np.ndarray) -> np.ndarray:
    """``omega(v, ..., v)`` at chart points, batched per chart in chunks."""
    out = np.empty(ks.shape[0])
    for k in np.unique(ks):
        idx = np.flatnonzero(ks == k)
        for lo in range(0, idx.size, CHUNK):
            sel = idx[lo : lo + CHUNK]
            T = omega.values(int(k), coords[sel])
            v = vel[sel]
            for _ in range(omega.valence):
                T = np.einsum("z...a,za->z...", T, v)
            out[sel] = T
    return out


def integrand(omega: SymmetricField, gamma: Geodesic, t: np.ndarray) -> np.ndarray:
    """``omega(gamma', ..., gamma')`` at the times ``t``."""
    if omega.space is not gamma.space:
        raise ValueError("field and geodesic live on different spaces")
    ks, coords, vel = gamma.evaluate(np.asarray(t, dtype=float))
    return _contract(omega, ks, coords, vel)


def energy(omega: SymmetricField, gamma: Geodesic, N: int = 512) -> float:
    """Integral of ``omega`` over the closed unit-speed geodesic ``gamma``."""
    if omega.valence < 1:
        raise ValueError("valence must be at least 1")
    _check_nodes(N)
    if gamma.closure_distance() > CLOSURE_TOL:
        raise RuntimeError("geodesic does not close at t = pi")
    t = np.pi * np.arange(N) / N
    return float(integrand(omega, gamma, t).sum() * np.pi / N)


def energies(omega: SymmetricField, samples: list[Geodesic], N: int = 512) -> np.ndarray:
    """:func:`energy` for many geodesics, evaluated in one batch."""
    if omega.valence < 1:
        raise ValueError("valence must be at least 1")
    _check_nodes(N)
    t = np.pi * np.arange(N) / N
    parts = []
    for g in samples:
        if g.space is not omega.space:
            raise ValueError("field and geodesic live on different spaces")
        if g.closure_distance() > CLOSURE_TOL:
            raise RuntimeError("geodesic does not close at t = pi")
        parts.append(g.evaluate(t))
    ks, coords, vel = (np.concatenate(x) for x in zip(*parts))
    vals = _contract(omega, ks, coords, vel).reshape(len(samples), N)
    return vals.sum(axis=1) * np.pi / N


def segment_energy(omega: SymmetricField, gamma: Geodesic, t_end: float, N: int = 512) -> float:
    """Gauss-Legendre integral over ``[0, t_end]`` (the integrand is not periodic there)."""
    x, w = np.polynomial.legendre.leggauss(N)
    t = 0.5 * t_end * (x + 1.0)
    return float(0.5 * t_end * np.dot(w, integrand(omega, gamma, t)))


def endpoint_term(phi: SymmetricField, gamma: Geodesic, t: float) -> float:
    """``phi(gamma', ..., gamma')`` at time ``t``."""
    return float(integrand_any(phi, gamma, np.array([t]))[0])


def integrand_any(phi: SymmetricField, gamma: Geodesic, t: np.ndarray) -> np.ndarray:
    if phi.valence == 0:
        ks, coords, _ = gamma.evaluate(t)
        return np.array([phi.values(int(k), c[None])[0] for k, c in zip(ks, coords)])
    return integrand(phi, gamma, t)


@dataclass
class EnergyReport:
    seed: int
    n: int
    ell: int
    N: int
    energy: float
    err_est: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def energy_report(omega: SymmetricField, gamma: Geodesic, N: int = 512, seed: int = 0) -> EnergyReport:
    """Energy at ``N`` nodes with the ``N`` vs ``2N`` difference as error estimate."""
    e1 = energy(omega, gamma, N)
    e2 = energy(omega, gamma, 2 * N)
    return EnergyReport(seed, gamma.space.n, omega.valence, N, e2, abs(e2 - e1))


def sample_geodesics(S: ProjectiveSpace, count: int, seed: int) -> list[Geodesic]:
    if count < 1:
        raise ValueError("count must be positive")
    return S.sample_geodesics(count, seed)


def zero_energy_survey(omega: SymmetricField, samples: list[Geodesic], N: int = 512) -> float:
    return float(np.abs(energies(omega, samples, N)).max())


@dataclass
class Witness:
    index: int
    geodesic: Geodesic
    energy: float
    exceeds: bool


def nonpotential_witness(omega: SymmetricField, samples: list[Geodesic], N: int = 512, threshold: float = 1e-6) -> Witness:
    """The sampled geodesic with the largest ``|energy|``; a search, not a proof."""
    e = energies(omega, samples, N)
    i = int(np.argmax(np.abs(e)))
    return Witness(i, samples[i], float(e[i]), bool(abs(e[i]) > threshold))
