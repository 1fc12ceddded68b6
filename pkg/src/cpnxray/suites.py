"""Verification suites: each check returns a :class:`CheckResult`, each suite a :class:`SuiteReport`.

Checks are deterministic given their seed.  Runtimes are kept out of the
deterministic payload so that reports compare byte for byte.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import cohomology as coh
from .fields import (
    DIRECT_FORM_FACTOR,
    FieldSpec,
    coefficient_identities,
    generate,
    iterated_cov_deriv,
    metric_field,
    nabla2_direct,
    nabla_ell,
    nabla_ell_perp_CP,
    nabla_ell_RP,
    restrict_field,
    sym_cov_deriv,
)
from .geometry import ModelEmbedding, random_special_unitary, space
from .tensor_algebra import (
    SymClass,
    class_basis,
    lemma10_dimensions,
    lemma10_formula_dims,
    lemma10_solve,
    perp_data,
    perp_project,
    rho_insertion,
    standard_J,
    tau_insertion,
    vanishes_on_all_lagrangians,
    x_space_basis,
    TWO_FORMS,
)
from . import tractors as tr
from . import xray

# Pointwise oracle for the non-potential witness: the invariant norm of the
# trace-free part of pi(g (x) g) at any point of CP_n.  Equal to
# sqrt(24/5) at n = 2 and sqrt(96/7) at n = 3 (computed in the standard frame).
WITNESS_ORACLE_NORM = {2: float(np.sqrt(24 / 5)), 3: float(np.sqrt(96 / 7))}
WITNESS_THRESHOLD = {n: 0.5 * v for n, v in WITNESS_ORACLE_NORM.items()}


@dataclass
class CheckResult:
    name: str
    anchor: str
    residual: float
    tol: float
    passed: bool
    details: dict = field(default_factory=dict)
    runtime: float = 0.0

    def payload(self) -> dict:
        d = asdict(self)
        d.pop("runtime")
        return d


def _result(name: str, anchor: str, residual: float, tol: float, details=None, passed: bool | None = None) -> CheckResult:
    ok = bool(residual < tol) if passed is None else bool(passed)
    return CheckResult(name, anchor, float(residual), float(tol), ok, details or {})


def timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.runtime = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _same_chart(S, count: int, seed: int):
    """``count`` random points sharing one chart (oversample, then filter)."""
    ch, X = S.random_points(count * (S.n + 1) * 3, seed)
    c0 = int(np.bincount(ch).argmax())
    X = X[ch == c0][:count]
    if len(X) < count:
        raise RuntimeError("not enough points in a single chart")
    return c0, X


def _invariant_norm(T: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    """Pointwise ``|T|_g`` for a batch of covariant tensors ``T[z, ...]``."""
    raised = T
    for s in range(T.ndim - 1):
        raised = np.moveaxis(np.einsum("za...,zab->zb...", np.moveaxis(raised, s + 1, 1), ginv), 1, s + 1)
    B = T.shape[0]
    return np.sqrt(np.abs((T.reshape(B, -1) * raised.reshape(B, -1)).sum(axis=1)))


# ---------------------------------------------------------------------------
# individual checks


@timed
def check_curvature(kinds=("CP", "RP"), ns=(2, 3), samples: int = 50, seed: int = 42, tol: float = 1e-8) -> CheckResult:
    worst, per = 0.0, {}
    for kind in kinds:
        for n in ns:
            S = space(kind, n)
            _, X = S.random_points(samples, seed)
            r = S.verify_curvature_formula(X)
            per[f"{kind}{n}"] = r
            worst = max(worst, r)
    return _result("curvature", "constant holomorphic curvature", worst, tol, {"per_space": per, "samples": samples})


def potential_specs(n: int, ells=(1, 2, 3), count: int = 20, seed: int = 42, kind: str = "CP") -> list[FieldSpec]:
    return [FieldSpec("potential", kind, n, ells[i % len(ells)], seed + i) for i in range(count)]


@timed
def check_zero_energy(n: int = 2, ells=(1, 2, 3), potentials: int = 20, geodesics: int = 100, N: int = 512, seed: int = 42, tol: float = 1e-9) -> CheckResult:
    S = space("CP", n)
    gs = xray.sample_geodesics(S, geodesics, seed)
    worst, per = 0.0, {}
    for spec in potential_specs(n, ells, potentials, seed):
        e = xray.zero_energy_survey(generate(spec), gs, N)
        per[spec.to_record()] = e
        worst = max(worst, e)
    return _result("zero-energy", "zero-energy identity", worst, tol, {"max_abs_energy": per, "geodesics": geodesics, "N": N})


@timed
def check_segments(n: int = 2, cases: int = 50, N: int = 64, seed: int = 42, tol: float = 1e-9) -> CheckResult:
    """``int_0^t nabla phi`` against the endpoint difference of ``phi`` on random ``(gamma, t)``."""
    S = space("CP", n)
    rng = np.random.default_rng(seed)
    gs = xray.sample_geodesics(S, cases, seed + 1)
    worst = 0.0
    for i, g in enumerate(gs):
        ell = 1 + i % 3
        phi = generate(FieldSpec("homogeneous-hermitian", "CP", n, ell - 1, seed + 100 + i))
        om = sym_cov_deriv(phi)
        t = float(rng.uniform(0.1, np.pi))
        lhs = xray.segment_energy(om, g, t, N)
        rhs = xray.endpoint_term(phi, g, t) - xray.endpoint_term(phi, g, 0.0)
        worst = max(worst, abs(lhs - rhs))
    return _result("segment", "fundamental theorem on segments", worst, tol, {"cases": cases, "gauss_nodes": N})


@timed
def check_complex_property(n: int = 2, ells=(1, 2, 3), points: int = 50, seed: int = 42, tol: float = 1e-7) -> CheckResult:
    """Relative size of the trace-free operator on potentials.

    Relative to ``max |nabla^ell omega|`` (iterated covariant derivative) at the
    same points, which is the natural scale of the terms that must cancel.
    """
    S = space("CP", n)
    c0, X = _same_chart(S, points, seed)
    worst, per = 0.0, {}
    for ell in ells:
        phi = generate(FieldSpec("homogeneous-hermitian", "CP", n, ell - 1, seed + ell))
        om = sym_cov_deriv(phi)
        val = np.abs(nabla_ell_perp_CP(om, ell, c0, X)).reshape(points, -1).max(axis=1)
        scale = np.maximum(np.abs(iterated_cov_deriv(om, ell, c0, X)).reshape(points, -1).max(axis=1), 1e-300)
        rel = float((val / scale).max())
        per[ell] = {"relative": rel, "absolute": float(val.max()), "scale_min": float(scale.min())}
        worst = max(worst, rel)
    return _result("complex-property", "complex property", worst, tol, {"per_ell": per, "points": points})


@timed
def check_coefficients(ells=(2, 3, 5), n: int = 2, points: int = 20, seed: int = 42, tol: float = 1e-10) -> CheckResult:
    exact = {ell: coefficient_identities(ell) for ell in ells}
    all_exact = all(c.ok for c in exact.values())
    S = space("RP", n)
    c0, X = _same_chart(S, points, seed)
    om = generate(FieldSpec("homogeneous-hermitian", "RP", n, 2, seed))
    direct = nabla2_direct(om, c0, X)
    product = nabla_ell(om, 2, c0, X)
    scale = max(1.0, float(np.abs(direct).max()))
    dev = float(np.abs(direct - DIRECT_FORM_FACTOR * product).max()) / scale
    details = {
        "identities": {ell: {"first": c.first_trace, "second": c.second_trace, "first_expected": c.first_expected, "second_expected": c.second_expected} for ell, c in exact.items()},
        "direct_vs_product_relative": dev,
        "direct_form_factor": DIRECT_FORM_FACTOR,
    }
    return _result("coefficients", "real-projective compatibility", dev, tol, details, passed=all_exact and dev < tol)


def lemma10_random_instance(n: int, seed: int):
    """Random ``(X, rho, tau)`` and the assembled tensor ``T``."""
    m = 2 * n
    rng = np.random.default_rng(seed)
    J = standard_J(n)
    BX = x_space_basis(n)
    X = (BX @ rng.standard_normal(BX.shape[1])).reshape((m,) * 4)
    rho = rng.standard_normal((m, m))
    tf = class_basis(TWO_FORMS, m)
    tau = (tf @ rng.standard_normal(tf.shape[1])).reshape(m, m)
    tau = perp_project(tau, TWO_FORMS)
    T = X + rho_insertion(rho, J) + tau_insertion(tau, J)
    return T, X, rho, tau


@timed
def check_lemma10(ns=(2, 3), instances: int = 5, seed: int = 42, tol: float = 1e-10) -> CheckResult:
    details, worst, ok = {}, 0.0, True
    for n in ns:
        d = lemma10_dimensions(n)
        got = (d.A, d.B, d.C, d.H)
        want = lemma10_formula_dims(n)
        ok &= got == want and d.injective and d.surjective
        rec = 0.0
        nullity = 0
        for i in range(instances):
            T, X, rho, tau = lemma10_random_instance(n, seed + i)
            sol = lemma10_solve(T)
            rec = max(rec, float(np.abs(sol.X - X).max()), float(np.abs(sol.rho - rho).max()), float(np.abs(sol.tau - tau).max()), sol.residual)
            nullity = max(nullity, sol.nullity)
        ok &= nullity == 0
        worst = max(worst, rec)
        details[n] = {"dims": list(got), "expected": list(want), "reconstruction": rec, "nullity": nullity}
    return _result("lemma10", "splitting lemma", worst, tol, details, passed=ok and worst < tol)


def _random_class_tensor(cls: SymClass, m: int, rng, with_trace_free: bool) -> np.ndarray:
    data = perp_data(cls, m)
    t = data.insertions @ rng.standard_normal(data.insertions.shape[1])
    if with_trace_free:
        t = t + data.kernel @ rng.standard_normal(data.kernel.shape[1])
    return t.reshape((m,) * cls.valence)


@timed
def check_lagrangian_equivalence(ns=(2, 3), count: int = 100, frames: int = 200, seed: int = 42, tol: float = 1e-9) -> CheckResult:
    """Trace-free vanishing agrees with vanishing on every sampled Lagrangian subspace."""
    rng = np.random.default_rng(seed)
    details, disagreements = {}, 0
    for n in ns:
        m = 2 * n
        for cls in (TWO_FORMS, SymClass("Y", 2)):
            counts = {"both_zero": 0, "both_nonzero": 0, "disagree": 0}
            for i in range(count):
                t = _random_class_tensor(cls, m, rng, with_trace_free=bool(i % 2))
                scale = max(1.0, float(np.abs(t).max()))
                perp_zero = float(np.abs(perp_project(t, cls)).max()) < tol * scale
                lag_zero = vanishes_on_all_lagrangians(t, frames, seed + i) < tol * scale
                if perp_zero != lag_zero:
                    counts["disagree"] += 1
                elif perp_zero:
                    counts["both_zero"] += 1
                else:
                    counts["both_nonzero"] += 1
            disagreements += counts["disagree"]
            details[f"n={n},{cls.kind}{cls.k}"] = counts
    return _result("lagrangian-equivalence", "lagrangian vanishing criterion", float(disagreements), 0.5, details)


@timed
def check_tractors(ns=(2, 3), points: int = 10, seed: int = 42, tol_flat: float = 1e-9, tol_curv: float = 1e-8, tol_hol: float = 1e-7) -> CheckResult:
    details, ok, worst = {}, True, 0.0
    for n in ns:
        rows = {r["tag"]: r["residual"] for r in tr.residual_table(n, points, seed)}
        cp = space("CP", n)
        c0, X = _same_chart(cp, 1, seed)
        sd = cp.symplectic_data(X)
        J, g = sd.J_lower[0], sd.g_lower[0]
        P = tr.phiU_matrix(J, g)
        phi2 = float(np.abs(P @ P + np.eye(len(P))).max())
        # in the standard frame Phi is an integer matrix, so Phi^2 = -Id is checked exactly
        Pf = tr.phiU_matrix(standard_J(n), np.eye(2 * n))
        P0 = np.rint(Pf).astype(np.int64)
        phi2_exact = bool(np.array_equal(Pf, P0) and np.array_equal(P0 @ P0, -np.eye(len(P0), dtype=np.int64)))
        spec = tr.psi_squared_spectrum(J, g)
        sig = tr.phi_form_signature(J, g)
        n_ok = (
            rows["T-flatness"] < tol_flat
            and rows["U-curvature"] < tol_curv
            and rows["lambda2perp-curvature"] < tol_curv
            and rows["splitting-projectors"] < tol_curv
            and phi2 < 1e-12
            and phi2_exact
            and spec.max_distance < 1e-9
        )
        ok &= n_ok
        worst = max(worst, *rows.values())
        details[n] = {
            "residuals": rows,
            "phi_squared_plus_id": phi2,
            "phi_squared_exact_standard_frame": phi2_exact,
            "psi_squared_multiplicities": {str(k): v for k, v in sorted(spec.multiplicities.items())},
            "psi_squared_spectrum_distance": spec.max_distance,
            "phi_form_signature": list(sig.signature),
        }
    rp = space("RP", 2)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(3)
    z /= np.linalg.norm(z)
    w = rng.standard_normal(3)
    w -= (w @ z) * z
    w /= np.linalg.norm(w)
    twice = tr.holonomy_T(rp, z, w, turns=2)
    once = tr.holonomy_T(rp, z, w, turns=1)
    details["holonomy"] = {
        "contractible_loop_minus_id": twice.deviation_from_identity,
        "single_loop_plus_id": once.deviation_from_minus_identity,
        "steps": twice.steps,
    }
    ok &= twice.deviation_from_identity < tol_hol and once.deviation_from_minus_identity < tol_hol
    worst = max(worst, twice.deviation_from_identity)
    return _result("tractor", "tractor identities", worst, tol_curv, details, passed=ok)


@timed
def check_obstruction(n: int = 2, potentials: int = 20, points: int = 3, seed: int = 42, tol_row1: float = 1e-8, tol_x: float = 1e-7) -> CheckResult:
    S = space("CP", n)
    c0, X = _same_chart(S, points, seed)
    row1 = xpart = 0.0
    for spec in potential_specs(n, (2,), potentials, seed):
        res = tr.obstruction_structure(generate(spec), c0, X)
        row1 = max(row1, res["row1"])
        xpart = max(xpart, res["X_norm"])
    ok = row1 < tol_row1 and xpart < tol_x
    return _result("obstruction", "tractor obstruction", max(row1, xpart), tol_x, {"row1": row1, "X_part": xpart, "potentials": potentials}, passed=ok)


@timed
@timed
def check_cohomology(pairs=((2, 1), (2, 2), (3, 1), (3, 2))) -> CheckResult:
    table = coh.dimension_table(pairs)
    mismatches = sum(1 for v in table.values() if not (v["koszul"] == v["reduced"] == v["weyl"]))
    composites = {}
    relations = 0
    for n, ell in pairs:
        M = coh.module_for_ell(n, ell)
        relations += M.relation_residual()
        c = coh.ReducedComplex(M).composites_vanish()
        c["koszul_dd"] = all(coh.koszul_square_is_zero(M, r) for r in range(2))
        composites[f"n={n},ell={ell}"] = c
    all_zero = all(all(v.values()) for v in composites.values())
    n2 = tuple(table[f"n=2,ell=2,r={r}"]["koszul"] for r in range(3)) if (2, 2) in pairs else None
    ok = mismatches == 0 and relations == 0 and all_zero and (n2 is None or n2 == (4, 10, 14))
    details = {"table": table, "composites": composites, "relation_violations": relations}
    return _result("cohomology", "heisenberg cohomology", float(mismatches), 0.5, details, passed=ok)


@timed
def check_witness(n: int = 2, geodesics: int = 100, N: int = 512, points: int = 10, seed: int = 42, tol: float = 1e-9) -> CheckResult:
    """``omega = g``: every energy is ``pi`` and the trace-free operator is far from zero."""
    S = space("CP", n)
    g = metric_field(S)
    e = xray.energies(g, xray.sample_geodesics(S, geodesics, seed), N)
    dev = float(np.abs(e - np.pi).max())
    c0, X = _same_chart(S, points, seed)
    R = nabla_ell_perp_CP(g, 2, c0, X)
    ginv = np.linalg.inv(S.metric_jet(X, 0).g.value)
    norms = _invariant_norm(R, ginv)
    oracle = WITNESS_ORACLE_NORM[n]
    ok = dev < tol and float(norms.min()) > WITNESS_THRESHOLD[n]
    details = {
        "energy_minus_pi": dev,
        "operator_norm_min": float(norms.min()),
        "operator_norm_max": float(norms.max()),
        "oracle_norm": oracle,
        "threshold": WITNESS_THRESHOLD[n],
    }
    return _result("witness", "non-potential witness", dev, tol, details, passed=ok)


@timed
def check_pipeline(n: int = 2, ells=(1, 2, 3), points: int = 8, seed: int = 42, tol: float = 1e-10) -> CheckResult:
    """Pull back to a model RP_n, check the RP kernel condition and the trace-free CP criterion.

    Also verifies that the CP operator restricted to the embedded RP_n is the
    RP operator of the restricted field, for potentials and for the metric.
    Residuals are relative to ``max |nabla^ell omega|``.
    """
    E = ModelEmbedding(random_special_unitary(n + 1, seed))
    rp, cp = space("RP", n), space("CP", n)
    ch, X = rp.random_points(points, seed)
    c0, Y = _same_chart(cp, points, seed)
    fields = [(f"potential ell={ell}", generate(FieldSpec("potential", "CP", n, ell, seed + ell))) for ell in ells]
    fields.append(("metric", metric_field(cp)))
    details, worst, detects = {}, 0.0, True
    for name, om in fields:
        ell = om.valence
        r = restrict_field(om, E)
        rp_op = commute = 0.0
        for c, x in zip(ch, X):
            a = nabla_ell_RP(r, ell, int(c), x[None])[0]
            k, H = E.map_jet(int(c), x[None], 0)
            b = E.pullback_tensor(nabla_ell(om, ell, int(k[0]), H.value)[0], int(c), x[None])
            rp_op = max(rp_op, float(np.abs(a).max()))
            commute = max(commute, float(np.abs(a - b).max()))
        cp_op = nabla_ell_perp_CP(om, ell, c0, Y) if ell >= 2 else nabla_ell(om, ell, c0, Y)
        cp_op = float(np.abs(cp_op).max())
        scale = max(1.0, float(np.abs(iterated_cov_deriv(om, ell, c0, Y)).max()))
        details[name] = {"rp_operator": rp_op, "restriction_commutes": commute, "cp_trace_free_operator": cp_op, "scale": scale}
        worst = max(worst, commute / scale)
        if name == "metric":
            detects = rp_op > 1e-3 and cp_op > 1e-3
        else:
            worst = max(worst, rp_op / scale, cp_op / scale)
    return _result("pipeline", "proof pipeline", worst, tol, details, passed=worst < tol and detects)
