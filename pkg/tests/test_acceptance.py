"""Every acceptance criterion at its stated tolerance, one PASS/FAIL line each."""

import numpy as np
import pytest

from cpnxray import suites as su

from conftest import ACCEPTANCE_LINES


def _report(number, title, res, ok, extra=""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} (residual {res.residual:.3e}, tol {res.tol:.1e}, {res.runtime:.1f} s){extra}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_curvature():
    res = su.check_curvature(kinds=("CP", "RP"), ns=(2, 3), samples=50, seed=42, tol=1e-8)
    _report(1, "curvature formula on CP_2, CP_3, RP_2, RP_3", res, res.passed and res.runtime < 30)


@pytest.mark.slow
def test_criterion_02_zero_energy():
    res = su.check_zero_energy(n=2, ells=(1, 2, 3), potentials=20, geodesics=100, N=512, seed=42, tol=1e-9)
    _report(2, "potentials have zero energy", res, res.passed and res.runtime < 120)


def test_criterion_03_segments():
    res = su.check_segments(n=2, cases=50, seed=42, tol=1e-9)
    _report(3, "segment integrals equal endpoint differences", res, res.passed)


def test_criterion_04_complex_property():
    res = su.check_complex_property(n=2, ells=(1, 2, 3), points=50, seed=42, tol=1e-7)
    _report(4, "trace-free operators kill potentials (relative)", res, res.passed)


def test_criterion_05_coefficients():
    res = su.check_coefficients(ells=(2, 3, 5), seed=42, tol=1e-10)
    ids = res.details["identities"]
    exact = all(v["first"] == v["first_expected"] and v["second"] == v["second_expected"] for v in ids.values())
    _report(5, "trace coefficients exact; direct form = 2 x product form", res, res.passed and exact)


def test_criterion_06_splitting():
    res = su.check_lemma10(ns=(2, 3), instances=5, seed=42, tol=1e-10)
    d = res.details
    dims_ok = d[2]["dims"] == [16, 30, 0, 14] and d[3]["dims"] == [36, 210, 84, 90]
    unique = d[2]["nullity"] == d[3]["nullity"] == 0
    _report(6, "splitting lemma dimensions, reconstruction, uniqueness", res, res.passed and dims_ok and unique)


def test_criterion_07_tractors():
    res = su.check_tractors(ns=(2, 3), points=10, seed=42, tol_flat=1e-9, tol_curv=1e-8, tol_hol=1e-7)
    d = res.details
    ok = res.passed
    for n in (2, 3):
        rows = d[n]["residuals"]
        ok &= rows["T-flatness"] < 1e-9
        ok &= rows["U-curvature"] < 1e-8 and rows["lambda2perp-curvature"] < 1e-8
        ok &= rows["splitting-projectors"] < 1e-8
        ok &= d[n]["phi_squared_exact_standard_frame"]
        ok &= d[n]["psi_squared_spectrum_distance"] < 1e-9
    ok &= d["holonomy"]["contractible_loop_minus_id"] < 1e-7
    extra = f"; single loop holonomy is -Id to {d['holonomy']['single_loop_plus_id']:.1e}"
    _report(7, "tractor connections, curvature, Phi, splitting, holonomy", res, ok, extra)


def test_criterion_08_obstruction_structure():
    res = su.check_obstruction(n=2, potentials=20, points=3, seed=42, tol_row1=1e-8, tol_x=1e-7)
    ok = res.passed and res.details["row1"] < 1e-8 and res.details["X_part"] < 1e-7
    _report(8, "coupled image of potentials: row 1 zero, X-part zero", res, ok)


def test_criterion_09_cohomology():
    res = su.check_cohomology(((2, 1), (2, 2), (3, 1), (3, 2)))
    t = res.details["table"]
    n2 = tuple(t[f"n=2,ell=2,r={r}"]["koszul"] for r in range(3))
    _report(9, "Koszul = reduced = Weyl dims, (4, 10, 14) at n=2 ell=2", res, res.passed and n2 == (4, 10, 14) and res.runtime < 120)


def test_criterion_10_witness():
    res = su.check_witness(n=2, geodesics=100, N=512, points=10, seed=42, tol=1e-9)
    d = res.details
    ok = res.passed and d["energy_minus_pi"] < 1e-9 and d["operator_norm_min"] > su.WITNESS_THRESHOLD[2]
    extra = f"; min operator norm {d['operator_norm_min']:.5f} vs oracle {d['oracle_norm']:.5f}"
    _report(10, "metric has energy pi and nonzero trace-free operator", res, ok, extra)


def test_criterion_11_lagrangian_equivalence():
    res = su.check_lagrangian_equivalence(ns=(2, 3), count=100, frames=200, seed=42, tol=1e-9)
    total = sum(sum(v.values()) for v in res.details.values())
    _report(11, "trace-free vanishing iff vanishing on all Lagrangians", res, res.passed and res.residual == 0 and total == 400)


def test_witness_threshold_matches_oracle():
    assert np.isclose(su.WITNESS_ORACLE_NORM[2], np.sqrt(24 / 5))
    assert su.WITNESS_THRESHOLD[2] == 0.5 * su.WITNESS_ORACLE_NORM[2]
