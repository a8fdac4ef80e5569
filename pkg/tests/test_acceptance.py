"""Acceptance criteria, one test per criterion at the stated tolerances.

Each test records a PASS/FAIL line in RESULTS; conftest prints them at the
end of the run. Criterion 12 is split into sub-checks so that the one that
cannot be met (the I_k asymptote at 2L = 10 T*) is reported on its own.
"""

import math
import time

import numpy as np
import pytest

from pendulum_bvp.analysis import (
    asymptotic_suite,
    find_branch_minimum,
    scan_Phi,
    solve_branch_for_L,
    trace_diagram,
)
from pendulum_bvp.cli import main, read_diagram_csv, round_trip_errors
from pendulum_bvp.quadcore import complete_elliptic_K, power_integral
from pendulum_bvp.shooting import verify_branch_point
from pendulum_bvp.timemaps import (
    FAMILIES,
    BranchId,
    branch_domain,
    branch_dT_dz,
    branch_time,
    d2TB_dz2,
    dTB_dz,
    make_config,
    time_T,
    time_T1,
)

RESULTS: dict[str, tuple[bool, str]] = {}
PHIS = (0.4, math.pi / 4, 1.1)


def record(key: str, ok: bool, detail: str) -> None:
    RESULTS[key] = (bool(ok), detail)
    assert ok, detail


def test_01_limit_constant():
    err = abs(time_T(1e-4) - math.pi / (2 * math.sqrt(2)))
    record("1", err < 1e-6, f"|T(1e-4) - pi/(2 sqrt 2)| = {err:.2e} (< 1e-6)")


def test_02_elliptic_quadrature_dual_path():
    t0 = time.perf_counter()
    worst = 0.0
    for a in np.linspace(0.02, math.pi / 2 - 0.02, 50):
        quad = power_integral(0.0, float(a), float(a), 0.5).value
        worst = max(worst, abs(quad - complete_elliptic_K(math.sin(a)) / math.sqrt(2)))
    dt = time.perf_counter() - t0
    record("2", worst < 1e-8 and dt < 5, f"max |quad - K/sqrt 2| = {worst:.2e} (< 1e-8) in {dt:.2f}s")


def test_03_T1_identity():
    worst = max(abs(time_T1(p, p) - time_T(p)) for p in np.linspace(0.05, 1.5, 20))
    record("3", worst < 1e-10, f"max |T1(phi, phi) - T(phi)| = {worst:.2e} (< 1e-10)")


def test_04_monotonicity_suites():
    bad = []
    for phi in PHIS:
        c = make_config(phi)
        T = [time_T(a) for a in np.linspace(0.01, 1.56, 100)]
        if not all(b > a for a, b in zip(T, T[1:])):
            bad.append(f"T phi={phi:.3f}")
        T1 = [time_T1(a, phi) for a in np.linspace(phi + 1e-3, 1.56, 100)]
        if not all(b < a for a, b in zip(T1, T1[1:])):
            bad.append(f"T1 phi={phi:.3f}")
        TI = [branch_time(BranchId("I"), z, c) for z in np.linspace(1e-6, c.phi_star_sq * (1 - 1e-6), 100)]
        if not (all(b < a for a, b in zip(TI, TI[1:])) and max(TI) < c.T_star):
            bad.append(f"I phi={phi:.3f}")
        TC = [branch_time(BranchId("C"), z, c) for z in np.linspace(1e-6, c.z_star * (1 - 1e-6), 100)]
        if not (all(b > a for a, b in zip(TC, TC[1:])) and min(TC) > c.T_star):
            bad.append(f"C phi={phi:.3f}")
    record("4", not bad, f"violations: {bad or 0}")


def test_05_derivative_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst = 0.0
    for z, phi in zip(rng.uniform(0.05, 1.95, 30), rng.uniform(0.1, 1.45, 30)):
        c = make_config(phi)
        h = 1e-5
        num1 = (branch_time(BranchId("B"), z + h, c) - branch_time(BranchId("B"), z - h, c)) / (2 * h)
        h = 1e-4
        num2 = (dTB_dz(z + h, phi) - dTB_dz(z - h, phi)) / (2 * h)
        worst = max(worst, abs(dTB_dz(z, phi) / num1 - 1), abs(d2TB_dz2(z, phi) / num2 - 1))
    dt = time.perf_counter() - t0
    record("5", worst < 1e-4 and dt < 10, f"max relative FD error = {worst:.2e} (< 1e-4) in {dt:.2f}s")


def test_06_asymptotics():
    worst_d = worst_c = worst_a = 0.0
    for phi in PHIS:
        rep = asymptotic_suite(phi, zs=(1e-4, 1e-6, 1e-8))
        pick = {(c.name, c.z): c for c in rep.checks}
        worst_d = max(worst_d, pick["d", 1e-8].residual)
        worst_c = max(worst_c, pick["c", 1e-4].residual / 1e-8)
        worst_a = max(worst_a, pick["a", 1e-6].residual)
    ok = worst_d < 0.01 and worst_c < 10 and worst_a < 0.01
    record(
        "6",
        ok,
        f"rate rel err {worst_d:.2e} (< 1%), xbar* residual {worst_c:.1e} z^2 (< 10 z^2), "
        f"lemma rel err {worst_a:.2e} (< 1%)",
    )


@pytest.fixture(scope="module")
def full_scan():
    t0 = time.perf_counter()
    report = scan_Phi(200, 200, 0.005)
    return report, time.perf_counter() - t0


def test_07_Phi_positivity(full_scan):
    r, dt = full_scan
    ok = not r.violations and not r.failures and r.min_Phi > 0 and dt < 300
    record(
        "7",
        ok,
        f"min_Phi = {r.min_Phi:.6f} at (z, phi) = ({r.argmin[0]:.4f}, {r.argmin[1]:.4f}), "
        f"violations {len(r.violations)}, failures {len(r.failures)}, {dt:.1f}s",
    )


def test_08_omega_theorem(full_scan):
    r, _ = full_scan
    exc = r.omega_exceptions
    record("8", not exc, f"{int(r.omega_mask.sum())} points in Omega or g > 0, exceptions {len(exc)}")


def test_09_unimodality():
    bad = []
    for phi in PHIS:
        c = make_config(phi)
        for label in ("B", "B1", "B2", "I1", "I2", "D1", "D2"):
            m = find_branch_minimum(BranchId.parse(label), c)
            if m.sign_changes != 1:
                bad.append(f"{label}@{phi:.3f}:{m.sign_changes}")
    record("9", not bad, f"21 branches, non-unimodal: {bad or 0}")


def test_10_shooting_cross_validation():
    t0 = time.perf_counter()
    worst_y = worst_V = 0.0
    failed = 0
    for phi in PHIS:
        c = make_config(phi)
        for fam in FAMILIES:
            for k in range(3):
                b = BranchId(fam, k)
                dom = branch_domain(b, c)
                for s in np.linspace(0.05, 0.95, 10):
                    r = verify_branch_point(b, dom.lo + s * dom.width, c)
                    worst_y = max(worst_y, r.y_residual)
                    worst_V = max(worst_V, r.V_drift)
                    failed += not (r.y_residual < 1e-6 and r.V_drift < 1e-8)
    dt = time.perf_counter() - t0
    record(
        "10",
        failed == 0 and dt < 120,
        f"540 shots, max y_residual {worst_y:.2e}, max V_drift {worst_V:.2e}, failed {failed}, {dt:.1f}s",
    )


def test_11_D_family_ordering():
    bad = []
    for phi in PHIS:
        c = make_config(phi)
        zs = np.linspace(c.z_star, 2.0, 51)[1:]
        for k in range(3):
            D, Dp = BranchId("D", k), BranchId("Dprime", k)
            gap = np.array([branch_time(Dp, z, c) - branch_time(D, z, c) for z in zs])
            if np.any(gap < -1e-12) or np.any(gap[:-1] < 1e-8) or abs(gap[-1]) >= 1e-8:
                bad.append(f"order k={k} phi={phi:.3f}")
            if max(branch_dT_dz(Dp, z, c) for z in zs[:-1]) >= 0:
                bad.append(f"slope k={k} phi={phi:.3f}")
    record("11", not bad, f"D_k' >= D_k with equality only at z = 2, dD_k'/dz < 0; problems: {bad or 0}")


# -- criterion 12, split -----------------------------------------------------

PI4 = math.pi / 4


@pytest.fixture(scope="module")
def diagram_pi4():
    return trace_diagram(make_config(PI4), k_max=2)


def test_12a_k0_branches_meet(diagram_pi4):
    c = diagram_pi4.config
    worst = 0.0
    for label in "IABC":
        pts = diagram_pi4.branch(label)
        p = min(pts, key=lambda q: abs(q.T - c.T_star) + abs(q.signed_z))
        worst = max(worst, abs(p.T - c.T_star), abs(p.signed_z))
    record("12.a", worst < 1e-4, f"I, A, B, C meet at (T*, 0) within {worst:.2e} (< 1e-4)")


@pytest.mark.xfail(strict=True, reason="logarithmic approach: 2L = 10 T* leaves I_1 3e-3 below z*")
def test_12b_Ik_asymptote():
    c = make_config(PI4)
    gaps = {}
    for k in (1, 2):
        roots = solve_branch_for_L(BranchId("I", k), c, 5.0 * c.T_star)
        gaps[k] = c.z_star - max(roots)
    detail = ", ".join(f"z* - z(I{k}) = {g:.3e}" for k, g in gaps.items())
    record("12.b", all(g < 1e-3 for g in gaps.values()), f"at 2L = 10 T*: {detail} (< 1e-3)")


def test_12c_D_pairs_share_endpoint(diagram_pi4):
    worst = 0.0
    for k in (1, 2):
        d, dp = diagram_pi4.branch(f"D{k}")[-1], diagram_pi4.branch(f"D{k}'")[-1]
        assert d.z == dp.z == 2.0
        worst = max(worst, abs(d.T - dp.T))
    record("12.c", worst < 1e-9, f"D_k and D_k' end at z = 2 with |dT| = {worst:.1e}")


def test_12d_diagram_round_trip(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["diagram", "--phi", repr(PI4), "--k-max", "2"]) == 0
    _, rows = read_diagram_csv("diagram.csv")
    bad = round_trip_errors(rows)
    code = main(["diagram", "--check", "diagram.csv"])
    record("12.d", not bad and code == 0, f"diagram.csv: {len(rows)} rows, round-trip failures {len(bad)} (|dT| < 1e-9)")
