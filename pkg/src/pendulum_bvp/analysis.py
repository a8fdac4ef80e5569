"""Grid scans, branch minima, asymptotic checks and diagram assembly.

Everything here is built from :mod:`pendulum_bvp.timemaps`; the numerical
evidence for positivity of Phi is reproduced, not proved.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import timemaps as tm
from .errors import DivergenceError, DomainError, MonotoneBranchError
from .quadcore import power_integral
from .timemaps import BoundaryConfig, BranchId, branch_domain, branch_dT_dz, branch_time

HALF_PI = 0.5 * math.pi
SQRT2 = math.sqrt(2.0)

# Fractions of the domain width added next to open endpoints, so that the
# polylines reach their limit points.
ENDPOINT_FRACTIONS = tuple(10.0 ** -e for e in range(3, 12))
# Open endpoints are approached this closely when bracketing T = 2L.
EDGE_FRACTION = 1e-14


@dataclass(frozen=True)
class BranchPoint:
    branch: BranchId
    z: float
    T: float
    signed_z: float


@dataclass
class ScanReport:
    phi_grid: list[float]
    z_grid: list[float]
    values: np.ndarray  # shape (len(phi_grid), len(z_grid)); NaN where evaluation failed
    min_Phi: float
    argmin: tuple[float, float]  # (z, phi)
    violations: list[tuple[float, float]]
    omega_mask: np.ndarray
    failures: list[tuple[float, float, str]] = field(default_factory=list)

    @property
    def omega_exceptions(self) -> list[tuple[float, float]]:
        """Points inside Omega (or with g > 0) where Phi is not positive."""
        out = []
        for i, phi in enumerate(self.phi_grid):
            for j, z in enumerate(self.z_grid):
                inside = self.omega_mask[i, j] or tm.g_fn(z, phi) > 0.0
                if inside and not self.values[i, j] > 0.0:
                    out.append((z, phi))
        return out


@dataclass(frozen=True)
class MinimumResult:
    z_min: float
    T_min: float
    sign_changes: int

    @property
    def unimodal(self) -> bool:
        return self.sign_changes == 1


@dataclass(frozen=True)
class AsymptoticCheck:
    name: str
    z: float
    value: float
    target: float
    residual: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.threshold


@dataclass(frozen=True)
class AsymptoticReport:
    phi: float
    checks: list[AsymptoticCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


@dataclass
class Diagram:
    config: BoundaryConfig
    branches: list[tuple[BranchId, list[BranchPoint]]]
    L_max: float
    k_max: int

    def branch(self, label: str) -> list[BranchPoint]:
        for b, pts in self.branches:
            if b.label == label:
                return pts
        raise KeyError(label)


# -- Omega and the Phi scan ------------------------------------------------


def omega_member(z: float, phi: float) -> bool:
    """True where 3 - k h(z, phi, 0) > 0, the set on which Phi > 0 is provable."""
    return 3.0 - tm.k_fn(z, phi) * float(tm.h_fn(z, phi, 0.0)) > 0.0


def thread_count(threads: int | None = None) -> int:
    """Worker count from the argument or ``TIMEMAP_THREADS`` (0 means all CPUs)."""
    if threads is None:
        try:
            threads = int(os.environ.get("TIMEMAP_THREADS", "0"))
        except ValueError:
            threads = 0
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def _scan_row(phi: float, z_grid) -> list[tuple[float, str]]:
    row = []
    for z in z_grid:
        try:
            row.append((float(Phi(z, phi)), ""))
        except (ArithmeticError, ValueError) as exc:
            row.append((math.nan, f"{type(exc).__name__}: {exc}"))
    return row


# looked up at call time so tests can substitute a sentinel
Phi = tm.Phi


def scan_Phi(phi_count: int, z_count: int, margin: float, threads: int | None = None) -> ScanReport:
    """Evaluate Phi on a uniform grid of (margin, 2 - margin) x (margin, pi/2 - margin).

    Rows (fixed phi) are farmed out to worker processes; the result is
    assembled in grid order, so it does not depend on the worker count.
    """
    if phi_count < 2 or z_count < 2:
        raise DomainError("grid counts must be at least 2")
    if not (0.0 < margin < 0.1):
        raise DomainError(f"margin must lie in (0, 0.1), got {margin!r}")
    z_grid = np.linspace(margin, 2.0 - margin, z_count).tolist()
    phi_grid = np.linspace(margin, HALF_PI - margin, phi_count).tolist()

    workers = min(thread_count(threads), phi_count)
    if workers == 1:
        rows = [_scan_row(phi, z_grid) for phi in phi_grid]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_scan_row, phi_grid, [z_grid] * phi_count))

    values = np.array([[v for v, _ in row] for row in rows])
    mask = np.array([[omega_member(z, phi) for z in z_grid] for phi in phi_grid])
    failures = [
        (z_grid[j], phi_grid[i], msg)
        for i, row in enumerate(rows)
        for j, (_, msg) in enumerate(row)
        if msg
    ]
    violations = [
        (z_grid[j], phi_grid[i])
        for i in range(phi_count)
        for j in range(z_count)
        if values[i, j] <= 0.0
    ]
    if np.all(np.isnan(values)):
        min_phi, argmin = math.nan, (math.nan, math.nan)
    else:
        i, j = np.unravel_index(np.nanargmin(values), values.shape)
        min_phi, argmin = float(values[i, j]), (z_grid[j], phi_grid[i])
    return ScanReport(phi_grid, z_grid, values, min_phi, argmin, violations, mask, failures)


# -- grids on branch domains -----------------------------------------------


def mirrored_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """``n`` interior points, quadratically clustered towards both ends."""
    u = np.arange(1, n + 1) / (n + 1)
    s = np.where(u < 0.5, 2.0 * u * u, 1.0 - 2.0 * (1.0 - u) ** 2)
    return lo + (hi - lo) * s


def _edges(dom: tm.ZDomain, fraction: float) -> tuple[float, float]:
    w = dom.width
    a = dom.lo + w * fraction if dom.lo_open else dom.lo
    b = dom.hi - w * fraction if dom.hi_open else dom.hi
    return a, b


def _derivative_grid(branch: BranchId, cfg: BoundaryConfig, n: int):
    dom = branch_domain(branch, cfg)
    lo, hi = dom.lo, dom.hi
    # derivatives diverge at z = 0 and z = 2 even where those ends are closed
    zs = mirrored_grid(lo, hi, n)
    ds = np.array([branch_dT_dz(branch, float(z), cfg) for z in zs])
    return zs, ds


def _sign_change_brackets(zs, ds) -> list[tuple[float, float]]:
    out = []
    for i in range(len(zs) - 1):
        if ds[i] == 0.0:
            out.append((float(zs[i]), float(zs[i])))
        elif ds[i] * ds[i + 1] < 0.0:
            out.append((float(zs[i]), float(zs[i + 1])))
    return out


def _stationary_points(branch, cfg, zs, ds) -> list[float]:
    roots = []
    for a, b in _sign_change_brackets(zs, ds):
        if a == b:
            roots.append(a)
            continue
        roots.append(brentq(lambda z: branch_dT_dz(branch, z, cfg), a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return roots


def find_branch_minimum(branch: BranchId, cfg: BoundaryConfig, scan_points: int = 64) -> MinimumResult:
    """Locate the interior minimum of ``z -> branch_time``.

    The analytic derivative is sampled on a mirrored grid, sign changes are
    counted, each root is polished with Brent's method and the lowest one is
    confirmed by a golden-section search on the time map itself.
    """
    if scan_points < 16:
        raise DomainError("scan_points must be at least 16")
    zs, ds = _derivative_grid(branch, cfg, scan_points)
    brackets = _sign_change_brackets(zs, ds)
    if not brackets:
        raise MonotoneBranchError(f"dT/dz has no sign change on branch {branch.label} at phi={cfg.phi:.12g}")
    roots = _stationary_points(branch, cfg, zs, ds)
    times = [branch_time(branch, z, cfg) for z in roots]
    # the minimum is where dT/dz goes from negative to positive
    minima = [i for i, (a, _) in enumerate(brackets) if branch_dT_dz(branch, a, cfg) <= 0.0]
    best = min(minima or range(len(roots)), key=lambda i: times[i])
    z_min, T_min = roots[best], times[best]

    a, b = brackets[best]
    if a < b:
        try:
            res = minimize_scalar(
                lambda z: branch_time(branch, z, cfg),
                bracket=(a, z_min, b),
                method="golden",
                tol=1e-10,
            )
            if res.fun < T_min and a <= res.x <= b:
                z_min, T_min = float(res.x), float(res.fun)
        except (ValueError, ArithmeticError):
            pass
    return MinimumResult(float(z_min), float(T_min), len(brackets))


# -- asymptotics -----------------------------------------------------------


def derivative_constant(phi: float) -> float:
    """C(phi) with z**1/2 dT_B/dz -> -C(phi) as z -> 0."""
    p = math.sqrt(1.0 - math.cos(2.0 * phi))
    s2 = math.sin(2.0 * phi)
    return (SQRT2 * p - s2) / (2.0 * SQRT2 * s2 * p)


def _rate_threshold(z: float) -> float:
    # residuals decay like sqrt(z); 1% is demanded at z = 1e-8
    return 0.01 * max(1.0, math.sqrt(z / 1e-8))


def asymptotic_suite(phi: float, zs=(1e-4, 1e-6, 1e-8)) -> AsymptoticReport:
    """Small-z behaviour of the pieces of dT_B/dz.

    (a) sqrt(z) J(phi, 3/2) against 1/sin 2phi, (b) J(xbar, 3/2)/sqrt(z)
    within the bounds [1/4, (1 - cos 2phi)**-3/2 / sqrt 2], (c) the two-term
    expansion of xbar*, (d) sqrt(z) dT_B/dz against -C(phi), and (e, f) the
    sign facts that make C(phi) and the z -> 0 limit of Phi positive.
    Relative residuals are reported for (a) and (d).
    """
    tm._check_phi(phi)
    c = math.cos(2.0 * phi)
    s2 = math.sin(2.0 * phi)
    upper = (1.0 - c) ** -1.5 / SQRT2
    C = derivative_constant(phi)
    checks = []
    for z in zs:
        a = math.sqrt(z) * power_integral(z, phi, phi, 1.5).value
        checks.append(AsymptoticCheck("a", z, a, 1.0 / s2, abs(a * s2 - 1.0), _rate_threshold(z)))

        b = power_integral(z, phi, tm.x_bar_star(z), 1.5).value / math.sqrt(z)
        excess = max(0.25 - b, b - upper, 0.0)
        checks.append(AsymptoticCheck("b", z, b, upper, excess, 1e-12 * upper))

        xb = tm.x_bar_star(z)
        two_term = math.sqrt(z / 2.0) + SQRT2 / 24.0 * z**1.5
        checks.append(AsymptoticCheck("c", z, xb, two_term, abs(xb - two_term), 10.0 * z * z))

        d = math.sqrt(z) * tm.dTB_dz(z, phi)
        checks.append(AsymptoticCheck("d", z, d, -C, abs(d / -C - 1.0), _rate_threshold(z)))

    e = SQRT2 * math.sqrt(1.0 - c) - s2
    checks.append(AsymptoticCheck("e", 0.0, e, 0.0, 0.0 if e > 0.0 else 1.0, 0.0))
    f = (1.0 + c) ** -0.5 - 1.0 / SQRT2
    checks.append(AsymptoticCheck("f", 0.0, f, 0.0, 0.0 if f > 0.0 else 1.0, 0.0))
    return AsymptoticReport(phi, checks)


# -- inversion -------------------------------------------------------------


def _segments(branch: BranchId, cfg: BoundaryConfig, scan_points: int) -> list[tuple[float, float]]:
    dom = branch_domain(branch, cfg)
    a, b = _edges(dom, EDGE_FRACTION)
    zs, ds = _derivative_grid(branch, cfg, scan_points)
    cuts = [z for z in _stationary_points(branch, cfg, zs, ds) if a < z < b]
    pts = [a, *sorted(cuts), b]
    return list(zip(pts[:-1], pts[1:]))


def solve_branch_for_L(branch: BranchId, cfg: BoundaryConfig, L: float, scan_points: int = 64) -> list[float]:
    """All z on ``branch`` with branch_time = 2L, in increasing order.

    The domain is split at the stationary points of T (found, not assumed)
    and each monotone piece is bracketed and bisected with Brent's method.
    """
    if not L > 0.0:
        raise DomainError(f"L must be positive, got {L!r}")
    target = 2.0 * L

    def f(z):
        return branch_time(branch, z, cfg) - target

    roots = []
    for a, b in _segments(branch, cfg, scan_points):
        fa, fb = f(a), f(b)
        if fa == 0.0:
            roots.append(a)
            continue
        if fa * fb > 0.0:
            continue
        if fb == 0.0:
            roots.append(b)
            continue
        z = brentq(f, a, b, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
        if abs(f(z)) > 1e-9:
            # flat bracket: the midpoint is as good as any
            z = 0.5 * (a + b) if abs(fb - fa) < 1e-12 else z
        roots.append(float(z))
    out = []
    for z in sorted(roots):
        if not out or z - out[-1] > 1e-12:
            out.append(z)
    return out


# -- diagram ---------------------------------------------------------------


def diagram_branches(k_max: int) -> list[BranchId]:
    """Fixed enumeration order used by the diagram and its CSV."""
    out = [BranchId(f) for f in ("I", "A", "B", "C")]
    for k in range(1, k_max + 1):
        out += [BranchId(f, k) for f in ("I", "A", "B", "C", "D", "Dprime")]
    out.append(BranchId("Dprime", 0))
    return out


def diagram_grid(dom: tm.ZDomain, n: int) -> np.ndarray:
    zs = [*mirrored_grid(dom.lo, dom.hi, n)]
    w = dom.width
    for fr in ENDPOINT_FRACTIONS:
        zs += [dom.lo + w * fr, dom.hi - w * fr]
    if not dom.lo_open:
        zs.append(dom.lo)
    if not dom.hi_open:
        zs.append(dom.hi)
    zs = np.unique(np.array(zs))
    return np.array([z for z in zs if float(z) in dom])


def branch_polyline(branch: BranchId, cfg: BoundaryConfig, n: int, T_cap: float = math.inf) -> list[BranchPoint]:
    pts = []
    for z in diagram_grid(branch_domain(branch, cfg), n):
        z = float(z)
        try:
            T = branch_time(branch, z, cfg)
        except (ArithmeticError, ValueError) as exc:
            warnings.warn(f"skipping {branch.label} at z={z!r}: {exc}", RuntimeWarning, stacklevel=2)
            continue
        if T > T_cap:
            continue
        pts.append(BranchPoint(branch, z, T, branch.sign * z))
    return pts


def trace_diagram(cfg: BoundaryConfig, k_max: int = 2, L_max: float | None = None, pts_per_branch: int = 64) -> Diagram:
    """Sample every branch with winding <= k_max and keep the points with T <= 2 L_max."""
    if k_max < 0:
        raise DomainError("k_max must be non-negative")
    if L_max is None:
        L_max = 4.0 * cfg.T_star
    if not L_max > cfg.T_star:
        raise DomainError(f"L_max must exceed T_star = {cfg.T_star:.12g}")
    if pts_per_branch < 8:
        raise DomainError("pts_per_branch must be at least 8")
    branches = [(b, branch_polyline(b, cfg, pts_per_branch, 2.0 * L_max)) for b in diagram_branches(k_max)]
    return Diagram(cfg, branches, L_max, k_max)
