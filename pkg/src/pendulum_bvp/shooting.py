"""Direct integration of x' = y, y' = -sin 2x as an independent oracle.

Nothing here touches the time-map formulas except to ask how long to
integrate: the trajectory itself comes from a Dormand-Prince 5(4) pair,
and the checks are made against the boundary condition y(L) = phi_star.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, DomainError
from .timemaps import BoundaryConfig, BranchId, branch_domain, branch_time

PI = math.pi
HALF_PI = 0.5 * math.pi

# Dormand-Prince 5(4)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = _A[6]
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

TOL_RANGE = (1e-14, 1e-3)


@dataclass(frozen=True)
class PhasePoint:
    x: float
    y: float

    @property
    def V(self) -> float:
        return self.y * self.y - math.cos(2.0 * self.x)

    def wrapped(self) -> "PhasePoint":
        """Same point with x reduced to the cylinder [-pi/2, pi/2)."""
        return PhasePoint(wrap(self.x), self.y)


@dataclass(frozen=True)
class ShootResult:
    terminal: PhasePoint
    duration: float
    V_drift: float
    y_residual: float
    crossings: int
    wraps: int = 0
    expected_crossings: int | None = None

    @property
    def passed(self) -> bool:
        ok = self.y_residual < 1e-6
        if self.expected_crossings is not None:
            ok = ok and self.crossings == self.expected_crossings
        return ok


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x: np.ndarray  # unwrapped
    y: np.ndarray

    def wrapped_x(self) -> np.ndarray:
        return (self.x + HALF_PI) % PI - HALF_PI


def wrap(x: float) -> float:
    return (x + HALF_PI) % PI - HALF_PI


def first_integral(x, y):
    return y * y - np.cos(2.0 * x)


def _rhs(x: float, y: float) -> tuple[float, float]:
    return y, -math.sin(2.0 * x)


def _dp_step(x, y, kx0, ky0, h):
    kx, ky = [kx0], [ky0]
    for i in range(1, 7):
        a = _A[i]
        xi = x + h * sum(a[j] * kx[j] for j in range(i))
        yi = y + h * sum(a[j] * ky[j] for j in range(i))
        fx, fy = _rhs(xi, yi)
        kx.append(fx)
        ky.append(fy)
    # row 6 of A is the 5th-order solution, so the last stage is f(x_new, y_new)
    x_new = x + h * sum(_B[j] * kx[j] for j in range(6))
    y_new = y + h * sum(_B[j] * ky[j] for j in range(6))
    ex = h * sum(_E[j] * kx[j] for j in range(7))
    ey = h * sum(_E[j] * ky[j] for j in range(7))
    return x_new, y_new, kx[6], ky[6], max(abs(ex), abs(ey))


def _check_tol(tol: float) -> None:
    lo, hi = TOL_RANGE
    if not (lo < tol < hi):
        raise DomainError(f"tolerance must lie in ({lo:g}, {hi:g}), got {tol!r}")


def _count_zero_crossings(x0: float, x1: float) -> int:
    """Upward passages through x = m*pi (x = 0 on the cylinder)."""
    if x1 <= x0:
        return 0
    return math.floor(x1 / PI) - math.floor(x0 / PI)


def _count_seams(x0: float, x1: float) -> int:
    return math.floor((x1 + HALF_PI) / PI) - math.floor((x0 + HALF_PI) / PI)


def _march(x, y, t_end, tol, h0=None, stop=None, max_steps=2_000_000):
    """Accepted steps of the adaptive pair from t = 0 to ``t_end``.

    ``stop(x0, y0, x1, y1)`` may end the march early; it is checked after
    every accepted step.  Yields ``(t, x, y, kx, ky, h_used)``.
    """
    kx, ky = _rhs(x, y)
    t = 0.0
    h = h0 if h0 is not None else min(0.01, t_end)
    err_prev = 1.0
    steps = 0
    yield t, x, y, kx, ky, 0.0
    while t < t_end:
        if steps > max_steps:
            raise DivergenceError("too many steps")
        last = t + h >= t_end
        hh = t_end - t if last else h
        xn, yn, kxn, kyn, err = _dp_step(x, y, kx, ky, hh)
        # error per unit time
        ratio = err / (tol * hh) if hh > 0 else 0.0
        if ratio <= 1.0:
            t = t_end if last else t + hh
            x0, y0 = x, y
            x, y, kx, ky = xn, yn, kxn, kyn
            steps += 1
            yield t, x, y, kx, ky, hh
            if stop is not None and stop(x0, y0, x, y):
                return
            fac = 0.9 * max(ratio, 1e-10) ** (-0.7 / 4) * err_prev ** (0.4 / 4)
            err_prev = max(ratio, 1e-4)
            h = hh * min(4.0, max(0.2, fac))
        else:
            h = hh * max(0.1, 0.9 * ratio ** (-1.0 / 4))
        if h < 1e-14 * max(1.0, t):
            raise DivergenceError(f"step size underflow at t={t:.6g}")


def integrate(
    initial: PhasePoint,
    duration: float,
    tol: float = 1e-10,
    target_y: float | None = None,
) -> tuple[Trajectory, ShootResult]:
    """Integrate from ``initial`` for ``duration`` time units.

    Returns the accepted-step trajectory (x unwrapped) and a summary whose
    terminal point is wrapped to the cylinder.  ``y_residual`` is measured
    against ``target_y`` (NaN when no target is given).
    """
    if not duration > 0.0:
        raise DomainError(f"duration must be positive, got {duration!r}")
    _check_tol(tol)
    V0 = initial.V
    ts, xs, ys = [], [], []
    drift = 0.0
    crossings = 0
    wraps = 0
    x_prev = initial.x
    for t, x, y, *_ in _march(initial.x, initial.y, duration, tol):
        ts.append(t)
        xs.append(x)
        ys.append(y)
        drift = max(drift, abs(y * y - math.cos(2.0 * x) - V0))
        crossings += _count_zero_crossings(x_prev, x)
        wraps += _count_seams(x_prev, x)
        x_prev = x
    traj = Trajectory(np.array(ts), np.array(xs), np.array(ys))
    end = PhasePoint(xs[-1], ys[-1])
    resid = abs(end.y - target_y) if target_y is not None else math.nan
    return traj, ShootResult(end.wrapped(), duration, drift, resid, crossings, wraps)


def _hermite(t0, t1, p0, p1, d0, d1, t):
    h = t1 - t0
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * p0 + h10 * h * d0 + h01 * p1 + h11 * h * d1


def time_to_zero_crossing(initial: PhasePoint, t_max: float, tol: float = 1e-10) -> float:
    """First time the orbit reaches x = 0 (mod pi) moving with y > 0.

    The crossing step is located on the accepted steps, bracketed on the
    cubic Hermite interpolant and then polished by Newton iterations that
    re-integrate from the start of the step, to about 1e-12 in time.
    """
    _check_tol(tol)
    hit = {}

    def stop(x0, y0, x1, y1):
        return _count_zero_crossings(x0, x1) > 0

    prev = None
    for t, x, y, kx, ky, h in _march(initial.x, initial.y, t_max, tol, stop=stop):
        if prev is not None and _count_zero_crossings(prev[1], x) > 0:
            hit = {"prev": prev, "cur": (t, x, y, kx, ky)}
            break
        prev = (t, x, y, kx, ky)
    if not hit:
        raise DivergenceError(f"no upward crossing of x = 0 before t = {t_max}")
    t0, x0, y0, kx0, ky0 = hit["prev"]
    t1, x1, _, kx1, _ = hit["cur"]
    target = PI * math.floor(x1 / PI)
    lo, hi = t0, t1
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _hermite(t0, t1, x0, x1, kx0, kx1, mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    tc = 0.5 * (lo + hi)
    for _ in range(20):
        dt = tc - t0
        if dt <= 0.0:
            break
        xc, yc, _, _, _ = _dp_step(x0, y0, kx0, ky0, dt)
        step = (xc - target) / yc
        tc -= step
        if abs(step) < 1e-13:
            break
    return tc


def expected_crossings(branch: BranchId) -> int:
    """Upward passages of x = 0 made by a solution of ``branch``.

    I and A end left of the origin after k full turns; B, C and the D
    families pass the origin once more.
    """
    k = branch.winding
    if branch.family in ("I", "A"):
        return k
    return k + 1


def verify_branch_point(branch: BranchId, z: float, cfg: BoundaryConfig, tol: float = 1e-10) -> ShootResult:
    """Shoot from (-phi, +-sqrt z) for the branch time and compare y(L) with phi_star."""
    if z not in branch_domain(branch, cfg):
        raise DomainError(f"z={z!r} outside the domain of {branch.label}")
    duration = branch_time(branch, z, cfg)
    start = PhasePoint(-cfg.phi, branch.sign * math.sqrt(z))
    _, res = integrate(start, duration, tol, target_y=cfg.phi_star)
    return ShootResult(
        res.terminal,
        res.duration,
        res.V_drift,
        res.y_residual,
        res.crossings,
        res.wraps,
        expected_crossings(branch),
    )
