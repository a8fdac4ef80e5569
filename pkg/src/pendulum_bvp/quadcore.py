"""Endpoint-singular quadrature and elliptic integrals.

Every time map in this package is an integral of ``d(x)**-p`` where
``d(x) = z - cos 2phi + cos 2x`` may vanish at the upper limit.  The
double-exponential (tanh-sinh) rule handles the inverse square-root
endpoint behaviour without any splitting, provided the integrand is
evaluated in terms of the *distance* to the singular endpoint; that is
what :func:`integrate_distance` does.  The elliptic functions give an
exact, independent route for orbits inside the homoclinic loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergenceError, DomainError, NonIntegrableError

__all__ = [
    "QuadResult",
    "integrate_distance",
    "integrate_endpoint_singular",
    "complete_elliptic_K",
    "complete_elliptic_E",
    "incomplete_elliptic_F",
    "carlson_rf",
    "power_integral",
    "SUPPORTED_POWERS",
]

EPS = np.finfo(float).eps
SUPPORTED_POWERS = (0.5, 1.5, 2.5)

# Truncation of the transformed variable t.  On the singular side the
# nodes reach u ~ 1e-275 * length, on the regular side the weights are
# below 1e-35 and contribute nothing.
_T_SINGULAR = 6.0
_T_REGULAR = 4.0
_H0 = 0.5


@dataclass(frozen=True)
class QuadResult:
    value: float
    abs_error_estimate: float
    evaluations: int

    def __float__(self) -> float:
        return self.value


def _de_nodes(j: np.ndarray, h: float, length: float) -> tuple[np.ndarray, np.ndarray]:
    t = j * h
    s = 0.5 * math.pi * np.sinh(t)
    e = np.exp(-2.0 * np.abs(s))
    u = np.where(s >= 0.0, length * e / (1.0 + e), length / (1.0 + e))
    w = length * math.pi * np.cosh(t) * e / (1.0 + e) ** 2
    keep = (u > 0.0) & (w > 0.0)
    return u[keep], w[keep]


def _level_sum(g, j, h, length):
    u, w = _de_nodes(j, h, length)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        fu = np.asarray(g(u), dtype=float)
    if fu.shape != u.shape:
        fu = np.broadcast_to(fu, u.shape)
    if np.isnan(fu).any():
        raise DomainError("integrand returned NaN")
    if np.isinf(fu).any():
        raise NonIntegrableError("integrand is infinite at a quadrature node")
    fw = fu * w
    return float(np.sum(fw)), float(np.sum(np.abs(fw))), u.size


def integrate_distance(
    g: Callable[[np.ndarray], np.ndarray],
    length: float,
    *,
    rtol: float = 1e-12,
    atol: float = 0.0,
    max_level: int = 12,
    min_level: int = 3,
    fail_rtol: float = 1e-6,
) -> QuadResult:
    """Integrate ``g(u)`` over ``0 < u < length`` by tanh-sinh quadrature.

    ``u`` is the distance from the (possibly singular) endpoint and is
    computed without cancellation, so integrands written in terms of it
    keep full relative accuracy right up to the singularity.  ``g`` must
    accept a numpy array.

    Levels halve the step until two successive estimates agree to
    ``rtol`` relative to the integral of ``|g|`` (or to ``atol``).  After ``max_level`` levels a disagreement
    larger than ``fail_rtol`` raises :class:`DivergenceError`; a smaller
    one is returned with an honest error estimate.
    """
    if not length > 0.0:
        raise DomainError(f"integration length must be positive, got {length!r}")
    h = _H0
    j = np.arange(-math.ceil(_T_REGULAR / h), math.ceil(_T_SINGULAR / h) + 1, dtype=float)
    total, abs_total, evals = _level_sum(g, j, h, length)
    prev = h * total
    value = prev
    diff = math.inf
    for level in range(1, max_level + 1):
        h *= 0.5
        lo = -math.ceil(_T_REGULAR / h)
        hi = math.ceil(_T_SINGULAR / h)
        start = lo if lo % 2 else lo + 1
        j = np.arange(start, hi + 1, 2, dtype=float)
        s, sa, n = _level_sum(g, j, h, length)
        total += s
        abs_total += sa
        evals += n
        value = h * total
        diff = abs(value - prev)
        floor = 64.0 * EPS * h * abs_total
        prev = value
        scale = h * abs_total
        if level >= min_level and diff <= max(rtol * scale, atol, floor):
            return QuadResult(float(value), float(max(diff, floor)), int(evals))
    if diff > max(fail_rtol * h * abs_total, atol):
        raise DivergenceError(
            f"tanh-sinh quadrature did not converge after {max_level} levels "
            f"(last change {diff:.3e}, value {value:.6e})"
        )
    return QuadResult(float(value), float(max(diff, 64.0 * EPS * h * abs_total)), int(evals))


def _vectorised(f):
    def call(x):
        try:
            out = np.asarray(f(x), dtype=float)
            if out.shape == np.shape(x):
                return out
        except (TypeError, ValueError):
            pass
        return np.array([f(float(v)) for v in np.ravel(x)], dtype=float).reshape(np.shape(x))

    return call


def integrate_endpoint_singular(
    f: Callable, a: float, b: float, singular_at_b: bool = True, **options
) -> QuadResult:
    """Improper integral of ``f`` over ``[a, b]``.

    The singular endpoint is ``b`` when ``singular_at_b`` is true and ``a``
    otherwise (the integral is reflected so the singularity sits at the
    dense end of the node distribution).  ``f`` may blow up there no faster
    than an inverse square root.
    """
    if not a < b:
        raise DomainError(f"need a < b, got a={a!r}, b={b!r}")
    fv = _vectorised(f)
    end = b if singular_at_b else a
    sign = -1.0 if singular_at_b else 1.0
    # Within a few hundred ulps of the endpoint, end +- u can no longer
    # represent the node; there the integrand is continued by a power-law
    # model u**-beta anchored at exactly representable points tau, 2 tau.
    tau = 256.0 * float(np.spacing(abs(end)))
    f_tau, beta = 0.0, 0.0
    if 2.0 * tau < b - a:
        f1, f2 = fv(np.array([end + sign * tau, end + sign * 2.0 * tau]))
        f_tau = float(f1)
        if f1 != 0.0 and f2 != 0.0 and f1 / f2 > 0.0:
            beta = min(max(math.log2(f1 / f2), 0.0), 0.5)

    def g(u):
        near = u < tau
        out = np.empty_like(u)
        out[~near] = fv(end + sign * u[~near])
        out[near] = f_tau * (tau / u[near]) ** beta
        return out

    res = integrate_distance(g, b - a, **options)
    model_err = 1e-3 * tau * abs(f_tau)
    return QuadResult(res.value, res.abs_error_estimate + model_err, res.evaluations + 2)


# -- elliptic integrals ----------------------------------------------------


def _agm_terms(kp: float):
    a, b = 1.0, kp
    cs = [math.sqrt(max(0.0, (1.0 - kp) * (1.0 + kp)))]
    for _ in range(64):
        if abs(a - b) <= 2.0 * EPS * a:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        cs.append(c)
    return a, cs


def _ellipk_from_complement(kp: float) -> float:
    if kp <= 0.0:
        raise DomainError("complete elliptic K diverges at modulus 1")
    a, _ = _agm_terms(kp)
    return math.pi / (2.0 * a)


def _ellipe_from_complement(kp: float) -> float:
    if kp <= 0.0:
        return 1.0
    a, cs = _agm_terms(kp)
    acc = 0.5 * cs[0] ** 2
    for n, c in enumerate(cs[1:], start=1):
        acc += 2.0 ** (n - 1) * c * c
    return math.pi / (2.0 * a) * (1.0 - acc)


def _check_modulus(modulus: float) -> None:
    if not (0.0 <= modulus < 1.0):
        raise DomainError(f"elliptic modulus must lie in [0, 1), got {modulus!r}")


def complete_elliptic_K(modulus: float) -> float:
    """K(k) by the arithmetic-geometric mean; ``modulus`` is k, not k**2."""
    _check_modulus(modulus)
    return _ellipk_from_complement(math.sqrt((1.0 - modulus) * (1.0 + modulus)))


def complete_elliptic_E(modulus: float) -> float:
    _check_modulus(modulus)
    return _ellipe_from_complement(math.sqrt((1.0 - modulus) * (1.0 + modulus)))


def carlson_rf(x: float, y: float, z: float) -> float:
    """Carlson's symmetric integral R_F by the duplication theorem."""
    if min(x, y, z) < 0.0 or (x == 0.0) + (y == 0.0) + (z == 0.0) > 1:
        raise DomainError("R_F needs non-negative arguments with at most one zero")
    a0 = (x + y + z) / 3.0
    q = (3.0 * EPS) ** (-1.0 / 6.0) * max(abs(a0 - x), abs(a0 - y), abs(a0 - z))
    a = a0
    scale = 1.0
    x0, y0 = x, y
    while q * scale >= abs(a):
        sx, sy, sz = math.sqrt(x), math.sqrt(y), math.sqrt(z)
        lam = sx * sy + sx * sz + sy * sz
        x, y, z = 0.25 * (x + lam), 0.25 * (y + lam), 0.25 * (z + lam)
        a = 0.25 * (a + lam)
        scale *= 0.25
    xx = (a0 - x0) * scale / a
    yy = (a0 - y0) * scale / a
    zz = -(xx + yy)
    e2 = xx * yy - zz * zz
    e3 = xx * yy * zz
    return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) / math.sqrt(a)


def incomplete_elliptic_F(angle: float, modulus: float) -> float:
    """Incomplete integral of the first kind, F(angle | k)."""
    if not (0.0 <= angle <= 0.5 * math.pi):
        raise DomainError(f"angle must lie in [0, pi/2], got {angle!r}")
    _check_modulus(modulus)
    if angle == 0.0:
        return 0.0
    s, c = math.sin(angle), math.cos(angle)
    ks = modulus * s
    return s * carlson_rf(c * c, (1.0 - ks) * (1.0 + ks), 1.0)


# -- the time-map kernel ---------------------------------------------------


def zero_threshold(z: float) -> float:
    """Below this, ``d(nu)`` is treated as an exact zero."""
    return 1e-14 * (2.0 + abs(z))


def endpoint_gap(z: float, phi: float, nu: float) -> float:
    """``z - cos 2phi + cos 2nu`` written without cancellation near nu = phi."""
    return z + 2.0 * math.sin(phi + nu) * math.sin(phi - nu)


def _check_kernel_args(z: float, phi: float, nu: float) -> None:
    if not (0.0 <= z <= 2.0):
        raise DomainError(f"z must lie in [0, 2], got {z!r}")
    if not (0.0 < phi < 0.5 * math.pi):
        raise DomainError(f"phi must lie in (0, pi/2), got {phi!r}")
    if not (0.0 <= nu <= 0.5 * math.pi):
        raise DomainError(f"nu must lie in [0, pi/2], got {nu!r}")


def kernel_gap(z: float, phi: float, nu: float, p: float) -> float:
    """Validated ``d(nu)``; raises when ``d**-p`` is not integrable on [0, nu]."""
    d_end = endpoint_gap(z, phi, nu)
    if abs(d_end) < zero_threshold(z):
        d_end = 0.0
    if d_end < 0.0:
        raise NonIntegrableError(
            f"z - cos 2phi + cos 2x vanishes inside [0, {nu:.6g}] (z={z:.6g}, phi={phi:.6g})"
        )
    if d_end == 0.0:
        if p > 0.5:
            raise NonIntegrableError(f"d(nu) = 0 with exponent {p}: not integrable")
        if math.cos(nu) < 1e-12:
            raise NonIntegrableError("double zero of d at nu = pi/2 (homoclinic orbit)")
    return d_end


def power_integral(z: float, phi: float, nu: float, p: float, **options) -> QuadResult:
    """``int_0^nu (z - cos 2phi + cos 2x)**-p dx`` for p in {1/2, 3/2, 5/2}."""
    if p not in SUPPORTED_POWERS:
        raise DomainError(f"exponent must be one of {SUPPORTED_POWERS}, got {p!r}")
    _check_kernel_args(z, phi, nu)
    if nu == 0.0:
        return QuadResult(0.0, 0.0, 1)
    d_end = kernel_gap(z, phi, nu, p)
    two_nu = 2.0 * nu

    def integrand(u):
        d = d_end + 2.0 * np.sin(two_nu - u) * np.sin(u)
        r = np.sqrt(d)
        if p == 0.5:
            return 1.0 / r
        if p == 1.5:
            return 1.0 / (d * r)
        return 1.0 / (d * d * r)

    return integrate_distance(integrand, nu, **options)
