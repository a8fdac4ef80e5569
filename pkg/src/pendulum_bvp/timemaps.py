"""Time maps of the pendulum system x' = y, y' = -sin 2x.

Orbits are labelled either by ``alpha`` (the orbit crosses the negative
x-axis at ``-alpha``) or by ``z = y(-L)**2`` (the squared ordinate where
it crosses the Dirichlet line ``x = -phi``).  The two are related by the
first integral ``V = y**2 - cos 2x``::

    z = cos 2phi - cos 2alpha,    sin(alpha)**2 = (phi_star**2 + z) / 2

The z-form is uniform across the homoclinic orbit (``z = z_star``), so all
branch time maps are written in z.  Below the homoclinic the integrals
reduce to Legendre elliptic integrals; above it the tanh-sinh kernel in
:mod:`pendulum_bvp.quadcore` is used directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .quadcore import (
    _ellipe_from_complement,
    _ellipk_from_complement,
    carlson_rf,
    endpoint_gap,
    integrate_distance,
    kernel_gap,
    power_integral,
)

import numpy as np

HALF_PI = 0.5 * math.pi
SQRT2 = math.sqrt(2.0)

FAMILIES = ("I", "A", "B", "C", "D", "Dprime")
_ALIASES = {"Bprime": ("Dprime", 0), "B'": ("Dprime", 0)}

# Derivatives are only exposed this far from the divergent ends z = 0, 2.
DERIVATIVE_MARGIN = 1e-12


# -- configuration and identifiers -----------------------------------------


@dataclass(frozen=True)
class BoundaryConfig:
    """Boundary data x(-L) = -phi, y(L) = phi_star and the derived constants."""

    phi: float
    phi_star: float
    z_star: float
    T_star: float

    @property
    def phi_star_sq(self) -> float:
        """``1 - cos 2phi``, the squared Neumann datum."""
        return 2.0 * math.sin(self.phi) ** 2

    @property
    def cos2phi(self) -> float:
        return math.cos(2.0 * self.phi)

    @property
    def inside_net(self) -> bool:
        """True when P* = (-phi, phi_star) lies inside the homoclinic loop."""
        return self.phi_star_sq < self.z_star


def _check_phi(phi: float) -> None:
    if not (0.0 < phi < HALF_PI):
        raise DomainError(f"phi must lie in (0, pi/2), got {phi!r}")


def make_config(phi: float) -> BoundaryConfig:
    _check_phi(phi)
    s, c = math.sin(phi), math.cos(phi)
    return BoundaryConfig(
        phi=phi,
        phi_star=SQRT2 * s,
        z_star=2.0 * c * c,
        T_star=time_T(phi),
    )


@dataclass(frozen=True)
class BranchId:
    """Solution family plus winding count.

    ``D``/``Dprime`` with ``winding=0`` are the above-homoclinic part of B
    and the B' family.  ``"Bprime"`` is accepted as an alias of ``Dprime``
    with zero winding.
    """

    family: str
    winding: int = 0

    def __post_init__(self):
        if self.family in _ALIASES:
            fam, k = _ALIASES[self.family]
            object.__setattr__(self, "family", fam)
            object.__setattr__(self, "winding", k + self.winding)
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family {self.family!r}")
        if int(self.winding) != self.winding or self.winding < 0:
            raise DomainError(f"winding must be a non-negative integer, got {self.winding!r}")
        object.__setattr__(self, "winding", int(self.winding))

    @property
    def label(self) -> str:
        k = self.winding
        if self.family == "Dprime":
            return f"D{k}'"
        if self.family == "D":
            return f"D{k}"
        return self.family if k == 0 else f"{self.family}{k}"

    @property
    def below_axis(self) -> bool:
        """A and C solutions start with y(-L) < 0."""
        return self.family in ("A", "C")

    @property
    def sign(self) -> int:
        return -1 if self.below_axis else 1

    @classmethod
    def parse(cls, text: str) -> "BranchId":
        """Inverse of :attr:`label`; also accepts ``Bprime`` and ``B'``."""
        text = text.strip()
        if text in _ALIASES:
            return cls(text)
        primed = text.endswith("'")
        core = text[:-1] if primed else text
        if core.startswith("Dprime"):
            primed, core = True, "D" + core[len("Dprime"):]
        fam, digits = core[:1], core[1:]
        if fam not in ("I", "A", "B", "C", "D") or (digits and not digits.isdigit()):
            raise DomainError(f"cannot parse branch label {text!r}")
        k = int(digits) if digits else 0
        if primed:
            if fam not in ("D", "B"):
                raise DomainError(f"cannot parse branch label {text!r}")
            return cls("Dprime", k)
        return cls(fam, k)

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class ZDomain:
    lo: float
    hi: float
    lo_open: bool = True
    hi_open: bool = True

    def __contains__(self, z: float) -> bool:
        above = z > self.lo if self.lo_open else z >= self.lo
        below = z < self.hi if self.hi_open else z <= self.hi
        return above and below

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __str__(self) -> str:
        left = "(" if self.lo_open else "["
        right = ")" if self.hi_open else "]"
        return f"{left}{self.lo:.12g}, {self.hi:.12g}{right}"


# -- parameter conversions -------------------------------------------------


def x_star(alpha: float, phi: float) -> float:
    """Abscissa where the orbit through (-alpha, 0) meets y = phi_star."""
    arg = 1.0 - math.cos(2.0 * phi) + math.cos(2.0 * alpha)
    if not (-1.0 - 1e-15 <= arg <= 1.0 + 1e-15):
        raise DomainError(f"x_star undefined: arccos argument {arg!r} outside [-1, 1]")
    return 0.5 * math.acos(min(1.0, max(-1.0, arg)))


def x_bar_star(z: float) -> float:
    """``arccos(1 - z) / 2``, evaluated as ``arcsin(sqrt(z/2))``."""
    if not (0.0 <= z <= 2.0):
        raise DomainError(f"x_bar_star needs z in [0, 2], got {z!r}")
    return math.asin(math.sqrt(0.5 * z))


def alpha_from_z(z: float, phi: float) -> float:
    _check_phi(phi)
    z_star = 2.0 * math.cos(phi) ** 2
    if not (0.0 <= z < z_star):
        raise DomainError(f"alpha_from_z needs z in [0, {z_star:.12g}), got {z!r}")
    alpha = math.atan2(math.sqrt(0.5 * (2.0 * math.sin(phi) ** 2 + z)), math.sqrt(0.5 * (z_star - z)))
    # alpha >= phi exactly; atan2 can round one ulp below at z = 0
    return max(alpha, phi)


def z_from_alpha(alpha: float, phi: float) -> float:
    _check_phi(phi)
    if not (phi <= alpha < HALF_PI):
        raise DomainError(f"z_from_alpha needs alpha in [phi, pi/2), got {alpha!r}")
    return 2.0 * math.sin(alpha + phi) * math.sin(alpha - phi)


# -- elementary time maps --------------------------------------------------


def _elliptic_T1(sin_nu: float, cos_nu: float, sin_alpha: float, cos_theta_sq: float) -> float:
    # sin x = sin(alpha) sin(theta) turns the integral into F(theta | sin alpha) / sqrt 2
    sin_theta = sin_nu / sin_alpha
    return sin_theta * carlson_rf(max(cos_theta_sq, 0.0), cos_nu * cos_nu, 1.0) / SQRT2


def time_T(alpha: float) -> float:
    """Time from (-alpha, 0) to the positive y-axis: K(sin alpha) / sqrt 2."""
    if not (0.0 < alpha < HALF_PI):
        raise DomainError(f"time_T needs alpha in (0, pi/2), got {alpha!r}")
    return _ellipk_from_complement(math.cos(alpha)) / SQRT2


def time_T1(alpha: float, nu: float) -> float:
    """Time from the positive y-axis to the line x = nu along the orbit through (-alpha, 0)."""
    if not (0.0 < alpha < HALF_PI):
        raise DomainError(f"time_T1 needs alpha in (0, pi/2), got {alpha!r}")
    if not (0.0 <= nu <= alpha):
        raise DomainError(f"time_T1 needs 0 <= nu <= alpha, got nu={nu!r}, alpha={alpha!r}")
    if nu == 0.0:
        return 0.0
    sa = math.sin(alpha)
    cos_theta_sq = math.sin(alpha + nu) * math.sin(alpha - nu) / (sa * sa)
    return _elliptic_T1(math.sin(nu), math.cos(nu), sa, cos_theta_sq)


def time_T_z(z: float, phi: float) -> float:
    """Quarter period T of the closed orbit through (-phi, sqrt z)."""
    _check_phi(phi)
    z_star = 2.0 * math.cos(phi) ** 2
    if not (0.0 <= z < z_star):
        raise DomainError(f"closed orbits need z in [0, {z_star:.12g}), got {z!r}")
    return _ellipk_from_complement(math.sqrt(0.5 * (z_star - z))) / SQRT2


def dT_dz(z: float, phi: float) -> float:
    """d/dz of :func:`time_T_z`, from dK/dm = (E - k'^2 K) / (2 m k'^2)."""
    _check_phi(phi)
    z_star = 2.0 * math.cos(phi) ** 2
    if not (0.0 <= z < z_star):
        raise DomainError(f"closed orbits need z in [0, {z_star:.12g}), got {z!r}")
    m = 0.5 * (2.0 * math.sin(phi) ** 2 + z)
    kp_sq = 0.5 * (z_star - z)
    kp = math.sqrt(kp_sq)
    K = _ellipk_from_complement(kp)
    E = _ellipe_from_complement(kp)
    return (E - kp_sq * K) / (4.0 * SQRT2 * m * kp_sq)


def time_T1_z(z: float, phi: float, nu: float) -> float:
    """``int_0^nu (z - cos 2phi + cos 2x)**-1/2 dx``, valid above and below the homoclinic."""
    _check_phi(phi)
    if not (0.0 <= z <= 2.0):
        raise DomainError(f"z must lie in [0, 2], got {z!r}")
    if not (0.0 <= nu <= HALF_PI):
        raise DomainError(f"nu must lie in [0, pi/2], got {nu!r}")
    if nu == 0.0:
        return 0.0
    z_star = 2.0 * math.cos(phi) ** 2
    if z < z_star:
        gap = kernel_gap(z, phi, nu, 0.5)
        sin_alpha_sq = 0.5 * (2.0 * math.sin(phi) ** 2 + z)
        return _elliptic_T1(math.sin(nu), math.cos(nu), math.sqrt(sin_alpha_sq), 0.5 * gap / sin_alpha_sq)
    return power_integral(z, phi, nu, 0.5).value


def time_T1_z_direct(z: float, phi: float, nu: float) -> float:
    """Same as :func:`time_T1_z` but always by quadrature (cross-check path)."""
    return power_integral(z, phi, nu, 0.5).value


# -- branch time maps ------------------------------------------------------


def branch_domain(branch: BranchId, cfg: BoundaryConfig) -> ZDomain:
    fam, k = branch.family, branch.winding
    if fam == "I" and k == 0:
        return ZDomain(0.0, cfg.phi_star_sq)
    if fam == "B" and k == 0:
        return ZDomain(0.0, 2.0, True, False)
    if fam in ("I", "A", "B", "C"):
        return ZDomain(0.0, cfg.z_star)
    return ZDomain(cfg.z_star, 2.0, True, False)


def _require(branch: BranchId, z: float, cfg: BoundaryConfig) -> None:
    dom = branch_domain(branch, cfg)
    if z not in dom:
        raise DomainError(f"z={z!r} outside the domain {dom} of branch {branch.label} at phi={cfg.phi:.12g}")


def branch_time(branch: BranchId, z: float, cfg: BoundaryConfig) -> float:
    """Total time 2L of the solution of ``branch`` starting at (-phi, +-sqrt z)."""
    _require(branch, z, cfg)
    phi, fam, k = cfg.phi, branch.family, branch.winding
    xb = x_bar_star(z)
    t_phi = time_T1_z(z, phi, phi)
    t_end = time_T1_z(z, phi, xb)
    if fam == "D":
        return 2 * k * time_T1_z(z, phi, HALF_PI) + t_phi + t_end
    if fam == "Dprime":
        return 2 * (k + 1) * time_T1_z(z, phi, HALF_PI) + t_phi - t_end
    if fam == "B" and k == 0:
        return t_phi + t_end
    if fam == "I" and k == 0:
        # may lie above the homoclinic when phi > pi/4
        return t_phi - t_end
    # closed-orbit families; the I_k formula with the signed difference also
    # covers orbits enclosing P* (z > phi_star**2), where it equals 4kT - |T_I0|
    T = time_T_z(z, phi)
    base = {
        "I": t_phi - t_end,
        "A": 2.0 * T - t_phi - t_end,
        "B": t_phi + t_end,
        "C": 2.0 * T - t_phi + t_end,
    }[fam]
    return 4 * k * T + base


def branch_time_alpha(branch: BranchId, alpha: float, cfg: BoundaryConfig) -> float:
    """Closed-orbit families in the alpha parameterisation (independent of the z path)."""
    if branch.family not in ("I", "A", "B", "C"):
        raise DomainError("the alpha form only covers the I, A, B, C families")
    phi = cfg.phi
    if not (phi < alpha < HALF_PI):
        raise DomainError(f"alpha must lie in (phi, pi/2), got {alpha!r}")
    xs = x_star(alpha, phi)
    T = time_T(alpha)
    t_phi = time_T1(alpha, phi)
    t_end = time_T1(alpha, xs)
    k = branch.winding
    if branch.family == "I":
        if k == 0 and xs >= phi:
            raise DomainError("type I orbits need x_star < phi")
        base = t_phi - t_end
    elif branch.family == "A":
        base = 2.0 * T - t_phi - t_end
    elif branch.family == "B":
        base = t_phi + t_end
    else:
        base = 2.0 * T - t_phi + t_end
    return 4 * k * T + base


# -- derivatives -----------------------------------------------------------


def boundary_term(z: float, phi: float) -> float:
    """``z**-1/2 (2 - z)**-1/2 (1 - cos 2phi)**-1/2``."""
    return 1.0 / math.sqrt(z * (2.0 - z) * 2.0 * math.sin(phi) ** 2)


def _check_derivative_z(z: float) -> None:
    if not (DERIVATIVE_MARGIN <= z <= 2.0 - DERIVATIVE_MARGIN):
        raise DomainError(
            f"derivatives are exposed for z in [{DERIVATIVE_MARGIN:g}, 2 - {DERIVATIVE_MARGIN:g}], got {z!r}"
        )


def _J(z, phi, nu, p):
    return power_integral(z, phi, nu, p).value


def dTB_dz(z: float, phi: float) -> float:
    _check_phi(phi)
    _check_derivative_z(z)
    xb = x_bar_star(z)
    return 0.5 * (-_J(z, phi, phi, 1.5) - _J(z, phi, xb, 1.5) + boundary_term(z, phi))


def d2TB_dz2(z: float, phi: float) -> float:
    _check_phi(phi)
    _check_derivative_z(z)
    xb = x_bar_star(z)
    b = boundary_term(z, phi)
    return 0.25 * (3.0 * _J(z, phi, phi, 2.5) + 3.0 * _J(z, phi, xb, 2.5) + b ** 3 * g_fn(z, phi))


def g_fn(z: float, phi: float) -> float:
    c = math.cos(2.0 * phi)
    return z * z - 2.0 * c * z - 2.0 * (1.0 - c)


def k_fn(z: float, phi: float) -> float:
    if not (0.0 < z < 2.0):
        raise DomainError(f"k(z, phi) needs z in (0, 2), got {z!r}")
    one_minus_c = 2.0 * math.sin(phi) ** 2
    return -g_fn(z, phi) / (z * (2.0 - z) * one_minus_c)


def h_fn(z: float, phi: float, x):
    return z - math.cos(2.0 * phi) + np.cos(2.0 * x)


def _phi_piece(z: float, phi: float, nu: float, kk: float) -> float:
    d_end = endpoint_gap(z, phi, nu)
    two_nu = 2.0 * nu

    def integrand(u):
        h = d_end + 2.0 * np.sin(two_nu - u) * np.sin(u)
        return (3.0 - kk * h) / (h * h * np.sqrt(h))

    return integrate_distance(integrand, nu).value


def Phi(z: float, phi: float) -> float:
    """``(int_0^phi + int_0^xbar) h**-5/2 (3 - k h) dx``.

    Equals ``4 T_B'' + 2 k T_B'`` with the boundary terms cancelled
    analytically; see :func:`Phi_derivative_form` for the other route.
    """
    _check_phi(phi)
    if not (0.0 < z < 2.0):
        raise DomainError(f"Phi needs z in (0, 2), got {z!r}")
    kk = k_fn(z, phi)
    return _phi_piece(z, phi, phi, kk) + _phi_piece(z, phi, x_bar_star(z), kk)


def Phi_derivative_form(z: float, phi: float) -> float:
    return 4.0 * d2TB_dz2(z, phi) + 2.0 * k_fn(z, phi) * dTB_dz(z, phi)


def dTDk_dz(z: float, phi: float, k: int, primed: bool) -> float:
    """Analytic z-derivative of the D_k (or D_k') time map on (z_star, 2)."""
    _check_phi(phi)
    z_star = 2.0 * math.cos(phi) ** 2
    if not (z_star < z < 2.0):
        raise DomainError(f"D-family derivative needs z in ({z_star:.12g}, 2), got {z!r}")
    xb = x_bar_star(z)
    j_half = _J(z, phi, HALF_PI, 1.5)
    j_phi = _J(z, phi, phi, 1.5)
    j_end = _J(z, phi, xb, 1.5)
    b = boundary_term(z, phi)
    if primed:
        # -(k+1/2) J(pi/2) - J(phi)/2 - (J(pi/2) - J(xbar))/2 - b/2
        return -(k + 1.0) * j_half - 0.5 * j_phi + 0.5 * j_end - 0.5 * b
    return -k * j_half - 0.5 * j_phi - 0.5 * j_end + 0.5 * b


def branch_dT_dz(branch: BranchId, z: float, cfg: BoundaryConfig) -> float:
    """Analytic dT/dz for any family, assembled from the pieces above."""
    _require(branch, z, cfg)
    phi, fam, k = cfg.phi, branch.family, branch.winding
    if fam in ("D", "Dprime"):
        return dTDk_dz(z, phi, k, fam == "Dprime")
    xb = x_bar_star(z)
    b = boundary_term(z, phi)
    d_phi = -0.5 * _J(z, phi, phi, 1.5)  # d/dz T1(z, phi)
    d_end = -0.5 * _J(z, phi, xb, 1.5) + 0.5 * b  # d/dz T1(z, xbar(z))
    if fam == "B" and k == 0:
        return d_phi + d_end
    if fam == "I" and k == 0:
        return d_phi - d_end
    dT = dT_dz(z, phi)
    base = {
        "I": d_phi - d_end,
        "A": 2.0 * dT - d_phi - d_end,
        "B": d_phi + d_end,
        "C": 2.0 * dT - d_phi + d_end,
    }[fam]
    return 4 * k * dT + base
