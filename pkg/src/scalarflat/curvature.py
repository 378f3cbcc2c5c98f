"""Scalar curvature, Laplacian and the nonlinear Yamabe right-hand side.

Sign conventions follow the Yamabe equation

    Delta u + c_m S_g u = c_m S u**((m+2)/(m-2)),   c_m = -(m-2) / (4(m-1)),

with Delta the (negative semi-definite) Laplace-Beltrami operator.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateStateError, DomainError, SupportError
from .fields import integrate
from .geometry import GluedGeometry, ModelCap


@dataclass(frozen=True)
class ConformalConstants:
    m: int
    n: int

    @property
    def c_m(self) -> float:
        return -(self.m - 2) / (4.0 * (self.m - 1))

    @property
    def c_n(self) -> float:
        """Positive conformal constant (n-2)/(4(n-1)) of the neck."""
        return (self.n - 2) / (4.0 * (self.n - 1))

    @property
    def p_exp(self) -> float:
        return (self.m + 2) / (self.m - 2)

    @property
    def neck_exp(self) -> float:
        return 4.0 / (self.n - 2)


def constants(geom: GluedGeometry) -> ConformalConstants:
    return ConformalConstants(geom.m, geom.n)


# ----------------------------------------------------------------------------
# Laplacian


def path_laplacian(f, w, c) -> np.ndarray:
    """Finite-volume Laplacian on a path graph with node measures w, conductances c."""
    flux = c * (f[1:] - f[:-1])
    div = np.zeros_like(f, dtype=float)
    div[:-1] += flux
    div[1:] -= flux
    return div / w


def laplacian_apply(geom: GluedGeometry, f) -> np.ndarray:
    """Delta_{g_eps} f on every composite node.

    On neck nodes this is the flux form u**(-2n/(n-2)) d/dt(u**2 df/dt), i.e.
    u**(-4/(n-2)) (f'' + 2 (u'/u) f'); on the double plateau of a symmetric
    geometry 2u'/u = (n-2) tanh((n-2)t/2).  Lump nodes exchange flux with the
    collar boundary through a single conductance.
    """
    return path_laplacian(np.asarray(f, dtype=float), geom.vol_weight, geom.conductance)


def printed_neck_laplacian(geom: GluedGeometry, f) -> np.ndarray:
    """Non-conservative neck stencil with drift (n-2) tanh((n-2)t/2) (neck nodes only)."""
    f = np.asarray(f, dtype=float)[geom.neck_slice]
    h, n, t = geom.neck.h_t, geom.n, geom.t
    out = np.full(t.size, np.nan)
    d2 = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
    d1 = (f[2:] - f[:-2]) / (2 * h)
    drift = (n - 2) * np.tanh((n - 2) * t[1:-1] / 2.0)
    out[1:-1] = geom.u_eps[1:-1] ** (-4.0 / (n - 2)) * (d2 + drift * d1)
    return out


# ----------------------------------------------------------------------------
# scalar curvature


def conformal_scalar_curvature(u_func, t, h: float, n: int) -> np.ndarray:
    """Scalar curvature of u**(4/(n-2)) (dt^2 + d theta^2) with a central-difference u''."""
    t = np.asarray(t, dtype=float)
    u = u_func(t)
    upp = (u_func(t + h) - 2.0 * u + u_func(t - h)) / h**2
    k = (n - 2) / 2.0
    c_n = (n - 2) / (4.0 * (n - 1))
    return u ** (-(n + 2.0) / (n - 2)) * (-upp + k * k * u) / c_n


@dataclass(frozen=True)
class DeformationProfile:
    """Lump-supported linearised curvature K_i of a deformation tensor h_i."""

    side: int
    profile: np.ndarray
    pairing_integral: float
    quad_coeff: float


def deformation_profile(geom: GluedGeometry, side: int) -> DeformationProfile:
    cap: ModelCap = geom.cap1 if side == 1 else geom.cap2
    prof = np.zeros(geom.size)
    node = 0 if side == 1 else geom.size - 1
    prof[node] = 1.0 / geom.lump_measure(side)
    return DeformationProfile(side, prof, cap.ricci_pairing, cap.quad_coeff)


def pairing_integral(h: DeformationProfile, geom: GluedGeometry) -> float:
    """Integral of K_i; divergence terms integrate to zero so only <Ric, h> remains."""
    if np.any(h.profile[geom.neck_slice] != 0.0):
        raise SupportError("deformation profile overlaps the neck")
    return h.pairing_integral * integrate(h.profile, geom)


def scalar_curvature(geom: GluedGeometry) -> np.ndarray:
    """Scalar curvature of g_eps (plus the deformation terms when geom.deform is set)."""
    S = np.zeros(geom.size)
    S[geom.neck_slice] = conformal_scalar_curvature(geom.u_function, geom.t, geom.neck.h_t, geom.n)
    if geom.deform is not None:
        r, s = geom.deform
        for side, amp in ((1, r), (2, s)):
            d = deformation_profile(geom, side)
            S += (amp * d.pairing_integral + d.quad_coeff * amp * amp) * d.profile
    return S


# ----------------------------------------------------------------------------
# Yamabe right-hand side


def f_nonlin(v, m: int):
    """(1+v)^p - 1 - p v with p = (m+2)/(m-2)."""
    p = (m + 2.0) / (m - 2.0)
    v = np.asarray(v, dtype=float)
    return (1.0 + v) ** p - 1.0 - p * v


def _check_positive(v):
    if np.any(1.0 + np.asarray(v) <= 0.0):
        raise DomainError("conformal factor 1 + v must stay positive")


def F_eps(v, S: float, geom: GluedGeometry, S_g=None) -> np.ndarray:
    """Right-hand side of Delta v = F(v) for the constant-curvature problem."""
    _check_positive(v)
    v = np.asarray(v, dtype=float)
    cc = constants(geom)
    if S_g is None:
        S_g = scalar_curvature(geom)
    c = cc.c_m
    return c * (S - S_g) * (1.0 + v) + c * (4.0 / (cc.m - 2)) * S * v + c * S * f_nonlin(v, cc.m)


def F_bar(v, geom: GluedGeometry, S_g=None) -> np.ndarray:
    """Right-hand side with target scalar curvature 0 on the deformed metric."""
    _check_positive(v)
    if S_g is None:
        S_g = scalar_curvature(geom)
    return -constants(geom).c_m * S_g * (1.0 + np.asarray(v, dtype=float))


def choose_S(v, geom: GluedGeometry, S_g=None) -> float:
    """Constant S making the integral of F_eps(v, S) vanish (S enters affinely)."""
    _check_positive(v)
    v = np.asarray(v, dtype=float)
    m = geom.m
    if S_g is None:
        S_g = scalar_curvature(geom)
    denom = integrate(1.0 + v + (4.0 / (m - 2)) * v + f_nonlin(v, m), geom)
    if abs(denom) < 1e-300:
        raise DegenerateStateError("vanishing denominator in the choice of S")
    return integrate(S_g * (1.0 + v), geom) / denom
