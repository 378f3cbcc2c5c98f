"""Discrete glued manifold: two scalar-flat model caps joined through a neck.

The neck coordinate ``t`` runs over ``[log eps, -log eps]``.  Seen from cap 1
the same interval is the flat annulus ``eps**2 <= rho <= 1`` with
``rho = eps * exp(-t)``; seen from cap 2 it is ``rho = eps * exp(t)``.  The
part of each cap outside its unit collar is lumped into a single node.

Composite node layout (length ``N + 3`` for ``N + 1`` neck nodes)::

    0          lump of cap 1
    1 .. N+1   neck nodes t_0 < ... < t_N
    N+2        lump of cap 2

All operators on the composite grid are path-graph operators built from
positive node measures ``vol_weight`` and symmetric edge ``conductance``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ResolutionError, ValidationError

#: Largest admissible neck spacing.
H_T_FLOOR = 0.05
#: t-distance between a lump node and the collar boundary sphere.
LUMP_DISTANCE = 1.0


def sphere_area(n: int) -> float:
    """Area of the unit (n-1)-sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def smoothstep(x):
    """Degree-5 smoothstep clamped to [0, 1]; C^2 at both ends."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x * x * x * (x * (6.0 * x - 15.0) + 10.0)


def chart_map(side: int, t, eps: float):
    """Collar radius |x| of neck coordinate ``t`` as seen from cap ``side``."""
    t = np.asarray(t, dtype=float)
    L = -math.log(eps)
    if np.any(t < -L - 1e-12) or np.any(t > L + 1e-12):
        raise ValidationError(f"t outside [log eps, -log eps] = [{-L}, {L}]")
    if side == 1:
        return eps * np.exp(-t)
    if side == 2:
        return eps * np.exp(t)
    raise ValidationError(f"side must be 1 or 2, got {side}")


# ----------------------------------------------------------------------------
# cutoff profiles as functions of t (usable at ghost points)


def zeta_profile(t, eps):
    return 1.0 - smoothstep((np.asarray(t, dtype=float) + 1.0) / 2.0)


def eta_profile(t, eps):
    L = -math.log(eps)
    return 1.0 - smoothstep(np.asarray(t, dtype=float) - (L - 1.0))


def chi1_profile(t, eps, alpha):
    L = -math.log(eps)
    return 1.0 - smoothstep(np.asarray(t, dtype=float) - (-L + alpha))


def phi1_profile(t, eps, alpha):
    L = -math.log(eps)
    return 1.0 - smoothstep(np.asarray(t, dtype=float) - (-L + alpha + 1.0))


# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelCap:
    """Scalar-flat model cap: flat unit collar plus one lumped interior node.

    ``ricci_pairing`` is the integral of <Ric, h> for the deformation tensor
    supported on this cap; in the lumped model the profile lives on the
    lump node.  ``quad_coeff`` scales the O(r^2) curvature correction.
    ``fermi_correction`` optionally perturbs the cap conformal factor by a
    relative profile in rho (sensitivity experiments only; it breaks exact
    scalar-flatness of the collar).
    """

    total_dim: int
    lump_volume: float
    side: int = 1
    codim: Optional[int] = None
    ricci_pairing: float = 0.0
    quad_coeff: float = 0.5
    fermi_correction: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.total_dim < 3:
            raise ValidationError("total_dim must be >= 3")
        if self.codim is None:
            object.__setattr__(self, "codim", self.total_dim)
        if self.codim < 3 or self.codim > self.total_dim:
            raise ValidationError("codim must satisfy 3 <= n <= m")
        if not self.lump_volume > 0:
            raise ValidationError("lump_volume must be positive")
        if self.side not in (1, 2):
            raise ValidationError("side must be 1 or 2")

    @property
    def n(self) -> int:
        return self.codim

    @property
    def m(self) -> int:
        return self.total_dim

    def collar_grid(self, neck: "NeckChart") -> np.ndarray:
        """Collar radii of the neck nodes, increasing, from eps**2 to 1."""
        return np.sort(chart_map(self.side, neck.t_nodes, neck.eps))


@dataclass(frozen=True)
class NeckChart:
    eps: float
    alpha: float
    n: int
    h_t_max: float = H_T_FLOOR
    t_nodes: np.ndarray = field(init=False, repr=False, compare=False)
    h_t: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValidationError(f"eps must lie in (0, 1), got {self.eps}")
        if self.n < 3:
            raise ValidationError("codimension n must be >= 3")
        L = -math.log(self.eps)
        if not 0.0 < self.alpha < L - 2.0:
            raise ValidationError(
                f"alpha={self.alpha:.4g} must lie in (0, |log eps| - 2) = (0, {L - 2.0:.4g})"
            )
        if self.h_t_max > H_T_FLOOR:
            raise ResolutionError(f"h_t={self.h_t_max} exceeds the resolution floor {H_T_FLOOR}")
        half = int(math.ceil(L / self.h_t_max))
        h = L / half
        t = h * np.arange(-half, half + 1, dtype=float)
        t[0], t[-1] = -L, L
        object.__setattr__(self, "t_nodes", t)
        object.__setattr__(self, "h_t", h)

    @property
    def L(self) -> float:
        return -math.log(self.eps)

    def T_mask(self, rho: float) -> np.ndarray:
        """Boolean mask of neck nodes in T^eps_rho."""
        L = self.L
        tol = 1e-12
        return (self.t_nodes >= -L + rho - tol) & (self.t_nodes <= L - rho + tol)


@dataclass(frozen=True)
class CutoffSet:
    """Cutoff profiles sampled on every composite node (lumps included)."""

    zeta: np.ndarray
    eta_plus: np.ndarray
    eta_minus: np.ndarray
    chi1: np.ndarray
    chi2: np.ndarray
    chiP: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray


def make_cutoffs(neck: NeckChart) -> CutoffSet:
    t, eps, a = neck.t_nodes, neck.eps, neck.alpha
    if neck.h_t > 0.25:
        raise ResolutionError("fewer than four nodes per unit transition band")

    def wrap(neck_vals, lump1, lump2):
        return np.concatenate(([lump1], neck_vals, [lump2]))

    zeta = wrap(zeta_profile(t, eps), 1.0, 0.0)
    eta_p = wrap(eta_profile(t, eps), 1.0, 0.0)
    eta_m = wrap(eta_profile(-t, eps), 0.0, 1.0)
    chi1 = wrap(chi1_profile(t, eps, a), 1.0, 0.0)
    chi2 = wrap(chi1_profile(-t, eps, a), 0.0, 1.0)
    chiP = 1.0 - chi1 - chi2
    phi1 = wrap(phi1_profile(t, eps, a), 1.0, 0.0)
    phi2 = wrap(phi1_profile(-t, eps, a), 0.0, 1.0)
    return CutoffSet(zeta, eta_p, eta_m, chi1, chi2, chiP, phi1, phi2)


def conformal_factor(neck: NeckChart, cutoffs: CutoffSet | None = None, R: float = 1.0, Q: float = 1.0):
    """Glued conformal factor u_eps on the neck nodes."""
    return _u_of_t(neck.t_nodes, neck.eps, neck.n, R, Q)


def _u_of_t(t, eps, n, R=1.0, Q=1.0, corr1=None, corr2=None):
    t = np.asarray(t, dtype=float)
    k = (n - 2) / 2.0
    u1 = R ** (k / 2.0) * eps**k * np.exp(-k * t)
    u2 = Q ** (k / 2.0) * eps**k * np.exp(k * t)
    if corr1 is not None:
        u1 = u1 * (1.0 + corr1(eps * np.exp(-t)))
    if corr2 is not None:
        u2 = u2 * (1.0 + corr2(eps * np.exp(t)))
    return eta_profile(t, eps) * u1 + eta_profile(-t, eps) * u2


@dataclass(frozen=True)
class GluedGeometry:
    cap1: ModelCap
    cap2: ModelCap
    neck: NeckChart
    cutoffs: CutoffSet
    R: float
    Q: float
    u_eps: np.ndarray
    vol_weight: np.ndarray
    conductance: np.ndarray
    deform: Optional[tuple[float, float]] = None

    # -- layout ---------------------------------------------------------------
    @property
    def n(self) -> int:
        return self.neck.n

    @property
    def m(self) -> int:
        return self.cap1.m

    @property
    def eps(self) -> float:
        return self.neck.eps

    @property
    def alpha(self) -> float:
        return self.neck.alpha

    @property
    def t(self) -> np.ndarray:
        return self.neck.t_nodes

    @property
    def size(self) -> int:
        return self.vol_weight.size

    @property
    def neck_slice(self) -> slice:
        return slice(1, self.size - 1)

    @property
    def chart(self) -> np.ndarray:
        c = np.full(self.size, "neck", dtype=object)
        c[0], c[-1] = "cap1", "cap2"
        return c

    @property
    def coordinate(self) -> np.ndarray:
        """Neck nodes carry t; lump nodes carry their collar radius 1."""
        return np.concatenate(([1.0], self.t, [1.0]))

    @property
    def volume(self) -> float:
        return float(self.vol_weight.sum())

    # -- functions of t -------------------------------------------------------
    def u_function(self, t):
        return _u_of_t(t, self.eps, self.n, self.R, self.Q,
                       self.cap1.fermi_correction, self.cap2.fermi_correction)

    def cap_conformal(self, side: int, t):
        """Conformal factor of the pure (homothety-scaled) cap metric."""
        t = np.asarray(t, dtype=float)
        k = (self.n - 2) / 2.0
        if side == 1:
            u = self.R ** (k / 2.0) * self.eps**k * np.exp(-k * t)
            corr = self.cap1.fermi_correction
            return u if corr is None else u * (1.0 + corr(self.eps * np.exp(-t)))
        u = self.Q ** (k / 2.0) * self.eps**k * np.exp(k * t)
        corr = self.cap2.fermi_correction
        return u if corr is None else u * (1.0 + corr(self.eps * np.exp(t)))

    def lump_measure(self, side: int) -> float:
        return float(self.vol_weight[0] if side == 1 else self.vol_weight[-1])

    def cap_graph(self, side: int):
        """Node measures and conductances of the pure cap metric.

        Nodes are ordered from the lump inwards: lump, then neck nodes from the
        unit sphere (rho = 1) down to rho = eps**2.  Returns ``(w, c, index)``
        with ``index`` mapping cap-graph nodes to composite nodes.
        """
        t = self.t
        n = self.n
        order = np.arange(t.size) if side == 1 else np.arange(t.size)[::-1]
        U = self.cap_conformal(side, t)
        scale = self.R if side == 1 else self.Q
        w_neck = _neck_cells(self.neck) * sphere_area(n) * U ** (2.0 * n / (n - 2)) * self._k_factor(side)
        t_mid = 0.5 * (t[1:] + t[:-1])
        c_neck = sphere_area(n) * self.cap_conformal(side, t_mid) ** 2 / self.neck.h_t * self._k_factor(side)
        lump_w = scale ** (self.m / 2.0) * (self.cap1 if side == 1 else self.cap2).lump_volume
        end = 0 if side == 1 else -1
        lump_c = sphere_area(n) * U[end] ** 2 / LUMP_DISTANCE * self._k_factor(side)
        w = np.concatenate(([lump_w], w_neck[order]))
        c = np.concatenate(([lump_c], c_neck[::-1] if side == 2 else c_neck))
        index = np.concatenate(([0 if side == 1 else self.size - 1], order + 1))
        return w, c, index

    def _k_factor(self, side: int):
        k = self.m - self.n
        if k == 0:
            return 1.0
        return (self.R if side == 1 else self.Q) ** (k / 2.0)


def _neck_cells(neck: NeckChart) -> np.ndarray:
    cells = np.full(neck.t_nodes.size, neck.h_t)
    cells[0] = cells[-1] = 0.5 * neck.h_t
    return cells


def default_alpha(eps: float, n: int) -> float:
    """alpha = -log(eps) / (2 (n - 2))."""
    return -math.log(eps) / (2.0 * (n - 2))


def build_glued_geometry(
    cap1: ModelCap,
    cap2: ModelCap,
    eps: float,
    alpha: float | None = None,
    R: float = 1.0,
    Q: float = 1.0,
    h_t: float = H_T_FLOOR,
    deform: tuple[float, float] | None = None,
) -> GluedGeometry:
    if cap1.m != cap2.m or cap1.n != cap2.n:
        raise ValidationError("caps must share total dimension and codimension")
    if cap1.side != 1 or cap2.side != 2:
        raise ValidationError("cap1 must have side=1 and cap2 side=2")
    if not (R > 0 and Q > 0):
        raise ValidationError("homothety factors must be positive")
    n, m = cap1.n, cap1.m
    if alpha is None:
        alpha = default_alpha(eps, n)
    if not 0.0 < eps < math.exp(-alpha):
        raise ValidationError("eps must lie in (0, exp(-alpha))")
    neck = NeckChart(eps=eps, alpha=alpha, n=n, h_t_max=h_t)
    cutoffs = make_cutoffs(neck)
    t = neck.t_nodes
    u = _u_of_t(t, eps, n, R, Q, cap1.fermi_correction, cap2.fermi_correction)
    if np.any(u <= 0):
        raise ValidationError("conformal factor must be positive on the neck")
    omega = sphere_area(n)
    k = m - n
    zeta_neck = cutoffs.zeta[1:-1]
    kfac = 1.0 if k == 0 else zeta_neck * R ** (k / 2.0) + (1 - zeta_neck) * Q ** (k / 2.0)
    w_neck = omega * u ** (2.0 * n / (n - 2)) * _neck_cells(neck) * kfac
    vol = np.concatenate(([R ** (m / 2.0) * cap1.lump_volume], w_neck, [Q ** (m / 2.0) * cap2.lump_volume]))
    t_mid = 0.5 * (t[1:] + t[:-1])
    zeta_mid = zeta_profile(t_mid, eps)
    kmid = 1.0 if k == 0 else zeta_mid * R ** (k / 2.0) + (1 - zeta_mid) * Q ** (k / 2.0)
    u_mid = _u_of_t(t_mid, eps, n, R, Q, cap1.fermi_correction, cap2.fermi_correction)
    c_neck = omega * u_mid**2 / neck.h_t * kmid
    c1 = omega * u[0] ** 2 / LUMP_DISTANCE * (R ** (k / 2.0))
    c2 = omega * u[-1] ** 2 / LUMP_DISTANCE * (Q ** (k / 2.0))
    cond = np.concatenate(([c1], c_neck, [c2]))
    return GluedGeometry(cap1, cap2, neck, cutoffs, float(R), float(Q), u, vol, cond, deform)


def symmetric_caps(m: int = 3, lump_volume_1: float = 1.0, lump_volume_2: float = 1.0, **kw):
    """Convenience pair of caps with common dimension."""
    return ModelCap(m, lump_volume_1, side=1, **kw), ModelCap(m, lump_volume_2, side=2, **kw)
