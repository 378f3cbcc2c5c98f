"""Killing the approximate eigenvalue lambda.

Two procedures are provided.  Homothety balancing rescales the caps
(g1 -> R g1, g2 -> Q g2) and bisects along a one-parameter path until the
lambda of the converged Yamabe solve vanishes.  Deformation balancing adds
r h1 + s h2 (lump-supported) to the glued metric, keeps the total curvature
integral G(r, s, v) at zero by the choice s = f(r), and scans r until lambda
changes sign.

Deformation amplitudes are reported in normalized units: with
kappa = -(integral of S_{g_eps}) / eps**(n-2), the raw amplitude r is shown
as r / kappa, so that G / kappa = -eps**(n-2) + r + s + E1 + E2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .curvature import constants, deformation_profile, laplacian_apply, scalar_curvature
from .errors import AssumptionViolation, ConvergenceError, DegenerateStateError, ValidationError
from .fields import integrate, weight, weighted_norm
from .geometry import GluedGeometry, ModelCap, build_glued_geometry
from .linsolve import iterate_linear_solve, make_projection_basis
from .nonlinear import BallParams, YamabeOperator, solve_yamabe

#: Relative tolerance for "lambda = 0".
LAMBDA_RTOL = 1e-10
LAMBDA_ATOL = 1e-14


@dataclass(frozen=True)
class SolverParams:
    """Solver knobs shared by every probe."""

    gamma: float = 0.25
    tol: float = 1e-13
    max_iter: int = 25
    h_t: float = 0.05
    alpha: Optional[float] = None


# ----------------------------------------------------------------------------
# homothety balancing


@dataclass
class EigenvalueProbe:
    R: float
    Q: float
    lam: float
    S: float
    converged: bool
    lam_hat: float = math.nan
    norm_F: float = math.nan
    green_defect: float = math.nan
    iterations: int = 0


def green_formula_defect(geom: GluedGeometry, u_P, chi) -> float:
    """integral(u_P * Delta chi) + integral(<grad chi, grad u_P>) on the graph.

    Summation by parts makes this vanish identically; the returned value is
    the roundoff-level remainder.
    """
    u_P = np.asarray(u_P, dtype=float)
    chi = np.asarray(chi, dtype=float)
    first = integrate(u_P * laplacian_apply(geom, chi), geom)
    grad = float(np.sum(geom.conductance * np.diff(chi) * np.diff(u_P)))
    return first + grad


def lambda_surrogate(geom: GluedGeometry, S: float, S_g=None) -> float:
    """Leading-order lambda from the projection of F(0) = c_m (S - S_g).

    c_m [int (S - S_g) chi1 - int (S - S_g) chi2] / int (c1 chi1 + c2 chi2).
    """
    if S_g is None:
        S_g = scalar_curvature(geom)
    basis = make_projection_basis(geom)
    cut = geom.cutoffs
    d = S - S_g
    num = integrate(d * cut.chi1, geom) - integrate(d * cut.chi2, geom)
    return constants(geom).c_m * num / integrate(basis.c1 * cut.chi1 + basis.c2 * cut.chi2, geom)


def lambda_of_scaling(R: float, Q: float, eps: float, caps, params: SolverParams = SolverParams()) -> EigenvalueProbe:
    if not (R > 0 and Q > 0):
        raise ValidationError("homothety factors must be positive")
    cap1, cap2 = caps
    geom = build_glued_geometry(cap1, cap2, eps, alpha=params.alpha, R=R, Q=Q, h_t=params.h_t)
    op = YamabeOperator(geom, params.gamma)
    st = solve_yamabe(geom, BallParams(params.gamma, 1.0), tol=params.tol, max_iter=params.max_iter, op=op)
    F, _ = op.rhs(st.v)
    lam_hat = lambda_surrogate(geom, st.S, op.S_g)
    # neck piece of one approximate pass, for the integration-by-parts check
    from .linsolve import dirichlet_neck_solve

    u_P = dirichlet_neck_solve(geom.cutoffs.chiP * F, geom)
    gd = max(abs(green_formula_defect(geom, u_P, geom.cutoffs.chi1)),
             abs(green_formula_defect(geom, u_P, geom.cutoffs.chi2)))
    return EigenvalueProbe(R, Q, st.lam, st.S, True, lam_hat, op.norm(F, 2.0), gd, st.iteration)


def scaling_path(s: float, R_max: float) -> tuple[float, float]:
    """Point on the path (R_max, 1) -> (1, R_max): R = R_max**(1-s), Q = R_max**s."""
    return R_max ** (1.0 - s), R_max**s


@dataclass
class BalanceResult:
    R0: float
    Q0: float
    lam: float
    lam_scale: float
    R_max: float
    probes: list = field(default_factory=list)


def find_balanced_scaling(eps: float, caps, params: SolverParams = SolverParams(), R_max: float = 2.0,
                          R_cap: float = 1024.0, max_bisect: int = 200) -> BalanceResult:
    """Bisect lambda along the scaling path until |lambda| <= 1e-10 |lambda(1,1)| + 1e-14."""
    probes = []

    def probe(R, Q):
        p = lambda_of_scaling(R, Q, eps, caps, params)
        probes.append(p)
        return p

    base = probe(1.0, 1.0)
    scale = abs(base.lam)
    tol = LAMBDA_RTOL * scale + LAMBDA_ATOL
    sym = LAMBDA_RTOL * max(base.norm_F, 1e-300)
    if scale <= max(tol, sym):
        return BalanceResult(1.0, 1.0, base.lam, scale, 1.0, probes)

    while True:
        lo = probe(*scaling_path(0.0, R_max))
        hi = probe(*scaling_path(1.0, R_max))
        if lo.lam * hi.lam < 0:
            break
        if R_max * 2 > R_cap:
            raise AssumptionViolation(
                f"no sign change of lambda up to R_max={R_max}: "
                f"lambda(R_max,1)={lo.lam:.6g}, lambda(1,R_max)={hi.lam:.6g}"
            )
        R_max *= 2

    a, b = 0.0, 1.0
    fa = lo.lam
    best = lo if abs(lo.lam) < abs(hi.lam) else hi
    for _ in range(max_bisect):
        mid = 0.5 * (a + b)
        p = probe(*scaling_path(mid, R_max))
        if abs(p.lam) < abs(best.lam):
            best = p
        if abs(p.lam) <= tol:
            break
        if (p.lam < 0) == (fa < 0):
            a, fa = mid, p.lam
        else:
            b = mid
        if b - a < 1e-16:
            break
    if abs(best.lam) > tol:
        raise ConvergenceError(f"bisection stalled at |lambda|={abs(best.lam):.3g} > {tol:.3g}")
    return BalanceResult(best.R, best.Q, best.lam, scale, R_max, probes)


def scaling_expansion_ratio(R: float, eps: float, caps, params: SolverParams = SolverParams()) -> float:
    """int (S^R - S^R_g) chi1 dvol^R / (R**(m/2 - (n-2)/4) eps**(n-2)) on the (R, 1) geometry."""
    cap1, cap2 = caps
    geom = build_glued_geometry(cap1, cap2, eps, alpha=params.alpha, R=R, Q=1.0, h_t=params.h_t)
    op = YamabeOperator(geom, params.gamma)
    st = solve_yamabe(geom, BallParams(params.gamma, 1.0), tol=params.tol, max_iter=params.max_iter, op=op)
    val = integrate((st.S - op.S_g) * geom.cutoffs.chi1, geom)
    m, n = geom.m, geom.n
    return val / (R ** (m / 2.0 - (n - 2) / 4.0) * eps ** (n - 2))


# ----------------------------------------------------------------------------
# deformation balancing


@dataclass
class DeformState:
    r: float
    s: float
    G_value: float
    E1: float
    E2: float
    v: np.ndarray
    lam: float
    iterations: int = 0
    kappa: float = math.nan


class DeformationProblem:
    """Lump-supported deformation of one glued geometry, in normalized units."""

    def __init__(self, geom: GluedGeometry, gamma: float = 0.25, linear_tol: float = 1e-13):
        self.geom = geom
        self.gamma = gamma
        self.linear_tol = linear_tol
        d1 = deformation_profile(geom, 1)
        d2 = deformation_profile(geom, 2)
        if d1.pairing_integral == 0.0 or d2.pairing_integral == 0.0:
            raise AssumptionViolation(
                "Ricci-flat cap: the pairing integral vanishes, so the deformation cannot correct the curvature"
            )
        for d in (d1, d2):
            if abs(abs(d.pairing_integral * integrate(d.profile, geom)) - 1.0) > 1e-12:
                raise ValidationError("deformation profiles must be normalized to pairing integral 1")
        self.profiles = (d1, d2)
        self.S_g = scalar_curvature(geom)
        total = integrate(self.S_g, geom)
        self.eps_pow = geom.eps ** (geom.n - 2)
        self.kappa = -total / self.eps_pow
        if not self.kappa > 0:
            raise DegenerateStateError("total scalar curvature of g_eps must be negative")
        self.basis = make_projection_basis(geom)
        self.psi = weight(geom)
        self.c_m = constants(geom).c_m
        self._lumps = (0, geom.size - 1)

    def deformed_curvature(self, r: float, s: float) -> np.ndarray:
        """S_{g-bar}; the quadratic coefficient acts on normalized amplitudes."""
        S = self.S_g.copy()
        for d, amp in zip(self.profiles, (r, s)):
            S += self.kappa * (amp * d.pairing_integral + d.quad_coeff * amp * amp) * d.profile
        return S

    def split(self, r: float, s: float, v) -> tuple[float, float, float]:
        """Return (G, E1, E2), all divided by kappa; G = -eps**(n-2) + r + s + E1 + E2."""
        v = np.asarray(v, dtype=float)
        k = self.kappa
        (d1, d2), (i1, i2) = self.profiles, self._lumps
        w1 = d1.profile[i1] * self.geom.vol_weight[i1]
        w2 = d2.profile[i2] * self.geom.vol_weight[i2]
        E1 = (integrate(self.S_g * v, self.geom) / k
              + r * d1.pairing_integral * w1 * v[i1] + s * d2.pairing_integral * w2 * v[i2])
        E2 = (d1.quad_coeff * r * r * w1 * (1 + v[i1]) + d2.quad_coeff * s * s * w2 * (1 + v[i2]))
        H = -self.eps_pow + r * d1.pairing_integral * w1 + s * d2.pairing_integral * w2
        return H + E1 + E2, E1, E2

    def G(self, r: float, s: float, v) -> float:
        """Normalized integral of S_{g-bar} (1 + v)."""
        return integrate(self.deformed_curvature(r, s) * (1.0 + np.asarray(v)), self.geom) / self.kappa

    def solve_s(self, r: float, v) -> float:
        """Root s of G(r, s, v) = 0 closest to eps**(n-2) - r (G is quadratic in s)."""
        v = np.asarray(v, dtype=float)
        d2 = self.profiles[1]
        i2 = self._lumps[1]
        w2 = d2.profile[i2] * self.geom.vol_weight[i2] * (1.0 + v[i2])
        a = d2.quad_coeff * w2
        b = d2.pairing_integral * w2
        c = self.G(r, 0.0, v)
        if a == 0.0:
            return -c / b
        disc = b * b - 4 * a * c
        if disc < 0:
            raise ConvergenceError("no real s solves G(r, s, v) = 0")
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        return c / q

    def F_bar(self, r: float, s: float, v) -> np.ndarray:
        return -self.c_m * self.deformed_curvature(r, s) * (1.0 + np.asarray(v, dtype=float))

    def solve_along(self, r: float, tol: float = 1e-13, max_iter: int = 40) -> DeformState:
        """Interleaved iteration: s_j from G(r, s_j, v_j) = 0, then v_{j+1} = Delta^{-1}(F-bar - lambda beta)."""
        g = self.geom
        v = np.zeros(g.size)
        lam = 0.0
        first = None
        for j in range(1, max_iter + 1):
            s = self.solve_s(r, v)
            F = self.F_bar(r, s, v)
            F -= integrate(F, g) / g.volume  # roundoff of the s-solve
            lin = iterate_linear_solve(F, g, self.basis, self.gamma, tol=self.linear_tol, psi=self.psi)
            step = weighted_norm(lin.u - v, self.gamma, self.psi)
            v, lam = lin.u, lin.lam
            if np.any(1.0 + v <= 0):
                raise ConvergenceError("conformal factor lost positivity")
            if j == 1:
                first = step
            elif j == 2 and first > 0 and step >= first:
                raise ConvergenceError("deformation iteration does not contract")
            if step <= tol:
                break
        else:
            raise ConvergenceError(f"deformation iteration did not reach tol={tol} in {max_iter} steps")
        s = self.solve_s(r, v)
        G, E1, E2 = self.split(r, s, v)
        return DeformState(r, s, G, E1, E2, v, lam, j, self.kappa)

    def final_curvature(self, state: DeformState) -> np.ndarray:
        """Scalar curvature of (1+v)**(4/(m-2)) g-bar: u**(-p) (S_{g-bar} u + Delta u / c_m)."""
        u = 1.0 + state.v
        p = constants(self.geom).p_exp
        S_bar = self.deformed_curvature(state.r, state.s)
        return u ** (-p) * (S_bar * u + laplacian_apply(self.geom, state.v) / self.c_m)

    def final_volume_form(self, state: DeformState) -> np.ndarray:
        m = self.geom.m
        return (1.0 + state.v) ** (2.0 * m / (m - 2)) * self.geom.vol_weight


def implicit_curve(problem: DeformationProblem, r_samples, tol: float = 1e-13) -> list[DeformState]:
    """Sample s = f(r) (with v and lambda) at each r."""
    hi = problem.eps_pow
    out = []
    for r in r_samples:
        if not 0.0 < r < hi:
            raise ValidationError(f"r={r} outside (0, eps**(n-2))")
        out.append(problem.solve_along(float(r), tol=tol))
    return out


def curve_lipschitz(states) -> float:
    r = np.array([st.r for st in states])
    s = np.array([st.s for st in states])
    o = np.argsort(r)
    return float(np.max(np.abs(np.diff(s[o]) / np.diff(r[o]))))


@dataclass
class DeformResult:
    state: DeformState
    scan: list
    lam_scale: float
    integral_S: float
    volume: float
    sup_S: float
    lipschitz: float


def solve_deformation(problem: DeformationProblem, c: float = 0.1, samples: int = 9, tol: float = 1e-13,
                      max_bisect: int = 200) -> DeformResult:
    """Scan r over (c/2, 1 - c/2) eps**(n-2), find a sign change of lambda(r, f(r)) and bisect."""
    e = problem.eps_pow
    rs = np.linspace(0.5 * c * e, (1.0 - 0.5 * c) * e, samples)
    scan = implicit_curve(problem, rs, tol=tol)
    lam_scale = max(abs(st.lam) for st in scan)
    atol = LAMBDA_RTOL * lam_scale + LAMBDA_ATOL
    lip = curve_lipschitz(scan)
    idx = None
    for k in range(len(scan) - 1):
        if scan[k].lam == 0.0 or scan[k].lam * scan[k + 1].lam < 0:
            idx = k
            break
    if idx is None:
        raise AssumptionViolation(
            f"lambda(r, f(r)) has no sign change on the scan range: "
            f"{scan[0].lam:.6g} at r={scan[0].r:.6g}, {scan[-1].lam:.6g} at r={scan[-1].r:.6g}"
        )
    a, b = scan[idx], scan[idx + 1]
    best = a if abs(a.lam) <= abs(b.lam) else b
    for _ in range(max_bisect):
        if abs(best.lam) <= atol:
            break
        mid = problem.solve_along(0.5 * (a.r + b.r), tol=tol)
        if abs(mid.lam) < abs(best.lam):
            best = mid
        if (mid.lam < 0) == (a.lam < 0):
            a = mid
        else:
            b = mid
        if b.r - a.r <= 1e-17 * e:
            break
    if abs(best.lam) > atol:
        raise ConvergenceError(f"deformation bisection stalled at |lambda|={abs(best.lam):.3g}")
    S_t = problem.final_curvature(best)
    vol_form = problem.final_volume_form(best)
    return DeformResult(best, scan, lam_scale, float(np.dot(S_t, vol_form)), float(vol_form.sum()),
                        float(np.max(np.abs(S_t))), lip)


def deformation_caps(m: int, lump_volume_1: float = 1.0, lump_volume_2: float = 1.0,
                     pairing: float = 1.0, quad_coeff: float = 0.5, codim: Optional[int] = None):
    """Caps whose deformation profiles have pairing integral ``pairing``."""
    return (ModelCap(m, lump_volume_1, 1, codim, pairing, quad_coeff),
            ModelCap(m, lump_volume_2, 2, codim, pairing, quad_coeff))
