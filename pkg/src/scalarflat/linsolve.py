"""Linear theory for the projected problem Delta u = f - lambda * beta.

One approximate pass splits the source with the partition {chi1, chiP, chi2},
solves a Dirichlet problem on the neck and a Green-function problem on each
cap, and glues the pieces with the cutoffs phi1, phi2.  The leftover error is
fed back as a new source (Neumann series) until it is negligible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .curvature import laplacian_apply
from .errors import DegenerateStateError, NoContractionError, SupportError, ValidationError
from .fields import integrate, weight, weighted_norm
from .geometry import GluedGeometry, sphere_area


@dataclass(frozen=True)
class ProjectionBasis:
    beta: np.ndarray
    c1: float
    c2: float


def make_projection_basis(geom: GluedGeometry) -> ProjectionBasis:
    """beta = c1 chi1 - c2 chi2 with c1 = 1 and c2 fixed by a zero integral."""
    i1 = integrate(geom.cutoffs.chi1, geom)
    i2 = integrate(geom.cutoffs.chi2, geom)
    if i2 <= 0.0:
        raise DegenerateStateError("chi2 has zero integral")
    c1, c2 = 1.0, i1 / i2
    return ProjectionBasis(c1 * geom.cutoffs.chi1 - c2 * geom.cutoffs.chi2, c1, c2)


# ----------------------------------------------------------------------------
# neck solve


def dirichlet_neck_solve(f_P, geom: GluedGeometry) -> np.ndarray:
    """Solve Delta v = f_P on T_alpha with v = 0 on its boundary; v = 0 elsewhere."""
    f_P = np.asarray(f_P, dtype=float)
    mask = np.zeros(geom.size, dtype=bool)
    mask[geom.neck_slice] = geom.neck.T_mask(geom.alpha)
    scale = np.max(np.abs(f_P)) if f_P.size else 0.0
    if scale > 0 and np.any(np.abs(f_P[~mask]) > 1e-12 * scale):
        raise SupportError("neck source must be supported in T_alpha")
    idx = np.flatnonzero(mask)
    inner = idx[1:-1]
    w, c = geom.vol_weight, geom.conductance
    c_left = c[inner - 1]
    c_right = c[inner]
    ab = np.zeros((3, inner.size))
    ab[0, 1:] = c_right[:-1]
    ab[1, :] = -(c_left + c_right)
    ab[2, :-1] = c_left[1:]
    rhs = w[inner] * f_P[inner]
    v = np.zeros(geom.size)
    v[inner] = solve_banded((1, 1), ab, rhs)
    return v


# ----------------------------------------------------------------------------
# cap solve


@dataclass(frozen=True)
class CapSolution:
    """Cap solution split into finite part and Green part (composite layout)."""

    u: np.ndarray
    finite: np.ndarray
    green: np.ndarray
    b: float


def _integrate_fluxes(w, c, src_w):
    """Neumann path-graph solve by flux integration; first node pinned to 0."""
    F = np.cumsum(src_w)[:-1]
    return np.concatenate(([0.0], np.cumsum(F / c)))


def cap_solve_with_green(h, side: int, geom: GluedGeometry) -> CapSolution:
    """Solve Delta_{g_i} u = h - b delta_K on the cap, b = integral of h in g_i.

    The point source sits at the innermost collar node (rho = eps**2); the
    collar is flat there, so the graph solution outside that node is the
    restriction of the whole-cap solution.  Gauge: the finite part vanishes
    at K and the Green part carries no additive constant, i.e. it matches
    A b rho**(2-n) + (b/V) rho**2 / (2n) at rho = 1, A = 1/((n-2) omega).
    """
    h = np.asarray(h, dtype=float)
    phi = geom.cutoffs.phi1 if side == 1 else geom.cutoffs.phi2
    scale = np.max(np.abs(h)) if h.size else 0.0
    if scale > 0 and np.any(np.abs(h[phi == 0.0]) > 1e-12 * scale):
        raise SupportError(f"source for cap {side} leaves the support of phi{side}")
    w, c, idx = geom.cap_graph(side)
    hs = h[idx]
    V = float(w.sum())
    b = float(np.dot(w, hs))

    finite = _integrate_fluxes(w, c, w * (hs - b / V))
    finite -= finite[-1]

    src = w * (b / V)
    src[-1] -= b
    green = _integrate_fluxes(w, c, src)
    n = geom.n
    hom = geom.R if side == 1 else geom.Q
    A = 1.0 / ((n - 2) * sphere_area(n))
    green_at_1 = A * b * hom ** ((2 - n) / 2.0) + (b / V) * hom / (2 * n)
    green += green_at_1 - green[1]

    out_f = np.zeros(geom.size)
    out_g = np.zeros(geom.size)
    out_f[idx] = finite
    out_g[idx] = green
    return CapSolution(out_f + out_g, out_f, out_g, b)


# ----------------------------------------------------------------------------
# approximate solve


@dataclass
class ApproxSolveResult:
    u: np.ndarray
    lam: float
    r_err: np.ndarray
    E1: np.ndarray
    E2: np.ndarray
    u_P: np.ndarray
    caps: tuple[CapSolution, CapSolution]
    diagnostics: dict = field(default_factory=dict)


def _side_masks(geom: GluedGeometry):
    left = np.zeros(geom.size, dtype=bool)
    left[0] = True
    left[geom.neck_slice] = geom.t <= 0.0
    return left, ~left


def check_mean_zero(f, geom: GluedGeometry, rtol: float = 1e-10) -> None:
    mass = float(np.dot(np.abs(f), geom.vol_weight))
    if abs(integrate(f, geom)) > rtol * max(mass, 1e-300):
        raise ValidationError("source must have zero integral")


def approximate_solve(f, geom: GluedGeometry, basis: ProjectionBasis, gamma: float | None = None,
                      check: bool = True) -> ApproxSolveResult:
    f = np.asarray(f, dtype=float)
    if check:
        check_mean_zero(f, geom)
    cut = geom.cutoffs
    f1, fP, f2 = cut.chi1 * f, cut.chiP * f, cut.chi2 * f

    u_P = dirichlet_neck_solve(fP, geom)
    defect = fP - laplacian_apply(geom, cut.chiP * u_P)
    # exact arithmetic leaves the defect only where chiP varies (plus one
    # stencil node); anything else is solver roundoff and stays in r_err
    band = cut.chiP < 1.0
    band[1:] |= band[:-1].copy()
    band[:-1] |= band[1:].copy()
    defect = np.where(band, defect, 0.0)
    left, right = _side_masks(geom)
    q1 = np.where(left, defect, 0.0)
    q2 = np.where(right, defect, 0.0)
    ft1, ft2 = f1 + q1, f2 + q2

    denom = integrate(basis.c1 * cut.chi1 + basis.c2 * cut.chi2, geom)
    lam = (integrate(ft1, geom) - integrate(ft2, geom)) / denom
    h1 = ft1 - lam * basis.c1 * cut.chi1
    h2 = ft2 + lam * basis.c2 * cut.chi2

    cap1 = cap_solve_with_green(h1, 1, geom)
    cap2 = cap_solve_with_green(h2, 2, geom)
    g1 = cut.phi1 * cap1.u
    g2 = cut.phi2 * cap2.u
    u = cut.chiP * u_P + g1 + g2
    u -= integrate(u, geom) / geom.volume

    r_err = laplacian_apply(geom, u) - f + lam * basis.beta
    E1 = laplacian_apply(geom, g1) - h1
    E2 = laplacian_apply(geom, g2) - h2

    diag = {"int_h1": integrate(h1, geom), "int_h2": integrate(h2, geom), "b1": cap1.b, "b2": cap2.b}
    if gamma is not None:
        psi = weight(geom)
        diag.update(
            norm_f=weighted_norm(f, gamma + 2, psi),
            norm_u=weighted_norm(u, gamma, psi),
            norm_r=weighted_norm(r_err, gamma + 2, psi),
        )
    return ApproxSolveResult(u, lam, r_err, E1, E2, u_P, (cap1, cap2), diag)


def product_rule_remainder(geom: GluedGeometry, side: int, res: ApproxSolveResult) -> np.ndarray:
    """Delta(phi u) - phi Delta u for the cap piece: the cutoff-band part of E_i."""
    phi = geom.cutoffs.phi1 if side == 1 else geom.cutoffs.phi2
    ut = res.caps[side - 1].u
    return laplacian_apply(geom, phi * ut) - phi * laplacian_apply(geom, ut)


# ----------------------------------------------------------------------------
# Neumann series


@dataclass
class LinearSolveResult:
    u: np.ndarray
    lam: float
    iterations: int
    residual_history: list
    first_ratio: float
    final_residual: float
    lambdas: list = field(default_factory=list)
    source_norms: list = field(default_factory=list)
    update_norms: list = field(default_factory=list)


def iterate_linear_solve(
    f,
    geom: GluedGeometry,
    basis: ProjectionBasis,
    gamma: float,
    tol: float = 1e-12,
    max_iter: int = 60,
    psi=None,
) -> LinearSolveResult:
    """Sum the approximate passes f(0) = f, f(j) = -R(j-1) until ||R|| <= tol ||f||."""
    f = np.asarray(f, dtype=float)
    if psi is None:
        psi = weight(geom)
    nf = weighted_norm(f, gamma + 2, psi)
    u = np.zeros(geom.size)
    if nf == 0.0:
        return LinearSolveResult(u, 0.0, 0, [], 0.0, 0.0)
    lam = 0.0
    history, lams, fnorms, unorms = [], [], [], []
    fj = f
    first = math.nan
    j = 0
    for j in range(1, max_iter + 1):
        res = approximate_solve(fj, geom, basis, check=(j == 1))
        fnorms.append(weighted_norm(fj, gamma + 2, psi))
        unorms.append(weighted_norm(res.u, gamma, psi))
        u += res.u
        lam += res.lam
        lams.append(res.lam)
        rn = weighted_norm(res.r_err, gamma + 2, psi)
        history.append(rn)
        if j == 1:
            first = rn / nf
            if first >= 1.0:
                raise NoContractionError(f"first-pass error ratio {first:.3g} >= 1")
        if rn <= tol * nf:
            break
        fj = -res.r_err
    final = weighted_norm(laplacian_apply(geom, u) - f + lam * basis.beta, gamma + 2, psi)
    return LinearSolveResult(u, lam, j, history, first, final, lams, fnorms, unorms)


def write_iteration_csv(path, result: LinearSolveResult) -> None:
    """One row per Neumann pass: j, ||f(j)||_{gamma+2}, lambda(j), ||u(j)||_gamma."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "norm_f_j", "lambda_j", "norm_u_j"])
        for j, (nf, lj, nu) in enumerate(zip(result.source_norms, result.lambdas, result.update_norms)):
            w.writerow([j, repr(nf), repr(lj), repr(nu)])
