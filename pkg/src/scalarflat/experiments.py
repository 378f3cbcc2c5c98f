"""Per-point measurements behind every sweep and acceptance check.

Each function takes plain parameters, builds its own geometry and returns a
flat dict of numbers, so sweeps can dispatch points to worker processes.
"""
from __future__ import annotations

import math

import numpy as np

from .balance import (DeformationProblem, SolverParams, deformation_caps, find_balanced_scaling,
                      lambda_of_scaling, solve_deformation)
from .curvature import conformal_scalar_curvature, laplacian_apply, scalar_curvature
from .fields import integrate, project_mean_zero, weight, weighted_norm
from .geometry import ModelCap, build_glued_geometry
from .linsolve import approximate_solve, dirichlet_neck_solve, iterate_linear_solve, make_projection_basis
from .nonlinear import BallParams, YamabeOperator, ball_radius, lipschitz_estimate, solve_yamabe


def fit_slope(xs, ys):
    """Least-squares line through (log x, log y): returns (slope, intercept, residual)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 3 or xs.size != ys.size:
        raise ValueError("need at least three (x, y) pairs of equal length")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log fit needs positive data")
    lx, ly = np.log(xs), np.log(ys)
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = float(np.sqrt(np.mean((A @ [slope, icpt] - ly) ** 2)))
    return float(slope), float(icpt), res


def spread(values) -> float:
    """max/min of positive values (a 'factor 2 either way' band is spread <= 4)."""
    v = np.abs(np.asarray(values, dtype=float))
    return float(v.max() / v.min())


def make_caps(m=3, n=None, lump_volume_1=1.0, lump_volume_2=1.0, pairing=0.0, quad_coeff=0.5):
    return (ModelCap(m, lump_volume_1, 1, n, pairing, quad_coeff),
            ModelCap(m, lump_volume_2, 2, n, pairing, quad_coeff))


def standard_source(geom):
    """Mean-zero test source: lump values plus smooth bumps in both collars."""
    f = np.zeros(geom.size)
    rho1 = geom.eps * np.exp(-geom.t)
    rho2 = geom.eps * np.exp(geom.t)
    f[geom.neck_slice] = np.exp(-((rho1 - 0.6) / 0.15) ** 2) - 0.7 * np.exp(-((rho2 - 0.5) / 0.2) ** 2)
    f[0], f[-1] = 1.0, -0.5
    return project_mean_zero(f, geom)


# ----------------------------------------------------------------------------
# curvature


def exactness_point(h: float, n: int = 3, a: float = 1.0, b: float = 0.7, span: float = 3.0) -> dict:
    """sup |S| for the exact neck u = a e^{-kt} + b e^{kt} sampled with spacing h."""
    k = (n - 2) / 2.0
    t = np.linspace(-span, span, int(round(2 * span / h)) + 1)

    def u(x):
        return a * np.exp(-k * x) + b * np.exp(k * x)

    S = conformal_scalar_curvature(u, t, h, n)
    return {"h": h, "sup_S": float(np.max(np.abs(S)))}


def curvature_point(eps: float, n: int = 3, m: int | None = None, alpha: float | None = None,
                    h_t: float = 0.05, gamma: float | None = None, **cap_kw) -> dict:
    m = m or n
    caps = make_caps(m, n, **cap_kw)
    g = build_glued_geometry(*caps, eps, alpha=alpha, h_t=h_t)
    S = scalar_curvature(g)
    L = g.neck.L
    inner = np.abs(g.t) <= L - 1.0 + 1e-12
    Sn = S[g.neck_slice]
    bound = np.abs(Sn[inner]) * eps * np.cosh(g.t[inner]) ** (n - 1)
    gamma = (n - 2) / 2.0 if gamma is None else gamma
    psi = weight(g)
    return {
        "eps": eps,
        "sup_weighted_S": float(bound.max()),
        "norm_S": weighted_norm(S, gamma + 2, psi),
        "int_S_scaled": integrate(S, g) / eps ** (n - 2),
        "sup_S": float(np.max(np.abs(S))),
    }


# ----------------------------------------------------------------------------
# linear theory


def dirichlet_point(eps: float, n: int = 3, m: int | None = None, alpha: float | None = 0.5, h_t: float = 0.05,
                    samples: int = 20, seed: int = 0) -> dict:
    """Max over random sources of sup|psi^g v| / sup|psi^(g+2) f|, g = (n-2)/2."""
    caps = make_caps(m or n, n)
    g = build_glued_geometry(*caps, eps, alpha=alpha, h_t=h_t)
    gamma = (n - 2) / 2.0
    psi = weight(g)
    mask = np.zeros(g.size, dtype=bool)
    mask[g.neck_slice] = g.neck.T_mask(g.alpha)
    lo, hi = -g.neck.L + g.alpha, g.neck.L - g.alpha
    rng = np.random.default_rng(seed)
    t = np.concatenate(([np.nan], g.t, [np.nan]))
    ratios = []
    for _ in range(samples):
        shape = np.zeros(g.size)
        for _ in range(4):
            c = rng.uniform(lo, hi)
            w = rng.uniform(0.3, 2.0)
            shape[mask] += rng.standard_normal() * np.exp(-((t[mask] - c) / w) ** 2)
        f = np.where(mask, shape * psi ** (-(gamma + 2)), 0.0)
        v = dirichlet_neck_solve(f, g)
        ratios.append(weighted_norm(v, gamma, psi) / weighted_norm(f, gamma + 2, psi))
    return {"eps": eps, "ratio_max": float(max(ratios)), "ratio_min": float(min(ratios))}


def approx_point(eps: float, n: int = 3, m: int | None = None, alpha: float | None = None, h_t: float = 0.05,
                 lump_volume_1: float = 1.0, lump_volume_2: float = 2.0) -> dict:
    caps = make_caps(m or n, n, lump_volume_1, lump_volume_2)
    g = build_glued_geometry(*caps, eps, alpha=alpha, h_t=h_t)
    basis = make_projection_basis(g)
    gamma = (n - 2) / 2.0
    f = standard_source(g)
    res = approximate_solve(f, g, basis, gamma=gamma)
    d = res.diagnostics
    ident = np.max(np.abs(laplacian_apply(g, res.u) - f + res.lam * basis.beta - res.r_err))
    split = np.max(np.abs(res.r_err - res.E1 - res.E2))
    scale = np.max(np.abs(f))
    return {
        "eps": eps,
        "ratio_r": d["norm_r"] / d["norm_f"],
        "ratio_u": d["norm_u"] / d["norm_f"],
        "ratio_lam": abs(res.lam) / d["norm_f"],
        "identity_err": float(ident / scale),
        "split_err": float(split / scale),
        "int_h1": d["int_h1"],
        "int_h2": d["int_h2"],
    }


def linear_point(eps: float, n: int = 3, m: int | None = None, alpha: float | None = None, h_t: float = 0.05,
                 tol: float = 1e-12, seed: int = 0, lump_volume_1: float = 1.0,
                 lump_volume_2: float = 2.0) -> dict:
    caps = make_caps(m or n, n, lump_volume_1, lump_volume_2)
    g = build_glued_geometry(*caps, eps, alpha=alpha, h_t=h_t)
    basis = make_projection_basis(g)
    gamma = (n - 2) / 2.0
    psi = weight(g)
    f = standard_source(g)
    rng = np.random.default_rng(seed)
    f2 = project_mean_zero(np.convolve(rng.standard_normal(g.size), np.ones(9) / 9, mode="same"), g)
    r1 = iterate_linear_solve(f, g, basis, gamma, tol=tol, psi=psi)
    r2 = iterate_linear_solve(f2, g, basis, gamma, tol=tol, psi=psi)
    r12 = iterate_linear_solve(f + f2, g, basis, gamma, tol=tol, psi=psi)
    nf = weighted_norm(f, gamma + 2, psi)
    hist = np.asarray(r1.residual_history) / nf
    q = r1.first_ratio
    ratios = hist[1:] / hist[:-1] if hist.size > 1 else np.array([])
    lam_scale = max(abs(r1.lam), abs(r2.lam), 1e-300)
    return {
        "eps": eps,
        "iterations": r1.iterations,
        "first_ratio": q,
        "max_step_ratio": float(ratios.max()) if ratios.size else 0.0,
        "geometric_ok": bool(np.all(hist <= q ** np.arange(1, hist.size + 1) * (1 + 1e-9) + 1e-15)),
        "final_residual": r1.final_residual / nf,
        "lambda": r1.lam,
        "linearity_err": abs(r12.lam - r1.lam - r2.lam) / lam_scale,
    }


# ----------------------------------------------------------------------------
# nonlinear


def yamabe_point(eps: float, n: int = 3, m: int | None = None, alpha: float | None = None, h_t: float = 0.05,
                 gamma: float = 0.25, tol: float = 1e-13, max_iter: int = 25, seed: int = 0,
                 samples: int = 40, lump_volume_1: float = 1.0, lump_volume_2: float = 2.0) -> dict:
    caps = make_caps(m or n, n, lump_volume_1, lump_volume_2)
    g = build_glued_geometry(*caps, eps, alpha=alpha, h_t=h_t)
    op = YamabeOperator(g, gamma)
    r_eps = ball_radius(n, eps, gamma, 1.0)
    st = solve_yamabe(g, BallParams(gamma, r_eps), tol=tol, max_iter=max_iter, op=op)
    radius = 2.0 * op.norm(op.step(np.zeros(g.size)).v)
    lip = lipschitz_estimate(op, radius, np.random.default_rng(seed), samples=samples)
    return {
        "eps": eps,
        "iterations": st.iteration,
        "S": st.S,
        "lambda": st.lam,
        "residual": st.residual,
        "v_inf": float(np.max(np.abs(st.v))),
        "r_eps": r_eps,
        "v_ratio": float(np.max(np.abs(st.v))) / r_eps,
        "lipschitz": lip,
        "lipschitz_scaled": lip / eps,
        "step_ratio": st.step_norms[1] / st.step_norms[0] if len(st.step_norms) > 1 else 0.0,
    }


# ----------------------------------------------------------------------------
# balancing


def balance_run(eps: float, n: int = 3, m: int | None = None, lump_volume_1: float = 1.0, lump_volume_2: float = 2.0,
                R_max: float = 16.0, params: SolverParams = SolverParams()) -> dict:
    caps = make_caps(m or n, n, lump_volume_1, lump_volume_2)
    a = lambda_of_scaling(R_max, 1.0, eps, caps, params)
    b = lambda_of_scaling(1.0, R_max, eps, caps, params)
    # same search as the CLI: double from R_max = 2 up to the configured cap
    res = find_balanced_scaling(eps, caps, params, R_max=min(2.0, R_max), R_cap=R_max)
    return {
        "eps": eps,
        "lambda_Rmax_1": a.lam,
        "lambda_1_Rmax": b.lam,
        "R0": res.R0,
        "Q0": res.Q0,
        "lambda_root": res.lam,
        "lambda_11": res.lam_scale,
        "probes": len(res.probes),
    }


def deform_point(eps: float, n: int = 3, m: int | None = None, alpha: float | None = None, h_t: float = 0.05,
                 gamma: float = 0.25, lump_volume_1: float = 1.0, lump_volume_2: float = 2.0,
                 pairing: float = 1.0, quad_coeff: float = 0.5, samples: int = 9) -> dict:
    caps = deformation_caps(m or n, lump_volume_1, lump_volume_2, pairing, quad_coeff, codim=n)
    g = build_glued_geometry(*caps, eps, alpha=alpha, h_t=h_t)
    prob = DeformationProblem(g, gamma)
    res = solve_deformation(prob, samples=samples)
    st = res.state
    e = eps ** (n - 2)
    return {
        "eps": eps,
        "r": st.r,
        "s": st.s,
        "sum_scaled": (st.r + st.s) / e,
        "G": st.G_value,
        "E1": st.E1,
        "E2": st.E2,
        "lambda": st.lam,
        "lambda_scale": res.lam_scale,
        "int_S": res.integral_S,
        "volume": res.volume,
        "sup_S": res.sup_S,
        "curve_lipschitz": res.lipschitz,
        "kappa": prob.kappa,
    }


# ----------------------------------------------------------------------------
# discrete identities


def identity_errors(eps: float, n: int = 3, m: int | None = None, alpha: float | None = None,
                    h_t: float = 0.05, lump_volume_1: float = 1.0, lump_volume_2: float = 2.0,
                    instances: int = 100, seed: int = 0) -> dict:
    """Worst relative defects over random fields: divergence, adjointness, partition, beta."""
    caps = make_caps(m or n, n, lump_volume_1, lump_volume_2)
    g = build_glued_geometry(*caps, eps, alpha=alpha, h_t=h_t)
    rng = np.random.default_rng(seed)
    w = g.vol_weight
    div = adj = 0.0
    for _ in range(instances):
        f = rng.standard_normal(g.size)
        h = rng.standard_normal(g.size)
        Lf, Lh = laplacian_apply(g, f), laplacian_apply(g, h)
        div = max(div, abs(integrate(Lf, g)) / float(np.dot(np.abs(Lf), w)))
        lhs, rhs = integrate(h * Lf, g), integrate(f * Lh, g)
        adj = max(adj, abs(lhs - rhs) / float(np.dot(np.abs(h * Lf) + np.abs(f * Lh), w)))
    c = g.cutoffs
    basis = make_projection_basis(g)
    return {
        "eps": eps,
        "divergence": div,
        "adjointness": adj,
        "partition": float(np.max(np.abs(c.chi1 + c.chiP + c.chi2 - 1.0))),
        "beta": abs(integrate(basis.beta, g)) / float(np.dot(np.abs(basis.beta), w)),
    }
