"""Fixed-point iteration v -> Delta^{-1} (F(v) - lambda beta) for the projected Yamabe problem."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .curvature import F_eps, choose_S, laplacian_apply, scalar_curvature
from .errors import ConvergenceError, ValidationError
from .fields import weight, weighted_norm
from .geometry import GluedGeometry
from .linsolve import ProjectionBasis, iterate_linear_solve, make_projection_basis


@dataclass(frozen=True)
class BallParams:
    gamma: float
    r_eps: float

    def __post_init__(self):
        if not 0.0 < self.gamma < 0.5:
            raise ValidationError("gamma must lie in (0, 1/2)")
        if not self.r_eps > 0:
            raise ValidationError("ball radius must be positive")


def ball_radius(n: int, eps: float, gamma: float, c0: float) -> float:
    """c0*eps for n = 3, c0*eps**(1+gamma) for n >= 4."""
    if not 0.0 < gamma < 0.5:
        raise ValidationError("gamma must lie in (0, 1/2)")
    if n == 3:
        return c0 * eps
    return c0 * eps ** (1.0 + gamma)


@dataclass
class StepResult:
    v: np.ndarray
    lam: float
    S: float
    F: np.ndarray
    linear_iterations: int


class YamabeOperator:
    """Caches the geometry-dependent pieces of the map P = Delta^{-1} o H."""

    def __init__(self, geom: GluedGeometry, gamma: float, basis: Optional[ProjectionBasis] = None,
                 linear_tol: float = 1e-13, rhs: Optional[Callable] = None):
        self.geom = geom
        self.gamma = gamma
        self.basis = basis or make_projection_basis(geom)
        self.psi = weight(geom)
        self.S_g = scalar_curvature(geom)
        self.linear_tol = linear_tol
        self._rhs = rhs

    def rhs(self, v):
        """Return (F(v), S) with the constant S making F mean-zero."""
        if self._rhs is not None:
            return self._rhs(v)
        S = choose_S(v, self.geom, self.S_g)
        return F_eps(v, S, self.geom, self.S_g), S

    def norm(self, v, shift: float = 0.0) -> float:
        return weighted_norm(v, self.gamma + shift, self.psi)

    def step(self, v) -> StepResult:
        F, S = self.rhs(v)
        lin = iterate_linear_solve(F, self.geom, self.basis, self.gamma, tol=self.linear_tol, psi=self.psi)
        return StepResult(lin.u, lin.lam, S, F, lin.iterations)

    def residual(self, v, lam: float) -> float:
        F, _ = self.rhs(v)
        return self.norm(laplacian_apply(self.geom, v) - F + lam * self.basis.beta, 2.0)


def picard_step(v, geom: GluedGeometry, basis: Optional[ProjectionBasis] = None, gamma: float = 0.25) -> StepResult:
    return YamabeOperator(geom, gamma, basis).step(v)


@dataclass
class PicardState:
    v: np.ndarray
    S: float
    lam: float
    iteration: int
    step_norms: list
    residual: float
    history: list = field(default_factory=list)
    in_ball: Optional[bool] = None


def solve_yamabe(
    geom: GluedGeometry,
    params: BallParams,
    tol: float = 1e-13,
    max_iter: int = 25,
    op: Optional[YamabeOperator] = None,
) -> PicardState:
    """Iterate v(j+1) = P(v(j)) from v(0) = 0 until the gamma-norm step is <= tol."""
    op = op or YamabeOperator(geom, params.gamma)
    v = np.zeros(geom.size)
    steps, history = [], []
    last = None
    for j in range(1, max_iter + 1):
        last = op.step(v)
        d = op.norm(last.v - v)
        steps.append(d)
        history.append({"j": j, "step_norm": d, "S": last.S, "lambda": last.lam})
        v = last.v
        if j == 2 and steps[0] > 0 and steps[1] >= steps[0]:
            raise ConvergenceError(f"no contraction: step ratio {steps[1] / steps[0]:.3g}")
        if d <= tol:
            break
    else:
        raise ConvergenceError(f"Picard iteration did not reach tol={tol} in {max_iter} steps")
    res = op.residual(v, last.lam)
    for row in history:
        row["residual"] = np.nan
    history[-1]["residual"] = res
    in_ball = op.norm(v) <= params.r_eps
    return PicardState(v, last.S, last.lam, len(steps), steps, res, history, bool(in_ball))


def random_ball_field(op: YamabeOperator, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Random mean-zero field with gamma-norm exactly ``radius``."""
    g = op.geom
    v = rng.standard_normal(g.size)
    v -= np.dot(v, g.vol_weight) / g.volume
    return v * (radius / op.norm(v))


def lipschitz_estimate(op: YamabeOperator, radius: float, rng: np.random.Generator, samples: int = 40) -> float:
    """Lower bound for the Lipschitz constant of the Picard map on the gamma-ball.

    Maximum difference quotient over random pairs in the ball and over a
    fixed set of smooth directions (cutoffs, weight profiles) based at 0.
    """
    g = op.geom
    best = 0.0
    for _ in range(samples):
        a = random_ball_field(op, radius, rng)
        b = random_ball_field(op, radius, rng)
        best = max(best, op.norm(op.step(a).v - op.step(b).v) / op.norm(a - b))
    c = g.cutoffs
    shape = op.psi ** (-op.gamma)
    P0 = op.step(np.zeros(g.size)).v
    for d in (c.chi1, c.chi2, c.chiP, shape, c.phi1 * shape, c.phi2 * shape, np.sign(g.coordinate)):
        d = np.asarray(d, dtype=float)
        d = d - np.dot(d, g.vol_weight) / g.volume
        nd = op.norm(d)
        if nd == 0.0:
            continue
        d *= radius / nd
        best = max(best, op.norm(op.step(d).v - P0) / op.norm(d))
    return best
