import numpy as np
import pytest

from scalarflat.balance import (DeformState, DeformationProblem, SolverParams, curve_lipschitz,
                                deformation_caps, find_balanced_scaling, green_formula_defect,
                                lambda_of_scaling, scaling_path)
from scalarflat.errors import AssumptionViolation, ValidationError
from scalarflat.geometry import ModelCap, build_glued_geometry
from scalarflat.linsolve import make_projection_basis

EPS = 2.0**-6


def test_scaling_path_endpoints():
    assert scaling_path(0.0, 16.0) == (16.0, 1.0)
    assert scaling_path(1.0, 16.0) == (1.0, 16.0)
    assert scaling_path(0.5, 16.0) == pytest.approx((4.0, 4.0))


def test_symmetric_caps_balance_at_identity():
    caps = (ModelCap(3, 1.0, 1), ModelCap(3, 1.0, 2))
    p = lambda_of_scaling(1.0, 1.0, EPS, caps)
    assert abs(p.lam) <= 1e-12 * max(1.0, abs(p.S))
    res = find_balanced_scaling(EPS, caps)
    assert (res.R0, res.Q0) == (1.0, 1.0)


def test_mirror_flips_lambda():
    caps = (ModelCap(3, 1.0, 1), ModelCap(3, 2.0, 2))
    mirror = (ModelCap(3, 2.0, 1), ModelCap(3, 1.0, 2))
    a = lambda_of_scaling(1.5, 1.0, EPS, caps)
    b = lambda_of_scaling(1.0, 1.5, EPS, mirror)
    c2 = make_projection_basis(build_glued_geometry(*caps, EPS, R=1.5)).c2
    # lambda * beta is mirror invariant and beta' = -beta / c2 reflected
    assert b.lam == pytest.approx(-c2 * a.lam, rel=1e-8)
    assert b.S == pytest.approx(a.S, rel=1e-12)
    assert np.sign(a.lam_hat) == np.sign(a.lam)
    assert a.green_defect <= 1e-12 * max(1.0, a.norm_F)


def test_lambda_rejects_bad_scaling():
    caps = (ModelCap(3, 1.0, 1), ModelCap(3, 1.0, 2))
    with pytest.raises(ValidationError):
        lambda_of_scaling(0.0, 1.0, EPS, caps)


def test_green_formula_defect_vanishes(asym_geom, rng):
    u = rng.standard_normal(asym_geom.size)
    chi = asym_geom.cutoffs.chi1
    assert abs(green_formula_defect(asym_geom, u, chi)) <= 1e-12 * np.sum(asym_geom.conductance)


def test_ricci_flat_caps_are_refused():
    caps = deformation_caps(3, pairing=0.0)
    with pytest.raises(AssumptionViolation) as exc:
        DeformationProblem(build_glued_geometry(*caps, EPS))
    assert exc.value.exit_code == 4


def test_unnormalized_profiles_rejected():
    caps = deformation_caps(3, pairing=2.0)
    with pytest.raises(ValidationError):
        DeformationProblem(build_glued_geometry(*caps, EPS))


@pytest.fixture(scope="module")
def problem():
    return DeformationProblem(build_glued_geometry(*deformation_caps(3, 1.0, 2.0, quad_coeff=0.5), EPS))


@pytest.fixture(scope="module")
def linear_problem():
    return DeformationProblem(build_glued_geometry(*deformation_caps(3, 1.0, 2.0, quad_coeff=0.0), EPS))


def test_G_at_zero_field_is_linear_without_quadratic_term(linear_problem):
    p = linear_problem
    v = np.zeros(p.geom.size)
    for r, s in ((0.1 * EPS, 0.3 * EPS), (0.5 * EPS, 0.5 * EPS), (0.9 * EPS, 0.0)):
        assert p.G(r, s, v) == pytest.approx(-EPS + r + s, abs=1e-14)
    assert p.solve_s(0.25 * EPS, v) == pytest.approx(0.75 * EPS, rel=1e-12)


def test_G_quadratic_term_and_split(problem, rng):
    p = problem
    v0 = np.zeros(p.geom.size)
    r, s = 0.3 * EPS, 0.6 * EPS
    assert p.G(r, s, v0) == pytest.approx(-EPS + r + s + 0.5 * (r * r + s * s), rel=1e-12)
    v = 1e-3 * rng.standard_normal(p.geom.size)
    G, E1, E2 = p.split(r, s, v)
    assert G == pytest.approx(p.G(r, s, v), rel=1e-10, abs=1e-16)
    assert E2 == pytest.approx(0.5 * (r * r * (1 + v[0]) + s * s * (1 + v[-1])), rel=1e-12)


def test_solve_s_root(problem, rng):
    p = problem
    v = 1e-3 * rng.standard_normal(p.geom.size)
    r = 0.4 * EPS
    s = p.solve_s(r, v)
    assert abs(p.G(r, s, v)) <= 1e-13
    assert s == pytest.approx(EPS - r, rel=0.05)


def test_solve_along_stays_on_zero_set(problem):
    st = problem.solve_along(0.5 * EPS)
    assert abs(st.G_value) <= 1e-13
    assert (st.r + st.s) / EPS == pytest.approx(1.0, abs=0.05)
    S_t = problem.final_curvature(st)
    vol = problem.final_volume_form(st)
    assert np.all(vol > 0)
    # Delta v = F-bar - lambda beta, so the final curvature is -lambda beta (1+v)^{-p} / c_m
    u = 1 + st.v
    pred = -st.lam * problem.basis.beta * u ** (-5.0) / problem.c_m
    assert np.max(np.abs(S_t - pred)) <= 1e-8 * np.max(np.abs(problem.S_g))


def test_curve_lipschitz():
    mk = lambda r, s: DeformState(r, s, 0.0, 0.0, 0.0, np.zeros(1), 0.0)
    assert curve_lipschitz([mk(0.2, 0.8), mk(0.0, 1.0), mk(0.5, 0.2)]) == pytest.approx(2.0)
