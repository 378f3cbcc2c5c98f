import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from scalarflat.curvature import (DeformationProfile, F_bar, F_eps, choose_S, conformal_scalar_curvature,
                                  constants, deformation_profile, f_nonlin, laplacian_apply,
                                  pairing_integral, printed_neck_laplacian, scalar_curvature)
from scalarflat.errors import DomainError, SupportError
from scalarflat.fields import integrate
from scalarflat.geometry import ModelCap, build_glued_geometry

GEOM = build_glued_geometry(ModelCap(3, 1.0, 1), ModelCap(3, 2.0, 2), 2.0**-6)
fields = arrays(np.float64, GEOM.size, elements=st.floats(-10, 10, allow_nan=False))


def test_constants():
    cc = constants(GEOM)
    assert cc.c_m == pytest.approx(-1 / 8)
    assert cc.p_exp == 5.0
    cc4 = constants(build_glued_geometry(ModelCap(4, 1.0, 1), ModelCap(4, 1.0, 2), 2.0**-7, alpha=1.0))
    assert cc4.c_m == pytest.approx(-1 / 6) and cc4.p_exp == 3.0


@pytest.mark.parametrize("n", [3, 4, 5])
def test_neck_curvature_fd_error_closed_form(n):
    # u = 2 eps^k cosh(kt) is exactly scalar flat; central differences leave
    # -u''_h + k^2 u = k^2 u (1 - 2(cosh(kh) - 1)/(k h)^2)
    eps, h, k = 0.01, 0.05, (n - 2) / 2
    t = np.linspace(-2, 2, 9)
    u = lambda s: 2 * eps**k * np.cosh(k * s)
    S = conformal_scalar_curvature(u, t, h, n)
    c_n = (n - 2) / (4 * (n - 1))
    defect = k * k * (1 - 2 * (np.cosh(k * h) - 1) / (k * h) ** 2)
    expect = u(t) ** (-4 / (n - 2)) * defect / c_n
    assert np.allclose(S, expect, rtol=1e-6)


def test_neck_curvature_second_order(sym_geom):
    t = np.array([0.0, 0.3])
    u = sym_geom.u_function
    errs = [np.max(np.abs(conformal_scalar_curvature(u, t, h, 3))) for h in (0.04, 0.02, 0.01)]
    assert errs[0] / errs[1] == pytest.approx(4, rel=1e-2)
    assert errs[1] / errs[2] == pytest.approx(4, rel=1e-2)


def test_scalar_curvature_zero_on_lumps_without_deformation():
    S = scalar_curvature(GEOM)
    assert S[0] == 0.0 and S[-1] == 0.0
    assert np.all(np.isfinite(S))


@settings(max_examples=40, deadline=None)
@given(fields, fields)
def test_laplacian_conservative_and_self_adjoint(f, g):
    Lf, Lg = laplacian_apply(GEOM, f), laplacian_apply(GEOM, g)
    scale = np.sum(GEOM.conductance) * (1 + np.max(np.abs(f))) * (1 + np.max(np.abs(g)))
    assert abs(integrate(Lf, GEOM)) <= 1e-12 * scale
    assert abs(integrate(g * Lf, GEOM) - integrate(f * Lg, GEOM)) <= 1e-12 * scale
    assert integrate(f * Lf, GEOM) <= 1e-12 * scale


def test_laplacian_kills_constants():
    assert np.max(np.abs(laplacian_apply(GEOM, np.full(GEOM.size, 3.7)))) < 1e-12


def test_flux_and_printed_stencils_agree_on_smooth_field(sym_geom):
    g = sym_geom
    f = np.zeros(g.size)
    f[g.neck_slice] = np.sin(g.t)
    flux = laplacian_apply(g, f)[g.neck_slice]
    printed = printed_neck_laplacian(g, f)
    inner = np.abs(g.t) <= g.neck.L - 1.5
    rel = np.abs(flux[inner] - printed[inner]) / np.max(np.abs(printed[inner]))
    assert rel.max() < 5e-3
    assert np.isnan(printed[0]) and np.isnan(printed[-1])


def test_F_eps_at_zero_is_minus_c_S_g():
    S_g = scalar_curvature(GEOM)
    out = F_eps(np.zeros(GEOM.size), 0.0, GEOM, S_g)
    assert np.allclose(out, -constants(GEOM).c_m * S_g, rtol=1e-15)
    assert np.allclose(F_bar(np.zeros(GEOM.size), GEOM, S_g), out)


def test_F_eps_domain():
    v = np.zeros(GEOM.size)
    v[3] = -1.0
    with pytest.raises(DomainError):
        F_eps(v, 0.0, GEOM)


def test_f_nonlin_quadratic_leading_order():
    v = np.array([1e-3, -1e-3])
    assert np.allclose(f_nonlin(v, 3), 10 * v**2, rtol=5e-3)  # p(p-1)/2 = 10 for p = 5
    assert f_nonlin(np.array([1.0]), 4)[0] == pytest.approx(8 - 1 - 3)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, GEOM.size, elements=st.floats(-0.1, 0.1)))
def test_choose_S_annihilates_mean(v):
    S_g = scalar_curvature(GEOM)
    S = choose_S(v, GEOM, S_g)
    scale = integrate(np.abs(S_g), GEOM) + abs(S) * GEOM.volume
    assert abs(integrate(F_eps(v, S, GEOM, S_g), GEOM)) <= 1e-12 * scale


def test_choose_S_at_zero_is_mean_curvature():
    S_g = scalar_curvature(GEOM)
    assert choose_S(np.zeros(GEOM.size), GEOM, S_g) == pytest.approx(integrate(S_g, GEOM) / GEOM.volume)


def test_deformation_profile_and_pairing():
    caps = (ModelCap(3, 1.0, 1, ricci_pairing=0.7), ModelCap(3, 2.0, 2, ricci_pairing=-1.3))
    g = build_glued_geometry(*caps, 2.0**-6)
    for side, val in ((1, 0.7), (2, -1.3)):
        d = deformation_profile(g, side)
        assert integrate(d.profile, g) == pytest.approx(1.0)
        assert pairing_integral(d, g) == pytest.approx(val)
    bad = DeformationProfile(1, np.ones(g.size), 1.0, 0.5)
    with pytest.raises(SupportError):
        pairing_integral(bad, g)


def test_deformed_curvature_adds_lump_terms():
    caps = (ModelCap(3, 1.0, 1, ricci_pairing=1.0, quad_coeff=0.5), ModelCap(3, 2.0, 2, ricci_pairing=1.0))
    base = build_glued_geometry(*caps, 2.0**-6)
    dg = build_glued_geometry(*caps, 2.0**-6, deform=(0.1, 0.2))
    diff = scalar_curvature(dg) - scalar_curvature(base)
    assert np.all(diff[1:-1] == 0.0)
    assert integrate(diff, dg) == pytest.approx(0.1 + 0.5 * 0.01 + 0.2 + 0.5 * 0.04)
