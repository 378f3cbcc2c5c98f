import math

import numpy as np
import pytest
from scipy.integrate import quad

from scalarflat.errors import ResolutionError, ValidationError
from scalarflat.geometry import (H_T_FLOOR, ModelCap, NeckChart, build_glued_geometry, chart_map,
                                 conformal_factor, default_alpha, make_cutoffs, smoothstep, sphere_area)


def test_sphere_area_closed_forms():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(4) == pytest.approx(2 * math.pi**2)


def test_smoothstep_endpoints_and_c2():
    assert smoothstep(0.0) == 0.0 and smoothstep(1.0) == 1.0
    assert smoothstep(-3.0) == 0.0 and smoothstep(7.0) == 1.0
    assert smoothstep(0.5) == pytest.approx(0.5)
    h = 1e-4
    for x in (0.0, 1.0):
        d1 = (smoothstep(x + h) - smoothstep(x - h)) / (2 * h)
        d2 = (smoothstep(x + h) - 2 * smoothstep(x) + smoothstep(x - h)) / h**2
        assert abs(d1) < 1e-6 and abs(d2) < 1e-3


@pytest.mark.parametrize("side,t,expected", [(1, "log", 1.0), (1, 0.0, "eps"), (2, "-log", 1.0)])
def test_chart_map_values(side, t, expected):
    eps = 0.05
    tt = {"log": math.log(eps), "-log": -math.log(eps)}.get(t, t)
    exp = eps if expected == "eps" else expected
    assert chart_map(side, tt, eps) == pytest.approx(exp)


def test_chart_map_rejects_out_of_range():
    with pytest.raises(ValidationError):
        chart_map(1, 5.0, 0.05)
    with pytest.raises(ValidationError):
        chart_map(3, 0.0, 0.05)


def test_neck_chart_validation():
    with pytest.raises(ValidationError):
        NeckChart(eps=2.0**-4, alpha=1.0, n=3)  # alpha > |log eps| - 2
    with pytest.raises(ValidationError):
        NeckChart(eps=1.5, alpha=0.5, n=3)
    with pytest.raises(ResolutionError):
        NeckChart(eps=0.01, alpha=0.5, n=3, h_t_max=0.1)
    nc = NeckChart(eps=0.01, alpha=0.5, n=3)
    assert nc.h_t <= H_T_FLOOR
    assert np.allclose(nc.t_nodes, -nc.t_nodes[::-1], atol=1e-14)
    assert nc.t_nodes[0] == pytest.approx(math.log(0.01))


def test_cutoff_plateaus_and_partition():
    nc = NeckChart(eps=0.01, alpha=1.2, n=3)
    c = make_cutoffs(nc)
    t = nc.t_nodes
    z = c.zeta[1:-1]
    assert np.all(z[t <= -1] == 1.0) and np.all(z[t >= 1] == 0.0)
    eta = c.eta_plus[1:-1]
    assert np.all(eta[t <= nc.L - 1] == 1.0) and eta[-1] == 0.0
    i0 = np.argmin(np.abs(t))
    assert eta[i0] + c.eta_minus[1:-1][i0] == 2.0
    assert np.max(np.abs(c.chi1 + c.chiP + c.chi2 - 1)) < 1e-15
    for prof in (c.zeta, c.chi1, c.chi2, c.chiP, c.phi1, c.phi2):
        assert prof.min() >= 0 and prof.max() <= 1
    # phi_i = 1 wherever chi_i > 0
    assert np.all(c.phi1[c.chi1 > 0] == 1.0)
    assert np.all(c.phi2[c.chi2 > 0] == 1.0)
    assert np.all(np.diff(c.chi1[1:-1]) <= 0) and np.all(np.diff(c.phi2[1:-1]) >= 0)


def test_conformal_factor_center_value():
    # n = 3, eps = 0.01: u(0) = 2 * 0.01**0.5 = 0.2
    nc = NeckChart(eps=0.01, alpha=default_alpha(0.01, 3), n=3)
    u = conformal_factor(nc)
    i0 = np.argmin(np.abs(nc.t_nodes))
    assert nc.t_nodes[i0] == pytest.approx(0.0, abs=1e-12)
    assert u[i0] == pytest.approx(0.2, rel=1e-14)
    assert np.allclose(u, u[::-1], rtol=1e-13)
    assert np.argmin(u) == i0


def test_conformal_factor_near_cap1_end():
    # u / (eps^k e^{-kt}) - 1 = e^{2kt}, which is eps^{n-2} e^{n-2} at t = log eps + 1
    eps, n = 2.0**-8, 4
    nc = NeckChart(eps=eps, alpha=1.0, n=n)
    u = conformal_factor(nc)
    t = nc.t_nodes
    k = (n - 2) / 2
    i = np.argmin(np.abs(t - (math.log(eps) + 1)))
    rel = u[i] / (eps**k * math.exp(-k * t[i])) - 1
    assert rel == pytest.approx(math.exp(2 * k * t[i]), rel=1e-10)
    assert abs(rel) <= 1.1 * eps ** (n - 2) * math.exp(n - 2)


def test_volume_matches_quadrature(sym_geom):
    g = sym_geom
    n = g.n
    om = sphere_area(n)

    def dens(t):
        return om * g.u_function(np.array([t]))[0] ** (2 * n / (n - 2))

    neck, _ = quad(dens, -g.neck.L, g.neck.L, limit=200)
    assert g.vol_weight[1:-1].sum() == pytest.approx(neck, rel=2e-3)
    assert g.volume == pytest.approx(neck + 2.0, rel=2e-3)
    assert np.all(g.vol_weight > 0)


def test_neck_volume_binomial_closed_form():
    # on |t| <= L - 1 with n = 3: u^6 = eps^3 (e^{-t/2} + e^{t/2})^6 = eps^3 sum_j C(6, j) e^{(j - 3) t}
    g = build_glued_geometry(ModelCap(3, 1.0, 1), ModelCap(3, 1.0, 2), 2.0**-8)
    t = g.t
    sel = np.abs(t) <= g.neck.L - 1
    a, b = t[sel][0], t[sel][-1]
    exact = 0.0
    for j in range(7):
        p = j - 3
        exact += math.comb(6, j) * (b - a if p == 0 else (math.exp(p * b) - math.exp(p * a)) / p)
    exact *= sphere_area(3) * g.eps**3
    cells = g.vol_weight[1:-1][sel].copy()
    cells[[0, -1]] *= 0.5
    assert cells.sum() == pytest.approx(exact, rel=2e-3)


def test_symmetric_geometry_is_symmetric(sym_geom):
    g = sym_geom
    assert np.allclose(g.vol_weight, g.vol_weight[::-1], rtol=1e-13)
    assert np.allclose(g.conductance, g.conductance[::-1], rtol=1e-13)
    assert np.allclose(g.cutoffs.chi1, g.cutoffs.chi2[::-1])


def test_homothety_scales_lump_measure():
    caps = (ModelCap(3, 1.0, 1), ModelCap(3, 1.0, 2))
    g1 = build_glued_geometry(*caps, 2.0**-7, R=1.0)
    g4 = build_glued_geometry(*caps, 2.0**-7, R=4.0)
    assert g4.lump_measure(1) / g1.lump_measure(1) == pytest.approx(4.0**1.5)
    assert g4.lump_measure(2) == g1.lump_measure(2)


def test_build_rejects_mismatched_caps():
    with pytest.raises(ValidationError):
        build_glued_geometry(ModelCap(3, 1.0, 1), ModelCap(4, 1.0, 2), 0.01)
    with pytest.raises(ValidationError):
        build_glued_geometry(ModelCap(3, 1.0, 1), ModelCap(3, 1.0, 2), 0.01, R=-1.0)
    with pytest.raises(ValidationError):
        ModelCap(3, -1.0)


def test_cap_graph_orders_lump_first(asym_geom):
    g = asym_geom
    for side in (1, 2):
        w, c, idx = g.cap_graph(side)
        assert idx[0] == (0 if side == 1 else g.size - 1)
        assert w.size == c.size + 1 == g.size - 1
        rho = g.eps * np.exp(-g.t) if side == 1 else g.eps * np.exp(g.t)
        r = rho[idx[1:] - 1]
        assert r[0] == pytest.approx(1.0) and r[-1] == pytest.approx(g.eps**2)
        assert np.all(np.diff(r) < 0)
