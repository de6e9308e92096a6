import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st
from scipy import integrate

from conftest import NAV, SQUARE, samples_of
from finslerjet import deform as dfm
from finslerjet import finsler as fin
from finslerjet.errors import DegenerateFamilyError, DomainError, InversionError
from finslerjet.jets import fd_oracle
from finslerjet.gallery import build_thm2iic, c_field, chart_points, h_mu_field, rho_field
from finslerjet.phiode import ABParams
from finslerjet.riemannian import MetricField, OneFormField, alpha_spray, check_space_form

GENERAL = ABParams(1.0, 0.5, -0.5, 0.3)
N = 3


# sigma ------------------------------------------------------------------------------

def test_sigma_zero():  # [TRIVIAL]
    assert dfm.sigma_of(0.0, GENERAL) == 0.0


def test_sigma_square():  # [DERIVED] 2 sigma = 3 ln(1 - t)
    assert dfm.sigma_of(0.19, SQUARE) == pytest.approx(1.5 * math.log(0.81), abs=1e-15)


@pytest.mark.parametrize("p", [SQUARE, ABParams(-2.0, 0.0, 3.0), ABParams(1.0, 0.0, 0.5)])
def test_sigma_closed_vs_quadrature(p):  # [DERIVED] dual-route oracle for k2 = 0
    for t in (0.05, 0.2, 0.4):
        q, _ = integrate.quad(lambda r: (p.k2 * r + p.k3) / (1 + (p.k1 + p.k3) * r + p.k2 * r * r), 0, t,
                              epsabs=1e-14, epsrel=1e-13)
        assert abs(dfm.sigma_of(t, p) - 0.5 * q) < 1e-12


def test_sigma_general_vs_sympy():  # [DERIVED] symbolic antiderivative
    r = sp.symbols("r")
    expr = (sp.Rational(1, 2) * r - sp.Rational(1, 2)) / (1 + sp.Rational(1, 2) * r + sp.Rational(1, 2) * r**2)
    for t in (0.1, 0.6, 1.5):
        exact = float(sp.integrate(expr, (r, 0, sp.Float(t, 30))) / 2)
        assert abs(dfm.sigma_of(t, GENERAL) - exact) < 1e-12


def test_sigma_domain_error():  # [TRIVIAL]
    with pytest.raises(DomainError):
        dfm.sigma_of(1.0, SQUARE)


# triples --------------------------------------------------------------------------------

def test_explicit_triple_at_zero():  # [TRIVIAL]
    T = dfm.triple_explicit(0.0, GENERAL)
    assert (T.u, T.v, T.w, T.sigma) == (1.0, GENERAL.k1 + GENERAL.k3, 1.0, 0.0)


@given(st.floats(0.0, 0.9))
def test_explicit_triple_square_closed_form(t):  # [DERIVED] substitute 2 sigma = 3 ln(1 - t)
    T = dfm.triple_explicit(t, SQUARE)
    assert T.u == pytest.approx((1 - t) ** 3, rel=1e-13, abs=1e-15)
    assert T.v == pytest.approx(-((1 - t) ** 3), rel=1e-13, abs=1e-15)
    assert T.w == pytest.approx((1 - t) ** 2, rel=1e-13, abs=1e-15)
    assert T.du == pytest.approx(-3 * (1 - t) ** 2, rel=1e-12, abs=1e-14)


@given(st.floats(0.0, 0.4))
def test_triple_ode_residuals(t):  # [DERIVED] / [PAPER]
    assert max(dfm.triple_ode_residual(dfm.triple_explicit(t, SQUARE), SQUARE)) < 1e-10
    assert max(dfm.triple_ode_residual(dfm.triple_remark(t, SQUARE), SQUARE)) < 1e-12
    assert max(dfm.triple_ode_residual(dfm.triple_explicit(t, GENERAL), GENERAL)) < 1e-10
    minus = ABParams(-2.0, 0.0, 3.0, 0.5)
    assert max(dfm.triple_ode_residual(dfm.triple_remark(t, minus), minus)) < 1e-12


def test_remark_triple_values():  # [PAPER] u = (1-t)^2, v = 0, w = sqrt(1-t)
    T = dfm.triple_remark(0.3, SQUARE)
    assert (T.u, T.v, T.w) == (pytest.approx(0.49), 0.0, pytest.approx(math.sqrt(0.7)))
    with pytest.raises(DegenerateFamilyError):
        dfm.triple_remark(0.3, GENERAL)
    with pytest.raises(DegenerateFamilyError):
        dfm.triple_uvw("bogus", SQUARE, 0.1)


def test_corrupted_w_residual():  # [DERIVED] sensitivity probe
    T = dfm.triple_explicit(0.2, GENERAL)
    bad = dfm.DeformationTriple(T.t, T.u, T.v, 1.01 * T.w, T.du, T.dv, T.dw, T.sigma)
    r1, r2, r3 = dfm.triple_ode_residual(bad, GENERAL)
    assert max(r1, r2) < 1e-12
    assert 1e-4 < r3 < 1e-1


# forward deformation ------------------------------------------------------------------------

def _metric(X):
    x, y, z = X
    return [[1 + 0.1 * x * x, 0.05 * y, 0.0], [0.05 * y, 1.2, 0.1 * z], [0.0, 0.1 * z, 0.9 + 0.2 * x * y]]


ALPHA = MetricField(N, _metric)
BETA = OneFormField(N, lambda X: [0.2 + 0.1 * X[1], -0.1 * X[0], 0.15 + 0.05 * X[2]])


def test_deform_zero_form():  # [TRIVIAL]
    zero = OneFormField(N, lambda X: [0.0, 0.0, 0.0])
    for sel, p in [("explicit", GENERAL), ("remark", SQUARE)]:
        r = dfm.deform(ALPHA, zero, p, sel, [0.1, 0.2, 0.3], [1.0, -0.4, 0.2])
        y = np.array([1.0, -0.4, 0.2])
        alpha = math.sqrt(y @ ALPHA.matrix([0.1, 0.2, 0.3]) @ y)
        u0 = dfm.triple_uvw(sel, p, 0.0)[0]
        assert r.h_val == pytest.approx(math.sqrt(u0) * alpha, rel=1e-14)
        assert r.rho_val == 0.0


@pytest.mark.parametrize("sel,p", [("explicit", GENERAL), ("explicit", SQUARE), ("remark", SQUARE)])
def test_p2_identity(sel, p):  # [PAPER] |rho|_h^2 = w^2 b^2 / (u + v b^2)
    r = dfm.deform(ALPHA, BETA, p, sel, [0.0] * N, [1.0, 0.0, 0.0])
    rng = np.random.default_rng(0)
    for x in chart_points(0.0, N, 10, rng):
        H, rho = r.h.matrix(x), r.rho.vector(x)
        a, b = ALPHA.matrix(x), BETA.vector(x)
        t = float(b @ np.linalg.solve(a, b))
        u, v, w = dfm.triple_uvw(sel, p, t)
        assert abs(rho @ np.linalg.solve(H, rho) - w * w * t / (u + v * t)) < 1e-10


def test_square_remark_substitution():  # [DERIVED] h = (1 - b^2) alpha, rho = sqrt(1 - b^2) beta
    x, y = [0.1, -0.2, 0.3], np.array([0.3, 1.0, -0.5])
    r = dfm.deform(ALPHA, BETA, SQUARE, "remark", x, y)
    a, b = ALPHA.matrix(x), BETA.vector(x)
    t = float(b @ np.linalg.solve(a, b))
    assert r.h_val == pytest.approx((1 - t) * math.sqrt(y @ a @ y), rel=1e-14)
    assert r.rho_val == pytest.approx(math.sqrt(1 - t) * (b @ y), rel=1e-14)
    assert float(dfm.p2_of_t("remark", SQUARE, t)) == pytest.approx(t / (1 - t), rel=1e-14)


# inversion ------------------------------------------------------------------------------------------

@given(st.floats(0.0, 10.0))
def test_remark_inversion_closed_form(p2):  # [PAPER] b^2 = p^2 / (1 + p^2)
    assert abs(dfm.solve_b2(p2, SQUARE, "remark") - p2 / (1 + p2)) < 1e-12


@given(st.floats(0.0, 0.4))
def test_inversion_eps_minus(p2):  # [PAPER] b^2 = p^2 / (1 - p^2)
    p = ABParams(-2.0, 0.0, 3.0, 0.5)
    assert abs(dfm.solve_b2(p2, p, "remark") - p2 / (1 - p2)) < 1e-12


@given(st.floats(0.0, 0.5))
def test_explicit_inversion_roundtrip(t):  # [DERIVED]
    for p in (SQUARE, GENERAL):
        p2 = float(dfm.p2_of_t("explicit", p, t))
        assert abs(dfm.solve_b2(p2, p, "explicit") - t) < 1e-12


def test_inversion_errors():  # [TRIVIAL]
    assert dfm.solve_b2(0.0, GENERAL, "explicit") == 0.0
    with pytest.raises(InversionError):
        dfm.solve_b2(-0.1, SQUARE, "remark")
    with pytest.raises(InversionError):
        dfm.solve_b2(2.0, ABParams(-2.0, 0.0, 3.0, 0.5), "remark")


def test_invert_zero_form():  # [TRIVIAL] p^2 = 0
    h = h_mu_field(1.0, N)
    zero = OneFormField(N, lambda X: [0.0, 0.0, 0.0])
    r = dfm.invert_deform(h, zero, GENERAL, "explicit", [0.1, 0.2, 0.0])
    u0 = dfm.triple_uvw("explicit", GENERAL, 0.0)[0]
    assert r.b2 == 0.0
    np.testing.assert_allclose(r.alpha.matrix([0.1, 0.2, 0.0]), h.matrix([0.1, 0.2, 0.0]) / u0, atol=1e-15)
    assert np.all(r.beta.vector([0.1, 0.2, 0.0]) == 0)


@pytest.mark.parametrize("sel,p", [("explicit", GENERAL), ("explicit", SQUARE), ("remark", SQUARE)])
def test_round_trip(sel, p):  # [DERIVED] deform(invert(h, rho)) = (h, rho)
    h, rho = h_mu_field(NAV.mu, N), rho_field(NAV)
    rng = np.random.default_rng(1)
    for x in chart_points(NAV, N, 8, rng):
        inv = dfm.invert_deform(h, rho, p, sel, x)
        hf, rf, _ = dfm.deform_fields(inv.alpha, inv.beta, p, sel)
        assert np.abs(hf.matrix(x) - h.matrix(x)).max() < 1e-10
        assert np.abs(rf.vector(x) - rho.vector(x)).max() < 1e-10
        # and the other direction
        hf2, rf2, _ = dfm.deform_fields(ALPHA, BETA, p, sel)
        inv2 = dfm.invert_deform(hf2, rf2, p, sel, x)
        assert np.abs(inv2.alpha.matrix(x) - ALPHA.matrix(x)).max() < 1e-10
        assert np.abs(inv2.beta.vector(x) - BETA.vector(x)).max() < 1e-10


# verification helpers -------------------------------------------------------------------------

def test_conformal_check():  # [PAPER] / [TRIVIAL] / [DERIVED]
    h, rho = h_mu_field(NAV.mu, N), rho_field(NAV)
    xs = chart_points(NAV, N, 10, np.random.default_rng(2))
    rep = dfm.conformal_check(h, rho, c_field(NAV), xs)
    assert rep.residual < 1e-8 and rep.antisym < 1e-12
    flat = MetricField(N, lambda X: [[1.0 if i == j else 0.0 for j in range(N)] for i in range(N)])
    par = OneFormField(N, lambda X: [0.2, 0.0, -0.1])
    assert dfm.conformal_check(flat, par, lambda X: 0.0, xs).residual == 0
    c = c_field(NAV)
    off = dfm.conformal_check(h, rho, lambda X: c(X) + 0.01, xs)
    assert 0.5 * 0.02 * off.scale < off.residual < 1.5 * 0.02 * off.scale


@pytest.mark.parametrize("fam_name", ["square_family", "general_family", "square_remark_family"])
def test_spray_relation(fam_name, request):  # [PAPER]
    fam = request.getfixturevalue(fam_name)
    pts = samples_of(fam, 6)
    assert dfm.spray_relation_check(fam.F.g, fam.F.b, fam.params, fam.selector, fam.tau_fn, pts) < 1e-6


def test_spray_relation_parallel():  # [TRIVIAL] tau = 0: G_h = G_alpha
    h = h_mu_field(0.8, N)
    zero = OneFormField(N, lambda X: [0.0, 0.0, 0.0])
    x, y = [0.1, 0.2, -0.1], [1.0, 0.3, 0.2]
    assert dfm.spray_relation_residual(h, zero, SQUARE, "remark", lambda X: 0.0, x, y) == 0.0


def test_spray_relation_fd_oracle(general_family):  # [DERIVED] fd Christoffels of h
    fam = general_family
    hf, _, _ = dfm.deform_fields(fam.F.g, fam.F.b, fam.params, fam.selector)
    x, y = samples_of(fam, 1)[0]
    x = [float(v) for v in x]
    H = hf.matrix(x)
    dH = np.zeros((N, N, N))
    for l in range(N):
        m = [0] * N
        m[l] = 1
        for i in range(N):
            for j in range(N):
                dH[l, i, j] = fd_oracle(lambda pt: hf.matrix(pt)[i, j], x, m, 1e-3)
    low = 0.5 * (np.einsum("jlk->ljk", dH) + np.einsum("klj->ljk", dH) - dH)
    G_fd = 0.5 * np.einsum("il,ljk,j,k->i", np.linalg.inv(H), low, y, y)
    np.testing.assert_allclose(alpha_spray(hf, x, y), G_fd, atol=1e-7)


@pytest.mark.parametrize("fam_name", ["square_family", "general_family", "square_remark_family"])
def test_deformed_space_form_and_fitted_mu(fam_name, request):  # [PAPER] h has constant curvature mu
    fam = request.getfixturevalue(fam_name)
    hf, _, _ = dfm.deform_fields(fam.F.g, fam.F.b, fam.params, fam.selector)
    rep = check_space_form(hf, None, samples_of(fam, 8))
    assert rep.residual < 1e-6 and rep.mu_spread < 1e-6
    assert rep.mu_fit == pytest.approx(NAV.mu, abs=1e-6)


def test_lambda_variants(square_family):  # [DERIVED] k1 b^2 variant fits the curvature, k2 b^2 does not
    fam = square_family
    printed = build_thm2iic(NAV, SQUARE, "explicit", lambda_variant="printed")
    pts = samples_of(fam, 6)
    good = fin.projflat_conditions_check(fam.F, fam.tau_fn, fam.lambda_fn, pts)
    bad = fin.projflat_conditions_check(printed.F, printed.tau_fn, printed.lambda_fn, pts)
    assert good.y3 < 1e-12
    assert bad.y3 > 1e-3
    # the two coincide when k1 = k2
    p = ABParams(1.0, 1.0, 0.5)
    args = (p, 1.0, 0.8, 0.1, 0.3, 0.2)
    assert dfm.lambda_identity(*args, variant="derived") == dfm.lambda_identity(*args, variant="printed")
    with pytest.raises(ValueError):
        dfm.lambda_identity(*args, variant="other")


def test_triple_choice_irrelevant_to_verdicts(square_family, square_remark_family):  # [PAPER]
    for fam in (square_family, square_remark_family):
        pts = samples_of(fam, 5)
        assert fin.proj_flat_verdict(fam.F, pts).passed
        r = fin.projflat_conditions_check(fam.F, fam.tau_fn, fam.lambda_fn, pts)
        assert max(r.y2, r.y3, r.y4) < 1e-6
