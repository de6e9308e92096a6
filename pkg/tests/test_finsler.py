import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import SQUARE, samples_of
from finslerjet import finsler as fin
from finslerjet.errors import DegeneracyError, DimensionError, SingularityError
from finslerjet.gallery import NavigationData, build_thm2iic, flat_parallel, h_mu_field, perturbed
from finslerjet.phiode import ABParams, PhiSolution, phi_closed, solve_phi
from finslerjet.riemannian import MetricField, OneFormField, alpha_spray, space_form_pattern

N = 3


def _euclid(n=N):
    return MetricField(n, lambda X: [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)])


def _const_form(v):
    return OneFormField(len(v), lambda X: list(v))


ONE = PhiSolution(ABParams(1.0, 0.0, 0.5), "numeric", (-1.0, 1.0), lambda s0, order: np.eye(1, order + 1)[0])


def _curved_riemannian(mu=0.7, n=N):
    return fin.ABMetric(h_mu_field(mu, n), _const_form([0.0] * n), phi_closed("closed_square"))


def _rng_xy(rng, r=0.3):
    return rng.uniform(-r, r, N) / math.sqrt(N), rng.standard_normal(N)


# fundamental tensor -----------------------------------------------------------------

def test_fundamental_tensor_riemannian_case():  # [TRIVIAL] phi = 1
    F = fin.ABMetric(h_mu_field(0.5, N), _const_form([0.3, 0.1, 0.0]), ONE)
    x, y = [0.1, -0.2, 0.3], [0.4, 1.0, -0.5]
    np.testing.assert_allclose(fin.fundamental_tensor(F, x, y), F.g.matrix(x), atol=1e-14)


def test_fundamental_tensor_homogeneity(square_family):  # [TRIVIAL]
    for x, y in samples_of(square_family, 5):
        g1 = fin.fundamental_tensor(square_family.F, x, y)
        g2 = fin.fundamental_tensor(square_family.F, x, 2.7 * y)
        np.testing.assert_allclose(g1, g2, rtol=1e-12, atol=1e-13)


def test_fundamental_tensor_positive_square(square_family):  # [DERIVED] sweep
    for x, y in samples_of(square_family, 100, seed=4):
        assert np.linalg.det(fin.fundamental_tensor(square_family.F, x, y)) > 0


def test_fundamental_tensor_indefinite_raises():  # [TRIVIAL] phi = 1 - s^2 with b^2 > 1/2
    F = fin.ABMetric(_euclid(), _const_form([0.9, 0.0, 0.0]), phi_closed("closed_quadratic", eps=-1))
    with pytest.raises(DegeneracyError):
        fin.fundamental_tensor(F, [0, 0, 0], [0.0, 1.0, 0.0])


# spray --------------------------------------------------------------------------------

def test_spray_parallel_beta():  # [TRIVIAL] correction terms vanish
    F = fin.ABMetric(_euclid(), _const_form([0.3, 0.2, 0.1]), phi_closed("closed_square"))
    assert np.all(fin.finsler_spray(F, [0.1, 0.2, 0.3], [1.0, -0.5, 0.2]) == 0)
    G = _curved_riemannian()
    x, y = [0.1, 0.2, -0.1], [0.3, 1.0, 0.2]
    np.testing.assert_allclose(fin.finsler_spray(G, x, y), alpha_spray(G.g, x, y), atol=1e-15)


def test_spray_homogeneity(general_family):  # [TRIVIAL]
    for x, y in samples_of(general_family, 5):
        np.testing.assert_allclose(fin.finsler_spray(general_family.F, x, 1.7 * y),
                                   1.7**2 * fin.finsler_spray(general_family.F, x, y), rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("fam_name", ["square_family", "general_family", "thm3_minus"])
def test_spray_dual_route(fam_name, request):  # [DERIVED] F^2 route vs (alpha, beta) formula
    fam = request.getfixturevalue(fam_name)
    for x, y in samples_of(fam, 30, seed=2):
        a = fin.finsler_spray(fam.F, x, y)
        b = fin.finsler_spray_g1(fam.F, x, y)
        assert np.abs(a - b).max() < 1e-8 * max(1.0, np.abs(a).max())


def test_spray_delta_singularity():  # [TRIVIAL] Delta = 0 at s = 0 when b^2 = 1/2 for phi = 1 - s^2
    F = fin.ABMetric(_euclid(), _const_form([math.sqrt(0.5), 0.0, 0.0]), phi_closed("closed_quadratic", eps=-1))
    with pytest.raises(SingularityError, match="Delta"):
        fin.finsler_spray(F, [0, 0, 0], [0.0, 1.0, 0.0])


# Riemann, Weyl, Douglas ---------------------------------------------------------------

def test_riemann_flat_parallel():  # [TRIVIAL]
    fam = flat_parallel(SQUARE, (0.3, 0.1, 0.0))
    for x, y in samples_of(fam, 3):
        rb = fin.riemann_curvature(fam.F, x, y)
        assert np.abs(rb.R).max() == 0


def test_riemann_space_form_as_finsler():  # [DERIVED] space-form oracle
    F = _curved_riemannian(0.7)
    rng = np.random.default_rng(0)
    for _ in range(5):
        x, y = _rng_xy(rng)
        rb = fin.riemann_curvature(F, x, y)
        P = space_form_pattern(F.g.matrix(x), y)
        assert np.abs(rb.R - 0.7 * P).max() < 1e-8
        assert rb.Ric == pytest.approx(np.trace(rb.R))


def test_riemann_flag_pole(general_family):  # [TRIVIAL]
    for x, y in samples_of(general_family, 5):
        rb = fin.riemann_curvature(general_family.F, x, y)
        assert np.abs(rb.R @ y).max() < 1e-9 * max(1.0, np.abs(rb.R).max())


def test_weyl_space_form_and_dimension():  # [TRIVIAL]
    F = _curved_riemannian(1.3)
    rb = fin.riemann_curvature(F, [0.1, 0.2, 0.0], [1.0, 0.3, -0.2])
    assert np.abs(fin.weyl(rb, N)).max() < 1e-8
    F2 = _curved_riemannian(1.3, n=2)
    rb2 = fin.riemann_curvature(F2, [0.1, 0.2], [1.0, 0.3])
    with pytest.raises(DimensionError):
        fin.weyl(rb2, 2)
    flat = fin.riemann_curvature(F, [0.1, 0.2, 0.0], [1.0, 0.3, -0.2], order=2)
    with pytest.raises(DimensionError):
        fin.weyl(flat, N)


def test_weyl_identities_generic(square_family):  # [TRIVIAL] W y = 0 and tr W = 0 for any metric
    fam = perturbed(square_family, 0.05)
    for x, y in samples_of(fam, 5):
        rb = fin.riemann_curvature(fam.F, x, y)
        W = fin.weyl(rb, N)
        assert np.abs(W).max() > 1e-4
        assert np.abs(W @ y).max() < 1e-9 * max(1.0, np.abs(rb.R).max())
        assert abs(np.trace(W)) < 1e-9 * max(1.0, np.abs(rb.R).max())


def test_weyl_and_douglas_constructed_vs_perturbed(square_family):  # [PAPER] / [DERIVED]
    good = fin.proj_flat_verdict(square_family.F, samples_of(square_family, 10))
    assert good.passed and good.max_W < 1e-6 and good.max_D < 1e-6
    bad_fam = perturbed(square_family, 1e-2)
    bad = fin.proj_flat_verdict(bad_fam.F, samples_of(bad_fam, 10))
    assert not bad.passed and bad.max_W > 1e-3
    fp = flat_parallel(SQUARE, (0.3, 0.1, 0.0))
    assert fin.proj_flat_verdict(fp.F, samples_of(fp, 3)).passed


def test_douglas_riemannian_and_symmetry(general_family):  # [TRIVIAL]
    D = fin.douglas(_curved_riemannian(), [0.1, 0.0, 0.2], [0.5, 1.0, -0.3])
    assert np.abs(D).max() < 1e-12
    fam = perturbed(general_family, 0.05)
    x, y = samples_of(fam, 1)[0]
    D = fin.douglas(fam.F, x, y)
    assert np.abs(D).max() > 1e-4
    for perm in [(0, 1, 3, 2), (2, 1, 0, 3), (3, 1, 2, 0)]:
        assert np.abs(D - np.transpose(D, perm)).max() < 1e-10


def test_douglas_vanishes_on_family(general_family):  # [PAPER] closed beta in the b_{i|j} family
    for x, y in samples_of(general_family, 5):
        D = fin.douglas(general_family.F, x, y)
        assert np.abs(D).max() < 1e-6


# flag curvature ---------------------------------------------------------------------------

def test_extract_space_form():  # [TRIVIAL]
    F = _curved_riemannian(0.9)
    pa = fin.analyze_point(F, [0.1, -0.1, 0.2], [0.3, 1.0, 0.1])
    assert pa.K == pytest.approx(0.9, abs=1e-8) and pa.K_residual < 1e-8


def test_extract_flat_parallel():  # [TRIVIAL]
    fam = flat_parallel(SQUARE, (0.3, 0.1, 0.0))
    pa = fin.analyze_point(fam.F, [0.1, 0.2, 0.3], [1.0, 0.2, -0.4])
    assert pa.K == 0 and pa.K_residual == 0


def test_extract_thm3(thm3_plus, thm3_minus):  # [PAPER] explicit curvature of the quadratic family
    for fam in (thm3_plus, thm3_minus):
        for x, y in samples_of(fam, 10):
            pa = fin.analyze_point(fam.F, x, y, with_weyl=False)
            K = fam.K_fn(x, pa.s)
            assert pa.K_residual < 1e-6
            assert abs(pa.K - K) <= 1e-6 * abs(K)


@given(st.floats(-2, 2), st.floats(-3, 3), st.floats(0.0, 0.8), st.floats(-0.95, 0.95))
def test_scalar_formula_vs_square_special_case(tau, lam, b2, u):  # [PAPER] square-metric reduction
    s = u * math.sqrt(b2)
    phi = phi_closed("closed_square")
    eta, _ = fin.eta_q(SQUARE, tau, lam, b2)
    K = fin.scalar_flag_formula(SQUARE, phi, tau, lam, b2, s)
    K8 = fin.square_flag_formula(tau, lam, eta, b2, s)
    assert abs(K - K8) <= 1e-9 * max(1.0, abs(K8))


def test_scalar_formula_at_origin():  # [DERIVED] tau = 0, s = 0 gives K = lambda
    for p, phi in [(SQUARE, phi_closed("closed_square")), (ABParams(1.0, 0.5, -0.5, 0.3), None)]:
        phi = phi or solve_phi(p)
        assert fin.scalar_flag_formula(p, phi, 0.0, 1.7, 0.3, 0.0) == pytest.approx(1.7, abs=1e-14)


@given(st.floats(-1, 1), st.floats(-2, 2), st.floats(0.01, 0.5), st.floats(0.02, 0.95), st.booleans())
def test_scalar_formula_exact_vs_direct(tau, lam, b2, u, neg):  # [DERIVED] literal s^-k form for s != 0
    p = ABParams(1.0, 0.5, -0.5, 0.3)
    phi = _general_phi()
    s = (-1 if neg else 1) * max(u * math.sqrt(b2), 1e-2)
    a = fin.scalar_flag_formula(p, phi, tau, lam, b2, s)
    d = fin._scalar_flag_formula_direct(p, phi, tau, lam, b2, s)
    assert abs(a - d) <= 1e-8 * max(1.0, abs(a))


_GP = {}


def _general_phi():
    if "phi" not in _GP:
        _GP["phi"] = solve_phi(ABParams(1.0, 0.5, -0.5, 0.3))
    return _GP["phi"]


def test_scalar_formula_reproduces_thm3(thm3_plus, thm3_minus):  # [DERIVED] cross-formula oracle
    for fam in (thm3_plus, thm3_minus):
        for x, y in samples_of(fam, 6):
            pa = fin.analyze_point(fam.F, x, y, with_weyl=False)
            xl = [float(v) for v in x]
            K = fin.scalar_flag_formula(fam.params, fam.F.phi, fam.tau_fn(xl), fam.lambda_fn(xl), pa.b2, pa.s)
            assert abs(K - fam.K_fn(x, pa.s)) <= 1e-6 * abs(K)


def test_extract_matches_square_formula(square_family, square_remark_family):  # [PAPER]
    for fam in (square_family, square_remark_family):
        for x, y in samples_of(fam, 8):
            pa = fin.analyze_point(fam.F, x, y, with_weyl=False)
            xl = [float(v) for v in x]
            tau, lam = fam.tau_fn(xl), fam.lambda_fn(xl)
            eta, _ = fin.eta_q(SQUARE, tau, lam, pa.b2)
            K8 = fin.square_flag_formula(tau, lam, eta, pa.b2, pa.s)
            assert abs(pa.K - K8) <= 1e-6 * abs(K8)


def test_eta_q_definitions():  # [PAPER] transcribed from the conditions
    p = ABParams(1.3, 0.4, -0.7)
    tau, lam, b2 = 0.6, -1.1, 0.25
    eta, q = fin.eta_q(p, tau, lam, b2)
    k1, k2, k3 = 1.3, 0.4, -0.7
    assert eta == pytest.approx((k1**2 + k2 - 2 * k1 * k3 - k1 * (k2 - k1**2) * b2) * tau**2 + k1 * lam, abs=1e-10)
    assert q == pytest.approx((k3 - 2 * k1 - k1**2 * b2) * tau**2 - lam, abs=1e-10)


# projective flatness conditions ---------------------------------------------------------

@pytest.mark.parametrize("fam_name", ["square_family", "general_family", "thm3_plus", "thm3_minus"])
def test_projflat_conditions_constructed(fam_name, request):  # [PAPER]
    fam = request.getfixturevalue(fam_name)
    r = fin.projflat_conditions_check(fam.F, fam.tau_fn, fam.lambda_fn, samples_of(fam, 6))
    assert max(r.y2, r.y3, r.y4) < 1e-6


def test_projflat_conditions_parallel_branch():  # [TRIVIAL] tau = 0, space-form alpha
    F = fin.ABMetric(_euclid(), _const_form([0.3, 0.0, 0.1]), phi_closed("closed_square"))
    r = fin.projflat_conditions_check(F, lambda X: 0.0, lambda X: 0.0, [([0.1, 0.2, 0.0], [1.0, 0.0, 0.3])])
    assert (r.y2, r.y3, r.y4) == (0.0, 0.0, 0.0)


def test_projflat_wrong_tau_sign(general_family):  # [DERIVED] sign flip probe
    fam = general_family
    pts = samples_of(fam, 4)
    r = fin.projflat_conditions_check(fam.F, lambda X: -fam.tau_fn(X), fam.lambda_fn, pts)
    taus = [abs(fam.tau_fn([float(v) for v in x])) for x, _ in pts]
    assert r.y2 > 0.3 * max(taus)


def test_n4_family_weyl_and_douglas():  # [PAPER] dimension 4 branch
    fam = build_thm2iic(NavigationData(1.0, 0.5, (0.2, 0.1, 0.0, -0.1), 4), SQUARE, "explicit")
    rep = fin.proj_flat_verdict(fam.F, samples_of(fam, 3))
    assert rep.passed
