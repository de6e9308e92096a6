"""Curvature of (alpha, beta)-metrics F = alpha * phi(beta / alpha).

The spray is assembled from alpha's Christoffel symbols and the covariant
derivative of beta, with every ingredient carried as a jet in the combined
(x, y) variables.  Riemann, Ricci and Weyl curvature then come from exact jet
derivatives of the spray; the Douglas tensor from a fourth-order jet in y at
fixed x.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import jets
from .errors import DegeneracyError, DimensionError, SingularityError
from .jets import Jet, jet_space
from .phiode import ABParams, PhiSolution, _smul, _sinv
from .riemannian import (
    AlphaJets,
    MetricField,
    OneFormField,
    alpha_jets,
    embed_x,
    inverse,
    riemann_alpha,
    riemann_from_spray,
    spray_alpha_jets,
    values,
    y_variables,
)

SINGULAR_EPS = 1e-12


@dataclass(frozen=True)
class ABMetric:
    """F = alpha phi(beta/alpha) from a metric field, a 1-form field and phi.

    ``joint`` optionally evaluates ``(a_ij, b_i)`` together, which saves work
    when both come out of one construction (e.g. a deformation inverse).
    """

    g: MetricField
    b: OneFormField
    phi: PhiSolution
    joint: Callable | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.g.dim

    @property
    def params(self) -> ABParams:
        return self.phi.params

    def fields(self, X):
        if self.joint is not None:
            return self.joint(X)
        return self.g.eval(X), self.b.eval(X)


@dataclass
class CurvatureBundle:
    R: np.ndarray
    Ric: float
    A: np.ndarray
    W: np.ndarray | None
    D: np.ndarray | None
    at: tuple
    R_jets: np.ndarray | None = field(default=None, repr=False)


# phi-derived series ---------------------------------------------------------

def _q_series(phi: PhiSolution, s0: float, order: int):
    """Univariate Taylor coefficients at s0 of Q = phi'/(phi - s phi') and Q'."""
    N = order + 1
    c = phi.taylor(s0, N + 1)
    dphi = np.arange(1, N + 2) * c[1:]
    t = np.zeros(N + 1)
    t[0] = s0
    if N >= 1:
        t[1] = 1.0
    den = c[: N + 1] - _smul(t, dphi, N)
    if abs(den[0]) < SINGULAR_EPS:
        raise SingularityError(f"phi - s phi' vanishes at s={s0:.6g}")
    Q = _smul(dphi[: N + 1], _sinv(den, N), N)
    dQ = np.arange(1, N + 1) * Q[1:]
    return Q[: order + 1], dQ[: order + 1]


def phi_Q(phi: PhiSolution, s):
    order = s.order if isinstance(s, Jet) else 0
    Q, dQ = _q_series(phi, jets.value(s), order)
    return jets.compose(Q, s), jets.compose(dQ, s)


# the spray --------------------------------------------------------------------

@dataclass
class SprayParts:
    G: list
    alpha: object
    beta: object
    s: object
    b2: object
    bu: list
    y_low: list
    Delta: object


def spray_y005(aj: AlphaJets, y: Sequence, phi: PhiSolution) -> SprayParts:
    """G^i = G^i_alpha + alpha Q s^i_0 + alpha^-1 Theta (-2 alpha Q s_0 + r_00) y^i
    + Psi (-2 alpha Q s_0 + r_00) b^i, for jets or floats."""
    n = len(y)
    a, ainv, b, bij = aj.a, aj.ainv, aj.b, aj.bij
    y_low = [sum(a[i, j] * y[j] for j in range(n)) for i in range(n)]
    alpha2 = sum(y[i] * y_low[i] for i in range(n))
    alpha = jets.sqrt(alpha2)
    beta = sum(b[i] * y[i] for i in range(n))
    s = beta / alpha
    bu = [sum(ainv[i, j] * b[j] for j in range(n)) for i in range(n)]
    b2 = sum(b[i] * bu[i] for i in range(n))
    r00 = 0
    s_low0 = []
    for i in range(n):
        acc_r = 0
        acc_s = 0
        for j in range(n):
            acc_r = acc_r + (bij[i, j] + bij[j, i]) * y[j]
            acc_s = acc_s + (bij[i, j] - bij[j, i]) * y[j]
        r00 = r00 + 0.5 * acc_r * y[i]
        s_low0.append(0.5 * acc_s)
    s_up0 = [sum(ainv[i, j] * s_low0[j] for j in range(n)) for i in range(n)]
    s_0 = sum(bu[i] * s_low0[i] for i in range(n))
    Q, dQ = phi_Q(phi, s)
    Delta = 1 + s * Q + (b2 - s * s) * dQ
    if abs(jets.value(Delta)) < SINGULAR_EPS:
        raise SingularityError(f"Delta = 1 + sQ + (b^2 - s^2)Q' vanishes at s={jets.value(s):.6g}")
    inv2D = 1 / (2 * Delta)
    Theta = (Q - s * dQ) * inv2D
    Psi = dQ * inv2D
    common = -2 * alpha * Q * s_0 + r00
    Ga = spray_alpha_jets(aj, y)
    c_y = Theta * common / alpha
    c_b = Psi * common
    aQ = alpha * Q
    G = [Ga[i] + aQ * s_up0[i] + c_y * y[i] + c_b * bu[i] for i in range(n)]
    return SprayParts(G=G, alpha=alpha, beta=beta, s=s, b2=b2, bu=bu, y_low=y_low, Delta=Delta)


def _combined(F: ABMetric, x, y, order: int):
    """Spray parts as combined (x, y) jets of the given order."""
    n = F.dim
    aj = alpha_jets(F.fields, x, order + 1, n).embedded(n, order)
    Y = y_variables(y, n, order)
    return spray_y005(aj, Y, F.phi), Y


def finsler_spray(F: ABMetric, x, y) -> np.ndarray:
    """Spray coefficients G^i at (x, y) by the (alpha, beta) formula."""
    n = F.dim
    aj = alpha_jets(F.fields, x, 1, n).at_point()
    parts = spray_y005(aj, [float(v) for v in y], F.phi)
    return np.array([float(g) for g in parts.G])


def F_jet(F: ABMetric, x, y, order: int = 2) -> Jet:
    """F itself as a combined (x, y) jet; metric data taken to x-order ``order``."""
    n = F.dim
    X = jets.variables(x, order)
    a_raw, b_raw = F.fields(X)
    sp = jet_space(2 * n, order)
    a = [[embed_x(_jet(v, X[0].space), n, order) for v in row] for row in a_raw]
    b = [embed_x(_jet(v, X[0].space), n, order) for v in b_raw]
    Y = [Jet.variable(sp, n + i, float(y[i])) for i in range(n)]
    alpha = jets.sqrt(sum(a[i][j] * Y[i] * Y[j] for i in range(n) for j in range(n)))
    beta = sum(b[i] * Y[i] for i in range(n))
    return alpha * F.phi(beta / alpha)


def _jet(v, space):
    return v if isinstance(v, Jet) else Jet.constant(space, float(v))


def fundamental_tensor(F: ABMetric, x, y) -> np.ndarray:
    """g_ij = 1/2 d^2(F^2)/dy^i dy^j; raises if not positive definite."""
    n = F.dim
    F2 = F_jet(F, x, y, 2) ** 2
    g = np.array([[0.5 * F2.d(n + i, n + j) for j in range(n)] for i in range(n)])
    lam = np.linalg.eigvalsh(g)
    if lam.min() <= 0:
        raise DegeneracyError(f"fundamental tensor indefinite (smallest eigenvalue {lam.min():.3e})")
    return g


def finsler_spray_g1(F: ABMetric, x, y) -> np.ndarray:
    """Spray coefficients from G^i = 1/4 g^il {[F^2]_{x^k y^l} y^k - [F^2]_{x^l}}."""
    n = F.dim
    F2 = F_jet(F, x, y, 2) ** 2
    g = np.array([[0.5 * F2.d(n + i, n + j) for j in range(n)] for i in range(n)])
    rhs = np.array([sum(F2.d(k, n + l) * y[k] for k in range(n)) - F2.d(l) for l in range(n)])
    return 0.25 * np.linalg.solve(g, rhs)


# curvature --------------------------------------------------------------------

def riemann_curvature(F: ABMetric, x, y, order: int = 3) -> CurvatureBundle:
    """R^i_k and Ric at (x, y); R also kept as jets (order ``order - 2``)."""
    n = F.dim
    parts, Y = _combined(F, x, y, order)
    Rj = riemann_from_spray(parts.G, Y, n)
    R = values(Rj)
    Ric = float(np.trace(R))
    A = R - Ric / (n - 1) * np.eye(n)
    return CurvatureBundle(R=R, Ric=Ric, A=A, W=None, D=None, at=(tuple(x), tuple(y)), R_jets=Rj)


def weyl(Rb: CurvatureBundle, n: int) -> np.ndarray:
    """W^i_k = A^i_k - 1/(n+1) (d A^m_k / d y^m) y^i."""
    if n < 3:
        raise DimensionError("Weyl curvature characterization needs n >= 3")
    if Rb.R_jets is None or Rb.R_jets[0, 0].order < 1:
        raise DimensionError("Weyl curvature needs R carried as a first-order jet in y")
    Rj = Rb.R_jets
    y = np.asarray(Rb.at[1], dtype=float)
    dRic = np.array([sum(Rj[m, m].d(n + k) for m in range(n)) for k in range(n)])
    divA = np.array([sum(Rj[m, k].d(n + m) for m in range(n)) - dRic[k] / (n - 1) for k in range(n)])
    return Rb.A - np.outer(y, divA) / (n + 1)


def douglas(F: ABMetric, x, y) -> np.ndarray:
    """D_h^i_jk = d^3/dy^h dy^j dy^k (G^i - G^m_m y^i / (n+1)), shape (h, i, j, k)."""
    n = F.dim
    aj = alpha_jets(F.fields, x, 1, n).at_point()
    Y = jets.variables(y, 4)
    G = spray_y005(aj, Y, F.phi).G
    Gmm = sum(G[m].diff(m) for m in range(n))
    B = [G[i] - Gmm * Y[i] / (n + 1) for i in range(n)]
    D = np.empty((n, n, n, n))
    for i in range(n):
        for h in range(n):
            for j in range(n):
                for k in range(n):
                    D[h, i, j, k] = B[i].d(h, j, k)
    return D


def extract_flag_curvature(Rb: CurvatureBundle, F_val: float, F_grad_y, x=None, y=None):
    """Least-squares K in R^i_k = K (F^2 delta^i_k - F y^i F_{y^k}).

    Returns ``(K, residual)`` where the residual is ``|R - K P| / (|R| + |P|)``
    in the Frobenius norm, P being the unit-K pattern.  Adding |P| keeps the
    ratio meaningful when R itself vanishes.
    """
    y = np.asarray(Rb.at[1] if y is None else y, dtype=float)
    n = len(y)
    P = F_val**2 * np.eye(n) - F_val * np.outer(y, np.asarray(F_grad_y, dtype=float))
    K = float(np.sum(Rb.R * P) / np.sum(P * P))
    res = float(np.linalg.norm(Rb.R - K * P) / (np.linalg.norm(Rb.R) + np.linalg.norm(P)))
    return K, res


@dataclass
class PointAnalysis:
    bundle: CurvatureBundle
    F: float
    F_y: np.ndarray
    s: float
    b2: float
    K: float
    K_residual: float
    W_rel: float | None
    D_rel: float | None


def analyze_point(F: ABMetric, x, y, with_weyl: bool = True, with_douglas: bool = False) -> PointAnalysis:
    """Riemann/Weyl/Douglas and the flag-curvature fit at one (x, y)."""
    n = F.dim
    parts, Y = _combined(F, x, y, 3)
    Rj = riemann_from_spray(parts.G, Y, n)
    R = values(Rj)
    Ric = float(np.trace(R))
    A = R - Ric / (n - 1) * np.eye(n)
    Fj = parts.alpha * F.phi(parts.s)
    Fv = Fj.value
    Fy = np.array([Fj.d(n + k) for k in range(n)])
    Rb = CurvatureBundle(R=R, Ric=Ric, A=A, W=None, D=None, at=(tuple(x), tuple(y)), R_jets=Rj)
    W_rel = D_rel = None
    scale = max(np.abs(R).max(), Fv**2)
    if with_weyl and n >= 3:
        Rb.W = weyl(Rb, n)
        W_rel = float(np.abs(Rb.W).max() / scale)
    if with_douglas:
        Rb.D = douglas(F, x, y)
        D_rel = float(np.abs(Rb.D).max() * Fv)
    K, res = extract_flag_curvature(Rb, Fv, Fy)
    return PointAnalysis(Rb, Fv, Fy, jets.value(parts.s), jets.value(parts.b2), K, res, W_rel, D_rel)


# closed-form flag curvature -----------------------------------------------------

def _poly(coeffs_low_to_high):
    return np.polynomial.Polynomial(coeffs_low_to_high)


def _exact_shift(p: np.polynomial.Polynomial, k: int) -> np.polynomial.Polynomial:
    """p(s) / s^k for a polynomial whose k lowest coefficients vanish."""
    c = np.append(p.coef, np.zeros(k))
    scale = max(1.0, np.abs(c).max())
    if np.any(np.abs(c[:k]) > 1e-12 * scale):
        raise ArithmeticError(f"polynomial not divisible by s^{k}: {c[:k]}")
    return _poly(c[k:])


def flag_polynomials(p: ABParams):
    """f, g, h and the three s-divided combinations appearing in the K formula."""
    k1, k2, k3 = p.k1, p.k2, p.k3
    f = _poly([1, 0, k1 + k3, 0, k2])
    g = _poly([-2, 0, -k1, 0, k2])
    h = _poly([3 * k3 - k1, 0, 3 * k2])
    s2 = _poly([0, 0, 1])
    P1 = _exact_shift((3 - 3 * f + h * s2) ** 2, 3)
    P2 = _exact_shift(2 * g * h * s2 + 12 * f - 3 * g**2, 2)
    P3 = _exact_shift((3 + h * s2 - 3 * f) ** 2, 4)
    return f, g, h, P1, P2, P3


def scalar_flag_formula(p: ABParams, phi: PhiSolution, tau: float, lam: float, b2: float, s: float) -> float:
    """Scalar flag curvature of the projectively flat metrics in closed form.

    The negative powers of s in the published expression cancel exactly (the
    numerators carry the matching factors of s), so the divided polynomials
    are formed once and the formula is regular at s = 0.
    """
    f, g, h, P1, P2, P3 = flag_polynomials(p)
    ph, dph, _ = phi.eval(s)
    fs, gs, hs = f(s), g(s), h(s)
    ratio = dph / ph
    t2 = tau * tau
    rhs = fs * ratio * ((24 * fs * ratio + P1(s) * b2 - 16 * hs * s) * t2 + 16 * lam * s)
    rhs += (8 * P2(s) - gs * P3(s) * b2) * t2 - 16 * lam * gs
    return rhs / (32 * ph * ph)


def _scalar_flag_formula_direct(p: ABParams, phi: PhiSolution, tau, lam, b2, s):
    """Literal transcription with s^-k factors; only valid for s != 0."""
    k1, k2, k3 = p.k1, p.k2, p.k3
    f = 1 + (k1 + k3) * s**2 + k2 * s**4
    g = k2 * s**4 - k1 * s**2 - 2
    h = 3 * k2 * s**2 - k1 + 3 * k3
    ph, dph, _ = phi.eval(s)
    t2 = tau * tau
    rhs = f * dph / ph * ((24 * f * dph / ph + (3 - 3 * f + h * s**2) ** 2 * s**-3 * b2 - 16 * h * s) * t2 + 16 * lam * s)
    rhs += (8 * (2 * g * h * s**2 + 12 * f - 3 * g**2) - g * (3 + h * s**2 - 3 * f) ** 2 * s**-2 * b2) * s**-2 * t2
    rhs -= 16 * lam * g
    return rhs / (32 * ph * ph)


def square_flag_formula(tau: float, lam: float, eta: float, b2: float, s: float) -> float:
    """Square-metric special case, K = ([lam + tau^2 (5+4b^2)] + (eta/2 - 3 tau^2) s) / phi^2."""
    return ((lam + tau**2 * (5 + 4 * b2)) + (eta / 2 - 3 * tau**2) * s) / (1 + s) ** 4


def eta_q(p: ABParams, tau: float, lam: float, b2: float):
    """eta and q as functions of tau, lambda and b^2."""
    k1, k2, k3 = p.k1, p.k2, p.k3
    eta = (k1**2 + k2 - 2 * k1 * k3 - k1 * (k2 - k1**2) * b2) * tau**2 + k1 * lam
    q = (k3 - 2 * k1 - k1**2 * b2) * tau**2 - lam
    return eta, q


# verdicts -------------------------------------------------------------------------

@dataclass
class ProjFlatReport:
    max_W: float
    max_D: float
    tolerance: float
    passed: bool


def proj_flat_verdict(F: ABMetric, samples, tolerance: float = 1e-6) -> ProjFlatReport:
    if F.dim < 3:
        raise DimensionError("projective flatness criterion W=0, D=0 needs n >= 3")
    mw = md = 0.0
    for x, y in samples:
        pa = analyze_point(F, x, y, with_weyl=True, with_douglas=True)
        mw, md = max(mw, pa.W_rel), max(md, pa.D_rel)
    return ProjFlatReport(mw, md, tolerance, mw <= tolerance and md <= tolerance)


@dataclass
class ProjFlatConditions:
    y2: float
    y3: float
    y4: float
    lambda_used: str = ""


def projflat_conditions_check(F: ABMetric, tau_fn: Callable, lambda_fn: Callable, samples) -> ProjFlatConditions:
    """Residuals of the three characterizing equations at the samples.

    b_{i|j} = tau {(1+k1 b^2) a_ij + (k2 b^2 + k3) b_i b_j}
    Rbar^i_k = lambda (alpha^2 delta - y^i y_k) + eta (beta^2 delta + alpha^2 b^i b_k - beta b^i y_k - beta b_k y^i)
    tau_{x^i} = q b_i
    ``tau_fn`` and ``lambda_fn`` take the coordinate list (floats or jets).
    Each residual is a max-norm divided by 1 + the size of the left-hand side.
    """
    p = F.params
    n = F.dim
    r2 = r3 = r4 = 0.0
    for x, y in samples:
        aj = alpha_jets(F.fields, x, 1, n).at_point()
        a, b, bij = aj.a, aj.b, aj.bij
        ainv = np.linalg.inv(a)
        bu = ainv @ b
        b2 = float(b @ bu)
        tj = tau_fn(jets.variables(x, 1))
        tau = jets.value(tj)
        tau_x = tj.gradient() if isinstance(tj, Jet) else np.zeros(n)
        lam = float(jets.value(lambda_fn([float(v) for v in x])))
        eta, q = eta_q(p, tau, lam, b2)
        rhs2 = tau * ((1 + p.k1 * b2) * a + (p.k2 * b2 + p.k3) * np.outer(b, b))
        r2 = max(r2, np.abs(bij - rhs2).max() / (1 + np.abs(bij).max()))
        yv = np.asarray(y, dtype=float)
        yl = a @ yv
        al2 = float(yv @ yl)
        be = float(b @ yv)
        Rbar = riemann_alpha(F.g, x, y)
        I = np.eye(n)
        rhs3 = lam * (al2 * I - np.outer(yv, yl)) + eta * (
            be**2 * I + al2 * np.outer(bu, b) - be * np.outer(bu, yl) - be * np.outer(yv, b)
        )
        r3 = max(r3, np.abs(Rbar - rhs3).max() / (1 + np.abs(Rbar).max()))
        r4 = max(r4, np.abs(tau_x - q * b).max() / (1 + np.abs(tau_x).max()))
    return ProjFlatConditions(float(r2), float(r3), float(r4))
