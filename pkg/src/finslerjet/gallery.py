"""Explicit projectively flat (alpha, beta)-metrics built from navigation data.

A space form h_mu in projective chart coordinates carries the closed conformal
1-form rho = p_i y^i fixed by a constant k and a constant vector a.  Inverting
the deformation (h, rho) -> (alpha, beta) produces the metric families, each
returned together with its tau and lambda fields and, where known, a
closed-form flag curvature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import jets
from .deform import _b2_jet_from_p2, inverse_fields, lambda_identity, triple_uvw
from .errors import ConstancyError, DegenerateFamilyError, DomainError
from .finsler import ABMetric
from .jets import Jet
from .phiode import ABParams, PhiSolution, cor51_constants, default_b0, phi_closed, solve_phi
from .riemannian import MetricField, OneFormField, alpha_jets, inverse, values


@dataclass(frozen=True)
class NavigationData:
    mu: float
    k_const: float
    a_vec: tuple
    n: int = 3

    def __post_init__(self):
        object.__setattr__(self, "a_vec", tuple(float(v) for v in self.a_vec))
        if len(self.a_vec) != self.n:
            raise DegenerateFamilyError(f"a_vec has length {len(self.a_vec)}, expected n={self.n}")


def chart_radius(mu: float) -> float:
    return min(0.5, 0.5 / math.sqrt(abs(mu))) if mu != 0 else 0.5


def _D(mu, X):
    D = 1 + mu * sum(v * v for v in X)
    if jets.value(D) <= 0:
        raise DomainError(f"1 + mu|x|^2 = {jets.value(D):.3e} <= 0: outside the chart")
    return D


def h_mu_field(mu: float, n: int) -> MetricField:
    """Constant-curvature metric h_ij = delta_ij / D - mu x_i x_j / D^2, D = 1 + mu|x|^2."""

    def ev(X):
        D = _D(mu, X)
        iD = 1 / D
        iD2 = iD * iD
        return [[(iD if i == j else 0) - mu * X[i] * X[j] * iD2 for j in range(n)] for i in range(n)]

    return MetricField(n, ev)


def h_mu(mu: float, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    D = float(_D(mu, list(x)))
    return math.sqrt(D * (y @ y) - mu * (x @ y) ** 2) / D


def _dot(a, X):
    return sum(ai * xi for ai, xi in zip(a, X))


def rho_field(nd: NavigationData) -> OneFormField:
    """p_i = ((k - mu<a,x>) x^i + (1 + mu|x|^2) a^i) / (1 + mu|x|^2)^{3/2}."""
    mu, k, a = nd.mu, nd.k_const, nd.a_vec

    def ev(X):
        D = _D(mu, X)
        scale = D ** -1.5
        lin = k - mu * _dot(a, X)
        return [(lin * X[i] + D * a[i]) * scale for i in range(nd.n)]

    return OneFormField(nd.n, ev)


def rho_nav(nd: NavigationData, x) -> np.ndarray:
    return rho_field(nd).vector(x)


def p2_closed(nd: NavigationData, X):
    """|rho|_h^2 = |a|^2 + (k^2|x|^2 + 2k<a,x> - mu<a,x>^2) / (1 + mu|x|^2)."""
    mu, k, a = nd.mu, nd.k_const, nd.a_vec
    D = _D(mu, X)
    ax = _dot(a, X)
    x2 = sum(v * v for v in X)
    return sum(v * v for v in a) + (k * k * x2 + 2 * k * ax - mu * ax * ax) / D


def c_of(nd: NavigationData, X):
    """c = (-k + mu<a,x>) / (2 sqrt(1 + mu|x|^2)); floats or jets."""
    D = _D(nd.mu, X)
    return (-nd.k_const + nd.mu * _dot(nd.a_vec, X)) / (2 * jets.sqrt(D))


def c_field(nd: NavigationData) -> Callable:
    return lambda X: c_of(nd, X)


def chart_points(nd_or_mu, n: int, count: int, rng: np.random.Generator, radius: float | None = None):
    """Points uniform in the ball |x| <= min(0.5, 0.5/sqrt|mu|)."""
    mu = nd_or_mu.mu if isinstance(nd_or_mu, NavigationData) else float(nd_or_mu)
    r = chart_radius(mu) if radius is None else radius
    out = []
    for _ in range(count):
        z = rng.standard_normal(n)
        z /= np.linalg.norm(z)
        out.append(z * r * rng.random() ** (1.0 / n))
    return out


class DeltaReport(NamedTuple):
    delta2: float
    delta: float
    max_rel_dev: float
    values: np.ndarray


def delta2_at(nd: NavigationData, x) -> float:
    """|grad c|_h^2 + mu c^2 at one point."""
    n = nd.n
    X = jets.variables(x, 1)
    c = c_of(nd, X)
    grad = c.gradient()
    H = values(h_mu_field(nd.mu, n).eval([float(v) for v in x]))
    H = np.asarray(H, dtype=float)
    return float(grad @ np.linalg.solve(H, grad) + nd.mu * c.value**2)


def delta_of(nd: NavigationData, count: int = 20, seed: int = 0, tolerance: float = 1e-6) -> DeltaReport:
    """delta^2 = |grad c|^2_h + mu c^2 sampled at ``count`` chart points.

    Returns the mean; raises ConstancyError if the relative deviation exceeds
    ``tolerance`` (absolute when the mean is below 1e-12).
    """
    rng = np.random.default_rng(seed)
    vals = np.array([delta2_at(nd, x) for x in chart_points(nd, nd.n, count, rng)])
    m = float(vals.mean())
    dev = float(np.abs(vals - m).max() / (abs(m) if abs(m) > 1e-12 else 1.0))
    if dev > tolerance:
        raise ConstancyError(f"delta^2 varies by {dev:.3e} (relative) across chart points")
    return DeltaReport(m, math.sqrt(m) if m >= 0 else math.nan, dev, vals)


# families -------------------------------------------------------------------------

@dataclass
class Family:
    """A constructed (alpha, beta)-metric with its tau/lambda fields."""

    name: str
    F: ABMetric
    params: ABParams
    nav: NavigationData | None = None
    selector: str | None = None
    tau_fn: Callable | None = field(default=None, repr=False)
    lambda_fn: Callable | None = field(default=None, repr=False)
    h: MetricField | None = field(default=None, repr=False)
    rho: OneFormField | None = field(default=None, repr=False)
    K_fn: Callable | None = field(default=None, repr=False)
    radius: float = 0.5
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.F.dim


def default_phi(p: ABParams) -> PhiSolution:
    """Closed form when the parameters name one, otherwise the numeric solution."""
    if (p.k1, p.k2, p.k3, p.a1) == (2.0, 0.0, -3.0, 2.0):
        return phi_closed("closed_square", p)
    if p.k2 == 0 and p.k1 != 0 and abs(p.k3 + 1.5 * p.k1) < 1e-14:
        return phi_closed("closed_quadratic", p)
    return solve_phi(p, default_b0(p))


def _b2_of_x(nd: NavigationData, p: ABParams, selector: str, X):
    return _b2_jet_from_p2(p2_closed(nd, X), p, selector)


def build_thm2iic(nd: NavigationData, p: ABParams, selector: str = "explicit",
                  phi: PhiSolution | None = None, lambda_variant: str = "derived",
                  name: str = "thm2iic") -> Family:
    """alpha^2 = (h^2 - v rho^2 / w^2) / u, beta = rho / w with rho the conformal form of h_mu.

    tau = -2 u c / w; lambda from mu, tau and the triple (see
    ``deform.lambda_identity`` for the two variants).  Works for any mu; the
    named theorem case is mu > 0 (see ``thm2iic``).
    """
    n = nd.n
    h = h_mu_field(nd.mu, n)
    rho = rho_field(nd)
    joint = inverse_fields(h, rho, p, selector)
    phi = phi or default_phi(p)
    F = ABMetric(MetricField(n, lambda X: joint(X)[0]), OneFormField(n, lambda X: joint(X)[1]), phi, joint=joint)

    def tau_fn(X):
        t = _b2_of_x(nd, p, selector, X)
        u, _, w = triple_uvw(selector, p, t)
        return -2 * u * c_of(nd, X) / w

    def lambda_fn(X):
        X = [float(v) for v in X]
        t = _b2_of_x(nd, p, selector, X)
        u, v, w = triple_uvw(selector, p, t)
        tau = -2 * u * c_of(nd, X) / w
        return lambda_identity(p, nd.mu, u, v, tau, t, lambda_variant)

    return Family(name, F, p, nd, selector, tau_fn, lambda_fn, h, rho, radius=chart_radius(nd.mu),
                  meta={"lambda_variant": lambda_variant})


def thm2iic(nd: NavigationData, p: ABParams, selector: str = "explicit", **kw) -> Family:
    if nd.mu <= 0:
        raise DegenerateFamilyError(f"this construction is the mu > 0 case (got mu={nd.mu})")
    return build_thm2iic(nd, p, selector, **kw)


def thm3_window(nd: NavigationData, eps: float, delta2: float, X):
    """mu/4 + eps delta^2/mu - eps c^2; must stay positive."""
    c = c_of(nd, X)
    return nd.mu / 4 + eps * delta2 / nd.mu - eps * c * c


def build_thm3(nd: NavigationData, a1: float, eps: int, check_points: int = 64, seed: int = 0) -> Family:
    """Metrics with phi = 1 + a1 s + eps s^2 via the polynomial triple.

    alpha = (4/mu)(mu/4 + eps delta^2/mu - eps c^2) h_mu and
    beta = 4 mu^{-3/2} sqrt(mu/4 + eps delta^2/mu - eps c^2) c_0 come out of
    the general inversion; the closed-form curvature is attached as K_fn.
    """
    if eps not in (1, -1):
        raise DegenerateFamilyError("eps must be +1 or -1")
    if nd.mu <= 0:
        raise DegenerateFamilyError(f"this family needs mu > 0 (got mu={nd.mu})")
    p = ABParams(2.0 * eps, 0.0, -3.0 * eps, float(a1))
    d = delta_of(nd)
    rng = np.random.default_rng(seed)
    for x in chart_points(nd, nd.n, check_points, rng) + [np.zeros(nd.n)]:
        wv = thm3_window(nd, eps, d.delta2, list(x))
        if wv <= 0:
            raise DomainError(f"regularity window mu/4 + eps delta^2/mu - eps c^2 = {wv:.3e} <= 0 at x={x}")
    phi = phi_closed("closed_quadratic", p)
    fam = build_thm2iic(nd, p, "remark", phi=phi, name=f"thm3(eps={eps:+d},a1={a1:g})")
    fam.meta.update(eps=eps, a1=a1, delta2=d.delta2)

    def K_fn(x, s):
        c = c_of(nd, [float(v) for v in x])
        return K_closed("thm3", nd.mu, d.delta, c, s, a1, eps).K

    fam.K_fn = K_fn
    return fam


class KClosed(NamedTuple):
    K: float
    lower: float | None
    upper: float | None


def K_closed(family: str, mu: float, delta: float, c: float, s: float, a1: float = 2.0, eps: float = 1.0) -> KClosed:
    """Closed-form flag curvature of the quadratic family (``thm3``) or the
    square family (``square``, with its two-sided bounds)."""
    d2 = delta * delta
    if family == "thm3":
        win = mu / 4 + eps * d2 / mu - eps * c * c
        phi = 1 + a1 * s + eps * s * s
        num = 6 * mu * (a1 * a1 - 4 * eps) * (1 - eps * s * s) ** 2 * c * c
        num += (mu * mu + 4 * eps * d2) * (a1 * eps * s**3 + 6 * eps * s * s + 3 * a1 * s + 2) * phi
        return KClosed(num / (128 / mu**2 * win**3 * phi**4), None, None)
    if family == "square":
        q = d2 / mu + mu / 4
        K = q * mu**3 / ((1 + s) * (q - c * c)) ** 3 / 16
        r = math.sqrt(4 * d2 + mu * mu)
        lo = (r - 2 * delta) ** 3 / (mu * r)
        hi = (r + 2 * delta) ** 3 / (mu * r)
        return KClosed(K, lo, hi)
    raise DegenerateFamilyError(f"unknown closed-K family {family!r}")


# constant (zero) flag curvature --------------------------------------------------

def fitted_tau_fn(F: ABMetric) -> Callable:
    """tau as the least-squares factor in b_{i|j} = tau M_ij, carried as a jet.

    M_ij = (1 + k1 b^2) a_ij + (k2 b^2 + k3) b_i b_j.  Jet coordinates of
    order r need the metric data at order r + 1.
    """
    p = F.params
    n = F.dim

    def tau_fn(X):
        order = X[0].order if isinstance(X[0], Jet) else 0
        aj = alpha_jets(F.fields, [jets.value(v) for v in X], order + 1, n)
        a, b, bij = aj.a, aj.b, aj.bij
        ainv = aj.ainv
        b2 = sum(ainv[i, j] * b[i] * b[j] for i in range(n) for j in range(n))
        num = 0
        den = 0
        for i in range(n):
            for j in range(n):
                M = (1 + p.k1 * b2) * a[i, j] + (p.k2 * b2 + p.k3) * b[i] * b[j]
                num = num + bij[i, j] * M
                den = den + M * M
        return num / den if order > 0 else float(jets.value(num) / jets.value(den))

    return tau_fn


def cor51_navigation(k_nav: float, a_vec: Sequence[float]) -> NavigationData:
    """Navigation data whose square-metric deformation has zero flag curvature.

    mu = -k^2 / (1 + |a|^2) gives delta^2 = -mu^2/4, which makes the square
    family's curvature vanish identically.
    """
    a = tuple(float(v) for v in a_vec)
    mu = -k_nav**2 / (1 + sum(v * v for v in a))
    return NavigationData(mu, k_nav, a, len(a))


def cor51_build(k1: float, a1: float, nd: NavigationData) -> Family:
    """F = (sqrt(alpha^2 + k beta^2) + eps beta)^2 / sqrt(alpha^2 + k beta^2) with K = 0.

    A zero-curvature square metric (alpha~, beta~) is built first; then
    alpha^2 = alpha~^2 - (k/eps^2) beta~^2 and beta = beta~/eps, so that
    sqrt(alpha^2 + k beta^2) = alpha~ and eps beta = beta~.
    """
    c51 = cor51_constants(k1, a1)
    p = ABParams(float(k1), c51.k2, c51.k3, float(a1))
    sq = ABParams(2.0, 0.0, -3.0, 2.0)
    n = nd.n
    joint_sq = inverse_fields(h_mu_field(nd.mu, n), rho_field(nd), sq, "remark")
    ratio = c51.k / c51.eps**2

    def joint(X):
        at, bt = joint_sq(X)
        a = [[at[i][j] - ratio * bt[i] * bt[j] for j in range(n)] for i in range(n)]
        return a, [v / c51.eps for v in bt]

    phi = phi_closed("closed_cor51", p)
    F = ABMetric(MetricField(n, lambda X: joint(X)[0]), OneFormField(n, lambda X: joint(X)[1]), phi, joint=joint)
    tau_fn = fitted_tau_fn(F)

    def lambda_fn(X):
        X = [float(v) for v in X]
        a_raw, b_raw = joint(X)
        a = np.array(a_raw, dtype=float)
        b = np.array(b_raw, dtype=float)
        b2 = float(b @ np.linalg.solve(a, b))
        tau = tau_fn(X)
        return -(k1 * k1 * b2 + c51.k3 + 2 * a1 * a1) * tau * tau

    return Family(f"cor51(k1={k1:g},a1={a1:g})", F, p, nd, "remark", tau_fn, lambda_fn,
                  radius=chart_radius(nd.mu), K_fn=lambda x, s: 0.0,
                  meta={"k": c51.k, "eps": c51.eps})


# trivial fixtures ----------------------------------------------------------------

def flat_parallel(p: ABParams, b_vec: Sequence[float], n: int = 3, phi: PhiSolution | None = None) -> Family:
    """Euclidean alpha with a constant 1-form: a locally Minkowskian metric."""
    b_vec = tuple(float(v) for v in b_vec)
    g = MetricField(n, lambda X: [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)])
    b = OneFormField(n, lambda X: list(b_vec))
    F = ABMetric(g, b, phi or default_phi(p))
    return Family("flat-parallel", F, p, None, None, lambda X: 0.0, lambda X: 0.0,
                  K_fn=lambda x, s: 0.0, radius=0.5)


def perturbed(fam: Family, size: float = 1e-2) -> Family:
    """Add a non-closed term size * (x^2, -x^1, x^1 x^3, ...) to beta."""
    n = fam.n
    base = fam.F

    def joint(X):
        a, b = base.fields(X)
        extra = [X[1], -X[0]] + [X[0] * X[i] for i in range(2, n)]
        return a, [bi + size * e for bi, e in zip(b, extra)]

    F = ABMetric(MetricField(n, lambda X: joint(X)[0]), OneFormField(n, lambda X: joint(X)[1]), base.phi, joint=joint)
    return Family(fam.name + "+perturbed", F, fam.params, fam.nav, fam.selector, fam.tau_fn, fam.lambda_fn,
                  fam.h, fam.rho, None, fam.radius, dict(fam.meta, perturbation=size))


# sampling -------------------------------------------------------------------------------

def sample_xy(fam: Family, count: int, rng: np.random.Generator):
    """(x, y) pairs: x uniform in the chart ball, y uniform on the alpha-unit sphere."""
    out = []
    for x in chart_points(fam.nav.mu if fam.nav else 0.0, fam.n, count, rng, fam.radius):
        a_raw, _ = fam.F.fields([float(v) for v in x])
        a = np.array([[jets.value(v) for v in row] for row in a_raw])
        L = np.linalg.cholesky(a)
        z = rng.standard_normal(fam.n)
        y = np.linalg.solve(L.T, z / np.linalg.norm(z))
        out.append((x, y))
    return out
