"""Deformation h = sqrt(u alpha^2 + v beta^2), rho = w beta and its inverse.

The functions u, v, w of t = b^2 come from a "triple": either the explicit
exponential solution of the (u, v, w) ODE system or, for the quadratic-phi
parameters, the polynomial triple u = (1 - eps t)^2, v = 0, w = sqrt(1 - eps t).
Both evaluate on floats and on jets, so x-derivatives flow through b^2(x).
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from . import jets
from .errors import DegeneracyError, DegenerateFamilyError, DomainError, InversionError
from .jets import Jet
from .phiode import ABParams, _smul, _sinv
from .riemannian import (
    MetricField,
    OneFormField,
    alpha_spray,
    as_obj,
    beta_tensors,
    inverse,
    values,
)

TRIPLES = ("explicit", "remark")


@dataclass(frozen=True)
class DeformationTriple:
    t: float
    u: float
    v: float
    w: float
    du: float
    dv: float
    dw: float
    sigma: float


def _fpoly(p: ABParams, t):
    return 1 + (p.k1 + p.k3) * t + p.k2 * t * t


def _positivity_limit(p: ABParams) -> float:
    """First t > 0 where 1 + (k1+k3) t + k2 t^2 vanishes (inf if none)."""
    return p.first_quadratic_root()


def sigma_of(t: float, p: ABParams) -> float:
    """sigma(t) with 2 sigma = int_0^t (k2 r + k3) / (1 + (k1+k3) r + k2 r^2) dr."""
    t = float(t)
    if t == 0:
        return 0.0
    lo, hi = min(0.0, t), max(0.0, t)
    tm = _positivity_limit(p)
    if hi >= tm or _fpoly(p, lo) <= 0:
        raise DomainError(f"integrand denominator vanishes in [0, {t}]")
    if p.k2 == 0:
        m = p.k1 + p.k3
        if m == 0:
            return 0.5 * p.k3 * t
        return 0.5 * p.k3 / m * math.log1p(m * t)
    val, _ = integrate.quad(lambda r: (p.k2 * r + p.k3) / _fpoly(p, r), 0.0, t, epsabs=1e-14, epsrel=1e-13)
    return 0.5 * val


def _sigma_jet(p: ABParams, t):
    """sigma composed with a jet t: value by sigma_of, higher terms by term-wise
    integration of the integrand's series."""
    if not isinstance(t, Jet):
        return sigma_of(t, p)
    N = t.order
    t0 = t.value
    num = np.zeros(N + 1)
    num[0] = p.k2 * t0 + p.k3
    if N >= 1:
        num[1] = p.k2
    den = np.zeros(N + 1)
    den[0] = _fpoly(p, t0)
    if N >= 1:
        den[1] = (p.k1 + p.k3) + 2 * p.k2 * t0
    if N >= 2:
        den[2] = p.k2
    integrand = _smul(num, _sinv(den, N), N)
    series = np.zeros(N + 1)
    series[0] = sigma_of(t0, p)
    series[1:] = 0.5 * integrand[:N] / np.arange(1, N + 1)
    return t.compose(series)


def _remark_eps(p: ABParams) -> float:
    eps = p.k1 / 2
    if abs(p.k2) > 1e-12 or abs(p.k3 + 3 * eps) > 1e-12 or eps == 0:
        raise DegenerateFamilyError(
            "the polynomial triple needs k1 = 2 eps, k2 = 0, k3 = -3 eps with eps != 0"
        )
    return eps


def triple_uvw(selector: str, p: ABParams, t):
    """(u, v, w) at t (float or jet) for the chosen triple."""
    if selector == "explicit":
        f = _fpoly(p, t)
        if jets.value(f) <= 0:
            raise DomainError(f"1 + (k1+k3) t + k2 t^2 <= 0 at t={jets.value(t):.6g}")
        sig = _sigma_jet(p, t)
        u = jets.exp(2 * sig)
        v = (p.k1 + p.k3 + p.k2 * t) * u
        w = jets.sqrt(f) * jets.exp(sig)
        return u, v, w
    if selector == "remark":
        eps = _remark_eps(p)
        one = 1 - eps * t
        if jets.value(one) <= 0:
            raise DomainError(f"1 - eps t <= 0 at t={jets.value(t):.6g}")
        return one * one, 0 * t, jets.sqrt(one)
    raise DegenerateFamilyError(f"unknown triple {selector!r}; expected one of {TRIPLES}")


def triple_limit(selector: str, p: ABParams) -> float:
    """Sup of t where the triple is defined and the quadratic stays positive."""
    tm = _positivity_limit(p)
    if selector == "remark":
        eps = _remark_eps(p)
        if eps > 0:
            tm = min(tm, 1 / eps)
    return tm


def _triple_at(selector: str, t: float, p: ABParams) -> DeformationTriple:
    T = jets.univariate(float(t), 1)
    u, v, w = triple_uvw(selector, p, T)
    sig = sigma_of(t, p) if selector == "explicit" else math.nan
    return DeformationTriple(float(t), u.value, v.value, w.value, u.c[1], v.c[1], w.c[1], sig)


def triple_explicit(t: float, p: ABParams) -> DeformationTriple:
    """Explicit triple u = e^{2 sigma}, v = (k1+k3+k2 t) u, w = sqrt(1+(k1+k3)t+k2 t^2) e^sigma."""
    return _triple_at("explicit", t, p)


def triple_remark(t: float, p: ABParams) -> DeformationTriple:
    """Polynomial triple for k1 = 2 eps, k2 = 0, k3 = -3 eps."""
    return _triple_at("remark", t, p)


def triple_ode_residual(T: DeformationTriple, p: ABParams) -> tuple[float, float, float]:
    """Absolute residuals of the three first-order ODEs for (u, v, w)."""
    f = _fpoly(p, T.t)
    u, v, w = T.u, T.v, T.w
    r1 = T.du - (v - p.k1 * u) / f
    r2 = T.dv - (u * (p.k2 * u - p.k3 * v - 2 * p.k1 * v) + 2 * v * v) / (u * f)
    r3 = T.dw - w * (3 * v - p.k3 * u - 2 * p.k1 * u) / (2 * u * f)
    return abs(r1), abs(r2), abs(r3)


# forward deformation -----------------------------------------------------------

def _b2_jet(a, b):
    n = len(b)
    ainv = inverse(as_obj(a))
    return sum(ainv[i, j] * b[i] * b[j] for i in range(n) for j in range(n))


def deform_fields(g: MetricField, b: OneFormField, p: ABParams, selector: str):
    """Jet-capable (h, rho) fields with u, v, w evaluated at b^2(x)."""
    n = g.dim

    def joint(X):
        a = g.eval(X)
        bb = b.eval(X)
        t = _b2_jet(a, bb)
        u, v, w = triple_uvw(selector, p, t)
        h = [[u * a[i][j] + v * bb[i] * bb[j] for j in range(n)] for i in range(n)]
        return h, [w * bi for bi in bb]

    return MetricField(n, lambda X: joint(X)[0]), OneFormField(n, lambda X: joint(X)[1]), joint


@dataclass
class DeformResult:
    h_val: float
    rho_val: float
    h: MetricField
    rho: OneFormField


def deform(g: MetricField, b: OneFormField, p: ABParams, selector: str, x, y) -> DeformResult:
    hf, rf, _ = deform_fields(g, b, p, selector)
    yv = np.asarray(y, dtype=float)
    H = hf.matrix(x)
    h2 = float(yv @ H @ yv)
    if h2 <= 0:
        raise DegeneracyError(f"u alpha^2 + v beta^2 = {h2:.3e} is not positive")
    return DeformResult(math.sqrt(h2), float(rf.vector(x) @ yv), hf, rf)


def p2_of_t(selector: str, p: ABParams, t):
    """w^2 t / (u + v t): the h-norm squared of rho as a function of b^2."""
    u, v, w = triple_uvw(selector, p, t)
    return w * w * t / (u + v * t)


# inverse deformation -------------------------------------------------------------

SCAN_STEP = 1e-3
SCAN_CAP = 50.0


def _scan_grid(selector: str, p: ABParams):
    tm = triple_limit(selector, p)
    hi = 0.95 * tm if math.isfinite(tm) else SCAN_CAP
    m = max(int(math.ceil(hi / SCAN_STEP)), 2)
    return np.linspace(0.0, hi, m + 1)


def _p2_on_grid(selector: str, p: ABParams, grid: np.ndarray) -> np.ndarray:
    """Vectorized p^2(t) for the sign scan; sigma by cumulative trapezoid
    (only signs matter here, roots are refined on the exact function)."""
    if selector == "remark":
        eps = _remark_eps(p)
        return grid / (1 - eps * grid)
    f = _fpoly(p, grid)
    integrand = 0.5 * (p.k2 * grid + p.k3) / f
    sig = integrate.cumulative_trapezoid(integrand, grid, initial=0.0)
    u = np.exp(2 * sig)
    v = (p.k1 + p.k3 + p.k2 * grid) * u
    w2 = f * u
    return w2 * grid / (u + v * grid)


def solve_b2(p2: float, p: ABParams, selector: str) -> float:
    """Root t of w(t)^2 t / (u(t) + v(t) t) = p2 on [0, 0.95 t_max].

    The bracket is scanned at 1e-3 resolution for sign changes and each
    bracket refined with Brent's method.
    """
    return _solve_b2_cached(float(p2), p, selector)


@functools.lru_cache(maxsize=4096)
def _solve_b2_cached(p2: float, p: ABParams, selector: str) -> float:
    if p2 < 0:
        raise InversionError(f"p^2 = {p2} is negative")
    if p2 == 0:
        return 0.0
    grid = _scan_grid(selector, p)
    G = _p2_on_grid(selector, p, grid) - p2
    exact = lambda t: p2_of_t(selector, p, t) - p2
    roots = []
    for i in np.flatnonzero(G[:-1] * G[1:] <= 0):
        lo, hi = float(grid[i]), float(grid[i + 1])
        if G[i] == 0:
            if not roots or roots[-1] != lo:
                roots.append(lo)
            continue
        if G[i + 1] == 0:
            continue
        # the exact function decides the bracket; the scan only locates it
        if exact(lo) * exact(hi) > 0:
            lo, hi = max(0.0, lo - SCAN_STEP), min(float(grid[-1]), hi + SCAN_STEP)
        roots.append(optimize.brentq(exact, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200))
    if G[-1] == 0:
        roots.append(float(grid[-1]))
    if not roots:
        raise InversionError(f"no b^2 in [0, {grid[-1]:.6g}] with p^2 = {p2:.6g}")
    if len(roots) > 1:
        raise InversionError(f"{len(roots)} candidate values of b^2 for p^2 = {p2:.6g}", roots)
    return roots[0]


def _b2_jet_from_p2(p2, p: ABParams, selector: str):
    """Lift the scalar root to a jet: fixed-slope Newton gains one order per step."""
    t0 = solve_b2(jets.value(p2), p, selector)
    if not isinstance(p2, Jet):
        return t0
    T1 = jets.univariate(t0, 1)
    slope = p2_of_t(selector, p, T1).c[1]
    if slope == 0:
        raise InversionError(f"d p^2 / d b^2 vanishes at b^2 = {t0:.6g}")
    t = Jet.constant(p2.space, t0)
    for _ in range(p2.order + 1):
        t = t - (p2_of_t(selector, p, t) - p2) / slope
    return t


def inverse_fields(h: MetricField, rho: OneFormField, p: ABParams, selector: str) -> Callable:
    """``X -> (a_ij, b_i)`` recovering alpha and beta from (h, rho)."""
    n = h.dim

    def joint(X):
        H = h.eval(X)
        P = rho.eval(X)
        p2 = _b2_jet(H, P)
        t = _b2_jet_from_p2(p2, p, selector)
        u, v, w = triple_uvw(selector, p, t)
        c = v / (w * w)
        a = [[(H[i][j] - c * P[i] * P[j]) / u for j in range(n)] for i in range(n)]
        return a, [Pi / w for Pi in P]

    return joint


@dataclass
class InverseResult:
    alpha: MetricField
    beta: OneFormField
    b2: float
    joint: Callable


def invert_deform(h: MetricField, rho: OneFormField, p: ABParams, selector: str, x) -> InverseResult:
    joint = inverse_fields(h, rho, p, selector)
    n = h.dim
    a_raw, b_raw = joint([float(v) for v in x])
    a = np.array([[jets.value(v) for v in row] for row in a_raw])
    b = np.array([jets.value(v) for v in b_raw])
    return InverseResult(
        MetricField(n, lambda X: joint(X)[0]), OneFormField(n, lambda X: joint(X)[1]),
        float(b @ np.linalg.solve(a, b)), joint,
    )


# verification ----------------------------------------------------------------

@dataclass
class ConformalReport:
    residual: float
    antisym: float
    scale: float


def conformal_check(h: MetricField, rho: OneFormField, c_fn: Callable, samples) -> ConformalReport:
    """max |p_{i|j} + 2 c h_ij| over the sample points, plus the antisymmetric part."""
    res = anti = scale = 0.0
    for x in samples:
        bt = beta_tensors(h, rho, x)
        H = h.matrix(x)
        c = float(jets.value(c_fn([float(v) for v in x])))
        res = max(res, float(np.abs(bt.r + 2 * c * H).max()))
        anti = max(anti, float(np.abs(bt.s).max()))
        scale = max(scale, float(np.abs(H).max()))
    return ConformalReport(res, anti, scale)


def spray_relation_residual(g: MetricField, b: OneFormField, p: ABParams, selector: str,
                            tau_fn: Callable, x, y) -> float:
    """|G_h - G_alpha - tau {(k1 alpha^2 + k2 beta^2) b^i / 2 - (k1 u - v) beta y^i / u}|."""
    hf, _, _ = deform_fields(g, b, p, selector)
    yv = np.asarray(y, dtype=float)
    a = g.matrix(x)
    bv = b.vector(x)
    bu = np.linalg.solve(a, bv)
    t = float(bv @ bu)
    u, v, _ = triple_uvw(selector, p, t)
    al2 = float(yv @ a @ yv)
    be = float(bv @ yv)
    tau = float(jets.value(tau_fn([float(v) for v in x])))
    Gh = alpha_spray(hf, x, yv)
    Ga = alpha_spray(g, x, yv)
    pred = Ga + tau * (0.5 * (p.k1 * al2 + p.k2 * be * be) * bu - (p.k1 * u - v) * be / u * yv)
    return float(np.abs(Gh - pred).max())


def spray_relation_check(g: MetricField, b: OneFormField, p: ABParams, selector: str,
                         tau_fn: Callable, samples) -> float:
    return max(spray_relation_residual(g, b, p, selector, tau_fn, x, y) for x, y in samples)


def lambda_identity(p: ABParams, mu: float, u: float, v: float, tau: float, b2: float,
                    variant: str = "derived") -> float:
    """lambda from mu, tau and the triple.

    ``derived``: mu u - (k1 u (2 + k1 b^2) - v) tau^2 / u, from the curvature of h.
    ``printed``: the same with k2 b^2 in place of k1 b^2, as stated alongside tau = -2uc/w.
    """
    kk = p.k1 if variant == "derived" else p.k2
    if variant not in ("derived", "printed"):
        raise ValueError(f"unknown lambda variant {variant!r}")
    return mu * u - (p.k1 * u * (2 + kk * b2) - v) * tau * tau / u
