"""Solutions of the ODE that characterizes the admissible phi(s).

    {1 + (k1+k3) s^2 + k2 s^4} phi'' = (k1 + k2 s^2) {phi - s phi'},   phi(0) = 1

A :class:`PhiSolution` can hand out Taylor coefficients of phi at any point
of its domain, which is what jet composition needs.  Closed forms get them by
evaluating the formula on a univariate jet; the numeric solution takes
(phi, phi') from the integrator and generates the higher coefficients with
the ODE recursion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from . import jets
from .errors import (
    DegenerateFamilyError,
    DomainError,
    RandersDegeneracyError,
    SingularODEError,
)

RANDERS_EPS = 1e-12
CLOSED_KINDS = ("closed_square", "closed_quadratic", "closed_cor51")


@dataclass(frozen=True)
class ABParams:
    k1: float
    k2: float
    k3: float
    a1: float = 0.0

    def __post_init__(self):
        if abs(self.k2 - self.k1 * self.k3) < RANDERS_EPS:
            raise RandersDegeneracyError(
                f"k2 = k1*k3 ({self.k2} = {self.k1}*{self.k3}): Randers-type metric, excluded"
            )

    def quartic(self, s):
        """Leading coefficient ``1 + (k1+k3) s^2 + k2 s^4`` (works on jets)."""
        s2 = s * s
        return 1 + (self.k1 + self.k3) * s2 + self.k2 * s2 * s2

    def quadratic(self, t):
        """The same polynomial in ``t = s^2``: ``1 + (k1+k3) t + k2 t^2``."""
        return 1 + (self.k1 + self.k3) * t + self.k2 * t * t

    def first_quadratic_root(self) -> float:
        """Smallest positive root t of ``1 + (k1+k3) t + k2 t^2``, or inf."""
        return _first_positive_root([self.k2, self.k1 + self.k3, 1.0])


def _first_positive_root(poly) -> float:
    poly = list(poly)
    scale = max(abs(c) for c in poly)
    while len(poly) > 1 and abs(poly[0]) <= 1e-14 * scale:
        poly.pop(0)  # negligible leading terms would overflow the companion matrix
    roots = np.roots(poly) if len(poly) > 1 else []
    pos = [r.real for r in np.atleast_1d(roots) if abs(r.imag) < 1e-12 and r.real > 0]
    return min(pos) if pos else math.inf


@dataclass(frozen=True)
class PhiSolution:
    params: ABParams
    kind: str
    domain: tuple
    taylor_fn: Callable[[float, int], np.ndarray] = field(repr=False)
    second_fn: Callable[[float], float] | None = field(default=None, repr=False)

    @property
    def b0(self) -> float:
        return self.domain[1]

    def _check(self, s):
        if not (self.domain[0] < s < self.domain[1]):
            raise DomainError(f"s={s:.6g} outside phi domain {self.domain}")

    def taylor(self, s0: float, order: int) -> np.ndarray:
        """Coefficients ``phi^(k)(s0) / k!`` for k = 0..order."""
        s0 = float(s0)
        self._check(s0)
        return np.asarray(self.taylor_fn(s0, order), dtype=float)

    def eval(self, s: float):
        """(phi, phi', phi'') at s."""
        c = self.taylor(s, 2)
        d2 = 2.0 * c[2] if self.second_fn is None else self.second_fn(float(s))
        return float(c[0]), float(c[1]), float(d2)

    def __call__(self, s):
        """phi applied to a float or a jet."""
        order = s.order if isinstance(s, jets.Jet) else 0
        return jets.compose(self.taylor(jets.value(s), order), s)


# series helpers (univariate truncated power series as coefficient arrays) ----

def _smul(a, b, N):
    return np.convolve(a, b)[: N + 1]


def _sinv(a, N):
    out = np.zeros(N + 1)
    out[0] = 1.0 / a[0]
    for k in range(1, N + 1):
        acc = sum(a[j] * out[k - j] for j in range(1, min(k, len(a) - 1) + 1))
        out[k] = -acc / a[0]
    return out


def ode_taylor(p: ABParams, s0: float, phi0: float, dphi0: float, order: int) -> np.ndarray:
    """Taylor coefficients of the solution through (s0, phi0, dphi0) via the ODE recursion."""
    N = max(order, 1)
    t = np.zeros(N + 1)
    t[0], t[1] = s0, 1.0
    t2 = _smul(t, t, N)
    lead = np.zeros(N + 1)
    lead[0] = 1.0
    lead += (p.k1 + p.k3) * t2 + p.k2 * _smul(t2, t2, N)
    coef = p.k2 * t2
    coef[0] += p.k1
    if abs(lead[0]) < 1e-14:
        raise SingularODEError(f"leading coefficient vanishes at s={s0}")
    inv_lead = _sinv(lead, N)
    c = np.zeros(N + 1)
    c[0], c[1] = phi0, dphi0
    for k in range(N - 1):
        dphi = np.arange(1, N + 1) * c[1:]
        rhs = _smul(_smul(coef, c - _smul(t, np.append(dphi, 0.0), N), N), inv_lead, N)
        c[k + 2] = rhs[k] / ((k + 1) * (k + 2))
    return c[: order + 1]


def _jet_taylor(formula):
    def taylor(s0, order):
        return formula(jets.univariate(s0, order)).c.copy() if order > 0 else np.array([formula(s0)])
    return taylor


# closed forms ------------------------------------------------------------------

def phi_closed(kind: str, p: ABParams | None = None, *, k: float | None = None, eps: float | None = None) -> PhiSolution:
    """Exact phi for the named families.

    closed_square     phi = (1+s)^2
    closed_quadratic  phi = 1 + a1 s + eps s^2        (k1=2eps, k2=0, k3=-3eps)
    closed_cor51      phi = (sqrt(1+k s^2) + eps s)^2 / sqrt(1+k s^2)
    """
    if kind == "closed_square":
        params = p or ABParams(2.0, 0.0, -3.0, 2.0)
        return PhiSolution(params, kind, (-1.0, 1.0), _jet_taylor(lambda s: (1 + s) ** 2))

    if kind == "closed_quadratic":
        if eps is None:
            if p is None:
                raise DegenerateFamilyError("closed_quadratic needs eps or params")
            eps = p.k1 / 2
        a1 = p.a1 if p is not None else 0.0
        params = p or ABParams(2 * eps, 0.0, -3 * eps, a1)
        # singularities: roots of phi and of 1 - eps s^2
        cands = [abs(r.real) for r in np.roots([eps, a1, 1.0]) if abs(r.imag) < 1e-12]
        if eps > 0:
            cands.append(1 / math.sqrt(eps))
        b0 = min(cands) if cands else math.inf
        return PhiSolution(params, kind, (-b0, b0), _jet_taylor(lambda s: 1 + a1 * s + eps * s * s))

    if kind == "closed_cor51":
        if p is not None:
            k_p, eps_p = p.k1 - p.a1**2 / 2, p.a1 / 2
            if k is not None and abs(k - k_p) > 1e-12 or eps is not None and abs(eps - eps_p) > 1e-12:
                raise DegenerateFamilyError("k/eps inconsistent with the supplied params")
            k, eps = k_p, eps_p
            params = p
        else:
            if k is None or eps is None:
                raise DegenerateFamilyError("closed_cor51 needs params or both k and eps")
            c = cor51_constants(k + 2 * eps**2, 2 * eps)
            params = ABParams(k + 2 * eps**2, c.k2, c.k3, 2 * eps)
        cands = []
        if k < 0:
            cands.append(1 / math.sqrt(-k))
        if eps * eps > k:
            cands.append(1 / math.sqrt(eps * eps - k))
        b0 = min(cands) if cands else math.inf

        def formula(s):
            r = jets.sqrt(1 + k * s * s)
            return (r + eps * s) ** 2 / r

        def taylor(s0, order):
            if 1 + k * s0 * s0 <= 0:
                raise DomainError(f"1 + k s^2 <= 0 at s={s0}")
            return _jet_taylor(formula)(s0, order)

        return PhiSolution(params, kind, (-b0, b0), taylor)

    raise DegenerateFamilyError(f"unknown closed kind {kind!r}; expected one of {CLOSED_KINDS}")


class Cor51Constants(NamedTuple):
    k2: float
    k3: float
    k: float
    eps: float


def cor51_constants(k1: float, a1: float) -> Cor51Constants:
    """Constants of the constant-flag-curvature family with phi'(0) = a1."""
    if a1 == 0:
        raise DegenerateFamilyError("a1 = phi'(0) must be nonzero for this family")
    k2 = 3 / 8 * a1**4 - 5 / 4 * k1 * a1**2 + k1**2
    k3 = k1 - 5 / 4 * a1**2
    return Cor51Constants(k2=k2, k3=k3, k=k1 - a1**2 / 2, eps=a1 / 2)


# numeric initial-value solution -------------------------------------------------

def default_b0(p: ABParams) -> float:
    t = p.first_quadratic_root()
    return min(0.9 * math.sqrt(t), 1.0) if math.isfinite(t) else 1.0


def _dop853_derivative(interp, t: float, comp: int) -> float:
    """d/dt of one component of a DOP853 dense-output polynomial."""
    F = getattr(interp, "F", None)
    if F is None:
        return math.nan
    h = interp.h
    x = (t - interp.t_old) / h
    v, d = 0.0, 0.0
    for i, f in enumerate(reversed(F[:, comp])):
        v += f
        if i % 2 == 0:
            v, d = v * x, d * x + v
        else:
            v, d = v * (1 - x), d * (1 - x) - v
    return d / h


class _Branch:
    def __init__(self, sol):
        self.sol = sol
        ts = np.asarray(sol.ts)
        self.ascending = ts[-1] > ts[0]
        self.ts = ts if self.ascending else ts[::-1]
        self.interps = sol.interpolants if self.ascending else sol.interpolants[::-1]

    def interp(self, s):
        i = int(np.clip(np.searchsorted(self.ts, s) - 1, 0, len(self.interps) - 1))
        return self.interps[i]


def solve_phi(
    p: ABParams,
    b0: float | None = None,
    rtol: float = 1e-13,
    atol: float = 1e-13,
    max_step: float = 0.02,
) -> PhiSolution:
    """Integrate the ODE from s=0 in both directions with DOP853 dense output.

    ``max_step`` keeps the dense-output polynomials short enough that their
    derivative (used as phi'') stays accurate to ~1e-13.
    """
    t_root = p.first_quadratic_root()
    s_root = math.sqrt(t_root) if math.isfinite(t_root) else math.inf
    if b0 is None:
        b0 = default_b0(p)
    if b0 >= s_root - 1e-3:
        raise SingularODEError(
            f"1+(k1+k3)s^2+k2 s^4 vanishes at |s|={s_root:.6g}, inside requested domain b0={b0}"
        )

    def rhs(s, z):
        return [z[1], (p.k1 + p.k2 * s * s) * (z[0] - s * z[1]) / p.quartic(s)]

    opts = dict(method="DOP853", dense_output=True, rtol=rtol, atol=atol, max_step=max_step)
    branches = []
    for end in (b0, -b0):
        sol = solve_ivp(rhs, (0.0, end), [1.0, p.a1], **opts)
        if not sol.success:
            raise SingularODEError(f"integration to s={end} failed: {sol.message}")
        branches.append(_Branch(sol.sol))
    pos, neg = branches

    def state(s):
        br = pos if s >= 0 else neg
        return br.sol(s)

    def taylor(s0, order):
        z = state(s0)
        return ode_taylor(p, s0, float(z[0]), float(z[1]), order)

    def second(s):
        br = pos if s >= 0 else neg
        return _dop853_derivative(br.interp(s), s, 1)

    return PhiSolution(p, "numeric", (-b0, b0), taylor, second)


def ode_residual(phi: PhiSolution, s: float) -> float:
    """``|f phi'' - (k1 + k2 s^2)(phi - s phi')|`` using phi's own second derivative."""
    p = phi.params
    f0, f1, f2 = phi.eval(s)
    return abs(p.quartic(s) * f2 - (p.k1 + p.k2 * s * s) * (f0 - s * f1))


@dataclass
class RegularityReport:
    passed: bool
    min_value: float
    lemma_linear: float
    lemma_quartic: float
    message: str = ""


def regularity_check(phi: PhiSolution, b: float, n_grid: int = 201) -> RegularityReport:
    """Check ``phi - s phi' + (b^2 - s^2) phi'' > 0`` on |s| <= b plus the two
    positivity conditions ``1 + k1 b^2 > 0`` and ``1 + (k1+k3) b^2 + k2 b^4 > 0``."""
    p = phi.params
    b = abs(float(b))
    lin = 1 + p.k1 * b * b
    quart = p.quartic(b)
    if b >= phi.b0:
        return RegularityReport(False, math.nan, lin, quart, f"b={b} not below domain bound {phi.b0}")
    vals = []
    for s in np.linspace(-b, b, n_grid):
        f0, f1, f2 = phi.eval(float(s))
        vals.append(f0 - s * f1 + (b * b - s * s) * f2)
    mn = float(min(vals))
    ok = mn > 0 and lin > 0 and quart > 0
    msg = "" if ok else f"min={mn:.3e}, 1+k1b^2={lin:.3e}, quartic={quart:.3e}"
    return RegularityReport(ok, mn, lin, quart, msg)
