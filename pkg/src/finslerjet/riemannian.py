"""Riemannian geometry of alpha and the covariant derivative of beta.

Fields are callables evaluated on a list of coordinates that may be floats or
jets, so every derivative below comes from jet arithmetic rather than from
finite differences.  Combined (x, y) jets use variables ``0..n-1`` for x and
``n..2n-1`` for y.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import jets
from .errors import DegeneracyError
from .jets import Jet, jet_space

PD_EPS = 1e-10


@dataclass(frozen=True)
class MetricField:
    """Riemannian metric ``a_ij(x)``; ``eval`` returns an n-by-n nested sequence."""

    dim: int
    eval: Callable[[Sequence], Sequence]

    def __call__(self, x):
        return self.eval(x)

    def matrix(self, x) -> np.ndarray:
        return np.array([[jets.value(v) for v in row] for row in self.eval(list(x))], dtype=float)


@dataclass(frozen=True)
class OneFormField:
    """1-form ``b_i(x)``."""

    dim: int
    eval: Callable[[Sequence], Sequence]

    def __call__(self, x):
        return self.eval(x)

    def vector(self, x) -> np.ndarray:
        return np.array([jets.value(v) for v in self.eval(list(x))], dtype=float)


@dataclass(frozen=True)
class BetaDerivedTensors:
    b2: float
    bij: np.ndarray
    r: np.ndarray
    s: np.ndarray
    r_vec: np.ndarray
    s_vec: np.ndarray
    q: np.ndarray
    t: np.ndarray
    q_vec: np.ndarray
    t_vec: np.ndarray
    bu: np.ndarray


# small dense linear algebra over floats or jets ----------------------------

def _obj(shape):
    return np.empty(shape, dtype=object)


def as_obj(a) -> np.ndarray:
    arr = _obj(np.shape(a) if not isinstance(a, np.ndarray) else a.shape)
    arr[...] = a if isinstance(a, np.ndarray) else np.array(a, dtype=object)
    return arr


def values(a) -> np.ndarray:
    return np.vectorize(jets.value, otypes=[float])(np.asarray(a, dtype=object))


def det(a):
    n = len(a)
    if n == 1:
        return a[0][0]
    if n == 2:
        return a[0][0] * a[1][1] - a[0][1] * a[1][0]
    total = 0
    for j in range(n):
        minor = [[a[r][c] for c in range(n) if c != j] for r in range(1, n)]
        term = a[0][j] * det(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def inverse(a) -> np.ndarray:
    """Inverse of a symmetric matrix whose entries may be jets.

    Adjugate formula for n <= 4; above that, the constant part is factorized
    with numpy and the nilpotent remainder handled by a terminating Neumann
    series.
    """
    a = as_obj(a)
    n = a.shape[0]
    a0 = values(a)
    if abs(np.linalg.det(a0)) < 1e-300 or np.linalg.cond(a0) > 1e14:
        raise DegeneracyError(f"metric matrix is singular (cond={np.linalg.cond(a0):.3e})")
    has_jets = any(isinstance(v, Jet) for v in a.flat)
    if not has_jets:
        return np.linalg.inv(a0.astype(float))
    if n <= 4:
        d_inv = 1 / det(a.tolist())
        out = _obj((n, n))
        for i in range(n):
            for j in range(n):
                minor = [[a[r][c] for c in range(n) if c != i] for r in range(n) if r != j]
                cof = det(minor) if n > 1 else 1.0
                out[i, j] = cof * d_inv if (i + j) % 2 == 0 else -cof * d_inv
        return out
    inv0 = np.linalg.inv(a0)
    nil = a - a0
    step = -inv0.dot(nil)
    order = max(v.order for v in a.flat if isinstance(v, Jet))
    term = inv0.astype(object)
    out = term.copy()
    for _ in range(order):
        term = step.dot(term)
        out = out + term
    return out


def check_positive_definite(a0: np.ndarray) -> None:
    lam = np.linalg.eigvalsh(0.5 * (a0 + a0.T))
    if lam.min() <= PD_EPS:
        raise DegeneracyError(f"metric not positive definite (smallest eigenvalue {lam.min():.3e})")


def embed_x(v, n: int, order: int):
    """Move an x-space jet into the combined (x, y) space."""
    if isinstance(v, Jet):
        return v.embed(jet_space(2 * n, order), tuple(range(n)))
    return v


def y_variables(y0: Sequence[float], n: int, order: int, combined: bool = True):
    """Jet variables for the fiber coordinates."""
    y0 = [float(v) for v in y0]
    if combined:
        sp = jet_space(2 * n, order)
        return [Jet.variable(sp, n + i, y0[i]) for i in range(n)]
    return jets.variables(y0, order)


# alpha data -------------------------------------------------------------------

@dataclass
class AlphaJets:
    """Jets (in x only) of the metric and 1-form data at a base point."""

    a: np.ndarray
    ainv: np.ndarray
    gamma: np.ndarray
    b: np.ndarray | None
    bij: np.ndarray | None
    order: int

    def embedded(self, n: int, order: int) -> "AlphaJets":
        f = np.vectorize(lambda v: embed_x(v, n, order), otypes=[object])
        return AlphaJets(
            a=f(self.a), ainv=f(self.ainv), gamma=f(self.gamma),
            b=None if self.b is None else f(self.b),
            bij=None if self.bij is None else f(self.bij),
            order=order,
        )

    def at_point(self) -> "AlphaJets":
        return AlphaJets(
            a=values(self.a), ainv=values(self.ainv), gamma=values(self.gamma),
            b=None if self.b is None else values(self.b),
            bij=None if self.bij is None else values(self.bij),
            order=0,
        )


def christoffel_jets(a, ainv, n: int) -> np.ndarray:
    """Gamma^i_jk from metric jets; the result is one order lower."""
    da = _obj((n, n, n))  # da[l, i, j] = d_l a_ij
    for l in range(n):
        for i in range(n):
            for j in range(i, n):
                da[l, i, j] = da[l, j, i] = a[i, j].diff(l)
    low = _obj((n, n, n))  # Gamma_ljk lowered
    for l in range(n):
        for j in range(n):
            for k in range(j, n):
                low[l, j, k] = low[l, k, j] = 0.5 * (da[j, l, k] + da[k, l, j] - da[l, j, k])
    gam = _obj((n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(j, n):
                acc = 0
                for l in range(n):
                    acc = acc + ainv[i, l] * low[l, j, k]
                gam[i, j, k] = gam[i, k, j] = acc
    return gam


def alpha_jets(fields: Callable, x0: Sequence[float], order: int, n: int) -> AlphaJets:
    """Evaluate ``fields(X) -> (a, b or None)`` on x-jets and derive Gamma and b_{i|j}.

    ``order`` is the jet order of a and b; Gamma and b_{i|j} come out one lower.
    """
    X = jets.variables(x0, order)
    a_raw, b_raw = fields(X)
    a = as_obj([[_as_jet(v, X[0].space) for v in row] for row in a_raw])
    a0 = values(a)
    if not np.allclose(a0, a0.T, atol=1e-13, rtol=0):
        raise DegeneracyError("metric matrix is not symmetric")
    check_positive_definite(a0)
    ainv = inverse(a)
    gam = christoffel_jets(a, ainv, n)
    b = bij = None
    if b_raw is not None:
        b = as_obj([_as_jet(v, X[0].space) for v in b_raw])
        bij = _obj((n, n))
        for i in range(n):
            for j in range(n):
                acc = b[i].diff(j)
                for m in range(n):
                    acc = acc - b[m] * gam[m, i, j]
                bij[i, j] = acc
    low = order - 1
    trunc = np.vectorize(lambda v: v.truncate(low) if isinstance(v, Jet) else v, otypes=[object])
    return AlphaJets(a=trunc(a), ainv=trunc(ainv), gamma=gam, b=None if b is None else trunc(b), bij=bij, order=low)


def _as_jet(v, space):
    return v if isinstance(v, Jet) else Jet.constant(space, float(v))


def _metric_only(g: MetricField):
    return lambda X: (g.eval(X), None)


def _metric_and_form(g: MetricField, b: OneFormField):
    return lambda X: (g.eval(X), b.eval(X))


# public operations ------------------------------------------------------------

def christoffel(g: MetricField, x: Sequence[float]) -> np.ndarray:
    """Levi-Civita symbols ``Gamma^i_jk`` at x, shape (n, n, n)."""
    aj = alpha_jets(_metric_only(g), x, 1, g.dim)
    return values(aj.gamma)


def alpha_spray(g: MetricField, x: Sequence[float], y: Sequence[float]) -> np.ndarray:
    gam = christoffel(g, x)
    y = np.asarray(y, dtype=float)
    return 0.5 * np.einsum("ijk,j,k->i", gam, y, y)


def spray_alpha_jets(aj: AlphaJets, y) -> list:
    n = len(y)
    out = []
    for i in range(n):
        acc = 0
        for j in range(n):
            for k in range(n):
                acc = acc + aj.gamma[i, j, k] * y[j] * y[k]
        out.append(0.5 * acc)
    return out


def beta_tensors(g: MetricField, b: OneFormField, x: Sequence[float]) -> BetaDerivedTensors:
    n = g.dim
    aj = alpha_jets(_metric_and_form(g, b), x, 1, n)
    return derived_tensors(values(aj.a), values(aj.b), values(aj.bij))


def derived_tensors(a: np.ndarray, b: np.ndarray, bij: np.ndarray) -> BetaDerivedTensors:
    """All the quantities built from b_{i|j} by raising/lowering with a_ij."""
    ainv = np.linalg.inv(a)
    bu = ainv @ b
    r = 0.5 * (bij + bij.T)
    s = 0.5 * (bij - bij.T)
    s_up = ainv @ s  # s^i_j
    q = r @ s_up
    t = s @ s_up
    return BetaDerivedTensors(
        b2=float(b @ bu), bij=bij, r=r, s=s,
        r_vec=bu @ r, s_vec=bu @ s, q=q, t=t, q_vec=bu @ q, t_vec=bu @ t, bu=bu,
    )


def riemann_from_spray(G: Sequence[Jet], y: Sequence, n: int) -> np.ndarray:
    """Riemann curvature R^i_k of a spray given as combined (x, y) jets.

    With G of jet order p the result has jet order p - 2, so p = 3 leaves the
    first y-derivatives of R available (needed by the Weyl tensor).
    """
    Gx = [[G[i].diff(k) for k in range(n)] for i in range(n)]
    Gy = [[G[i].diff(n + k) for k in range(n)] for i in range(n)]
    R = _obj((n, n))
    for i in range(n):
        Gxy = [[Gx[i][j].diff(n + k) for k in range(n)] for j in range(n)]
        Gyy = [[Gy[i][j].diff(n + k) for k in range(n)] for j in range(n)]
        for k in range(n):
            acc = 2 * Gx[i][k]
            for j in range(n):
                acc = acc - y[j] * Gxy[j][k] + 2 * G[j] * Gyy[j][k] - Gy[i][j] * Gy[j][k]
            R[i, k] = acc
    return R


def riemann_alpha_jets(g: MetricField, x: Sequence[float], y: Sequence[float], order: int = 2) -> np.ndarray:
    n = g.dim
    aj = alpha_jets(_metric_only(g), x, order + 1, n).embedded(n, order)
    Y = y_variables(y, n, order)
    G = spray_alpha_jets(aj, Y)
    return riemann_from_spray(G, Y, n)


def riemann_alpha(g: MetricField, x: Sequence[float], y: Sequence[float]) -> np.ndarray:
    """Riemann curvature of alpha, ``R^i_k`` as an n-by-n float matrix."""
    return values(riemann_alpha_jets(g, x, y))


def space_form_pattern(a: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``alpha^2 delta^i_k - y^i y_k``."""
    yl = a @ y
    return float(y @ yl) * np.eye(len(y)) - np.outer(y, yl)


@dataclass
class SpaceFormReport:
    residual: float
    mu_fit: float
    mu_spread: float
    mu_samples: np.ndarray


def fit_sectional_curvature(g: MetricField, samples) -> np.ndarray:
    """Least-squares constant mu per sample in ``R = mu (alpha^2 delta - y y_)``."""
    out = []
    for x, y in samples:
        R = riemann_alpha(g, x, y)
        P = space_form_pattern(g.matrix(x), np.asarray(y, dtype=float))
        out.append(float(np.sum(R * P) / np.sum(P * P)))
    return np.array(out)


def check_space_form(g: MetricField, mu: float | None, samples) -> SpaceFormReport:
    """Residual of ``R^i_k - mu (alpha^2 delta^i_k - y^i y_k)`` over samples.

    With ``mu=None`` the constant is fitted by least squares over all samples
    and the residual is computed against the fit.  Each sample residual is the
    max-norm misfit divided by ``1 + |mu| alpha^2``.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("check_space_form needs at least one sample")
    Rs, Ps = [], []
    for x, y in samples:
        Rs.append(riemann_alpha(g, x, y))
        Ps.append(space_form_pattern(g.matrix(x), np.asarray(y, dtype=float)))
    per = np.array([np.sum(R * P) / np.sum(P * P) for R, P in zip(Rs, Ps)])
    mu_fit = float(sum(np.sum(R * P) for R, P in zip(Rs, Ps)) / sum(np.sum(P * P) for P in Ps))
    mu_use = mu_fit if mu is None else float(mu)
    res = 0.0
    for R, P in zip(Rs, Ps):
        alpha2 = P.trace() / (len(P) - 1) if len(P) > 1 else 1.0
        res = max(res, float(np.max(np.abs(R - mu_use * P))) / (1 + abs(mu_use) * alpha2))
    spread = float((per.max() - per.min()) / max(abs(mu_fit), 1e-300)) if abs(mu_fit) > 0 else float(per.max() - per.min())
    return SpaceFormReport(residual=res, mu_fit=mu_fit, mu_spread=spread, mu_samples=per)
