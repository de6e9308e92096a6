"""Truncated multivariate Taylor arithmetic (jets).

A :class:`Jet` stores the Taylor coefficients of a smooth function around a
base point, i.e. ``c[m] = d^m f / m!`` for every multi-index ``m`` of total
degree at most ``order``.  Arithmetic and elementary functions act on these
coefficients so that the result is the exact truncated expansion of the
composed function; partial derivatives are then read off by multiplying with
``m!``.

Monomials are enumerated degree by degree, so the coefficient vector of a jet
of order ``p`` is a prefix of the one of order ``p + 1`` in the same number of
variables.  Combining jets of different orders therefore truncates the longer
one by slicing.
"""
from __future__ import annotations

import functools
import itertools
import math
from typing import Callable, Sequence

import numpy as np

from .errors import JetConfigError, JetOrderError, SingularityError, DomainError

MAX_ORDER = 8
SINGULAR_EPS = 1e-14


class JetSpace:
    """Monomial bookkeeping for jets in ``nvars`` variables up to ``order``."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1:
            raise JetConfigError(f"need at least one variable, got {nvars}")
        if order < 0 or order > MAX_ORDER:
            raise JetConfigError(f"jet order {order} outside [0, {MAX_ORDER}]")
        self.nvars = nvars
        self.order = order
        monos = []
        for d in range(order + 1):
            layer = []
            for combo in itertools.combinations_with_replacement(range(nvars), d):
                e = [0] * nvars
                for v in combo:
                    e[v] += 1
                layer.append(tuple(e))
            # reverse-lexicographic inside a layer so x0 comes first
            monos.extend(sorted(layer, reverse=True))
        self.monomials = tuple(monos)
        self.size = len(monos)
        self.index = {m: i for i, m in enumerate(monos)}
        self.degree = np.array([sum(m) for m in monos])
        self.factorial = np.array([math.prod(math.factorial(k) for k in m) for m in monos], dtype=float)
        self.layer_end = [int(np.searchsorted(self.degree, d, side="right")) for d in range(order + 1)]

    @functools.cached_property
    def mul_table(self):
        I, J, K = [], [], []
        for i, mi in enumerate(self.monomials):
            room = self.order - sum(mi)
            for j in range(self.layer_end[room]):
                mj = self.monomials[j]
                I.append(i)
                J.append(j)
                K.append(self.index[tuple(a + b for a, b in zip(mi, mj))])
        return np.array(I), np.array(J), np.array(K)

    @functools.lru_cache(maxsize=None)
    def diff_table(self, var: int):
        """Source indices and factors mapping ``d/dx_var`` into the order-1 space."""
        low = jet_space(self.nvars, self.order - 1)
        src = np.empty(low.size, dtype=int)
        fac = np.empty(low.size)
        for i, m in enumerate(low.monomials):
            up = list(m)
            up[var] += 1
            src[i] = self.index[tuple(up)]
            fac[i] = up[var]
        return src, fac

    def __repr__(self):
        return f"JetSpace(nvars={self.nvars}, order={self.order})"


@functools.lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> JetSpace:
    return JetSpace(nvars, order)


class Jet:
    """An immutable truncated Taylor expansion."""

    __slots__ = ("space", "c")
    __array_ufunc__ = None  # make numpy scalars defer to our reflected ops

    def __init__(self, space: JetSpace, coeffs):
        self.space = space
        self.c = np.asarray(coeffs, dtype=float)

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, space: JetSpace, value: float) -> "Jet":
        c = np.zeros(space.size)
        c[0] = value
        return cls(space, c)

    @classmethod
    def variable(cls, space: JetSpace, var: int, value: float) -> "Jet":
        c = np.zeros(space.size)
        c[0] = value
        if space.order >= 1:
            e = [0] * space.nvars
            e[var] = 1
            c[space.index[tuple(e)]] = 1.0
        return cls(space, c)

    # inspection ----------------------------------------------------------
    @property
    def order(self) -> int:
        return self.space.order

    @property
    def nvars(self) -> int:
        return self.space.nvars

    @property
    def value(self) -> float:
        return float(self.c[0])

    def coeff(self, m: Sequence[int]) -> float:
        m = tuple(int(k) for k in m)
        if len(m) != self.nvars:
            raise JetConfigError(f"multi-index {m} has wrong length for {self.nvars} variables")
        if sum(m) > self.order:
            raise JetOrderError(f"|m|={sum(m)} exceeds jet order {self.order}")
        return float(self.c[self.space.index[m]])

    def partial(self, m: Sequence[int]) -> float:
        m = tuple(int(k) for k in m)
        return self.coeff(m) * math.prod(math.factorial(k) for k in m)

    def d(self, *vars: int) -> float:
        """Partial derivative by a list of variable indices, e.g. ``j.d(0, 3)``."""
        e = [0] * self.nvars
        for v in vars:
            e[v] += 1
        return self.partial(e)

    def gradient(self) -> np.ndarray:
        return np.array([self.d(v) for v in range(self.nvars)])

    def __repr__(self):
        return f"Jet(value={self.value:.6g}, nvars={self.nvars}, order={self.order})"

    # calculus ------------------------------------------------------------
    def diff(self, var: int) -> "Jet":
        """Exact derivative as a jet of one order less."""
        if self.order == 0:
            raise JetOrderError("cannot differentiate an order-0 jet")
        src, fac = self.space.diff_table(var)
        return Jet(jet_space(self.nvars, self.order - 1), self.c[src] * fac)

    def truncate(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        sp = jet_space(self.nvars, order)
        return Jet(sp, self.c[: sp.size])

    def embed(self, space: JetSpace, positions: Sequence[int]) -> "Jet":
        """Re-express in a larger variable set; own variable i becomes ``positions[i]``."""
        src, dst = _embed_map(self.space, space, tuple(positions))
        c = np.zeros(space.size)
        c[dst] = self.c[src]
        return Jet(space, c)

    # arithmetic ------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.space is self.space:
                return self, other
            if other.nvars != self.nvars:
                raise JetConfigError(f"cannot combine jets in {self.nvars} and {other.nvars} variables")
            p = min(self.order, other.order)
            return self.truncate(p), other.truncate(p)
        return self, Jet.constant(self.space, float(other))

    def __add__(self, other):
        if not isinstance(other, Jet):
            c = self.c.copy()
            c[0] += other
            return Jet(self.space, c)
        a, b = self._coerce(other)
        return Jet(a.space, a.c + b.c)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, Jet):
            c = self.c.copy()
            c[0] -= other
            return Jet(self.space, c)
        a, b = self._coerce(other)
        return Jet(a.space, a.c - b.c)

    def __rsub__(self, other):
        c = -self.c
        c[0] += other
        return Jet(self.space, c)

    def __neg__(self):
        return Jet(self.space, -self.c)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.space, self.c * other)
        a, b = self._coerce(other)
        I, J, K = a.space.mul_table
        c = np.bincount(K, weights=a.c[I] * b.c[J], minlength=a.space.size)
        return Jet(a.space, c)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.space, self.c / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, r):
        if isinstance(r, (int, np.integer)) and r >= 0:
            out = Jet.constant(self.space, 1.0)
            base = self
            k = int(r)
            while k:
                if k & 1:
                    out = out * base
                k >>= 1
                if k:
                    base = base * base
            return out
        return self.power(float(r))

    # elementary functions --------------------------------------------------
    def compose(self, taylor: Sequence[float]) -> "Jet":
        """Evaluate ``sum taylor[k] (self - self.value)^k`` by Horner's rule.

        ``taylor`` holds the univariate Taylor coefficients of an outer function
        at ``self.value``; entries beyond the jet order are ignored.
        """
        p = self.order
        coeffs = list(taylor)[: p + 1]
        if len(coeffs) < p + 1:
            coeffs += [0.0] * (p + 1 - len(coeffs))
        h = self - self.value
        out = Jet.constant(self.space, coeffs[p])
        for k in range(p - 1, -1, -1):
            out = out * h + coeffs[k]
        return out

    def _guard(self, what):
        if abs(self.value) < SINGULAR_EPS:
            raise SingularityError(f"{what} of a jet whose value {self.value:.3e} is ~0")

    def reciprocal(self) -> "Jet":
        self._guard("division")
        a = self.value
        return self.compose([(-1.0) ** k / a ** (k + 1) for k in range(self.order + 1)])

    def power(self, r: float) -> "Jet":
        a = self.value
        if a <= 0:
            if a == 0:
                self._guard(f"power {r}")
            raise DomainError(f"real power {r} of a negative jet value {a:.3e}")
        coeffs = []
        binom = 1.0
        for k in range(self.order + 1):
            coeffs.append(binom * a ** (r - k))
            binom *= (r - k) / (k + 1)
        return self.compose(coeffs)

    def sqrt(self) -> "Jet":
        self._guard("sqrt")
        return self.power(0.5)

    def exp(self) -> "Jet":
        e = math.exp(self.value)
        return self.compose([e / math.factorial(k) for k in range(self.order + 1)])

    def log(self) -> "Jet":
        self._guard("log")
        a = self.value
        if a < 0:
            raise DomainError(f"log of a negative jet value {a:.3e}")
        return self.compose([math.log(a)] + [(-1.0) ** (k + 1) / (k * a**k) for k in range(1, self.order + 1)])

    def sin(self) -> "Jet":
        a = self.value
        cyc = (math.sin(a), math.cos(a), -math.sin(a), -math.cos(a))
        return self.compose([cyc[k % 4] / math.factorial(k) for k in range(self.order + 1)])

    def cos(self) -> "Jet":
        a = self.value
        cyc = (math.cos(a), -math.sin(a), -math.cos(a), math.sin(a))
        return self.compose([cyc[k % 4] / math.factorial(k) for k in range(self.order + 1)])


@functools.lru_cache(maxsize=None)
def _embed_map(src: JetSpace, dst: JetSpace, positions: tuple):
    if len(positions) != src.nvars:
        raise JetConfigError("embedding needs one target position per source variable")
    s_idx, d_idx = [], []
    for i, m in enumerate(src.monomials):
        if sum(m) > dst.order:
            break
        e = [0] * dst.nvars
        for v, k in enumerate(m):
            e[positions[v]] += k
        s_idx.append(i)
        d_idx.append(dst.index[tuple(e)])
    return np.array(s_idx, dtype=int), np.array(d_idx, dtype=int)


# scalar dispatch: the same formula code runs on floats and on jets ----------

def _dispatch(name, fn):
    def f(x):
        if isinstance(x, Jet):
            return getattr(x, name)()
        return fn(x)
    f.__name__ = name
    return f


def _checked_sqrt(x):
    if x < 0:
        raise DomainError(f"sqrt of negative value {x:.3e}")
    return math.sqrt(x)


sqrt = _dispatch("sqrt", _checked_sqrt)
exp = _dispatch("exp", math.exp)
log = _dispatch("log", math.log)
sin = _dispatch("sin", math.sin)
cos = _dispatch("cos", math.cos)


def value(x) -> float:
    """Base-point value of a jet, or the float itself."""
    return x.value if isinstance(x, Jet) else float(x)


def compose(taylor: Sequence[float], x):
    """Apply an outer function given by its Taylor coefficients at ``value(x)``."""
    if isinstance(x, Jet):
        return x.compose(taylor)
    return float(taylor[0])


def variables(point: Sequence[float], order: int) -> list[Jet]:
    """Independent jet variables seeded at ``point``."""
    sp = jet_space(len(point), order)
    return [Jet.variable(sp, i, float(v)) for i, v in enumerate(point)]


def univariate(t0: float, order: int) -> Jet:
    return Jet.variable(jet_space(1, order), 0, t0)


def lift(f: Callable, x0: Sequence[float], order: int, active_vars: Sequence[int] | None = None) -> Jet:
    """Jet of ``f`` at ``x0`` in the variables listed in ``active_vars`` (default: all).

    ``f`` receives a list whose active entries are jets and whose other entries
    are plain floats.
    """
    if order > MAX_ORDER or order < 0:
        raise JetConfigError(f"jet order {order} outside [0, {MAX_ORDER}]")
    x0 = [float(v) for v in x0]
    active = list(range(len(x0))) if active_vars is None else list(active_vars)
    sp = jet_space(len(active), order)
    args = list(x0)
    for slot, var in enumerate(active):
        args[var] = Jet.variable(sp, slot, x0[var])
    out = f(args)
    if not isinstance(out, Jet):
        out = Jet.constant(sp, float(out))
    return out


def partial(j: Jet, m: Sequence[int]) -> float:
    return j.partial(m)


# finite-difference oracle ---------------------------------------------------

_CENTRAL = {
    0: ((0, 1.0),),
    1: ((-1, -0.5), (1, 0.5)),
    2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    3: ((-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)),
    4: ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)),
}


def _central(f, x0, m, h):
    stencils = [_CENTRAL[k] for k in m]
    total = 0.0
    for combo in itertools.product(*stencils):
        pt = [x + off * h for x, (off, _) in zip(x0, combo)]
        w = math.prod(c for _, c in combo)
        total += w * f(pt)
    return total / h ** sum(m)


def fd_oracle(f: Callable, x0: Sequence[float], m: Sequence[int], h: float) -> float:
    """Central-difference estimate of ``d^m f(x0)`` with one Richardson step.

    Each one-dimensional stencil is second-order accurate, so combining step
    ``h`` and ``h/2`` as ``(4 D(h/2) - D(h)) / 3`` leaves an O(h^4) truncation
    error plus roughly ``eps * |f| / h^|m|`` of rounding noise.
    """
    x0 = [float(v) for v in x0]
    m = [int(k) for k in m]
    if any(k > 4 for k in m):
        raise JetConfigError("fd_oracle supports at most fourth derivatives per variable")
    d1 = _central(f, x0, m, h)
    d2 = _central(f, x0, m, h / 2)
    return (4.0 * d2 - d1) / 3.0
