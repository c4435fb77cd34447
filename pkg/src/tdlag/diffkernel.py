"""Forward-mode differentiation kernel.

Two number types are provided:

``Jet``
    multivariate second-order truncated Taylor value (value, gradient,
    Hessian) over a fixed set of seeded inputs.
``Dual``
    first-order dual number with a single tangent slot, used to nest one more
    derivative on top of a ``Jet`` (or to push a tangent vector through a map).

Both types implement the ``exp``/``sin``/... methods that numpy ufuncs look
up on object operands, so user code written with ``np.exp`` and friends works
unchanged for floats, ``Jet`` and ``Dual`` inputs.

The finite-difference routines at the bottom are an independent oracle and do
not touch either number type.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "DomainError",
    "Jet",
    "Dual",
    "Box",
    "ScalarField",
    "VectorMap",
    "TangentSample",
    "LagrangianJet",
    "DerivativeBundle",
    "partials",
    "map_jet",
    "fd_partials",
    "fd_map_jet",
    "real_array",
    "real_part",
    "solve",
    "exp",
    "log",
    "sin",
    "cos",
    "sqrt",
    "tanh",
]


class DomainError(ValueError):
    """Evaluation point outside a declared domain box."""

    def __init__(self, message: str, index: int | None = None, value: float | None = None):
        super().__init__(message)
        self.index = index
        self.value = value


# --------------------------------------------------------------------------- #
# number types
# --------------------------------------------------------------------------- #

_SCALARS = (int, float, np.integer, np.floating)


def _fn(name: str, v):
    if isinstance(v, _SCALARS):
        return getattr(math, name)(float(v))
    return getattr(v, name)()


class Jet:
    """Second-order truncated Taylor value ``val + g.d + d.H.d/2``.

    ``hess`` may be ``None``, in which case the jet is first order only and
    Hessian bookkeeping is skipped.
    """

    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad: np.ndarray, hess: np.ndarray | None = None):
        self.val = val
        self.grad = grad
        self.hess = hess

    @classmethod
    def variable(cls, val, index: int, size: int, second: bool = True) -> "Jet":
        grad = np.zeros(size)
        grad[index] = 1.0
        return cls(val, grad, np.zeros((size, size)) if second else None)

    def __repr__(self) -> str:
        return f"Jet({self.val!r}, grad={self.grad!r})"

    # unary chain rule: f(u) with f', f'' evaluated at u.val
    def _chain(self, f0, f1, f2) -> "Jet":
        hess = None
        if self.hess is not None:
            hess = self.hess * f1 + np.outer(self.grad, self.grad) * f2
        return Jet(f0, self.grad * f1, hess)

    def __add__(self, other):
        if isinstance(other, Jet):
            hess = None if self.hess is None or other.hess is None else self.hess + other.hess
            return Jet(self.val + other.val, self.grad + other.grad, hess)
        if isinstance(other, np.ndarray):
            return NotImplemented
        return Jet(self.val + other, self.grad, self.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.grad, None if self.hess is None else -self.hess)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            hess = None
            if self.hess is not None and other.hess is not None:
                cross = np.outer(self.grad, other.grad)
                hess = self.hess * other.val + other.hess * self.val + (cross + cross.T)
            return Jet(
                self.val * other.val,
                self.grad * other.val + other.grad * self.val,
                hess,
            )
        if isinstance(other, np.ndarray):
            return NotImplemented
        return Jet(self.val * other, self.grad * other, None if self.hess is None else self.hess * other)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        inv = 1.0 / self.val
        return self._chain(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        if isinstance(other, np.ndarray):
            return NotImplemented
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            return (self.log() * p).exp()
        if p == 2:
            return self * self
        if p == 1:
            return self
        if p == 0:
            return Jet(1.0, self.grad * 0.0, None if self.hess is None else self.hess * 0.0)
        u = self.val
        return self._chain(u**p, p * u ** (p - 1), p * (p - 1) * u ** (p - 2))

    def __rpow__(self, base):
        return (self * _fn("log", base)).exp()

    def __abs__(self):
        return -self if real_part(self.val) < 0 else self

    def exp(self):
        e = _fn("exp", self.val)
        return self._chain(e, e, e)

    def log(self):
        inv = 1.0 / self.val
        return self._chain(_fn("log", self.val), inv, -inv * inv)

    def sin(self):
        s, c = _fn("sin", self.val), _fn("cos", self.val)
        return self._chain(s, c, -s)

    def cos(self):
        s, c = _fn("sin", self.val), _fn("cos", self.val)
        return self._chain(c, -s, -c)

    def sqrt(self):
        r = _fn("sqrt", self.val)
        return self._chain(r, 0.5 / r, -0.25 / (r * self.val))

    def tanh(self):
        th = _fn("tanh", self.val)
        d = 1.0 - th * th
        return self._chain(th, d, -2.0 * th * d)


class Dual:
    """Dual number ``re + du*eps`` with ``eps**2 = 0``.

    ``re`` and ``du`` may themselves be ``Jet`` values; this is how tangent
    maps ``(x, y) -> (f(x), df(x) y)`` are evaluated on jet-valued points.
    """

    __slots__ = ("re", "du")

    def __init__(self, re, du=0.0):
        self.re = re
        self.du = du

    def __repr__(self) -> str:
        return f"Dual({self.re!r}, {self.du!r})"

    def _chain(self, f0, f1) -> "Dual":
        return Dual(f0, self.du * f1)

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.re + other.re, self.du + other.du)
        if isinstance(other, np.ndarray):
            return NotImplemented
        return Dual(self.re + other, self.du)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.re, -self.du)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.re * other.re, self.re * other.du + self.du * other.re)
        if isinstance(other, np.ndarray):
            return NotImplemented
        return Dual(self.re * other, self.du * other)

    __rmul__ = __mul__

    def reciprocal(self) -> "Dual":
        inv = 1.0 / self.re
        return self._chain(inv, -inv * inv)

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return self * other.reciprocal()
        if isinstance(other, np.ndarray):
            return NotImplemented
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Dual):
            return (self.log() * p).exp()
        if p == 2:
            return self * self
        if p == 1:
            return self
        if p == 0:
            return Dual(1.0, self.du * 0.0)
        return self._chain(self.re**p, p * self.re ** (p - 1))

    def __rpow__(self, base):
        return (self * _fn("log", base)).exp()

    def __abs__(self):
        return -self if real_part(self.re) < 0 else self

    def exp(self):
        e = _fn("exp", self.re)
        return self._chain(e, e)

    def log(self):
        return self._chain(_fn("log", self.re), 1.0 / self.re)

    def sin(self):
        return self._chain(_fn("sin", self.re), _fn("cos", self.re))

    def cos(self):
        return self._chain(_fn("cos", self.re), -_fn("sin", self.re))

    def sqrt(self):
        r = _fn("sqrt", self.re)
        return self._chain(r, 0.5 / r)

    def tanh(self):
        th = _fn("tanh", self.re)
        return self._chain(th, 1.0 - th * th)


def exp(v):
    return _fn("exp", v)


def log(v):
    return _fn("log", v)


def sin(v):
    return _fn("sin", v)


def cos(v):
    return _fn("cos", v)


def sqrt(v):
    return _fn("sqrt", v)


def tanh(v):
    return _fn("tanh", v)


def real_part(v) -> float:
    """Strip all derivative parts, returning the underlying float."""
    while isinstance(v, (Jet, Dual)):
        v = v.val if isinstance(v, Jet) else v.re
    return float(v)


def real_array(a) -> np.ndarray:
    a = np.asarray(a)
    if a.dtype != object:
        return a.astype(float)
    return np.vectorize(real_part, otypes=[float])(a)


def _dual_split(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    re = np.empty(a.shape)
    du = np.empty(a.shape)
    for idx, v in np.ndenumerate(a):
        if isinstance(v, Dual):
            re[idx], du[idx] = v.re, v.du
        else:
            re[idx], du[idx] = v, 0.0
    return re, du


def solve(A, b) -> np.ndarray:
    """Dense solve ``A x = b`` that differentiates through ``Dual`` entries.

    With ``A = A0 + eps A1`` and ``b = b0 + eps b1`` this returns
    ``x0 + eps x1`` where ``x1 = A0^{-1} (b1 - A1 x0)``.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    if A.dtype != object and b.dtype != object:
        return np.linalg.solve(A.astype(float), b.astype(float))
    A0, A1 = _dual_split(A)
    b0, b1 = _dual_split(b)
    x0 = np.linalg.solve(A0, b0)
    x1 = np.linalg.solve(A0, b1 - A1 @ x0)
    out = np.empty(x0.shape, dtype=object)
    for idx in np.ndindex(x0.shape):
        out[idx] = Dual(float(x0[idx]), float(x1[idx]))
    return out


# --------------------------------------------------------------------------- #
# fields and maps
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class Box:
    """Axis-aligned open box ``lo < p < hi``; infinite bounds are allowed."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-d arrays of equal length")
        if np.any(lo >= hi):
            raise ValueError("box must be nonempty (lo < hi)")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def unbounded(cls, dim: int) -> "Box":
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @property
    def dim(self) -> int:
        return self.lo.size

    def margin(self, p) -> np.ndarray:
        """Distance of each coordinate of ``p`` to the nearer face."""
        p = np.asarray(p, dtype=float)
        return np.minimum(p - self.lo, self.hi - p)

    def contains(self, p, margin: float = 0.0) -> bool:
        return bool(np.all(self.margin(p) > -margin))

    def check(self, p, what: str = "point", margin: float = 0.0) -> None:
        p = np.asarray(p, dtype=float)
        if p.shape != self.lo.shape:
            raise DomainError(f"{what} has dimension {p.size}, box has {self.dim}")
        m = self.margin(p)
        bad = np.flatnonzero(~(m > -margin))
        if bad.size:
            i = int(bad[0])
            raise DomainError(
                f"{what} coordinate {i} = {p[i]!r} outside ({self.lo[i]}, {self.hi[i]})",
                index=i,
                value=float(p[i]),
            )

    def sample(self, rng: np.random.Generator, size: int, shrink: float = 0.0) -> np.ndarray:
        """Uniform samples from the box shrunk by ``shrink`` on each side."""
        if not (np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi))):
            raise ValueError("cannot sample an unbounded box")
        lo, hi = self.lo + shrink, self.hi - shrink
        return rng.uniform(lo, hi, size=(size, self.dim))


class TangentSample(NamedTuple):
    """A point ``(t, x, y)`` of R x TM in chart coordinates."""

    t: float
    x: np.ndarray
    y: np.ndarray

    @classmethod
    def of(cls, t, x, y) -> "TangentSample":
        return cls(t, np.atleast_1d(np.asarray(x)), np.atleast_1d(np.asarray(y)))

    def flat(self) -> np.ndarray:
        return np.concatenate([[real_part(self.t)], real_array(self.x), real_array(self.y)])


@dataclass(frozen=True)
class ScalarField:
    """Scalar ``L(t, x, y)`` on an open box of R^(1+2n).

    ``fn`` receives ``t`` and 1-d arrays ``x``, ``y``; it must use only
    arithmetic and numpy ufuncs so that jet-valued inputs flow through.
    """

    fn: Callable
    n: int
    box: Box | None = None
    name: str = "L"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be >= 1")
        if self.box is None:
            object.__setattr__(self, "box", Box.unbounded(1 + 2 * self.n))
        elif self.box.dim != 1 + 2 * self.n:
            raise ValueError(f"box dimension {self.box.dim} != 1 + 2n = {1 + 2 * self.n}")

    def check(self, v: TangentSample) -> None:
        self.box.check(v.flat(), what=f"{self.name} argument (t, x, y)")

    def __call__(self, t, x, y):
        v = TangentSample.of(t, x, y)
        self.check(v)
        return self.fn(v.t, v.x, v.y)


@dataclass(frozen=True)
class VectorMap:
    """Map R^n -> R^m on an open box.

    ``inverse`` is optional and used by chart transitions and pullbacks.
    """

    fn: Callable
    n_in: int
    n_out: int
    box: Box | None = None
    name: str = "f"
    inverse: "VectorMap | None" = None

    def __post_init__(self):
        if self.box is None:
            object.__setattr__(self, "box", Box.unbounded(self.n_in))

    def check(self, x) -> None:
        self.box.check(real_array(np.atleast_1d(x)), what=f"{self.name} argument")

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x))
        self.check(x)
        return _as_vector(self.fn(x), self.n_out)

    def raw(self, x) -> np.ndarray:
        """Evaluate without the domain check (inputs may carry derivatives)."""
        return _as_vector(self.fn(x), self.n_out)

    def tangent(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """``(f(x), df(x) y)`` via one dual pass; works on jet-valued x, y."""
        x = np.atleast_1d(np.asarray(x, dtype=object))
        y = np.atleast_1d(np.asarray(y, dtype=object))
        xd = np.empty(self.n_in, dtype=object)
        for i in range(self.n_in):
            xd[i] = Dual(x[i], y[i])
        out = _as_vector(self.fn(xd), self.n_out)
        fx = np.empty(self.n_out, dtype=object)
        dfy = np.empty(self.n_out, dtype=object)
        for i, o in enumerate(out):
            if isinstance(o, Dual):
                fx[i], dfy[i] = o.re, o.du
            else:
                fx[i], dfy[i] = o, 0.0
        return _squeeze_object(fx), _squeeze_object(dfy)

    def compose(self, inner: "VectorMap", name: str | None = None) -> "VectorMap":
        """``self o inner``; the inverse is composed too when both exist."""
        if inner.n_out != self.n_in:
            raise ValueError("dimension mismatch in composition")
        inv = None
        if self.inverse is not None and inner.inverse is not None:
            inv = inner.inverse.compose(self.inverse)
        return VectorMap(
            lambda x, f=self.fn, g=inner.fn: f(_as_vector(g(x), inner.n_out)),
            inner.n_in,
            self.n_out,
            inner.box,
            name or f"{self.name}o{inner.name}",
            inv,
        )


def _squeeze_object(a: np.ndarray) -> np.ndarray:
    if all(isinstance(v, _SCALARS) for v in a):
        return a.astype(float)
    return a


def _as_vector(out, m: int) -> np.ndarray:
    if isinstance(out, (Jet, Dual)) or np.isscalar(out):
        arr = np.empty(1, dtype=object)
        arr[0] = out
    else:
        arr = np.asarray(out, dtype=object).reshape(-1)
    if arr.size != m:
        raise ValueError(f"map returned {arr.size} components, expected {m}")
    return _squeeze_object(arr)


# --------------------------------------------------------------------------- #
# derivative bundles
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class LagrangianJet:
    """Value and partial derivatives of ``L`` at one ``(t, x, y)``.

    Index conventions: ``d23[i, j] = d^2 L / dy_i dx_j`` (first index is the
    velocity slot), ``d33[i, j] = d^2 L / dy_i dy_j``.
    """

    value: object
    d1: object
    d2: np.ndarray
    d3: np.ndarray
    d13: np.ndarray
    d23: np.ndarray
    d33: np.ndarray

    @property
    def n(self) -> int:
        return self.d2.size


@dataclass(frozen=True)
class DerivativeBundle:
    value: np.ndarray
    first: np.ndarray
    second: np.ndarray | None = field(default=None)


def _jet_parts(out, size: int, second: bool):
    if isinstance(out, Jet):
        hess = out.hess if out.hess is not None else np.zeros((size, size))
        return out.val, out.grad, hess
    return out, np.zeros(size), np.zeros((size, size)) if second else None


def partials(L: ScalarField, v: TangentSample) -> LagrangianJet:
    """Exact first and second partials of ``L`` at ``v`` by forward mode.

    ``v`` may carry ``Dual`` entries; the result then carries the directional
    derivative of every block along that dual direction.
    """
    n = L.n
    v = TangentSample.of(*v)
    if v.x.size != n or v.y.size != n:
        raise DomainError(f"sample dimension mismatch: expected n={n}")
    L.check(v)
    size = 1 + 2 * n
    t = Jet.variable(v.t, 0, size)
    x = np.empty(n, dtype=object)
    y = np.empty(n, dtype=object)
    for i in range(n):
        x[i] = Jet.variable(v.x[i], 1 + i, size)
        y[i] = Jet.variable(v.y[i], 1 + n + i, size)
    val, g, H = _jet_parts(L.fn(t, x, y), size, True)
    ys = slice(1 + n, size)
    xs = slice(1, 1 + n)
    return LagrangianJet(
        value=val,
        d1=g[0],
        d2=g[xs],
        d3=g[ys],
        d13=H[ys, 0],
        d23=H[ys, xs],
        d33=H[ys, ys],
    )


def map_jet(f: VectorMap, x, want_second: bool = True) -> DerivativeBundle:
    """``f(x)``, ``df(x)`` (m x n) and optionally ``d2f(x)`` (m x n x n)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    f.check(x)
    n = f.n_in
    xs = np.empty(n, dtype=object)
    for i in range(n):
        xs[i] = Jet.variable(x[i], i, n, second=want_second)
    out = _as_vector(f.fn(xs), f.n_out)
    value = np.empty(f.n_out)
    first = np.empty((f.n_out, n))
    second = np.empty((f.n_out, n, n)) if want_second else None
    for k, o in enumerate(out):
        val, g, H = _jet_parts(o, n, want_second)
        value[k] = val
        first[k] = g
        if want_second:
            second[k] = H
    return DerivativeBundle(value, first, second)


# --------------------------------------------------------------------------- #
# finite-difference oracle
# --------------------------------------------------------------------------- #

DEFAULT_FD_STEP = 1e-3


def _richardson(D: Callable[[float], float]) -> float:
    # both stencils have even error expansions in h
    return (4.0 * D(0.5) - D(1.0)) / 3.0


def _fd_first(f: Callable, p: np.ndarray, steps: np.ndarray, i: int):
    def D(scale):
        e = np.zeros_like(p)
        e[i] = steps[i] * scale
        return (f(p + e) - f(p - e)) / (2.0 * steps[i] * scale)

    return _richardson(D)


def _fd_second(f: Callable, p: np.ndarray, steps: np.ndarray, i: int, j: int, f0):
    def D(scale):
        hi, hj = steps[i] * scale, steps[j] * scale
        if i == j:
            e = np.zeros_like(p)
            e[i] = hi
            return (f(p + e) - 2.0 * f0 + f(p - e)) / (hi * hi)
        ei = np.zeros_like(p)
        ej = np.zeros_like(p)
        ei[i] = hi
        ej[j] = hj
        return (f(p + ei + ej) - f(p + ei - ej) - f(p - ei + ej) + f(p - ei - ej)) / (4.0 * hi * hj)

    return _richardson(D)


def _fd_steps(p: np.ndarray, h: float) -> np.ndarray:
    return h * (1.0 + np.abs(p))


def fd_partials(L: ScalarField, v: TangentSample, h: float = DEFAULT_FD_STEP) -> LagrangianJet:
    """Central differences with one Richardson step (O(h^4) for first derivatives)."""
    n = L.n
    v = TangentSample.of(*v)
    p = v.flat()
    steps = _fd_steps(p, h)
    if not L.box.contains(p, margin=0.0) or np.any(L.box.margin(p) <= steps):
        raise DomainError(f"finite-difference step h={h} too large for the domain of {L.name}")

    def f(q):
        return float(L.fn(q[0], q[1 : 1 + n], q[1 + n :]))

    f0 = f(p)
    size = 1 + 2 * n
    grad = np.array([_fd_first(f, p, steps, i) for i in range(size)])
    ys = range(1 + n, size)
    d13 = np.array([_fd_second(f, p, steps, i, 0, f0) for i in ys])
    d23 = np.array([[_fd_second(f, p, steps, i, j, f0) for j in range(1, 1 + n)] for i in ys])
    d33 = np.array([[_fd_second(f, p, steps, i, j, f0) for j in ys] for i in ys])
    d33 = 0.5 * (d33 + d33.T)
    return LagrangianJet(f0, grad[0], grad[1 : 1 + n], grad[1 + n :], d13, d23, d33)


def fd_map_jet(f: VectorMap, x, h: float = DEFAULT_FD_STEP) -> DerivativeBundle:
    """Finite-difference counterpart of :func:`map_jet`."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    steps = _fd_steps(x, h)
    if np.any(f.box.margin(x) <= steps):
        raise DomainError(f"finite-difference step h={h} too large for the domain of {f.name}")
    n, m = f.n_in, f.n_out
    first = np.empty((m, n))
    second = np.empty((m, n, n))
    for k in range(m):

        def fk(q, k=k):
            return float(_as_vector(f.fn(q), m)[k])

        f0 = fk(x)
        for i in range(n):
            first[k, i] = _fd_first(fk, x, steps, i)
            for j in range(n):
                second[k, i, j] = _fd_second(fk, x, steps, i, j, f0)
    return DerivativeBundle(f.raw(x).astype(float), first, second)


def relative_deviation(a, b, floor: float = 1.0) -> float:
    """``max |a - b| / max(floor, |a|)`` elementwise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / np.maximum(floor, np.abs(a))))


def jet_deviation(a: LagrangianJet, b: LagrangianJet, floor: float = 1.0) -> float:
    """Largest relative deviation across every block of two jets."""
    return max(
        relative_deviation(getattr(a, name), getattr(b, name), floor)
        for name in ("value", "d1", "d2", "d3", "d13", "d23", "d33")
    )


def sample_points(box: Box, rng: np.random.Generator, size: int, pad: float = 0.05) -> np.ndarray:
    """Uniform interior samples; ``pad`` is a fraction of each side length."""
    width = box.hi - box.lo
    return rng.uniform(box.lo + pad * width, box.hi - pad * width, size=(size, box.dim))
