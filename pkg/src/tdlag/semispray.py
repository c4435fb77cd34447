"""Semisprays, nonlinear connections and second-order trivializations.

Sign convention: every :class:`SemisprayField` stores coefficients ``G`` whose
geodesics solve ``x'' + G(t, x, x') = 0``. The Lagrangian vector field of a
regular ``L`` has acceleration component ``X2``; the spray built from it uses
``G = -X2``. The canonical coefficients of :func:`canonical_G` satisfy
``X2 + G + N0 = 0`` with ``N0 = (d33 L)^{-1} d13 L``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .atlas import Jet2, ResidualReport, Transition, push_jet2, second_term
from .diffkernel import (
    Box,
    Dual,
    TangentSample,
    VectorMap,
    map_jet,
    partials,
    real_array,
    solve,
)
from .diffkernel import _as_vector
from .lagrangian import (
    Tangent,
    TimeLagrangian,
    energy_differential,
    omega_L,
    require_regular,
)

PROVENANCES = ("canonical-from-L", "lagrangian-vector-field", "forced", "constrained", "user")


class ProvenanceError(ValueError):
    """Operation needs a spray derived from a specific Lagrangian."""


class Trivialized(NamedTuple):
    """A second-order jet in trivialized coordinates ``(t, x, y, w)``."""

    t: float
    x: np.ndarray
    y: np.ndarray
    w: np.ndarray


class ConnectionValue(NamedTuple):
    N0: np.ndarray
    N1: np.ndarray


def _float(a) -> np.ndarray:
    return np.asarray(real_array(a), dtype=float)


@dataclass(frozen=True)
class SemisprayField:
    """Coefficients ``G(t, x, y)`` of a time-dependent semispray in one chart.

    ``G`` must accept ``Dual``-valued arguments (plain arithmetic and numpy
    ufuncs suffice) so that its partial derivatives can be taken exactly.
    ``initial_check`` and ``projector`` are optional hooks used by
    constrained systems.
    """

    G: Callable
    n: int
    chart: str = "default"
    provenance: str = "user"
    lagrangian: TimeLagrangian | None = None
    name: str = "G"
    initial_check: Callable | None = None
    projector: Callable | None = None

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def raw(self, t, x, y) -> np.ndarray:
        return _as_vector(self.G(t, np.atleast_1d(x), np.atleast_1d(y)), self.n)

    def __call__(self, t, x, y) -> np.ndarray:
        return _float(self.raw(t, np.asarray(x, dtype=float), np.asarray(y, dtype=float)))

    def derivatives(self, v) -> tuple[np.ndarray, np.ndarray]:
        """``(dG/dt, dG/dy)`` at ``v`` by forward mode (one pass per direction)."""
        v = TangentSample.of(*v)
        x = np.asarray(v.x, dtype=float)
        y = np.asarray(v.y, dtype=float)
        dt = _du(self.raw(Dual(float(v.t), 1.0), x, y))
        dy = np.empty((self.n, self.n))
        for j in range(self.n):
            yd = y.astype(object)
            yd[j] = Dual(float(y[j]), 1.0)
            dy[:, j] = _du(self.raw(float(v.t), x, yd))
        return dt, dy


def _du(a) -> np.ndarray:
    return np.array([v.du if isinstance(v, Dual) else 0.0 for v in np.asarray(a, dtype=object)], dtype=float)


@dataclass(frozen=True)
class ConnectionField:
    """Nonlinear connection coefficients: ``N0`` (time slot) and ``N1`` (n x n)."""

    N0: Callable
    N1: Callable
    n: int
    chart: str = "default"
    name: str = "N"

    def __call__(self, t, x, y) -> ConnectionValue:
        return ConnectionValue(
            _float(self.N0(t, x, y)).reshape(self.n),
            _float(self.N1(t, x, y)).reshape(self.n, self.n),
        )

    def P(self, t, x, y) -> np.ndarray:
        """``N(v)[1, y] = N0(v) + N1(v) y``."""
        c = self(t, x, y)
        return c.N0 + c.N1 @ np.asarray(y, dtype=float)


# --------------------------------------------------------------------------- #
# Lagrangian-derived coefficients
# --------------------------------------------------------------------------- #


def _regular_jet(L: TimeLagrangian, t, x, y):
    j = partials(L.field, TangentSample(t, np.atleast_1d(x), np.atleast_1d(y)))
    require_regular(real_array(j.d33))
    return j


def _x2(L: TimeLagrangian, t, x, y):
    j = _regular_jet(L, t, x, y)
    return solve(j.d33, j.d2 - j.d13 - j.d23 @ np.atleast_1d(y))


def _canonical(L: TimeLagrangian, t, x, y):
    j = _regular_jet(L, t, x, y)
    return solve(j.d33, j.d23 @ np.atleast_1d(y) - j.d2)


def lagrangian_vector_field(L: TimeLagrangian, v) -> np.ndarray:
    """Acceleration component ``X2`` of the Lagrangian vector field at ``v``."""
    v = TangentSample.of(*v)
    return _float(_x2(L, v.t, v.x, v.y))


def lagrangian_field_Z(L: TimeLagrangian, v) -> Tangent:
    """The full field ``Z(v) = (1, y, X2(v))``."""
    v = TangentSample.of(*v)
    return Tangent.of(1.0, v.y, lagrangian_vector_field(L, v))


def canonical_G(L: TimeLagrangian, v) -> np.ndarray:
    """``(d33 L)^{-1} (d23 L[., y] - d2 L)``."""
    v = TangentSample.of(*v)
    return _float(_canonical(L, v.t, v.x, v.y))


def connection_from_L(L: TimeLagrangian, v) -> ConnectionValue:
    """``N0 = (d33 L)^{-1} d13 L`` and ``N1 = d3 G`` of the canonical coefficients."""
    v = TangentSample.of(*v)
    j = _regular_jet(L, v.t, v.x, v.y)
    N0 = _float(solve(j.d33, j.d13))
    return ConnectionValue(N0, canonical_spray(L).derivatives(v)[1])


def lagrangian_spray(L: TimeLagrangian) -> SemisprayField:
    """Spray whose geodesics are the Euler-Lagrange motions (``G = -X2``)."""
    return SemisprayField(
        lambda t, x, y: -_x2(L, t, x, y),
        L.n,
        L.chart,
        "lagrangian-vector-field",
        L,
        f"-X2[{L.name}]",
    )


def canonical_spray(L: TimeLagrangian) -> SemisprayField:
    return SemisprayField(
        lambda t, x, y: _canonical(L, t, x, y),
        L.n,
        L.chart,
        "canonical-from-L",
        L,
        f"G[{L.name}]",
    )


def lagrangian_connection(L: TimeLagrangian) -> ConnectionField:
    return ConnectionField(
        lambda t, x, y: connection_from_L(L, (t, x, y)).N0,
        lambda t, x, y: connection_from_L(L, (t, x, y)).N1,
        L.n,
        L.chart,
        f"N[{L.name}]",
    )


def sign_ledger_residual(L: TimeLagrangian, v) -> float:
    """``max |X2 + G + N0|``; vanishes for every regular ``L``."""
    v = TangentSample.of(*v)
    j = _regular_jet(L, v.t, v.x, v.y)
    X2 = _float(solve(j.d33, j.d2 - j.d13 - j.d23 @ v.y))
    G = _float(solve(j.d33, j.d23 @ v.y - j.d2))
    N0 = _float(solve(j.d33, j.d13))
    return float(np.max(np.abs(X2 + G + N0)))


def interior_omega(L: TimeLagrangian, v, w) -> float:
    """``(i_Z Omega_L)(w)`` with ``Omega_L = omega_L + dE_L ^ dt`` and ``Z = (1, y, X2)``."""
    v = TangentSample.of(*v)
    w = Tangent.of(*w)
    j = L.jet(v)
    Z = lagrangian_field_Z(L, v)
    et, ex, ey = energy_differential(j, v)
    dE_Z = et * Z.s + ex @ Z.z + ey @ Z.w
    dE_w = et * w.s + ex @ w.z + ey @ w.w
    return omega_L(j, v, Z, w) + dE_Z * w.s - dE_w * Z.s


# --------------------------------------------------------------------------- #
# connections from sprays
# --------------------------------------------------------------------------- #


def connections_from_semispray(S: SemisprayField, v) -> tuple[ConnectionValue, ConnectionValue]:
    """The two connections ``(0, d3 G)`` and ``(d1 G, d3 G)`` at ``v``."""
    dt, dy = S.derivatives(v)
    return ConnectionValue(np.zeros(S.n), dy), ConnectionValue(dt, dy)


def spray_connections(S: SemisprayField) -> tuple[ConnectionField, ConnectionField]:
    """Field versions of :func:`connections_from_semispray`."""
    zero = ConnectionField(
        lambda t, x, y: np.zeros(S.n),
        lambda t, x, y: S.derivatives((t, x, y))[1],
        S.n,
        S.chart,
        f"N(0, d3 {S.name})",
    )
    full = ConnectionField(
        lambda t, x, y: S.derivatives((t, x, y))[0],
        lambda t, x, y: S.derivatives((t, x, y))[1],
        S.n,
        S.chart,
        f"N(d1 {S.name}, d3 {S.name})",
    )
    return zero, full


# --------------------------------------------------------------------------- #
# trivializations of R x T2M
# --------------------------------------------------------------------------- #


def trivialize(S: SemisprayField, j) -> Trivialized:
    """``(t, x, y, z) -> (t, x, y, z + G(t, x, y))``."""
    j = Jet2.of(*j)
    return Trivialized(j.t, j.x, j.y, j.z + S(j.t, j.x, j.y))


def detrivialize(S: SemisprayField, tv) -> Jet2:
    tv = Trivialized(*tv)
    x, y, w = (np.atleast_1d(np.asarray(a, dtype=float)) for a in tv[1:])
    return Jet2(float(tv.t), x, y, w - S(tv.t, x, y))


def trivialize_by_connection(N: ConnectionField, j) -> Trivialized:
    """``w = z + N0(v) + N1(v) y``."""
    j = Jet2.of(*j)
    return Trivialized(j.t, j.x, j.y, j.z + N.P(j.t, j.x, j.y))


def detrivialize_by_connection(N: ConnectionField, tv) -> Jet2:
    tv = Trivialized(*tv)
    x, y, w = (np.atleast_1d(np.asarray(a, dtype=float)) for a in tv[1:])
    return Jet2(float(tv.t), x, y, w - N.P(tv.t, x, y))


@dataclass(frozen=True)
class SprayTrivialization:
    spray: SemisprayField

    @property
    def chart(self) -> str:
        return self.spray.chart

    def __call__(self, j) -> Trivialized:
        return trivialize(self.spray, j)

    def inverse(self, tv) -> Jet2:
        return detrivialize(self.spray, tv)


@dataclass(frozen=True)
class ConnectionTrivialization:
    connection: ConnectionField

    @property
    def chart(self) -> str:
        return self.connection.chart

    def __call__(self, j) -> Trivialized:
        return trivialize_by_connection(self.connection, j)

    def inverse(self, tv) -> Jet2:
        return detrivialize_by_connection(self.connection, tv)


def recover_G(triv: Callable, v, chart: str | None = None) -> np.ndarray:
    """Coefficients read off a trivialization along the straight line ``x + s y``.

    The straight line has zero chart second derivative, so the fourth slot of
    the trivialized jet ``(t, x, y, 0)`` is the coefficient itself.
    """
    if chart is not None and getattr(triv, "chart", chart) != chart:
        raise ValueError(f"trivialization lives on chart {triv.chart!r}, not {chart!r}")
    v = TangentSample.of(*v)
    y = np.asarray(v.y, dtype=float)
    return np.asarray(triv(Jet2.of(v.t, v.x, y, np.zeros_like(y))).w, dtype=float)


def transition_trivialized(S_a: SemisprayField, S_b: SemisprayField, tr: Transition, tv) -> Trivialized:
    """Chart change of a trivialized jet, computed through the raw jet law."""
    return trivialize(S_b, push_jet2(tr, detrivialize(S_a, tv)))


# --------------------------------------------------------------------------- #
# transport of coefficient fields along a transition
# --------------------------------------------------------------------------- #


def _pull_point(tr: Transition, x_b, y_b):
    x_a = np.asarray(tr.inverse_map.raw(np.asarray(x_b, dtype=float)), dtype=float)
    d = tr.jet(x_a)
    y_a = np.linalg.solve(d.first, np.asarray(y_b, dtype=float))
    return x_a, y_a, d


def push_semispray(S_a: SemisprayField, tr: Transition) -> SemisprayField:
    """Coefficients on chart ``tr.dst`` built from ``S_a`` by the change-of-chart law."""

    def G_b(t, x_b, y_b):
        x_a, y_a, d = _pull_point(tr, x_b, y_b)
        return d.first @ S_a(t, x_a, y_a) - second_term(d.second, y_a, y_a)

    return replace(S_a, G=G_b, chart=tr.dst, name=f"{S_a.name}@{tr.dst}", lagrangian=None, provenance="user")


def push_connection(N_a: ConnectionField, tr: Transition) -> ConnectionField:
    """Connection on chart ``tr.dst`` built from ``N_a`` by the change-of-chart law."""

    def N0_b(t, x_b, y_b):
        x_a, y_a, d = _pull_point(tr, x_b, y_b)
        return d.first @ N_a(t, x_a, y_a).N0

    def N1_b(t, x_b, y_b):
        x_a, y_a, d = _pull_point(tr, x_b, y_b)
        bend = np.einsum("kij,j->ki", d.second, y_a)
        return np.linalg.solve(d.first.T, (d.first @ N_a(t, x_a, y_a).N1 - bend).T).T

    return ConnectionField(N0_b, N1_b, N_a.n, tr.dst, f"{N_a.name}@{tr.dst}")


# --------------------------------------------------------------------------- #
# f-relatedness
# --------------------------------------------------------------------------- #


def x2_form(S: SemisprayField, v) -> np.ndarray:
    """Acceleration component implied by ``S``.

    Canonical coefficients need the time-slot connection added back:
    ``X2 = -(G + N0)``; every other provenance stores ``G = -X2``.
    """
    v = TangentSample.of(*v)
    G = S(v.t, v.x, v.y)
    if S.provenance == "canonical-from-L":
        if S.lagrangian is None:
            raise ProvenanceError("canonical coefficients without their Lagrangian")
        G = G + connection_from_L(S.lagrangian, v).N0
    return -G


@dataclass
class FRelatedReport:
    x2: ResidualReport
    g: ResidualReport

    @property
    def max_residual(self) -> float:
        return max(self.x2.max_residual, self.g.max_residual)

    def to_dict(self) -> dict:
        return {"x2_form": self.x2.to_dict(), "g_form": self.g.to_dict()}


def check_f_related(
    S_M: SemisprayField,
    S_N: SemisprayField,
    f: VectorMap,
    samples: Sequence,
    tolerance: float | None = None,
) -> FRelatedReport:
    """Residuals of the f-relatedness law in acceleration form and in G form."""
    rx, rg, used = [], [], []
    for v in samples:
        v = TangentSample.of(*v)
        d = map_jet(f, v.x)
        y = np.asarray(v.y, dtype=float)
        v_N = TangentSample(v.t, d.value, d.first @ y)
        bend = second_term(d.second, y, y)
        rx.append(np.max(np.abs(x2_form(S_N, v_N) - bend - d.first @ x2_form(S_M, v))))
        rg.append(np.max(np.abs(S_N(*v_N) + bend - d.first @ S_M(v.t, v.x, y))))
        used.append(v)
    return FRelatedReport(
        ResidualReport("f-related-x2", np.asarray(rx, dtype=float), used, tolerance),
        ResidualReport("f-related-G", np.asarray(rg, dtype=float), used, tolerance),
    )


def t2_map(f: VectorMap, j) -> Jet2:
    """Second-order tangent map ``(t, x, y, z) -> (t, f, df y, df z + d2f(y, y))``."""
    j = Jet2.of(*j)
    d = map_jet(f, j.x)
    return Jet2(j.t, d.value, d.first @ j.y, d.first @ j.z + second_term(d.second, j.y, j.y))


def pullback_lagrangian(L_N: TimeLagrangian, f: VectorMap, box: Box | None = None, name: str | None = None) -> TimeLagrangian:
    """``L_M(t, x, y) = L_N(t, f(x), df(x) y)``."""

    def fn(t, x, y):
        fx, dfy = f.tangent(x, y)
        return L_N.field.fn(t, fx, dfy)

    return TimeLagrangian.from_function(fn, f.n_in, box, name or f"{L_N.name}o T{f.name}")


__all__ = [
    "ConnectionField",
    "ConnectionTrivialization",
    "ConnectionValue",
    "FRelatedReport",
    "Jet2",
    "PROVENANCES",
    "ProvenanceError",
    "SemisprayField",
    "SprayTrivialization",
    "Trivialized",
    "canonical_G",
    "canonical_spray",
    "check_f_related",
    "connection_from_L",
    "connections_from_semispray",
    "detrivialize",
    "detrivialize_by_connection",
    "interior_omega",
    "lagrangian_connection",
    "lagrangian_field_Z",
    "lagrangian_spray",
    "lagrangian_vector_field",
    "pullback_lagrangian",
    "push_connection",
    "push_semispray",
    "recover_G",
    "sign_ledger_residual",
    "spray_connections",
    "t2_map",
    "transition_trivialized",
    "trivialize",
    "x2_form",
]
