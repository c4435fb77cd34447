"""Regular time-dependent Lagrangians and their canonical objects on R x TM."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .diffkernel import (
    Box,
    DomainError,
    LagrangianJet,
    ScalarField,
    TangentSample,
    fd_partials,
    partials,
)

DEFAULT_CONDITION_BOUND = 1e8


class RegularityError(np.linalg.LinAlgError):
    """The fibre Hessian of a Lagrangian is singular (or numerically so)."""


class Tangent(NamedTuple):
    """Tangent vector ``(s, z, w)`` at a point of R x TM."""

    s: float
    z: np.ndarray
    w: np.ndarray

    @classmethod
    def of(cls, s, z, w) -> "Tangent":
        return cls(float(s), np.atleast_1d(np.asarray(z, dtype=float)), np.atleast_1d(np.asarray(w, dtype=float)))


@dataclass(frozen=True)
class TimeLagrangian:
    """A Lagrangian ``L(t, x, y)`` in one chart."""

    field: ScalarField
    chart: str = "default"

    @classmethod
    def from_function(
        cls,
        fn: Callable,
        n: int,
        box: Box | None = None,
        name: str = "L",
        chart: str = "default",
    ) -> "TimeLagrangian":
        return cls(ScalarField(fn, n, box, name), chart)

    @property
    def n(self) -> int:
        return self.field.n

    @property
    def name(self) -> str:
        return self.field.name

    @property
    def box(self) -> Box:
        return self.field.box

    def __call__(self, t, x, y):
        return self.field(t, x, y)

    def jet(self, v) -> LagrangianJet:
        return partials(self.field, TangentSample.of(*v))


def _jet(L, v) -> LagrangianJet:
    if isinstance(L, LagrangianJet):
        return L
    return L.jet(v)


def fibre_hessian_condition(H: np.ndarray) -> float:
    s = np.linalg.svd(np.asarray(H, dtype=float), compute_uv=False)
    return float(np.inf) if s[-1] == 0.0 else float(s[0] / s[-1])


def require_regular(H: np.ndarray, tol: float = DEFAULT_CONDITION_BOUND) -> None:
    cond = fibre_hessian_condition(H)
    if not cond <= tol:
        raise RegularityError(f"fibre Hessian is singular (condition estimate {cond:.3g} > {tol:.3g})")


@dataclass(frozen=True)
class RegularityReport:
    condition: np.ndarray
    smallest_singular_value: np.ndarray
    flagged: np.ndarray
    tol: float

    @property
    def regular(self) -> bool:
        return not bool(np.any(self.flagged))


def regularity_check(L: TimeLagrangian, samples, tol: float = DEFAULT_CONDITION_BOUND, oracle: bool = False) -> RegularityReport:
    """Condition estimate of the fibre Hessian at each sample.

    Singular samples are flagged, not raised. With ``oracle=True`` the Hessian
    comes from the finite-difference oracle instead of forward mode.
    """
    conds, smin = [], []
    for v in samples:
        v = TangentSample.of(*v)
        H = fd_partials(L.field, v).d33 if oracle else L.jet(v).d33
        s = np.linalg.svd(np.asarray(H, dtype=float), compute_uv=False)
        smin.append(s[-1])
        conds.append(np.inf if s[-1] == 0.0 else s[0] / s[-1])
    conds = np.asarray(conds)
    return RegularityReport(conds, np.asarray(smin), ~(conds <= tol), tol)


def energy(L, v) -> float:
    """``E_L = d3L . y - L``."""
    v = TangentSample.of(*v)
    j = _jet(L, v)
    return float(j.d3 @ v.y - j.value)


def energy_differential(L, v) -> tuple[float, np.ndarray, np.ndarray]:
    """``(dE/dt, dE/dx, dE/dy)`` from second partials only."""
    v = TangentSample.of(*v)
    j = _jet(L, v)
    dt = float(j.d13 @ v.y - j.d1)
    dx = j.d23.T @ v.y - j.d2
    dy = j.d33 @ v.y
    return dt, np.asarray(dx, dtype=float), np.asarray(dy, dtype=float)


def theta_L(L, v, w) -> float:
    """Canonical 1-form: ``d3L(v) . z`` for ``w = (s, z, w)``."""
    w = Tangent.of(*w)
    return float(_jet(L, v).d3 @ w.z)


def omega_L(L, v, w1, w2) -> float:
    """Fundamental 2-form, evaluated term by term from the jet of ``L``."""
    j = _jet(L, v)
    a, b = Tangent.of(*w1), Tangent.of(*w2)
    return float(
        (j.d13 @ a.z) * b.s
        - (j.d13 @ b.z) * a.s
        + a.z @ j.d23 @ b.z
        - b.z @ j.d23 @ a.z
        + a.z @ j.d33 @ b.w
        - b.z @ j.d33 @ a.w
    )


def dL(L, v, w) -> float:
    """Differential of ``L`` applied to the tangent vector ``w``."""
    j = _jet(L, v)
    w = Tangent.of(*w)
    return float(j.d1 * w.s + j.d2 @ w.z + j.d3 @ w.w)


def liouville(v) -> Tangent:
    """Liouville field ``(0, 0, y)``."""
    v = TangentSample.of(*v)
    y = np.asarray(v.y, dtype=float)
    return Tangent(0.0, np.zeros_like(y), y.copy())


def tangent_structure_J(w) -> Tangent:
    """``J(s, z, w) = (0, 0, z)``."""
    w = Tangent.of(*w)
    return Tangent(0.0, np.zeros_like(w.z), w.z.copy())


def metric_potential_lagrangian(g: Callable, U: Callable | None, n: int, box: Box | None = None, name: str = "L") -> TimeLagrangian:
    """``L = g(t, x)(y, y)/2 - U(t, x)``; ``g`` returns an n x n array."""

    def fn(t, x, y):
        G = np.asarray(g(t, x), dtype=object)
        kin = 0.5 * (y @ G @ y)
        return kin - U(t, x) if U is not None else kin

    return TimeLagrangian.from_function(fn, n, box, name)


__all__ = [
    "DEFAULT_CONDITION_BOUND",
    "DomainError",
    "RegularityError",
    "RegularityReport",
    "Tangent",
    "TimeLagrangian",
    "dL",
    "energy",
    "energy_differential",
    "fibre_hessian_condition",
    "liouville",
    "metric_potential_lagrangian",
    "omega_L",
    "regularity_check",
    "require_regular",
    "tangent_structure_J",
    "theta_L",
]
