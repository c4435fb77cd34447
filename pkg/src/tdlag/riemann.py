"""Metric sprays, potentials and holonomic level-set constraints."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .diffkernel import Box, Jet, TangentSample, VectorMap, map_jet, real_array
from .dynamics import ExternalForce
from .lagrangian import TimeLagrangian
from .semispray import SemisprayField

ON_CONSTRAINT_TOL = 1e-9
RANK_TOL = 1e-10


class MetricError(np.linalg.LinAlgError):
    """Metric is not symmetric positive-definite at the probe point."""


class ConstraintError(ValueError):
    """Point off the constraint set, non-tangent velocity, or rank-deficient differential."""


@dataclass(frozen=True)
class MetricField:
    """``g(t, x)``: returns an n x n symmetric matrix; autonomous metrics may ignore ``t``."""

    g: Callable
    n: int
    box: Box | None = None
    name: str = "g"

    def __post_init__(self):
        if self.box is None:
            object.__setattr__(self, "box", Box.unbounded(self.n))

    def raw(self, t, x) -> np.ndarray:
        G = np.asarray(self.g(t, x), dtype=object)
        if G.shape != (self.n, self.n):
            raise ValueError(f"metric returned shape {G.shape}, expected {(self.n, self.n)}")
        return G

    def __call__(self, t, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        self.box.check(x, what=f"{self.name} argument")
        G = np.asarray(real_array(self.raw(float(t), x)), dtype=float)
        check_positive(G)
        return G

    def derivative(self, t, x) -> np.ndarray:
        """``dg[k] = d g / d x_k`` as an (n, n, n) array."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xs = np.array([Jet.variable(v, i, self.n, second=False) for i, v in enumerate(x)], dtype=object)
        G = self.raw(t, xs)
        out = np.zeros((self.n, self.n, self.n))
        for (i, j), v in np.ndenumerate(G):
            if isinstance(v, Jet):
                out[:, i, j] = v.grad
        return out

    @classmethod
    def identity(cls, n: int) -> "MetricField":
        return cls(lambda t, x: np.eye(n), n, name="I")


def check_positive(G: np.ndarray) -> None:
    if np.max(np.abs(G - G.T)) > 1e-12 * max(1.0, np.max(np.abs(G))):
        raise MetricError("metric is not symmetric")
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise MetricError("metric is not positive-definite") from None


@dataclass(frozen=True)
class PotentialField:
    U: Callable
    n: int
    box: Box | None = None
    name: str = "U"

    def __call__(self, t, x) -> float:
        return float(real_array(self.U(t, np.atleast_1d(np.asarray(x, dtype=float)))))

    def gradient(self, t, x) -> np.ndarray:
        """``dU/dx`` by forward mode."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xs = np.array([Jet.variable(v, i, self.n, second=False) for i, v in enumerate(x)], dtype=object)
        out = self.U(t, xs)
        return np.asarray(out.grad, dtype=float) if isinstance(out, Jet) else np.zeros(self.n)


@dataclass(frozen=True)
class LevelSetConstraint:
    """Submanifold ``c^{-1}(0)`` for ``c: R^n -> R^k``, ``k < n``."""

    c: VectorMap

    def __post_init__(self):
        if not self.c.n_out < self.c.n_in:
            raise ValueError("constraint needs fewer equations than coordinates")

    @property
    def n(self) -> int:
        return self.c.n_in

    @property
    def k(self) -> int:
        return self.c.n_out

    def jet(self, x):
        d = map_jet(self.c, x)
        s = np.linalg.svd(d.first, compute_uv=False)
        if s[-1] < RANK_TOL:
            raise ConstraintError(f"constraint differential is rank deficient at x={x} (smallest singular value {s[-1]:.3g})")
        return d

    def require_on(self, x, tol: float = ON_CONSTRAINT_TOL) -> None:
        val = np.max(np.abs(self.c(np.atleast_1d(np.asarray(x, dtype=float)))))
        if val > tol:
            raise ConstraintError(f"|c(x)| = {val:.3g} exceeds {tol:.3g}")

    def require_tangent(self, x, v, tol: float = ON_CONSTRAINT_TOL) -> None:
        val = np.max(np.abs(self.jet(x).first @ np.asarray(v, dtype=float)))
        if val > tol:
            raise ConstraintError(f"|dc(x) v| = {val:.3g} exceeds {tol:.3g}")


# --------------------------------------------------------------------------- #
# sprays
# --------------------------------------------------------------------------- #


def _k2(G: np.ndarray, dg: np.ndarray, y: np.ndarray) -> np.ndarray:
    # rhs_j = 1/2 y . dg_j . y - sum_k y_k (dg_k y)_j
    rhs = 0.5 * np.einsum("a,jab,b->j", y, dg, y) - np.einsum("k,kjb,b->j", y, dg, y)
    return np.linalg.solve(G, rhs)


def metric_spray_K2(g: MetricField, x, y, t: float = 0.0) -> np.ndarray:
    """Acceleration ``K2`` of the geodesics of ``g`` (so ``c'' = K2`` for ``L = g(y, y)/2``)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return _k2(g(t, x), g.derivative(t, x), y)


def grad_U(g: MetricField, U: PotentialField, t, x) -> np.ndarray:
    return np.linalg.solve(g(t, x), U.gradient(t, x))


def potential_spray(g: MetricField, U: PotentialField | None, v) -> np.ndarray:
    """``X2 = K2 - grad U``."""
    v = TangentSample.of(*v)
    K2 = metric_spray_K2(g, v.x, v.y, v.t)
    return K2 if U is None else K2 - grad_U(g, U, v.t, v.x)


def potential_lagrangian(g: MetricField, U: PotentialField | None = None, box: Box | None = None, name: str = "L") -> TimeLagrangian:
    """``L = g(t, x)(y, y)/2 - U(t, x)``."""

    def fn(t, x, y):
        kin = 0.5 * (y @ g.raw(t, x) @ y)
        return kin - U.U(t, x) if U is not None else kin

    return TimeLagrangian.from_function(fn, g.n, box, name)


def time_metric_lagrangian(g: MetricField, box: Box | None = None, name: str = "L_g") -> TimeLagrangian:
    """``L(t, x, y) = g(t, x)(y, y)/2`` for a time-dependent metric family."""
    return potential_lagrangian(g, None, box, name)


# --------------------------------------------------------------------------- #
# musical maps and projections
# --------------------------------------------------------------------------- #


def musical_flat(g: MetricField, x, y, t: float = 0.0) -> np.ndarray:
    return g(t, x) @ np.asarray(y, dtype=float)


def musical_sharp(g: MetricField, x, p, t: float = 0.0) -> np.ndarray:
    return np.linalg.solve(g(t, x), np.asarray(p, dtype=float))


def _normal_solve(cst: LevelSetConstraint, g: MetricField, x, t):
    """``dc``, ``g^{-1} dc^T`` and ``S = dc g^{-1} dc^T``."""
    d = cst.jet(x)
    Ginv_dcT = np.linalg.solve(g(t, x), d.first.T)
    return d, Ginv_dcT, d.first @ Ginv_dcT


def tangent_project(cst: LevelSetConstraint, g: MetricField, x, w, t: float = 0.0, check: bool = True) -> np.ndarray:
    """g-orthogonal projection of ``w`` onto ``ker dc(x)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if check:
        cst.require_on(x)
    w = np.asarray(w, dtype=float)
    d, Ginv_dcT, S = _normal_solve(cst, g, x, t)
    return w - Ginv_dcT @ np.linalg.solve(S, d.first @ w)


def normal_part(cst: LevelSetConstraint, g: MetricField, x, w, t: float = 0.0, check: bool = True) -> np.ndarray:
    return np.asarray(w, dtype=float) - tangent_project(cst, g, x, w, t, check)


def second_fundamental_form(cst: LevelSetConstraint, g: MetricField, x, v, t: float = 0.0, check: bool = True) -> np.ndarray:
    """Normal correction ``B(v, v)`` that keeps ``c(x(s))`` constant along constrained geodesics.

    With ``a = K2(x, v) + B`` as the constrained acceleration, the second
    derivative of ``c`` vanishes: ``d2c(v, v) + dc a = 0``, and ``B`` is
    g-normal to the constraint set.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.asarray(v, dtype=float)
    if check:
        cst.require_on(x)
        cst.require_tangent(x, v)
    d, Ginv_dcT, S = _normal_solve(cst, g, x, t)
    curv = np.einsum("kij,i,j->k", d.second, v, v) + d.first @ metric_spray_K2(g, x, v, t)
    return -Ginv_dcT @ np.linalg.solve(S, curv)


def reaction_force(cst: LevelSetConstraint, g: MetricField, F: ExternalForce | None, t, x, v, check: bool = True) -> np.ndarray:
    """Perfect reaction covector ``flat(B(v, v)) - flat(normal part of sharp(F))``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.asarray(v, dtype=float)
    B = second_fundamental_form(cst, g, x, v, t, check)
    R = musical_flat(g, x, B, t)
    if F is not None:
        Fv = musical_sharp(g, x, F(t, x, v), t)
        R = R - musical_flat(g, x, normal_part(cst, g, x, Fv, t, check=False), t)
    return R


def constrained_spray(g: MetricField, F: ExternalForce | None, cst: LevelSetConstraint, name: str = "constrained") -> SemisprayField:
    """Ambient spray of the constrained system: acceleration ``K2 + Y2 + W2``.

    ``Y2 = sharp(F)`` and ``W2 = sharp(R)``. ``B`` is evaluated at the raw
    velocity so that ``c`` is an exact first integral of the continuous flow;
    at on-constraint states this equals the projection of ``K2 + Y2``.
    Initial data must lie on the constraint within ``ON_CONSTRAINT_TOL``.
    """
    n = g.n

    def X2(t, x, y):
        G = g(t, x)
        d = cst.jet(x)
        Ginv_dcT = np.linalg.solve(G, d.first.T)
        S = d.first @ Ginv_dcT
        K2 = _k2(G, g.derivative(t, x), y)
        Y2 = np.zeros(n) if F is None else np.linalg.solve(G, F(t, x, y))
        # W2 = B(y, y) - normal part of Y2, both from one normal solve
        curv = np.einsum("kij,i,j->k", d.second, y, y) + d.first @ (K2 + Y2)
        return K2 + Y2 - Ginv_dcT @ np.linalg.solve(S, curv)

    def initial_check(t0, x0, y0):
        cst.require_on(x0)
        cst.require_tangent(x0, y0)

    def projector(t, x, y):
        return project_state(cst, g, x, y, t)

    def G(t, x, y):
        if any(np.asarray(a).dtype == object for a in (t, x, y)):
            raise TypeError("the constrained spray is evaluated numerically only")
        return -X2(float(t), np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    return SemisprayField(
        G,
        n,
        "ambient",
        "constrained",
        None,
        name,
        initial_check,
        projector,
    )


def project_state(cst: LevelSetConstraint, g: MetricField, x, y, t: float = 0.0, iterations: int = 5):
    """Move ``x`` onto the constraint set along g-normals (Newton) and project ``y`` to its tangent space."""
    x = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    for _ in range(iterations):
        d, Ginv_dcT, S = _normal_solve(cst, g, x, t)
        step = Ginv_dcT @ np.linalg.solve(S, d.value)
        x = x - step
        if np.max(np.abs(step)) < 1e-15:
            break
    return x, tangent_project(cst, g, x, y, t, check=False)


__all__ = [
    "ConstraintError",
    "LevelSetConstraint",
    "MetricError",
    "MetricField",
    "ON_CONSTRAINT_TOL",
    "PotentialField",
    "check_positive",
    "constrained_spray",
    "grad_U",
    "metric_spray_K2",
    "musical_flat",
    "musical_sharp",
    "normal_part",
    "potential_lagrangian",
    "potential_spray",
    "project_state",
    "reaction_force",
    "second_fundamental_form",
    "tangent_project",
    "time_metric_lagrangian",
]
