"""Integration of semispray geodesics, Euler-Lagrange audits and external forces.

The curve parameter ``s`` advances the time slot with unit rate:
``t = t0 + (s - s0)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .diffkernel import Box, DomainError, TangentSample, _as_vector, partials, real_array, solve
from .lagrangian import TimeLagrangian, energy, require_regular
from .semispray import ProvenanceError, SemisprayField

METHODS = ("rk4", "dopri5")


class IntegrationError(RuntimeError):
    """Step budget exhausted, non-finite state, or domain escape during integration."""


@dataclass(frozen=True)
class IntegratorConfig:
    """``method``: ``"rk4"`` (fixed step ``h``) or ``"dopri5"`` (adaptive, ``h`` is the first trial step).

    ``project`` applies the spray's projector after every accepted step.
    """

    method: str = "rk4"
    h: float = 1e-3
    s_span: tuple[float, float] = (0.0, 1.0)
    max_steps: int = 1_000_000
    rtol: float = 1e-10
    atol: float = 1e-12
    h_max: float | None = None
    project: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown integrator method {self.method!r}; expected one of {METHODS}")
        if not self.h > 0:
            raise ValueError("step h must be positive")
        s0, s1 = self.s_span
        if not s1 > s0:
            raise ValueError("s_span must satisfy s1 > s0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        object.__setattr__(self, "s_span", (float(s0), float(s1)))


@dataclass
class Trajectory:
    """Accepted samples of a geodesic; ``acc`` holds the second derivative at each sample."""

    s: np.ndarray
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    acc: np.ndarray
    chart: str = "default"
    provenance: str = "user"
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.s.size

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def sample(self, i: int) -> TangentSample:
        return TangentSample(float(self.t[i]), self.x[i].copy(), self.y[i].copy())

    def at(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        """Position and velocity at ``s`` by quintic Hermite interpolation on the bracketing step."""
        s = float(s)
        if not self.s[0] <= s <= self.s[-1]:
            raise ValueError(f"s={s} outside trajectory span [{self.s[0]}, {self.s[-1]}]")
        i = int(np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, self.s.size - 2))
        h = self.s[i + 1] - self.s[i]
        u = (s - self.s[i]) / h
        x0, x1 = self.x[i], self.x[i + 1]
        v0, v1 = self.y[i] * h, self.y[i + 1] * h
        a0, a1 = self.acc[i] * h * h, self.acc[i + 1] * h * h
        # quintic Hermite basis and its derivative
        u2, u3, u4, u5 = u * u, u ** 3, u ** 4, u ** 5
        H = (
            1 - 10 * u3 + 15 * u4 - 6 * u5,
            u - 6 * u3 + 8 * u4 - 3 * u5,
            0.5 * (u2 - 3 * u3 + 3 * u4 - u5),
            0.5 * (u3 - 2 * u4 + u5),
            -4 * u3 + 7 * u4 - 3 * u5,
            10 * u3 - 15 * u4 + 6 * u5,
        )
        dH = (
            -30 * u2 + 60 * u3 - 30 * u4,
            1 - 18 * u2 + 32 * u3 - 15 * u4,
            0.5 * (2 * u - 9 * u2 + 12 * u3 - 5 * u4),
            0.5 * (3 * u2 - 8 * u3 + 5 * u4),
            -12 * u2 + 28 * u3 - 15 * u4,
            30 * u2 - 60 * u3 + 30 * u4,
        )
        parts = (x0, v0, a0, a1, v1, x1)
        pos = sum(c * p for c, p in zip(H, parts))
        vel = sum(c * p for c, p in zip(dH, parts)) / h
        return pos, vel

    def csv_rows(self) -> list[str]:
        n = self.n
        head = ["s", "t"] + [f"x{i}" for i in range(n)] + [f"y{i}" for i in range(n)]
        rows = [",".join(head)]
        for i in range(self.s.size):
            vals = [self.s[i], self.t[i], *self.x[i], *self.y[i]]
            rows.append(",".join(format(float(v), ".17g") for v in vals))
        return rows

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(self.csv_rows()) + "\n")


@dataclass(frozen=True)
class ExternalForce:
    """Covector-valued force ``F(t, x, y)``; ``F`` must accept ``Dual`` arguments."""

    F: Callable
    n: int
    box: Box | None = None
    name: str = "F"

    def __post_init__(self):
        if self.box is None:
            object.__setattr__(self, "box", Box.unbounded(1 + 2 * self.n))

    def raw(self, t, x, y) -> np.ndarray:
        return _as_vector(self.F(t, x, y), self.n)

    def __call__(self, t, x, y) -> np.ndarray:
        v = TangentSample.of(t, x, y)
        self.box.check(v.flat(), what=f"{self.name} argument (t, x, y)")
        return np.asarray(real_array(self.raw(v.t, v.x, v.y)), dtype=float)


def zero_force(n: int) -> ExternalForce:
    return ExternalForce(lambda t, x, y: np.zeros(n), n, name="0")


# --------------------------------------------------------------------------- #
# integrators
# --------------------------------------------------------------------------- #


def _rk4_step(f, s, u, h):
    k1 = f(s, u)
    k2 = f(s + 0.5 * h, u + 0.5 * h * k1)
    k3 = f(s + 0.5 * h, u + 0.5 * h * k2)
    k4 = f(s + h, u + h * k3)
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def _dopri_step(f, s, u, h, k1):
    ks = [k1]
    for i in range(1, 7):
        ui = u + h * sum(a * k for a, k in zip(_DP_A[i], ks))
        ks.append(f(s + _DP_C[i] * h, ui))
    u5 = u + h * sum(b * k for b, k in zip(_DP_B5, ks))
    err = h * sum((b5 - b4) * k for b5, b4, k in zip(_DP_B5, _DP_B4, ks))
    return u5, err, ks[-1]


def integrate_second_order(
    accel: Callable,
    n: int,
    init,
    cfg: IntegratorConfig,
    chart: str = "default",
    provenance: str = "user",
    projector: Callable | None = None,
) -> Trajectory:
    """Solve ``x'' = accel(t, x, x')`` from ``init = (t0, x0, y0)`` at ``s = s_span[0]``."""
    t0, x0, y0 = init
    s0, s1 = cfg.s_span
    u0 = np.concatenate([np.atleast_1d(np.asarray(x0, dtype=float)), np.atleast_1d(np.asarray(y0, dtype=float))])
    if u0.size != 2 * n:
        raise ValueError(f"initial state has {u0.size // 2} components, expected n={n}")

    def time(s):
        return float(t0) + (s - s0)

    def acc(s, u):
        try:
            a = np.asarray(accel(time(s), u[:n], u[n:]), dtype=float).reshape(n)
        except DomainError as exc:
            raise IntegrationError(f"domain escape at s={s:.6g}: {exc}") from exc
        return a

    def f(s, u):
        return np.concatenate([u[n:], acc(s, u)])

    if not np.all(np.isfinite(u0)):
        raise IntegrationError("non-finite initial state")
    ss, us = [s0], [u0]
    if cfg.method == "rk4":
        steps = max(1, math.ceil((s1 - s0) / cfg.h - 1e-9))
        if steps > cfg.max_steps:
            raise IntegrationError(f"{steps} steps needed but max_steps={cfg.max_steps}")
        u = u0
        for k in range(steps):
            sa = s0 + k * cfg.h
            sb = s1 if k == steps - 1 else s0 + (k + 1) * cfg.h
            u = _rk4_step(f, sa, u, sb - sa)
            if projector is not None and cfg.project:
                u = _project(projector, time(sb), u, n)
            if not np.all(np.isfinite(u)):
                raise IntegrationError(f"non-finite state at s={sb:.6g}")
            ss.append(sb)
            us.append(u)
    else:
        s, u, h = s0, u0, min(cfg.h, s1 - s0)
        hmax = cfg.h_max or (s1 - s0)
        k1 = f(s, u)
        taken = 0
        while s < s1:
            if taken >= cfg.max_steps:
                raise IntegrationError(f"max_steps={cfg.max_steps} exhausted at s={s:.6g}")
            taken += 1
            h = min(h, s1 - s, hmax)
            unew, err, klast = _dopri_step(f, s, u, h, k1)
            scale = cfg.atol + cfg.rtol * np.maximum(np.abs(u), np.abs(unew))
            enorm = float(np.sqrt(np.mean((err / scale) ** 2)))
            if not np.isfinite(enorm):
                raise IntegrationError(f"non-finite state at s={s:.6g}")
            if enorm <= 1.0:
                sn = s1 if s1 - (s + h) <= 1e-14 * max(1.0, abs(s1)) else s + h
                if projector is not None and cfg.project:
                    unew = _project(projector, time(sn), unew, n)
                    klast = f(sn, unew)
                s, u, k1 = sn, unew, klast
                ss.append(s)
                us.append(u)
            h *= min(5.0, max(0.2, 0.9 * (enorm if enorm > 0 else 1e-10) ** -0.2))
            if h < 1e-14 * max(1.0, abs(s)):
                raise IntegrationError(f"step size underflow at s={s:.6g}")

    s_arr = np.asarray(ss)
    U = np.vstack(us)
    A = np.vstack([acc(si, ui) for si, ui in zip(s_arr, U)])
    return Trajectory(
        s=s_arr,
        t=float(t0) + (s_arr - s0),
        x=U[:, :n].copy(),
        y=U[:, n:].copy(),
        acc=A,
        chart=chart,
        provenance=provenance,
        meta={"method": cfg.method, "h": cfg.h, "s_span": list(cfg.s_span), "steps": int(s_arr.size - 1)},
    )


def _project(projector, t, u, n):
    x, y = projector(t, u[:n], u[n:])
    return np.concatenate([np.asarray(x, dtype=float), np.asarray(y, dtype=float)])


def integrate(S: SemisprayField, init, cfg: IntegratorConfig) -> Trajectory:
    """Geodesic of ``S``: solves ``x'' + G(t, x, x') = 0``."""
    t0, x0, y0 = init
    if S.initial_check is not None:
        S.initial_check(t0, x0, y0)
    return integrate_second_order(
        lambda t, x, y: -S(t, x, y),
        S.n,
        init,
        cfg,
        chart=S.chart,
        provenance=S.provenance,
        projector=S.projector,
    )


# --------------------------------------------------------------------------- #
# audits
# --------------------------------------------------------------------------- #


@dataclass
class ResidualSeries:
    name: str
    s: np.ndarray
    residual: np.ndarray

    @property
    def max(self) -> float:
        return float(np.max(self.residual)) if self.residual.size else 0.0

    def csv_rows(self) -> list[str]:
        return ["s,residual"] + [f"{format(float(a), '.17g')},{format(float(b), '.17g')}" for a, b in zip(self.s, self.residual)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(self.csv_rows()) + "\n")


def _derivative(s: np.ndarray, f: np.ndarray, width: int = 5) -> np.ndarray:
    """Derivative of sampled ``f`` at the interior samples.

    Finite-difference weights are solved per point on a ``width``-sample
    window (centred where possible), so unequal spacing is handled and the
    error is of order ``h**(width - 1)``.
    """
    m = s.size
    f = f.reshape(m, -1)
    width = min(width, m if m % 2 else m - 1)
    idx = np.arange(1, m - 1)
    start = np.clip(idx - width // 2, 0, m - width)
    win = start[:, None] + np.arange(width)
    ds = s[win] - s[idx][:, None]
    scale = ds[:, -1:] - ds[:, :1]
    V = np.stack([(ds / scale) ** k for k in range(width)], axis=1)
    rhs = np.zeros((idx.size, width, 1))
    rhs[:, 1, 0] = 1.0
    w = np.linalg.solve(V, rhs)[..., 0] / scale
    return np.einsum("pj,pjc->pc", w, f[win])


def _need(traj: Trajectory, k: int = 3):
    if len(traj) < k:
        raise ValueError(f"trajectory too short: {len(traj)} samples, need at least {k}")


EL_METHODS = ("difference", "momentum", "spray")


def el_residual(
    L: TimeLagrangian,
    traj: Trajectory,
    force: ExternalForce | None = None,
    method: str = "difference",
) -> ResidualSeries:
    """Max-norm of ``d/ds(d3L) - d2L - F`` at interior samples.

    ``d/ds(d3L)`` is expanded by the chain rule along the curve,
    ``d13L + d23L y + d33L c''``. How ``c''`` is obtained depends on ``method``:

    - ``"difference"``: fourth-order finite difference of the stored velocities;
    - ``"spray"``: the acceleration recorded by the integrator (checks that the
      integrated spray is the Euler-Lagrange one, but is blind to the positions);
    - ``"momentum"``: skip the chain rule and difference ``d3L`` directly.
    """
    if method not in EL_METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {EL_METHODS}")
    _need(traj)
    idx = range(1, len(traj) - 1)
    if method == "difference":
        acc = _derivative(traj.s, traj.y)
    elif method == "spray":
        acc = traj.acc[1:-1]
    else:
        p = np.vstack([np.asarray(L.jet(traj.sample(i)).d3, dtype=float) for i in range(len(traj))])
        dp = _derivative(traj.s, p)
    out = []
    for k, i in enumerate(idx):
        v = traj.sample(i)
        j = L.jet(v)
        if method == "momentum":
            lhs = dp[k]
        else:
            lhs = j.d13 + j.d23 @ v.y + j.d33 @ acc[k]
        r = lhs - j.d2
        if force is not None:
            r = r - force(v.t, v.x, v.y)
        out.append(float(np.max(np.abs(r))))
    name = "el-residual" if force is None else "forced-el-residual"
    return ResidualSeries(name, traj.s[1:-1].copy(), np.asarray(out))


def energy_rate_audit(L: TimeLagrangian, traj: Trajectory) -> ResidualSeries:
    """``|dE_L/ds + d1L|`` at interior samples, ``dE_L/ds`` by finite differences."""
    _need(traj)
    E = np.array([energy(L, traj.sample(i)) for i in range(len(traj))])
    dE = _derivative(traj.s, E)[:, 0]
    d1 = np.array([float(L.jet(traj.sample(i)).d1) for i in range(1, len(traj) - 1)])
    return ResidualSeries("energy-rate", traj.s[1:-1].copy(), np.abs(dE + d1))


# --------------------------------------------------------------------------- #
# forces
# --------------------------------------------------------------------------- #


def _vertical(L: TimeLagrangian, F: ExternalForce, t, x, y):
    j = partials(L.field, TangentSample(t, np.atleast_1d(x), np.atleast_1d(y)))
    require_regular(real_array(j.d33))
    return solve(j.d33, F.raw(t, x, y))


def vertical_from_force(L: TimeLagrangian, F: ExternalForce, v) -> np.ndarray:
    """``Y2`` solving ``d33L(v) Y2 = F(v)``."""
    v = TangentSample.of(*v)
    return np.asarray(real_array(_vertical(L, F, v.t, v.x, v.y)), dtype=float)


def forced_spray(S: SemisprayField, L: TimeLagrangian, F: ExternalForce) -> SemisprayField:
    """Spray of the forced motion: ``G - Y2`` (acceleration ``X2 + Y2``)."""
    if S.provenance != "lagrangian-vector-field" or S.lagrangian is not L:
        raise ProvenanceError("forcing needs the spray derived from the same Lagrangian (provenance 'lagrangian-vector-field')")
    if F.n != S.n:
        raise ValueError("force dimension does not match the spray")
    return SemisprayField(
        lambda t, x, y: S.raw(t, x, y) - _vertical(L, F, t, x, y),
        S.n,
        S.chart,
        "forced",
        L,
        f"{S.name}-Y[{F.name}]",
        S.initial_check,
        S.projector,
    )


__all__ = [
    "EL_METHODS",
    "ExternalForce",
    "IntegrationError",
    "IntegratorConfig",
    "ResidualSeries",
    "Trajectory",
    "el_residual",
    "energy_rate_audit",
    "forced_spray",
    "integrate",
    "integrate_second_order",
    "vertical_from_force",
    "zero_force",
]
