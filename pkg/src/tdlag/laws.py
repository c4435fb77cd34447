"""Named invariant checks run over sampled states of a scenario."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .atlas import Transition, check_connection_compat, check_semispray_compat
from .catalog import System
from .diffkernel import Box, TangentSample, sample_points
from .riemann import project_state, reaction_force, tangent_project
from .semispray import (
    ConnectionTrivialization,
    SprayTrivialization,
    check_f_related,
    interior_omega,
    lagrangian_connection,
    lagrangian_spray,
    pullback_lagrangian,
    push_connection,
    push_semispray,
    recover_G,
    sign_ledger_residual,
    Trivialized,
    transition_trivialized,
)

DEFAULT_TOLERANCES = {
    "semispray-compat": 1e-10,
    "connection-compat-N0": 1e-10,
    "connection-compat-N1": 1e-10,
    "trivialized-transition-block": 1e-10,
    "iZ-Omega-zero": 1e-8,
    "sign-ledger": 1e-10,
    "f-related": 1e-8,
    "perfectness": 1e-8,
    "recover-G-roundtrip": 1e-12,
}

# the law each check evaluates, stated as a formula
STATEMENTS = {
    "semispray-compat": "G_b(t, phi(x), dphi y) + d2phi(y, y) = dphi G_a(t, x, y)",
    "connection-compat-N0": "N0_b(t, phi(x), dphi y) = dphi N0_a(t, x, y)",
    "connection-compat-N1": "dphi N1_a a = N1_b dphi a + d2phi(a, y)",
    "trivialized-transition-block": "chart change of (t, x, y, w) is (t, phi(x), dphi y, dphi w), linear in (y, w)",
    "iZ-Omega-zero": "omega_L(Z, w) + dE_L(Z) dt(w) - dE_L(w) dt(Z) = 0 for Z = (1, y, X2)",
    "sign-ledger": "X2 + G + N0 = 0",
    "f-related": "X2_N(Tf v) = d2f(y, y) + df X2_M(v)  and  G_N(Tf v) + d2f(y, y) = df G_M(v)",
    "perfectness": "g(sharp R(t, v), w) = 0 for tangent w",
    "recover-G-roundtrip": "4th slot of the trivialized straight-line jet (t, x, y, 0) equals G (spray) or N0 + N1 y (connection)",
}

LAWS = tuple(DEFAULT_TOLERANCES)


class LawNotApplicable(ValueError):
    """The scenario lacks the ingredients a requested law needs."""


@dataclass
class LawResult:
    law: str
    statement: str
    max_residual: float
    tolerance: float
    sample_count: int

    @property
    def passed(self) -> bool:
        return bool(self.max_residual <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "law": self.law,
            "statement": self.statement,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "sample_count": self.sample_count,
        }


def tangent_samples(box: Box, rng: np.random.Generator, count: int) -> list[TangentSample]:
    n = (box.dim - 1) // 2
    return [TangentSample(float(p[0]), p[1 : 1 + n].copy(), p[1 + n :].copy()) for p in sample_points(box, rng, count)]


def offset_spray(S, offset):
    """``S`` with a constant added to its coefficients (mismatch control)."""
    off = np.asarray(offset, dtype=float)
    return replace(S, G=lambda t, x, y, G=S.G: G(t, x, y) + off, name=f"{S.name}+offset")


@dataclass
class LawContext:
    system: System
    samples: list
    rng: np.random.Generator
    target_offset: np.ndarray | None = None

    @property
    def tr(self) -> Transition:
        return self.system.transition

    def spray_b(self):
        S_b = push_semispray(self.system.spray, self.tr)
        if self.target_offset is not None:
            S_b = offset_spray(S_b, self.target_offset)
        return S_b


def _semispray_compat(ctx: LawContext) -> tuple[float, int]:
    rep = check_semispray_compat(ctx.system.spray, ctx.spray_b(), ctx.tr, ctx.samples)
    return rep.max_residual, rep.sample_count


def _connection(ctx: LawContext):
    N_a = lagrangian_connection(ctx.system.lagrangian)
    return check_connection_compat(N_a, push_connection(N_a, ctx.tr), ctx.tr, ctx.samples)


def _connection_n0(ctx):
    rep = _connection(ctx).n0
    return rep.max_residual, rep.sample_count


def _connection_n1(ctx):
    rep = _connection(ctx).n1
    return rep.max_residual, rep.sample_count


def _block(ctx: LawContext):
    S_a, S_b, tr = ctx.system.spray, ctx.spray_b(), ctx.tr
    n = ctx.system.n
    worst = 0.0
    for v in ctx.samples:
        d = tr.jet(v.x, second=False)
        w1, w2 = ctx.rng.standard_normal((2, n)) * 0.5
        lo, hi = ctx.system.box.lo[1 + n :], ctx.system.box.hi[1 + n :]
        y2 = ctx.rng.uniform(0.9 * lo, 0.9 * hi)
        for t in (0.0, 1.0, 7.0):
            tv = Trivialized(t, v.x, v.y, w1)
            out = transition_trivialized(S_a, S_b, tr, tv)
            expect = (d.value, d.first @ v.y, d.first @ w1)
            worst = max(worst, abs(out.t - t), *(float(np.max(np.abs(a - b))) for a, b in zip(out[1:], expect)))
        # superposition in the (y, w) slots at a fixed base point
        # coefficients keep the combined velocity inside a symmetric box
        a, b = 0.5, -0.25
        T = lambda y, w: transition_trivialized(S_a, S_b, tr, Trivialized(v.t, v.x, y, w))
        lhs = T(a * v.y + b * y2, a * w1 + b * w2)
        p, q = T(v.y, w1), T(y2, w2)
        worst = max(worst, float(np.max(np.abs(lhs.y - a * p.y - b * q.y))), float(np.max(np.abs(lhs.w - a * p.w - b * q.w))))
    return worst, len(ctx.samples)


def _iz_omega(ctx: LawContext):
    L = ctx.system.lagrangian
    n = ctx.system.n
    worst = 0.0
    for v in ctx.samples:
        w = (float(ctx.rng.standard_normal()), ctx.rng.standard_normal(n), ctx.rng.standard_normal(n))
        worst = max(worst, abs(interior_omega(L, v, w)))
    return worst, len(ctx.samples)


def _sign_ledger(ctx: LawContext):
    L = ctx.system.lagrangian
    return max(sign_ledger_residual(L, v) for v in ctx.samples), len(ctx.samples)


def f_related_pair(system: System):
    """``(S_M, S_N, f)``: the scenario's own pair, or the chart change with ``L`` pushed forward."""
    if system.f_pair is not None:
        f, L_N = system.f_pair
        return lagrangian_spray(system.lagrangian), lagrangian_spray(L_N), f
    f = system.transition.map
    L_N = pullback_lagrangian(system.lagrangian, f.inverse, None, f"{system.lagrangian.name}@b")
    return lagrangian_spray(system.lagrangian), lagrangian_spray(L_N), f


def _f_related(ctx: LawContext):
    S_M, S_N, f = f_related_pair(ctx.system)
    rep = check_f_related(S_M, S_N, f, ctx.samples)
    return rep.max_residual, rep.x2.sample_count


def _perfectness(ctx: LawContext):
    sys = ctx.system
    if sys.constraint is None or sys.metric is None:
        raise LawNotApplicable("perfectness needs a constraint and a metric")
    cst, g = sys.constraint, sys.metric
    worst = 0.0
    for v in ctx.samples:
        x, _ = project_state(cst, g, v.x, v.y, v.t)
        u = tangent_project(cst, g, x, v.y, v.t)
        R = reaction_force(cst, g, sys.force, v.t, x, u)
        for _ in range(3):
            w = tangent_project(cst, g, x, ctx.rng.standard_normal(sys.n), v.t)
            # g(sharp R, w) is the pairing R(w)
            worst = max(worst, abs(float(R @ w)))
    return worst, len(ctx.samples)


def _recover(ctx: LawContext):
    S = ctx.system.spray
    N = lagrangian_connection(ctx.system.lagrangian)
    ts, tc = SprayTrivialization(S), ConnectionTrivialization(N)
    worst = 0.0
    for v in ctx.samples:
        worst = max(worst, float(np.max(np.abs(recover_G(ts, v) - S(*v)))))
        worst = max(worst, float(np.max(np.abs(recover_G(tc, v) - N.P(*v)))))
    return worst, len(ctx.samples)


CHECKS: dict[str, Callable] = {
    "semispray-compat": _semispray_compat,
    "connection-compat-N0": _connection_n0,
    "connection-compat-N1": _connection_n1,
    "trivialized-transition-block": _block,
    "iZ-Omega-zero": _iz_omega,
    "sign-ledger": _sign_ledger,
    "f-related": _f_related,
    "perfectness": _perfectness,
    "recover-G-roundtrip": _recover,
}


def applicable_laws(system: System) -> list[str]:
    return [law for law in LAWS if law != "perfectness" or system.constraint is not None]


def run_laws(
    system: System,
    laws,
    samples: int = 100,
    seed: int = 0,
    tolerances: dict | None = None,
    target_offset=None,
) -> list[LawResult]:
    """Evaluate ``laws`` in the given order on ``samples`` random states of ``system.box``."""
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    out = []
    for law in laws:
        if law not in CHECKS:
            raise KeyError(f"unknown law {law!r}; known: {', '.join(LAWS)}")
        rng = np.random.default_rng(seed)
        ctx = LawContext(system, tangent_samples(system.box, rng, samples), rng, None if target_offset is None else np.asarray(target_offset, dtype=float))
        r, count = CHECKS[law](ctx)
        out.append(LawResult(law, STATEMENTS[law], float(r), float(tol[law]), int(count)))
    return out


__all__ = [
    "CHECKS",
    "DEFAULT_TOLERANCES",
    "LAWS",
    "LawContext",
    "LawNotApplicable",
    "LawResult",
    "STATEMENTS",
    "applicable_laws",
    "f_related_pair",
    "run_laws",
    "tangent_samples",
]
