"""Built-in scenarios: Lagrangian systems with a default chart change and initial data."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import diffkernel as dk
from .atlas import Transition
from .diffkernel import Box, VectorMap, real_part
from .dynamics import ExternalForce, forced_spray
from .lagrangian import TimeLagrangian
from .riemann import LevelSetConstraint, MetricField, PotentialField, constrained_spray, potential_lagrangian, time_metric_lagrangian
from .semispray import SemisprayField, lagrangian_spray, pullback_lagrangian

CUBIC_COEFF = 0.1


def _cubic_root(u: float, a: float) -> float:
    """Real root of ``x + a x^3 = u`` (unique for ``a > 0``), polished by one Newton step."""
    q = u / (2.0 * a)
    r = math.sqrt(q * q + 1.0 / (27.0 * a ** 3))
    x = float(np.cbrt(q + r) + np.cbrt(q - r))
    return x - (x + a * x ** 3 - u) / (1.0 + 3.0 * a * x * x)


def _cubic_inverse_component(u, a: float):
    x = _cubic_root(real_part(u), a)
    if isinstance(u, (float, int, np.floating)):
        return x
    # Newton steps in jet arithmetic carry the derivatives of the inverse
    for _ in range(3):
        x = x - (x + a * x ** 3 - u) / (1.0 + 3.0 * a * x * x)
    return x


def cubic_map(n: int, a: float = CUBIC_COEFF, box: Box | None = None) -> VectorMap:
    """``f(x) = x + a x^3`` componentwise, with its inverse attached."""
    if a <= 0:
        raise ValueError("cubic coefficient must be positive for a global diffeomorphism")

    def fwd(x):
        return np.array([xi + a * xi ** 3 for xi in x], dtype=object)

    def inv(u):
        return np.array([_cubic_inverse_component(ui, a) for ui in u], dtype=object)

    inverse = VectorMap(inv, n, n, None, f"cubic^-1({a})")
    return VectorMap(fwd, n, n, box, f"cubic({a})", inverse)


def cubic_transition(n: int, overlap: Box, a: float = CUBIC_COEFF, src: str = "a", dst: str = "b") -> Transition:
    return Transition(src, dst, cubic_map(n, a, overlap), overlap)


@dataclass
class System:
    """Everything the pipeline needs for one scenario instance."""

    name: str
    n: int
    lagrangian: TimeLagrangian
    spray: SemisprayField
    box: Box
    transition: Transition
    init: tuple
    span: tuple[float, float]
    force: ExternalForce | None = None
    metric: MetricField | None = None
    constraint: LevelSetConstraint | None = None
    f_pair: tuple[VectorMap, TimeLagrangian] | None = None
    params: dict = field(default_factory=dict)

    @property
    def x_box(self) -> Box:
        return Box(self.box.lo[1 : 1 + self.n], self.box.hi[1 : 1 + self.n])


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    params: dict
    build: Callable[[dict], System]

    def system(self, overrides: dict | None = None) -> System:
        p = dict(self.params)
        for k, v in (overrides or {}).items():
            if k not in p:
                raise KeyError(f"scenario {self.name!r} has no parameter {k!r}; known: {sorted(p)}")
            p[k] = v
        sys = self.build(p)
        sys.params = p
        return sys


def _box(n: int, t: tuple, x, y) -> Box:
    x = [x] * n if isinstance(x, tuple) else list(x)
    y = [y] * n if isinstance(y, tuple) else list(y)
    lo = [t[0]] + [b[0] for b in x] + [b[0] for b in y]
    hi = [t[1]] + [b[1] for b in x] + [b[1] for b in y]
    return Box(np.array(lo, dtype=float), np.array(hi, dtype=float))


def _finish(name, L, box, init, span, spray=None, **kw) -> System:
    n = L.n
    sys = System(
        name=name,
        n=n,
        lagrangian=L,
        spray=spray or lagrangian_spray(L),
        box=box,
        transition=None,
        init=init,
        span=span,
        **kw,
    )
    sys.transition = cubic_transition(n, sys.x_box)
    return sys


def _free(p):
    n = int(p["n"])
    L = TimeLagrangian.from_function(lambda t, x, y: 0.5 * (y @ y), n, _box(n, (-1, 8), (-3, 3), (-2, 2)), "free-particle")
    return _finish("free-particle", L, L.box, (0.0, np.zeros(n), np.ones(n)), (0.0, 2.0))


def _harmonic(p):
    k0, k1 = float(p["k0"]), float(p["k1"])
    box = _box(1, (-1, 8), (-2, 2), (-2, 2))
    L = TimeLagrangian.from_function(lambda t, x, y: 0.5 * y[0] ** 2 - 0.5 * (k0 + k1 * t) * x[0] ** 2, 1, box, "harmonic-td")
    return _finish("harmonic-td", L, box, (0.0, [p["x0"]], [p["y0"]]), (0.0, 2 * math.pi))


def _caldirola(p):
    gamma = float(p["gamma"])
    g = MetricField(lambda t, x: np.array([[dk.exp(2 * gamma * t)]], dtype=object), 1, name="exp(2 gamma t)")
    box = _box(1, (-1, 8), (-2, 2), (-3, 3))
    L = time_metric_lagrangian(g, box, "caldirola")
    return _finish("caldirola", L, box, (0.0, [0.0], [1.0]), (0.0, 1.0), metric=g)


def _potential(p):
    g = MetricField(lambda t, x: np.array([[1.0, 0.0], [0.0, x[0] ** 2]], dtype=object), 2, Box([0.5, -2.0], [2.0, 2.0]), "polar")
    amp = float(p["amplitude"])
    U = PotentialField(lambda t, x: amp * dk.sin(t) * x[0], 2, name="sin(t) x0")
    box = _box(2, (-1, 8), [(0.5, 2.0), (-2.0, 2.0)], (-2, 2))
    L = potential_lagrangian(g, U, box, "potential-td")
    return _finish("potential-td", L, box, (0.0, [1.0, 0.0], [0.1, 0.5]), (0.0, 1.0), metric=g)


def _forced(p):
    k = float(p["k"])
    amp = float(p["amplitude"])
    box = _box(1, (-1, 8), (-5, 5), (-5, 5))
    L = TimeLagrangian.from_function(lambda t, x, y: 0.5 * y[0] ** 2 - 0.5 * k * x[0] ** 2, 1, box, "forced-oscillator")
    F = ExternalForce(lambda t, x, y: np.array([amp * dk.sin(t)], dtype=object), 1, box, "sin t")
    return _finish("forced-oscillator", L, box, (0.0, [0.0], [0.0]), (0.0, math.pi), spray=forced_spray(lagrangian_spray(L), L, F), force=F)


def _sphere(p):
    eps = float(p["epsilon"])
    g = MetricField.identity(3)
    c = LevelSetConstraint(VectorMap(lambda x: 0.5 * (x[0] ** 2 + x[1] ** 2 + x[2] ** 2 - 1.0), 3, 1, name="sphere"))
    e3 = np.array([0.0, 0.0, 1.0])
    # tangential push toward the north pole, modulated in time
    F = ExternalForce(lambda t, x, y: eps * dk.sin(t) * (e3 - x[2] * x), 3, name="eps sin(t) P(e3)") if eps else None
    box = _box(3, (-1, 8), (-1.5, 1.5), (-2, 2))
    L = TimeLagrangian.from_function(lambda t, x, y: 0.5 * (y @ y), 3, box, "ambient-free")
    S = constrained_spray(g, F, c, "bead-on-sphere")
    v0 = np.array([0.0, 0.6, 0.8])
    return _finish("bead-on-sphere-forced", L, box, (0.0, [1.0, 0.0, 0.0], v0), (0.0, 2 * math.pi), spray=S, force=F, metric=g, constraint=c)


def _frelated(p):
    a = float(p["a"])
    box = _box(1, (-1, 8), (-2, 2), (-2, 2))
    f = cubic_map(1, a)
    L_N = TimeLagrangian.from_function(lambda t, x, y: 0.5 * y[0] ** 2, 1, None, "free-N")
    L_M = pullback_lagrangian(L_N, f, box, "pullback-M")
    return _finish("frelated-demo", L_M, box, (0.0, [0.5], [1.0]), (0.0, 1.0), f_pair=(f, L_N))


CATALOG: dict[str, Scenario] = {
    s.name: s
    for s in (
        Scenario("free-particle", "free particle L = |y|^2/2 in the plane", {"n": 2}, _free),
        Scenario(
            "harmonic-td",
            "oscillator with time-dependent stiffness k(t) = k0 + k1 t",
            {"k0": 1.0, "k1": 0.0, "x0": 1.0, "y0": 0.0},
            _harmonic,
        ),
        Scenario("caldirola", "time-dependent metric exp(2 gamma t) (damped oscillator family)", {"gamma": 1.0}, _caldirola),
        Scenario("potential-td", "polar metric diag(1, x0^2) with time-dependent potential sin(t) x0", {"amplitude": 1.0}, _potential),
        Scenario("forced-oscillator", "oscillator driven by the external force sin t (k = 0 gives a forced free particle)", {"k": 1.0, "amplitude": 1.0}, _forced),
        Scenario("bead-on-sphere-forced", "bead on the unit sphere with a weak time-dependent tangential force", {"epsilon": 1e-3}, _sphere),
        Scenario("frelated-demo", "pullback of the free particle under x + a x^3 (f-related pair)", {"a": CUBIC_COEFF}, _frelated),
    )
}


def get(name: str) -> Scenario:
    try:
        return CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(CATALOG)}") from None


__all__ = ["CATALOG", "CUBIC_COEFF", "Scenario", "System", "cubic_map", "cubic_transition", "get"]
