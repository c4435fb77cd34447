"""Charts, chart transitions and change-of-coordinates checkers."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .diffkernel import Box, DomainError, TangentSample, VectorMap, map_jet

OVERLAP_MARGIN = 1e-12
ROUNDTRIP_TOL = 1e-10


@dataclass(frozen=True)
class Chart:
    id: str
    domain: Box

    def __post_init__(self):
        if self.domain.dim < 1:
            raise ValueError("chart dimension must be >= 1")

    @property
    def n(self) -> int:
        return self.domain.dim


@dataclass(frozen=True)
class Transition:
    """Diffeomorphism ``phi`` from chart ``src`` to chart ``dst`` on ``overlap``.

    ``map.inverse`` must be set; invertibility is verified on an interior
    grid at construction.
    """

    src: str
    dst: str
    map: VectorMap
    overlap: Box
    verify_points: int = 5

    def __post_init__(self):
        if self.map.inverse is None:
            raise ValueError(f"transition {self.src}->{self.dst} needs an explicit inverse map")
        if self.map.n_in != self.map.n_out or self.overlap.dim != self.map.n_in:
            raise ValueError("transition must be a map R^n -> R^n on an n-dimensional overlap")
        if self.verify_points and np.all(np.isfinite(self.overlap.lo)) and np.all(np.isfinite(self.overlap.hi)):
            self.verify(self._grid(self.verify_points))

    @property
    def n(self) -> int:
        return self.map.n_in

    @property
    def inverse_map(self) -> VectorMap:
        return self.map.inverse

    def _grid(self, k: int) -> np.ndarray:
        lo, hi = self.overlap.lo, self.overlap.hi
        axes = [np.linspace(a, b, k + 2)[1:-1] for a, b in zip(lo, hi)]
        pts = np.array(np.meshgrid(*axes, indexing="ij")).reshape(self.n, -1).T
        return pts[:: max(1, len(pts) // 64)]

    def verify(self, points: Iterable) -> float:
        worst = 0.0
        for x in points:
            x = np.atleast_1d(np.asarray(x, dtype=float))
            back = self.map.inverse.raw(self.map.raw(x)).astype(float)
            err = float(np.max(np.abs(back - x)))
            worst = max(worst, err)
            if err > ROUNDTRIP_TOL:
                raise ValueError(f"transition inverse round-trip error {err:.3g} at x={x}")
            jac = map_jet(self.map, x, want_second=False).first
            if abs(np.linalg.det(jac)) < 1e-12:
                raise ValueError(f"transition differential is singular at x={x}")
        return worst

    def check(self, x) -> None:
        self.overlap.check(np.atleast_1d(np.asarray(x, dtype=float)), what=f"transition {self.src}->{self.dst} argument", margin=OVERLAP_MARGIN)

    def jet(self, x, second: bool = True):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        self.check(x)
        return map_jet(self.map, x, want_second=second)

    def compose(self, first: "Transition") -> "Transition":
        """``self o first`` (apply ``first`` then ``self``)."""
        if first.dst != self.src:
            raise ValueError(f"cannot compose {first.src}->{first.dst} with {self.src}->{self.dst}")
        return Transition(first.src, self.dst, self.map.compose(first.map), first.overlap, verify_points=0)

    def inverted(self, overlap: Box) -> "Transition":
        inv = self.map.inverse
        inv = VectorMap(inv.fn, inv.n_in, inv.n_out, overlap, inv.name, self.map)
        return Transition(self.dst, self.src, inv, overlap, verify_points=0)


class Jet2(NamedTuple):
    """Raw second-order jet ``(t, x, y, z)``: chart position, first and second derivative."""

    t: float
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    @classmethod
    def of(cls, t, x, y, z) -> "Jet2":
        f = lambda a: np.atleast_1d(np.asarray(a, dtype=float))
        return cls(float(t), f(x), f(y), f(z))


def second_term(d2: np.ndarray, a, b) -> np.ndarray:
    """Bilinear term ``d2f(x)(a, b)`` from an (m, n, n) second-derivative block."""
    return np.einsum("kij,i,j->k", d2, np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def push_tangent(tr: Transition, v) -> TangentSample:
    """``(t, x, y) -> (t, phi(x), dphi(x) y)``."""
    v = TangentSample.of(*v)
    d = tr.jet(v.x, second=False)
    return TangentSample(v.t, d.value, d.first @ np.asarray(v.y, dtype=float))


def push_jet2(tr: Transition, j):
    """Raw second-order jet law ``z -> dphi z + d2phi(y, y)``."""
    j = Jet2.of(*j)
    d = tr.jet(j.x)
    return Jet2(j.t, d.value, d.first @ j.y, d.first @ j.z + second_term(d.second, j.y, j.y))


@dataclass
class ResidualReport:
    """Per-sample max-norm residuals of one law."""

    law: str
    residuals: np.ndarray
    samples: list = field(default_factory=list)
    tolerance: float | None = None

    @property
    def sample_count(self) -> int:
        return int(self.residuals.size)

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0

    @property
    def argmax(self) -> int | None:
        return int(np.argmax(self.residuals)) if self.residuals.size else None

    @property
    def argmax_sample(self):
        i = self.argmax
        return None if i is None else self.samples[i]

    @property
    def passed(self) -> bool:
        if self.tolerance is None:
            raise ValueError(f"no tolerance recorded for {self.law}")
        return self.max_residual <= self.tolerance

    def to_dict(self) -> dict:
        arg = self.argmax_sample
        return {
            "law": self.law,
            "sample_count": self.sample_count,
            "max_residual": self.max_residual,
            "argmax_sample": None if arg is None else _flatten_sample(arg),
            "residuals": [float(r) for r in self.residuals],
            **({"tolerance": self.tolerance, "passed": self.passed} if self.tolerance is not None else {}),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _flatten_sample(s) -> list:
    if isinstance(s, tuple):
        return [float(v) for part in s for v in np.atleast_1d(np.asarray(part, dtype=float))]
    return [float(v) for v in np.atleast_1d(np.asarray(s, dtype=float))]


def _maxnorm(v) -> float:
    return float(np.max(np.abs(np.asarray(v, dtype=float)))) if np.size(v) else 0.0


def check_semispray_compat(G_a, G_b, tr: Transition, samples: Sequence, tolerance: float | None = None) -> ResidualReport:
    """Residual of ``G_b(t, phi, dphi y) + d2phi(y, y) - dphi G_a(t, x, y)``."""
    res, used = [], []
    for v in samples:
        v = TangentSample.of(*v)
        d = tr.jet(v.x)
        y = np.asarray(v.y, dtype=float)
        r = np.asarray(G_b(v.t, d.value, d.first @ y), dtype=float) + second_term(d.second, y, y) - d.first @ np.asarray(G_a(v.t, v.x, y), dtype=float)
        res.append(_maxnorm(r))
        used.append(v)
    return ResidualReport("semispray-compat", np.asarray(res), used, tolerance)


@dataclass
class ConnectionCompatReport:
    n0: ResidualReport
    n1: ResidualReport

    def to_dict(self) -> dict:
        return {"N0": self.n0.to_dict(), "N1": self.n1.to_dict()}


def check_connection_compat(N_a, N_b, tr: Transition, samples: Sequence, tolerance: float | None = None) -> ConnectionCompatReport:
    """Connection change-of-chart laws over the probe basis ``s = 1`` and ``a = e_k``."""
    r0, r1, used = [], [], []
    for v in samples:
        v = TangentSample.of(*v)
        d = tr.jet(v.x)
        y = np.asarray(v.y, dtype=float)
        vb = (v.t, d.value, d.first @ y)
        r0.append(_maxnorm(d.first @ np.asarray(N_a.N0(v.t, v.x, y), dtype=float) - np.asarray(N_b.N0(*vb), dtype=float)))
        N1a = np.asarray(N_a.N1(v.t, v.x, y), dtype=float)
        N1b = np.asarray(N_b.N1(*vb), dtype=float)
        worst = 0.0
        for a in np.eye(tr.n):
            r = d.first @ (N1a @ a) - N1b @ (d.first @ a) - second_term(d.second, a, y)
            worst = max(worst, _maxnorm(r))
        r1.append(worst)
        used.append(v)
    return ConnectionCompatReport(
        ResidualReport("connection-compat-N0", np.asarray(r0), used, tolerance),
        ResidualReport("connection-compat-N1", np.asarray(r1), used, tolerance),
    )


__all__ = [
    "Chart",
    "ConnectionCompatReport",
    "DomainError",
    "Jet2",
    "OVERLAP_MARGIN",
    "ResidualReport",
    "Transition",
    "check_connection_compat",
    "check_semispray_compat",
    "push_jet2",
    "push_tangent",
    "second_term",
]
