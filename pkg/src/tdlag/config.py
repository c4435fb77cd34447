"""Scenario config documents: loading, strict validation and system assembly."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import catalog
from .atlas import Transition
from .catalog import System
from .diffkernel import Box, VectorMap
from .dynamics import ExternalForce, IntegratorConfig, forced_spray
from .expr import compile_expression, compile_vector
from .lagrangian import TimeLagrangian
from .laws import DEFAULT_TOLERANCES, LAWS
from .riemann import LevelSetConstraint, MetricField, constrained_spray
from .semispray import lagrangian_spray

CONFIG_VERSION = 1

TOP_KEYS = {"version", "scenario", "params", "integrator", "initial", "outputs", "laws", "tolerances", "samples", "seed", "target_offset"}
INLINE_KEYS = {"name", "n", "lagrangian", "params", "force", "constraint", "domain", "chart_change"}
INTEGRATOR_KEYS = {"method", "h", "s_span", "max_steps", "rtol", "atol", "h_max", "project"}
INITIAL_KEYS = {"t0", "x0", "y0"}
OUTPUT_KEYS = {"directory", "formats"}
FORMATS = ("trajectory", "residual", "report")
RUN_TOLERANCES = {"el-residual": 1e-6, "energy-rate": 1e-6, "constraint-drift": 1e-7, "constraint-velocity": 1e-6}


class ConfigParseError(ValueError):
    """The document is not valid JSON/TOML."""


class ConfigValidationError(ValueError):
    """The document parses but its contents are inconsistent or unknown."""


@dataclass
class ScenarioConfig:
    system: System
    integrator: IntegratorConfig
    initial: tuple
    directory: str = "tdlag-out"
    formats: tuple = FORMATS
    laws: list | None = None
    tolerances: dict = field(default_factory=dict)
    samples: int = 100
    seed: int = 0
    target_offset: list | None = None

    @property
    def name(self) -> str:
        return self.system.name


def read_document(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from None
    if path.suffix.lower() == ".toml":
        try:
            import tomli
        except ImportError:  # pragma: no cover - tomli is an optional extra
            raise ConfigParseError("TOML configs need the 'tomli' package") from None
        try:
            doc = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigParseError(f"{path}: {exc}") from None
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigParseError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigParseError(f"{path}: top level must be an object")
    return doc


def _keys(section: dict, allowed: set, where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigValidationError(f"{where} must be an object")
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigValidationError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _vector(v, n: int, what: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.shape != (n,):
        raise ConfigValidationError(f"{what} must have {n} components")
    if not np.all(np.isfinite(arr)):
        raise ConfigValidationError(f"{what} must be finite")
    return arr


def _inline_system(entry: dict) -> System:
    _keys(entry, INLINE_KEYS, "scenario")
    for k in ("name", "n", "lagrangian"):
        if k not in entry:
            raise ConfigValidationError(f"inline scenario needs {k!r}")
    n = entry["n"]
    if not isinstance(n, int) or n < 1:
        raise ConfigValidationError("scenario.n must be a positive integer")
    params = entry.get("params", {})
    if not isinstance(params, dict) or not all(isinstance(v, (int, float)) for v in params.values()):
        raise ConfigValidationError("scenario.params must map names to numbers")
    dom = entry.get("domain", {"lo": [-1.0] + [-2.0] * (2 * n), "hi": [8.0] + [2.0] * (2 * n)})
    _keys(dom, {"lo", "hi"}, "scenario.domain")
    box = Box(_vector(dom.get("lo"), 1 + 2 * n, "domain.lo"), _vector(dom.get("hi"), 1 + 2 * n, "domain.hi"))
    L = TimeLagrangian.from_function(compile_expression(entry["lagrangian"], n, params), n, box, entry["name"])
    force = None
    if "force" in entry:
        force = ExternalForce(compile_vector(entry["force"], n, n, params), n, None, "force")
    x_box = Box(box.lo[1 : 1 + n], box.hi[1 : 1 + n])
    metric = constraint = None
    if "constraint" in entry:
        cs = entry["constraint"]
        k = len(cs) if isinstance(cs, list) else 0
        constraint = LevelSetConstraint(VectorMap(compile_vector(cs, n, k, params, ("x",)), n, k, name="constraint"))
        metric = MetricField.identity(n)
        spray = constrained_spray(metric, force, constraint, entry["name"])
    else:
        spray = lagrangian_spray(L)
        if force is not None:
            spray = forced_spray(spray, L, force)
    if "chart_change" in entry:
        cc = entry["chart_change"]
        _keys(cc, {"map", "inverse"}, "scenario.chart_change")
        if "map" not in cc or "inverse" not in cc:
            raise ConfigValidationError("chart_change needs both 'map' and 'inverse'")
        inv = VectorMap(compile_vector(cc["inverse"], n, n, params, ("x",)), n, n, None, "phi^-1")
        fwd = VectorMap(compile_vector(cc["map"], n, n, params, ("x",)), n, n, x_box, "phi", inv)
        tr = Transition("a", "b", fwd, x_box)
    else:
        tr = catalog.cubic_transition(n, x_box)
    return System(
        name=entry["name"],
        n=n,
        lagrangian=L,
        spray=spray,
        box=box,
        transition=tr,
        init=(0.0, np.zeros(n), np.zeros(n)),
        span=(0.0, 1.0),
        force=force,
        metric=metric,
        constraint=constraint,
        params=dict(params),
    )


def build_config(doc: dict) -> ScenarioConfig:
    """Validate a parsed document and assemble the scenario it describes."""
    _keys(doc, TOP_KEYS, "config")
    if doc.get("version") != CONFIG_VERSION:
        raise ConfigValidationError(f"config version must be {CONFIG_VERSION}, got {doc.get('version')!r}")
    if "scenario" not in doc:
        raise ConfigValidationError("config needs a 'scenario'")
    scen = doc["scenario"]
    overrides = doc.get("params", {})
    if not isinstance(overrides, dict):
        raise ConfigValidationError("params must be an object")
    try:
        if isinstance(scen, str):
            system = catalog.get(scen).system(overrides)
        elif isinstance(scen, dict):
            if overrides:
                raise ConfigValidationError("top-level params apply to catalog scenarios only; use scenario.params")
            system = _inline_system(scen)
        else:
            raise ConfigValidationError("scenario must be a catalog name or an inline definition")
    except KeyError as exc:
        raise ConfigValidationError(str(exc.args[0])) from None
    n = system.n

    integ = doc.get("integrator", {})
    _keys(integ, INTEGRATOR_KEYS, "integrator")
    kw = dict(integ)
    kw["s_span"] = tuple(kw.get("s_span", system.span))
    if len(kw["s_span"]) != 2:
        raise ConfigValidationError("integrator.s_span must have two entries")
    try:
        cfg = IntegratorConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigValidationError(f"integrator: {exc}") from None

    init = doc.get("initial", {})
    _keys(init, INITIAL_KEYS, "initial")
    t0 = float(init.get("t0", system.init[0]))
    if not math.isfinite(t0):
        raise ConfigValidationError("initial.t0 must be finite")
    x0 = _vector(init.get("x0", system.init[1]), n, "initial.x0")
    y0 = _vector(init.get("y0", system.init[2]), n, "initial.y0")

    out = doc.get("outputs", {})
    _keys(out, OUTPUT_KEYS, "outputs")
    formats = tuple(out.get("formats", FORMATS))
    bad = sorted(set(formats) - set(FORMATS))
    if bad:
        raise ConfigValidationError(f"unknown output format(s): {', '.join(bad)}")

    laws = doc.get("laws")
    if laws is not None and (not isinstance(laws, list) or not all(isinstance(v, str) for v in laws)):
        raise ConfigValidationError("laws must be a list of names")
    tol = doc.get("tolerances", {})
    _keys(tol, set(LAWS) | set(RUN_TOLERANCES), "tolerances")
    samples = doc.get("samples", 100)
    if not isinstance(samples, int) or samples < 1:
        raise ConfigValidationError("samples must be a positive integer")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigValidationError("seed must be an integer")
    offset = doc.get("target_offset")
    if offset is not None:
        offset = list(_vector(offset, n, "target_offset"))
    return ScenarioConfig(
        system=system,
        integrator=cfg,
        initial=(t0, x0, y0),
        directory=str(out.get("directory", "tdlag-out")),
        formats=formats,
        laws=laws,
        tolerances={k: float(v) for k, v in tol.items()},
        samples=samples,
        seed=seed,
        target_offset=offset,
    )


def load_config(path) -> ScenarioConfig:
    return build_config(read_document(path))


def default_tolerances() -> dict:
    return {**DEFAULT_TOLERANCES, **RUN_TOLERANCES}


__all__ = [
    "CONFIG_VERSION",
    "ConfigParseError",
    "ConfigValidationError",
    "FORMATS",
    "RUN_TOLERANCES",
    "ScenarioConfig",
    "build_config",
    "default_tolerances",
    "load_config",
    "read_document",
]
