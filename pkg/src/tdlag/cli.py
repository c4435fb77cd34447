"""Command-line runner: ``run``, ``check`` and ``list-scenarios``.

Exit codes: 0 all enabled checks pass, 1 some check fails, 2 parse error or
unknown name, 3 invalid config, 4 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import catalog
from .config import (
    ConfigParseError,
    ConfigValidationError,
    RUN_TOLERANCES,
    ScenarioConfig,
    build_config,
    read_document,
)
from .diffkernel import DomainError
from .dynamics import IntegrationError, ResidualSeries, el_residual, energy_rate_audit, integrate
from .lagrangian import RegularityError
from .laws import LAWS, LawNotApplicable, LawResult, applicable_laws, run_laws
from .riemann import ConstraintError

OUTPUT_ROOT_ENV = "TDLAG_OUTPUT_ROOT"

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class Diagnostic:
    name: str
    max_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_residual <= self.tolerance)

    def to_dict(self) -> dict:
        return {"name": self.name, "max_residual": self.max_residual, "tolerance": self.tolerance, "passed": self.passed}


@dataclass
class InvariantReport:
    scenario: str
    laws: list[LawResult] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.laws) and all(d.passed for d in self.diagnostics)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "passed": self.passed,
            "laws": [r.to_dict() for r in self.laws],
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            **self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def load(path) -> ScenarioConfig:
    try:
        doc = read_document(path)
    except ConfigParseError as exc:
        raise CliError(f"parse error: {exc}", EXIT_PARSE) from None
    try:
        return build_config(doc)
    except (ConfigValidationError, ValueError) as exc:
        raise CliError(f"invalid config: {exc}", EXIT_INVALID) from None


def output_dir(directory: str) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    d = Path(directory)
    if root:
        return Path(root) / (d.name if d.is_absolute() else d)
    return d


def _laws_for(cfg: ScenarioConfig, requested: list[str] | None) -> list[str]:
    laws = requested if requested is not None else (cfg.laws if cfg.laws is not None else applicable_laws(cfg.system))
    unknown = [law for law in laws if law not in LAWS]
    if unknown:
        raise CliError(f"unknown law(s): {', '.join(unknown)}; known: {', '.join(LAWS)}", EXIT_PARSE)
    if len(set(laws)) != len(laws):
        raise CliError("each law may be requested once", EXIT_PARSE)
    missing = [law for law in laws if law not in applicable_laws(cfg.system)]
    if missing:
        raise CliError(f"scenario {cfg.name!r} does not define what {', '.join(missing)} needs", EXIT_INVALID)
    return laws


def _evaluate_laws(cfg: ScenarioConfig, laws: list[str]) -> list[LawResult]:
    try:
        return run_laws(cfg.system, laws, cfg.samples, cfg.seed, cfg.tolerances, cfg.target_offset)
    except LawNotApplicable as exc:
        raise CliError(str(exc), EXIT_INVALID) from None
    except (DomainError, RegularityError, IntegrationError, ConstraintError, np.linalg.LinAlgError) as exc:
        raise CliError(f"runtime failure: {exc}", EXIT_RUNTIME) from None


def _tol(cfg: ScenarioConfig, name: str) -> float:
    return cfg.tolerances.get(name, RUN_TOLERANCES[name])


def constraint_series(cfg: ScenarioConfig, traj) -> tuple[ResidualSeries, ResidualSeries]:
    c = cfg.system.constraint
    drift, vel = [], []
    for x, y in zip(traj.x, traj.y):
        d = c.jet(x)
        drift.append(float(np.max(np.abs(d.value))))
        vel.append(float(np.max(np.abs(d.first @ y))))
    return ResidualSeries("constraint-drift", traj.s.copy(), np.asarray(drift)), ResidualSeries("constraint-velocity", traj.s.copy(), np.asarray(vel))


def execute_run(cfg: ScenarioConfig) -> tuple[InvariantReport, dict]:
    """Integrate, audit and check; returns the report and the CSV bodies by kind."""
    sys_ = cfg.system
    laws = _laws_for(cfg, None)
    try:
        if sys_.spray.initial_check is not None:
            sys_.spray.initial_check(*cfg.initial)
    except ConstraintError as exc:
        raise CliError(f"invalid initial data: {exc}", EXIT_INVALID) from None
    try:
        traj = integrate(sys_.spray, cfg.initial, cfg.integrator)
        if sys_.constraint is not None:
            primary, velocity = constraint_series(cfg, traj)
            diags = [
                Diagnostic(primary.name, primary.max, _tol(cfg, primary.name)),
                Diagnostic(velocity.name, velocity.max, _tol(cfg, velocity.name)),
            ]
        else:
            primary = el_residual(sys_.lagrangian, traj, sys_.force)
            diags = [Diagnostic("el-residual", primary.max, _tol(cfg, "el-residual"))]
            if sys_.force is None:
                er = energy_rate_audit(sys_.lagrangian, traj)
                diags.append(Diagnostic("energy-rate", er.max, _tol(cfg, "energy-rate")))
    except (IntegrationError, DomainError, RegularityError, ConstraintError, np.linalg.LinAlgError) as exc:
        raise CliError(f"runtime failure: {exc}", EXIT_RUNTIME) from None
    results = _evaluate_laws(cfg, laws)
    meta = {
        "params": sys_.params,
        "integrator": {**traj.meta},
        "initial": {"t0": cfg.initial[0], "x0": list(map(float, cfg.initial[1])), "y0": list(map(float, cfg.initial[2]))},
        "final": {"s": float(traj.s[-1]), "x": list(map(float, traj.x[-1])), "y": list(map(float, traj.y[-1]))},
    }
    report = InvariantReport(sys_.name, results, diags, meta)
    bodies = {
        "trajectory": "\n".join(traj.csv_rows()) + "\n",
        "residual": "\n".join(primary.csv_rows()) + "\n",
        "report": report.to_json() + "\n",
    }
    return report, bodies


def cmd_run(args) -> int:
    cfg = load(args.config)
    report, bodies = execute_run(cfg)
    out = output_dir(cfg.directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for kind in cfg.formats:
            ext = "json" if kind == "report" else "csv"
            path = out / f"{cfg.name}.{kind}.{ext}"
            with open(path, "w", newline="\n") as fh:
                fh.write(bodies[kind])
    except OSError as exc:
        raise CliError(f"runtime failure writing outputs: {exc}", EXIT_RUNTIME) from None
    status = "PASS" if report.passed else "FAIL"
    print(f"{status} {cfg.name}: {len(report.laws)} laws, {len(report.diagnostics)} diagnostics -> {out}")
    for item in [*report.laws, *report.diagnostics]:
        name = getattr(item, "law", None) or item.name
        print(f"  {'ok  ' if item.passed else 'FAIL'} {name:30s} {item.max_residual:.3e} <= {item.tolerance:.1e}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_check(args) -> int:
    cfg = load(args.config)
    requested = None
    if args.laws is not None:
        requested = [s.strip() for s in args.laws.split(",") if s.strip()]
        if not requested:
            raise CliError("--laws needs at least one law name", EXIT_PARSE)
    laws = _laws_for(cfg, requested)
    report = InvariantReport(cfg.name, _evaluate_laws(cfg, laws), [], {"samples": cfg.samples, "seed": cfg.seed})
    print(report.to_json())
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_list(args) -> int:
    if args.json:
        print(json.dumps([{"name": s.name, "description": s.description, "params": s.params} for s in catalog.CATALOG.values()], indent=2))
    else:
        width = max(len(name) for name in catalog.CATALOG)
        for s in catalog.CATALOG.values():
            print(f"{s.name:{width}s}  {s.description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tdlag", description="Time-dependent Lagrangian mechanics: integrate scenarios and audit their invariants.")
    sub = p.add_subparsers(dest="command", metavar="{run,check,list-scenarios}")
    r = sub.add_parser("run", help="integrate a scenario and write trajectory, residual and report files")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)
    c = sub.add_parser("check", help="evaluate invariant laws on sampled states")
    c.add_argument("config")
    c.add_argument("--laws", help=f"comma-separated subset of: {', '.join(LAWS)}")
    c.set_defaults(func=cmd_check)
    ls = sub.add_parser("list-scenarios", help="list the built-in scenarios")
    ls.add_argument("--json", action="store_true", help="machine-readable output")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_PARSE
    try:
        return args.func(args)
    except CliError as exc:
        print(f"tdlag: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
