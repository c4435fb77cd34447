"""Acceptance suite: one pass/fail line per criterion.

Run under pytest, or directly with ``python tests/test_acceptance.py`` for the
summary lines alone.
"""
import contextlib
import io
import json
import math
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

import reference_runs as runs
from tdlag import catalog, cli
from tdlag.diffkernel import fd_partials, jet_deviation, partials, sin
from tdlag.dynamics import IntegratorConfig, el_residual, integrate
from tdlag.laws import f_related_pair, run_laws, tangent_samples
from tdlag.riemann import MetricField, PotentialField, potential_lagrangian, potential_spray
from tdlag.semispray import lagrangian_vector_field

SAMPLES = 100
SEED = 7
NAMES = tuple(catalog.CATALOG)


def _law_over_catalog(law, tol, **kw):
    worst, where, count = 0.0, None, 0
    for name in NAMES:
        (r,) = run_laws(runs.system(name), [law], SAMPLES, SEED, **kw)
        count += r.sample_count
        if r.max_residual >= worst:
            worst, where = r.max_residual, name
    return worst <= tol, f"{law} max {worst:.2e} ({where}) over {count} samples, tol {tol:g}"


def criterion_1():
    worst, where = 0.0, None
    rng = np.random.default_rng(SEED)
    for name in NAMES:
        L = runs.system(name).lagrangian
        for v in tangent_samples(L.box, rng, SAMPLES):
            d = jet_deviation(partials(L.field, v), fd_partials(L.field, v))
            if d >= worst:
                worst, where = d, name
    return worst <= 1e-6, f"max relative AD/FD deviation {worst:.2e} ({where}), 7 x {SAMPLES} samples, tol 1e-6"


def criterion_2():
    ok, detail = _law_over_catalog("semispray-compat", 1e-10)
    (bad,) = run_laws(runs.system("harmonic-td"), ["semispray-compat"], SAMPLES, SEED, target_offset=[1.0])
    return ok and bad.max_residual >= 1.0, f"{detail}; mismatch control {bad.max_residual:.3f} >= 1"


def criterion_3():
    ok0, d0 = _law_over_catalog("connection-compat-N0", 1e-10)
    ok1, d1 = _law_over_catalog("connection-compat-N1", 1e-10)
    return ok0 and ok1, f"{d0}; {d1}"


def criterion_4():
    return _law_over_catalog("trivialized-transition-block", 1e-10)


def criterion_5():
    return _law_over_catalog("recover-G-roundtrip", 1e-12)


def criterion_6():
    ok1, d1 = _law_over_catalog("iZ-Omega-zero", 1e-8)
    ok2, d2 = _law_over_catalog("sign-ledger", 1e-10)
    return ok1 and ok2, f"{d1}; {d2}"


def criterion_7():
    L = runs.system("harmonic-td").lagrangian
    fine, coarse = runs.harmonic_run(1e-3), runs.harmonic_run(2e-3)
    x_quarter = abs(fine.at(math.pi / 2)[0][0])
    r_fine, r_coarse = el_residual(L, fine).max, el_residual(L, coarse).max
    ratio = r_coarse / r_fine
    # the same ratio where truncation, not rounding, dominates the residual
    r_a, r_b = el_residual(L, runs.harmonic_run(8e-3)).max, el_residual(L, runs.harmonic_run(4e-3)).max
    ok = x_quarter <= 1e-6 and r_fine <= 1e-6 and ratio >= 8
    return ok, (
        f"|x(pi/2)| {x_quarter:.2e} <= 1e-6; el_residual {r_fine:.2e} <= 1e-6; "
        f"ratio h 2e-3 -> 1e-3 {ratio:.2f} (need >= 8; residual is at the rounding floor); "
        f"ratio h 8e-3 -> 4e-3 {r_a / r_b:.2f}"
    )


def criterion_8():
    sys_ = runs.system("caldirola")
    traj = integrate(sys_.spray, (0.0, [0.0], [1.0]), IntegratorConfig(h=1e-3, s_span=(0.0, 1.0)))
    expect = (1 - math.exp(-2)) / 2
    err = abs(traj.x[-1, 0] - expect)
    return err <= 1e-6, f"x(1) = {traj.x[-1, 0]:.15f}, closed form {expect:.15f}, error {err:.2e}, tol 1e-6"


def criterion_9():
    sys_ = runs.system("potential-td")
    U = PotentialField(lambda t, x: sin(t) * x[0], 2)
    metrics = {"I": MetricField.identity(2), "diag(1, x1^2)": sys_.metric}
    worst = {}
    for label, g in metrics.items():
        L = potential_lagrangian(g, U)
        rng = np.random.default_rng(SEED)
        worst[label] = max(
            float(np.max(np.abs(potential_spray(g, U, v) - lagrangian_vector_field(L, v))))
            for v in tangent_samples(sys_.box, rng, SAMPLES)
        )
    ok = max(worst.values()) <= 1e-10
    return ok, "; ".join(f"g = {k}: {v:.2e}" for k, v in worst.items()) + f" over {SAMPLES} samples, tol 1e-10"


def criterion_10():
    sys_ = runs.system("forced-oscillator", k=0.0)
    traj = integrate(sys_.spray, (0.0, [0.0], [0.0]), IntegratorConfig(h=1e-3, s_span=(0.0, math.pi)))
    err = abs(traj.x[-1, 0] - math.pi)
    r = el_residual(sys_.lagrangian, traj, sys_.force).max
    return err <= 1e-6 and r <= 1e-6, f"|x(pi) - pi| {err:.2e} <= 1e-6; forced el_residual {r:.2e} <= 1e-6"


def criterion_11():
    quarter = runs.sphere_free_quarter()
    end_err = float(np.max(np.abs(quarter.x[-1] - [0.0, 1.0, 0.0])))
    (perfect,) = run_laws(runs.system("bead-on-sphere-forced"), ["perfectness"], SAMPLES, SEED)
    forced = runs.sphere_forced_run()
    c = runs.system("bead-on-sphere-forced").constraint
    drift = max(float(np.max(np.abs(c.jet(x).value))) for x in forced.x)
    intrinsic = runs.intrinsic_forced_run()
    agree = max(float(np.max(np.abs(runs.embed(q).astype(float) - forced.at(s)[0]))) for s, q in zip(intrinsic.s, intrinsic.x))
    ok = end_err <= 1e-6 and perfect.max_residual <= 1e-8 and drift <= 1e-7 and agree <= 1e-6
    return ok, (
        f"great-circle endpoint {end_err:.2e} <= 1e-6; perfectness {perfect.max_residual:.2e} <= 1e-8; "
        f"drift over [0, 2pi] {drift:.2e} <= 1e-7; ambient vs intrinsic {agree:.2e} <= 1e-6"
    )


def criterion_12():
    sys_ = runs.system("frelated-demo")
    (rep,) = run_laws(sys_, ["f-related"], SAMPLES, SEED)
    S_M, S_N, f = f_related_pair(sys_)
    cfg = IntegratorConfig(h=1e-3, s_span=sys_.span)
    worst = 0.0
    for x0, y0 in [(0.5, 1.0), (-1.0, 0.5), (0.2, -1.5)]:
        tm = integrate(S_M, (0.0, [x0], [y0]), cfg)
        fx, dfy = f.tangent(np.array([x0]), np.array([y0]))
        tn = integrate(S_N, (0.0, np.asarray(fx, dtype=float), np.asarray(dfy, dtype=float)), cfg)
        mapped = np.array([np.asarray(f.raw(x), dtype=float) for x in tm.x])
        worst = max(worst, float(np.max(np.abs(mapped - tn.x))))
    ok = rep.max_residual <= 1e-8 and worst <= 1e-6
    return ok, f"check_f_related {rep.max_residual:.2e} <= 1e-8; f(geodesic) vs geodesic {worst:.2e} <= 1e-6"


def criterion_13():
    quiet = io.StringIO()
    with tempfile.TemporaryDirectory() as tmp, contextlib.redirect_stdout(quiet), contextlib.redirect_stderr(quiet):
        tmp = Path(tmp)
        base = {"version": 1, "scenario": "harmonic-td", "integrator": {"h": 0.01, "s_span": [0.0, 1.0]}, "samples": 20}
        digests = []
        for run in ("first", "second"):
            cfg = tmp / f"{run}.json"
            cfg.write_text(json.dumps({**base, "outputs": {"directory": str(tmp / run)}}))
            code = cli.main(["run", str(cfg)])
            files = sorted((tmp / run).iterdir())
            digests.append((code, [(p.name, p.read_bytes()) for p in files]))
        identical = digests[0] == digests[1] and digests[0][0] == 0 and len(digests[0][1]) == 3
        bad = tmp / "bad.json"
        bad.write_text('{"version": 1, "scenario": ')
        failing = tmp / "failing.json"
        failing.write_text(json.dumps({**base, "target_offset": [1.0], "laws": ["semispray-compat"]}))
        code_bad = cli.main(["check", str(bad)])
        code_fail = cli.main(["check", str(failing)])
    ok = identical and code_bad == cli.EXIT_PARSE and code_fail == cli.EXIT_FAIL
    return ok, f"repeated runs byte-identical: {identical}; malformed config exit {code_bad} (want 2); failing law exit {code_fail} (want 1)"


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 14)}


def report_line(i, ok, detail):
    return f"criterion {i:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.mark.parametrize("number", list(CRITERIA))
def test_criterion(number, capsys):
    ok, detail = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + report_line(number, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = []
    for i, fn in CRITERIA.items():
        ok, detail = fn()
        results.append(ok)
        print(report_line(i, ok, detail), flush=True)
    print(f"{sum(results)}/{len(results)} criteria pass")
    sys.exit(0 if all(results) else 1)
