import json
import subprocess
import sys

import pytest

from tdlag import cli
from tdlag.config import ConfigValidationError, build_config

QUICK = {
    "version": 1,
    "scenario": "harmonic-td",
    "integrator": {"h": 0.01, "s_span": [0.0, 1.0]},
    "samples": 10,
}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return str(p)


def config(tmp_path, out="out", **kw):
    return write(tmp_path, {**QUICK, "outputs": {"directory": str(tmp_path / out)}, **kw})


class TestRun:
    def test_writes_three_files(self, tmp_path, capsys):
        assert cli.main(["run", config(tmp_path)]) == 0
        names = sorted(p.name for p in (tmp_path / "out").iterdir())
        assert names == ["harmonic-td.report.json", "harmonic-td.residual.csv", "harmonic-td.trajectory.csv"]
        report = json.loads((tmp_path / "out" / "harmonic-td.report.json").read_text())
        assert report["passed"] and {d["name"] for d in report["diagnostics"]} == {"el-residual", "energy-rate"}
        assert all(set(r) >= {"law", "statement", "max_residual", "tolerance", "passed", "sample_count"} for r in report["laws"])
        assert "PASS" in capsys.readouterr().out

    def test_byte_identical(self, tmp_path):
        for out in ("a", "b"):
            assert cli.main(["run", config(tmp_path, out)]) == 0
        for kind in ("trajectory.csv", "residual.csv", "report.json"):
            a = (tmp_path / "a" / f"harmonic-td.{kind}").read_bytes()
            b = (tmp_path / "b" / f"harmonic-td.{kind}").read_bytes()
            assert a == b

    def test_output_root_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path / "root"))
        cfg = write(tmp_path, {**QUICK, "outputs": {"directory": "rel", "formats": ["report"]}})
        assert cli.main(["run", cfg]) == 0
        assert [p.name for p in (tmp_path / "root" / "rel").iterdir()] == ["harmonic-td.report.json"]

    def test_constrained_diagnostics(self, tmp_path):
        cfg = config(tmp_path, scenario="bead-on-sphere-forced", integrator={"h": 0.01, "s_span": [0.0, 0.5]})
        assert cli.main(["run", cfg]) == 0
        rep = json.loads((tmp_path / "out" / "bead-on-sphere-forced.report.json").read_text())
        assert [d["name"] for d in rep["diagnostics"]] == ["constraint-drift", "constraint-velocity"]
        assert "perfectness" in [r["law"] for r in rep["laws"]]

    def test_toml_and_inline(self, tmp_path):
        toml = f"""
version = 1
samples = 5
laws = ["sign-ledger", "iZ-Omega-zero"]
[scenario]
name = "quartic"
n = 1
lagrangian = "0.5*y[0]**2 - c*x[0]**4"
params = {{c = 0.25}}
[integrator]
h = 0.01
s_span = [0.0, 1.0]
[initial]
x0 = [0.5]
y0 = [0.0]
[outputs]
directory = "{tmp_path / 'toml'}"
"""
        assert cli.main(["run", write(tmp_path, toml, "cfg.toml")]) == 0
        assert (tmp_path / "toml" / "quartic.trajectory.csv").exists()


class TestExitCodes:
    def test_malformed(self, tmp_path, capsys):
        assert cli.main(["run", write(tmp_path, "{ not json")]) == 2
        assert "parse error" in capsys.readouterr().err

    def test_failing_law(self, tmp_path, capsys):
        cfg = config(tmp_path, target_offset=[1.0], samples=5)
        assert cli.main(["check", cfg, "--laws", "semispray-compat"]) == 1
        out = json.loads(capsys.readouterr().out)
        assert out["laws"][0]["max_residual"] >= 1.0 and not out["passed"]

    def test_passing_check(self, tmp_path, capsys):
        assert cli.main(["check", config(tmp_path), "--laws", "sign-ledger,recover-G-roundtrip"]) == 0
        assert [r["law"] for r in json.loads(capsys.readouterr().out)["laws"]] == ["sign-ledger", "recover-G-roundtrip"]

    @pytest.mark.parametrize(
        "doc",
        [
            {**QUICK, "colour": "red"},
            {**QUICK, "version": 2},
            {**QUICK, "integrator": {"h": -1.0}},
            {**QUICK, "initial": {"x0": [1.0, 2.0]}},
            {**QUICK, "params": {"mass": 2.0}},
            {**QUICK, "scenario": "nope"},
            {**QUICK, "tolerances": {"made-up": 1.0}},
        ],
    )
    def test_invalid_config(self, tmp_path, doc):
        assert cli.main(["run", write(tmp_path, doc)]) == 3

    def test_unknown_law(self, tmp_path):
        assert cli.main(["check", config(tmp_path), "--laws", "nonsense"]) == 2

    def test_law_not_applicable(self, tmp_path):
        assert cli.main(["check", config(tmp_path), "--laws", "perfectness"]) == 3

    def test_off_constraint_initial(self, tmp_path):
        cfg = config(tmp_path, scenario="bead-on-sphere-forced", initial={"x0": [1.0, 0.0, 0.0], "y0": [1.0, 0.0, 0.0]})
        assert cli.main(["run", cfg]) == 3

    def test_runtime_failure(self, tmp_path, capsys):
        cfg = config(tmp_path, scenario="free-particle", integrator={"h": 0.01, "s_span": [0.0, 5.0]}, initial={"y0": [1.5, 0.0]})
        assert cli.main(["run", cfg]) == 4
        assert "runtime failure" in capsys.readouterr().err

    def test_no_command(self, capsys):
        assert cli.main([]) == 2

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as err:
            cli.main(["frobnicate"])
        assert err.value.code == 2


class TestListing:
    def test_text(self, capsys):
        assert cli.main(["list-scenarios"]) == 0
        assert len(capsys.readouterr().out.strip().splitlines()) == 7

    def test_json(self, capsys):
        assert cli.main(["list-scenarios", "--json"]) == 0
        names = [s["name"] for s in json.loads(capsys.readouterr().out)]
        assert "caldirola" in names and "bead-on-sphere-forced" in names

    def test_module_entry_point(self):
        out = subprocess.run([sys.executable, "-m", "tdlag", "list-scenarios"], capture_output=True, text=True, check=True)
        assert "harmonic-td" in out.stdout


def test_build_config_defaults():
    cfg = build_config({"version": 1, "scenario": "caldirola"})
    assert cfg.integrator.method == "rk4" and cfg.initial[0] == 0.0 and cfg.samples == 100
    with pytest.raises(ConfigValidationError):
        build_config({"version": 1})
