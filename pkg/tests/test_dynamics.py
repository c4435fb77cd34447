import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdlag.diffkernel import sin
from tdlag.dynamics import (
    ExternalForce,
    IntegrationError,
    IntegratorConfig,
    ResidualSeries,
    _derivative,
    el_residual,
    energy_rate_audit,
    forced_spray,
    integrate,
    integrate_second_order,
    vertical_from_force,
    zero_force,
)
from tdlag.lagrangian import TimeLagrangian
from tdlag.semispray import ProvenanceError, canonical_spray, lagrangian_spray, lagrangian_vector_field


def harmonic_end_error(harmonic, h, method="rk4"):
    traj = integrate(lagrangian_spray(harmonic), (0.0, [1.0], [0.0]), IntegratorConfig(method=method, h=h, s_span=(0.0, 1.0)))
    return abs(traj.x[-1, 0] - math.cos(1.0))


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [{"method": "euler"}, {"h": 0.0}, {"s_span": (1.0, 0.0)}, {"max_steps": 0}, {"rtol": -1.0}],
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            IntegratorConfig(**kw)


class TestIntegrators:
    def test_rk4_fourth_order(self, harmonic):
        e1, e2 = harmonic_end_error(harmonic, 0.1), harmonic_end_error(harmonic, 0.05)
        assert 14.0 < e1 / e2 < 18.0

    def test_dopri_accuracy(self, harmonic):
        assert harmonic_end_error(harmonic, 0.1, "dopri5") <= 1e-9

    def test_last_step_lands_on_end(self, harmonic):
        traj = integrate(lagrangian_spray(harmonic), (0.0, [1.0], [0.0]), IntegratorConfig(h=0.3, s_span=(0.0, 1.0)))
        assert traj.s[-1] == 1.0 and len(traj) == 5
        assert traj.t[0] == 0.0 and traj.meta["steps"] == 4

    def test_spray_and_field_give_same_motion(self, systems):
        # x'' + G = 0 with G = -X2 versus x'' = X2 integrated directly
        sys_ = systems["potential-td"]
        cfg = IntegratorConfig(h=1e-2, s_span=sys_.span)
        a = integrate(sys_.spray, sys_.init, cfg)
        b = integrate_second_order(lambda t, x, y: lagrangian_vector_field(sys_.lagrangian, (t, x, y)), 2, sys_.init, cfg)
        assert np.max(np.abs(a.x - b.x)) <= 1e-9

    def test_time_offset(self, caldirola):
        # t = t0 + (s - s0)
        traj = integrate(lagrangian_spray(caldirola), (2.0, [0.0], [1.0]), IntegratorConfig(h=0.1, s_span=(0.0, 1.0)))
        np.testing.assert_allclose(traj.t, 2.0 + traj.s)

    def test_domain_escape(self, systems):
        sys_ = systems["free-particle"]
        with pytest.raises(IntegrationError, match="domain"):
            integrate(sys_.spray, (0.0, [0.0, 0.0], [1.5, 0.0]), IntegratorConfig(h=0.01, s_span=(0.0, 5.0)))

    def test_step_budget(self, harmonic):
        with pytest.raises(IntegrationError, match="max_steps"):
            integrate(lagrangian_spray(harmonic), (0.0, [1.0], [0.0]), IntegratorConfig(h=0.01, max_steps=10))

    def test_non_finite(self):
        with pytest.raises(IntegrationError, match="non-finite"):
            integrate_second_order(lambda t, x, y: np.array([np.nan if t > 0.2 else 0.0]), 1, (0.0, [0.0], [0.0]), IntegratorConfig(h=0.5, s_span=(0.0, 1.0)))

    def test_dimension_mismatch(self, harmonic):
        with pytest.raises(ValueError):
            integrate(lagrangian_spray(harmonic), (0.0, [1.0, 2.0], [0.0, 0.0]), IntegratorConfig())

    def test_interpolation(self, harmonic):
        traj = integrate(lagrangian_spray(harmonic), (0.0, [1.0], [0.0]), IntegratorConfig(h=0.01, s_span=(0.0, 1.0)))
        for s in (0.0, 0.123, 0.5, 0.977, 1.0):
            x, y = traj.at(s)
            assert x[0] == pytest.approx(math.cos(s), abs=1e-9)
            assert y[0] == pytest.approx(-math.sin(s), abs=1e-8)
        with pytest.raises(ValueError):
            traj.at(1.5)

    def test_csv(self, harmonic, tmp_path):
        traj = integrate(lagrangian_spray(harmonic), (0.0, [1.0], [0.0]), IntegratorConfig(h=0.5, s_span=(0.0, 1.0)))
        rows = traj.csv_rows()
        assert rows[0] == "s,t,x0,y0" and len(rows) == 4
        assert [float(v) for v in rows[-1].split(",")] == [1.0, 1.0, traj.x[-1, 0], traj.y[-1, 0]]
        traj.to_csv(tmp_path / "a.csv")
        traj.to_csv(tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


class TestDerivativeWeights:
    @given(st.lists(st.floats(0.2, 1.0), min_size=8, max_size=8), st.lists(st.floats(-2, 2), min_size=5, max_size=5))
    @settings(max_examples=30, deadline=None)
    def test_exact_on_quartics(self, gaps, c):
        s = np.concatenate([[0.0], np.cumsum(gaps)])
        f = sum(ck * s ** k for k, ck in enumerate(c))
        df = sum(k * ck * s ** (k - 1) for k, ck in enumerate(c) if k)
        np.testing.assert_allclose(_derivative(s, f)[:, 0], df[1:-1], atol=1e-8)

    def test_short_series(self):
        s = np.array([0.0, 1.0, 2.0])
        np.testing.assert_allclose(_derivative(s, s ** 2)[:, 0], [2.0])


class TestAudits:
    def test_el_residual_methods(self, harmonic_runs, harmonic):
        traj = harmonic_runs[1e-3]
        for method in ("difference", "momentum", "spray"):
            assert el_residual(harmonic, traj, method=method).max <= 1e-9, method
        with pytest.raises(ValueError):
            el_residual(harmonic, traj, method="guess")

    def test_el_residual_detects_wrong_motion(self, harmonic, free2):
        # free motion is not an oscillator motion
        traj = integrate(lagrangian_spray(TimeLagrangian.from_function(lambda t, x, y: 0.5 * y[0] ** 2, 1)), (0.0, [1.0], [0.0]), IntegratorConfig(h=0.01))
        assert el_residual(harmonic, traj).max >= 0.5

    def test_energy_rate(self, harmonic_runs, harmonic, systems):
        assert energy_rate_audit(harmonic, harmonic_runs[1e-3]).max <= 1e-9
        sys_ = systems["caldirola"]
        traj = integrate(sys_.spray, sys_.init, IntegratorConfig(h=1e-3, s_span=sys_.span))
        # E is not conserved here, but dE/ds = -d1 L holds along the motion
        assert energy_rate_audit(sys_.lagrangian, traj).max <= 1e-8

    def test_too_short(self, harmonic):
        traj = integrate(lagrangian_spray(harmonic), (0.0, [1.0], [0.0]), IntegratorConfig(h=1.0, s_span=(0.0, 1.0)))
        with pytest.raises(ValueError, match="too short"):
            el_residual(harmonic, traj)

    def test_series_csv(self):
        r = ResidualSeries("x", np.array([0.0, 0.5]), np.array([1e-12, 0.25]))
        assert r.max == 0.25 and r.csv_rows() == ["s,residual", "0,9.9999999999999998e-13", "0.5,0.25"]


class TestForces:
    def test_vertical_field(self):
        L = TimeLagrangian.from_function(lambda t, x, y: y[0] ** 2, 1)
        F = ExternalForce(lambda t, x, y: np.array([4.0]), 1)
        assert vertical_from_force(L, F, (0.0, [0.0], [0.0]))[0] == pytest.approx(2.0)

    def test_forced_free_particle(self):
        L = TimeLagrangian.from_function(lambda t, x, y: 0.5 * y[0] ** 2, 1)
        F = ExternalForce(lambda t, x, y: np.array([sin(t)], dtype=object), 1)
        S = forced_spray(lagrangian_spray(L), L, F)
        assert S.provenance == "forced"
        traj = integrate(S, (0.0, [0.0], [0.0]), IntegratorConfig(h=1e-3, s_span=(0.0, math.pi)))
        # x = t - sin t
        assert traj.x[-1, 0] == pytest.approx(math.pi, abs=1e-10)
        assert el_residual(L, traj, F).max <= 1e-8
        assert el_residual(L, traj).max >= 0.5

    def test_zero_force_is_identity(self, harmonic):
        S = lagrangian_spray(harmonic)
        v = (0.3, [0.4], [0.5])
        np.testing.assert_array_equal(forced_spray(S, harmonic, zero_force(1))(*v), S(*v))

    def test_provenance_required(self, harmonic, caldirola):
        F = zero_force(1)
        with pytest.raises(ProvenanceError):
            forced_spray(canonical_spray(harmonic), harmonic, F)
        with pytest.raises(ProvenanceError):
            forced_spray(lagrangian_spray(harmonic), caldirola, F)
