import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import gaussian, pulse_problem
from dpl.energy import hat_constitutive_residual
from dpl.model import (
    DegenerateModelError,
    DelayPair,
    Geometry1D,
    MaterialField,
    Problem,
    ProblemData,
    TimeProfile,
)
from dpl.solver import (
    DivergenceError,
    StepControl,
    characteristic_speed,
    ddx,
    initial_state,
    rhs,
    run,
    step,
)


class TestCharacteristicSpeed:
    def test_unit_example(self):
        assert characteristic_speed(MaterialField.uniform(), DelayPair(1.0, 0.5)) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("tau", [0.25, 1.0, 3.0])
    def test_equal_delays(self, tau):
        c = characteristic_speed(MaterialField.uniform(), DelayPair(tau, tau))
        assert c == pytest.approx(math.sqrt(2 / tau), rel=1e-15)

    def test_conductivity_scaling(self):
        d = DelayPair(1.0, 0.7)
        c1 = characteristic_speed(MaterialField.uniform(1.0, 1.0), d)
        c4 = characteristic_speed(MaterialField.uniform(1.0, 4.0), d)
        assert c4 == pytest.approx(2 * c1, rel=1e-15)

    @pytest.mark.parametrize("tq, tT", [(0.0, 1.0), (1.0, 0.0)])
    def test_degenerate(self, tq, tT):
        with pytest.raises(DegenerateModelError):
            characteristic_speed(MaterialField.uniform(), DelayPair(tq, tT))


class TestDdx:
    def test_exact_on_quadratics(self):
        x = np.linspace(-1, 2, 31)
        np.testing.assert_allclose(ddx(3 * x**2 - x, x[1] - x[0]), 6 * x - 1, atol=1e-12)


class TestRhs:
    def test_zero_state(self):
        p = pulse_problem(1.0, 1.0, n_cells=32)
        s = initial_state(Problem(p.geometry, p.material, p.delays, ProblemData.zero(33)))
        for rate in rhs(s, p):
            assert not rate.any()

    def test_uniform_equilibrium(self):
        g = Geometry1D(1.0, 1.0, 32)
        T_star = 2.5
        bc = {e: TimeProfile("constant", T_star) for e in ("left", "right")}
        data = ProblemData(np.full(33, T_star), np.zeros(33), np.zeros(33), theta_bc=bc)
        p = Problem(g, MaterialField.uniform(), DelayPair(1.0, 0.5), data)
        for rate in rhs(initial_state(p), p):
            np.testing.assert_array_equal(rate, 0.0)

    def test_sine_profile(self):
        # q = v = 0 and no supply give dT/dt = 0, so dv/dt = -(2/tq^2) k T_x
        errs = []
        tq = 0.8
        for n in (32, 64, 128):
            g = Geometry1D(1.0, 1.0, n)
            x = g.x
            data = ProblemData(np.sin(math.pi * x), np.zeros_like(x), np.zeros_like(x), frozenset(), frozenset({"left", "right"}))
            p = Problem(g, MaterialField.uniform(), DelayPair(tq, 0.3), data)
            _, _, vt = rhs(initial_state(p), p)
            exact = -(2 / tq**2) * math.pi * np.cos(math.pi * x)
            errs.append(np.abs(vt - exact)[1:-1].max())
        assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
        assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)

    def test_rejects_zero_tau_q(self):
        p = pulse_problem(1.0, 1.0, n_cells=16)
        bad = Problem(p.geometry, p.material, DelayPair(0.0, 0.5), p.data)
        with pytest.raises(DegenerateModelError):
            initial_state(bad)


class TestStepControl:
    def test_for_problem_divides_horizon(self, stable_pulse):
        ctl = StepControl.for_problem(stable_pulse, 1.0)
        assert ctl.n_steps * ctl.dt == pytest.approx(1.0, rel=1e-14)
        ctl.validate(stable_pulse)

    def test_bound_components(self, stable_pulse):
        c = characteristic_speed(stable_pulse.material, stable_pulse.delays)
        dt = StepControl.max_dt(stable_pulse, 0.5, 0.5)
        assert dt == pytest.approx(min(0.5 * stable_pulse.geometry.dx / c, 0.5, 0.5))

    def test_validate_rejects_large_step(self, stable_pulse):
        dt = 2 * StepControl.max_dt(stable_pulse, 0.5, 0.5)
        with pytest.raises(ValueError, match="stability bound"):
            StepControl(dt, 100 * dt).validate(stable_pulse)

    @pytest.mark.parametrize("kw", [{"cfl_safety": 0.0}, {"relax_safety": 1.5}, {"dt": -1.0}])
    def test_invalid(self, kw):
        args = {"dt": 0.1, "t_end": 1.0, **kw}
        with pytest.raises(ValueError):
            StepControl(**args)

    def test_oversized_step_diverges(self):
        # documents the explicit-scheme limit; four times the bound blows up quickly
        p = pulse_problem(1.0, 1.0, n_cells=64)
        dt = 4 * StepControl.max_dt(p, 1.0, 1.0)
        with pytest.raises(DivergenceError) as info:
            run(p, StepControl(dt, 2000 * dt), stride=10**6, check_control=False)
        assert 0 < info.value.step_index < 2000


class TestStep:
    def test_zero_data_stays_zero(self):
        g = Geometry1D(1.0, 1.0, 64)
        p = Problem(g, MaterialField.uniform(), DelayPair(1.0, 0.3), ProblemData.zero(g.n_nodes))
        rec = run(p, StepControl.for_problem(p, 2.0), stride=10)
        _, T, q, v = rec.arrays()
        assert not (T.any() or q.any() or v.any())

    def test_equilibrium_unchanged(self):
        g = Geometry1D(1.0, 1.0, 32)
        bc = {e: TimeProfile("constant", -1.5) for e in ("left", "right")}
        p = Problem(g, MaterialField.uniform(), DelayPair(1.0, 1.0), ProblemData(np.full(33, -1.5), np.zeros(33), np.zeros(33), theta_bc=bc))
        ctl = StepControl.for_problem(p, 1.0)
        s = initial_state(p)
        for _ in range(ctl.n_steps):
            s = step(s, p, ctl)
        np.testing.assert_allclose(s.T, -1.5, rtol=0, atol=1e-14)
        assert np.abs(s.q).max() < 1e-14

    def test_self_convergence(self):
        finals = []
        base = StepControl.for_problem(pulse_problem(1.0, 0.5, 64), 0.5)
        for f in (1, 2, 4):
            p = pulse_problem(1.0, 0.5, 64 * f)
            rec = run(p, StepControl(base.dt / f, 0.5), stride=10**6)
            finals.append(rec.final_state.T)
        d1 = np.abs(finals[0] - finals[1][::2]).max()
        d2 = np.abs(finals[1] - finals[2][::2]).max()
        assert 3.5 < d1 / d2 < 4.5

    def test_boundary_data_imposed(self):
        g = Geometry1D(1.0, 1.0, 64)
        prof = TimeProfile("sin", 0.3, 2.0)
        data = ProblemData(np.zeros(65), np.zeros(65), np.zeros(65), frozenset({"left"}), frozenset({"right"}),
                           theta_bc={"left": prof}, xi_bc={"right": prof})
        p = Problem(g, MaterialField.uniform(), DelayPair(1.0, 1.0), data)
        rec = run(p, StepControl.for_problem(p, 0.7), stride=10**6)
        s = rec.final_state
        assert s.T[0] == prof.value(s.t)
        assert s.q[-1] == prof.value(s.t)  # outward normal +1 on the right
        assert s.v[-1] == prof.d1(s.t)


class TestRun:
    def test_zero_horizon(self, stable_pulse):
        rec = run(stable_pulse, StepControl.for_problem(stable_pulse, 0.0))
        assert rec.times == [0.0] and rec.n_steps == 0

    def test_stride_beyond_steps(self, stable_pulse):
        seen = []
        ctl = StepControl.for_problem(stable_pulse, 0.3)
        rec = run(stable_pulse, ctl, [lambda s: seen.append(s.step_index)], stride=10**6)
        assert seen == [0, ctl.n_steps]
        assert len(rec.times) == 2

    def test_snapshot_times(self, stable_pulse):
        ctl = StepControl.for_problem(stable_pulse, 1.0)
        rec = run(stable_pulse, ctl, stride=10**6, snapshot_times=[0.5])
        assert len(rec.times) == 3
        assert rec.times[1] == pytest.approx(0.5, abs=ctl.dt)

    def test_stable_pulse_does_not_grow(self, stable_pulse):
        rec = run(stable_pulse, StepControl.for_problem(stable_pulse, 2.0), stride=20)
        _, T, _, _ = rec.arrays()
        assert np.abs(T[-1]).max() <= 1.05 * np.abs(T[0]).max()

    def test_summary_fields(self, stable_pulse):
        rec = run(stable_pulse, StepControl.for_problem(stable_pulse, 0.2), stride=5)
        summary = rec.summary()
        assert summary["n_steps"] == rec.n_steps and summary["wall_time_s"] >= 0

    def test_integrated_constitutive_law_converges(self):
        res = []
        base = StepControl.for_problem(pulse_problem(1.0, 0.5, 64), 0.5)
        for f in (1, 2, 4):
            p = pulse_problem(1.0, 0.5, 64 * f)
            rec = run(p, StepControl(base.dt / f, 0.5), stride=10**6)
            res.append(hat_constitutive_residual(rec.final_state, p))
        assert res[0] / res[1] > 3.0 and res[1] / res[2] > 3.0


def _random_problem(seed: int):
    """Random smooth data; the boundary frequencies are fixed so that data add up."""
    rng = np.random.default_rng(seed)
    g = Geometry1D(1.0, 1.0, 64)
    x = g.x
    c, w = rng.uniform(-0.5, 0.5), rng.uniform(0.1, 0.3)
    amp = rng.uniform(-1, 1, 3)
    data = ProblemData(
        gaussian(x, c, w, rng.uniform(-1, 1)),
        gaussian(x, -c, w, rng.uniform(-1, 1)) * np.sin(math.pi * x) ** 2,
        np.zeros_like(x),
        frozenset({"left"}),
        frozenset({"right"}),
        theta_bc={"left": TimeProfile("sin", amp[0], 2.0)},
        xi_bc={"right": TimeProfile("sin", amp[1], 3.0)},
    )
    return g, amp[2], data


def _combine(d1: ProblemData, d2: ProblemData, alpha: float) -> ProblemData:
    def mix(p1, p2):
        return TimeProfile(p1.kind, p1.amp + alpha * p2.amp, p1.omega)

    return ProblemData(
        d1.T0 + alpha * d2.T0, d1.q0 + alpha * d2.q0, d1.q0_dot + alpha * d2.q0_dot,
        d1.sigma1, d1.sigma2,
        {e: mix(p, d2.theta_bc[e]) for e, p in d1.theta_bc.items()},
        {e: mix(p, d2.xi_bc[e]) for e, p in d1.xi_bc.items()},
    )


class TestSuperposition:
    @settings(max_examples=5, deadline=None)
    @given(st.integers(0, 10**6), st.integers(0, 10**6), st.floats(-2, 2))
    def test_linear_in_data(self, s1, s2, alpha):
        g, s_amp1, d1 = _random_problem(s1)
        _, s_amp2, d2 = _random_problem(s2)
        x = g.x
        a, k = 1.0 + 0.5 * np.cos(x), 1.0 + 0.3 * x**2

        def material(amp):
            return MaterialField(a, k, lambda xx, t: amp * np.exp(-xx**2) * math.cos(t))

        d = DelayPair(1.0, 0.4)
        p1 = Problem(g, material(s_amp1), d, d1)
        p2 = Problem(g, material(s_amp2), d, d2)
        p12 = Problem(g, material(s_amp1 + alpha * s_amp2), d, _combine(d1, d2, alpha))
        ctl = StepControl.for_problem(p1, 0.5)
        r1, r2, r12 = (run(p, ctl, stride=10**6).final_state for p in (p1, p2, p12))
        for name in ("T", "q", "v"):
            u1, u2, u12 = getattr(r1, name), getattr(r2, name), getattr(r12, name)
            scale = max(np.abs(u12).max(), np.abs(u1).max(), 1e-300)
            assert np.abs(u12 - (u1 + alpha * u2)).max() / scale < 1e-10
