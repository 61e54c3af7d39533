from types import SimpleNamespace

import numpy as np
import pytest

from conftest import pulse_problem
from dpl.energy import (
    I_AT2,
    BoundInputs,
    EnergyObserver,
    EnergyTerms,
    RegimeError,
    UnsupportedSettingError,
    bound_growth,
    bound_stable,
    conservation_sides,
    energy_E,
)
from dpl.model import (
    DelayPair,
    Geometry1D,
    IntegralAccumulator,
    MaterialField,
    Problem,
    ProblemData,
    Regime,
    TimeProfile,
    tilde_transform,
)
from dpl.solver import StepControl, ddx, initial_state, run


def observed(problem, t_end, factor=1, base=None, stride=4):
    base = base or StepControl.for_problem(problem, t_end)
    ctl = StepControl(base.dt / factor, t_end)
    obs = EnergyObserver(problem, t_end)
    rec = run(problem, ctl, [obs], stride=stride * factor)
    return rec, obs.report()


class TestEnergyFunctional:
    def test_zero_data(self):
        g = Geometry1D(1.0, 1.0, 32)
        p = Problem(g, MaterialField.uniform(), DelayPair(1.0, 1.0), ProblemData.zero(g.n_nodes))
        _, rep = observed(p, 0.5)
        for series in (rep.E, rep.F, rep.lhs, rep.rhs, rep.conservation_residual, rep.bound):
            assert not np.any(series)

    def test_single_cell_sanity(self):
        # a = 1, frozen tilde-T = 1 on a volume V, no flux term: E(2) = V
        V = 0.37
        acc = IntegralAccumulator(np.array([V, 0, 0, 0, 0, 0]))
        for _ in range(8):
            acc.update(np.array([V, 0, 0, 0, 0, 0]), 0.25)
        state = SimpleNamespace(acc_energy=acc)
        problem = SimpleNamespace(data=ProblemData.zero(4))
        assert energy_E(state, problem) == pytest.approx(V, rel=1e-14)
        assert acc.level1[I_AT2] == pytest.approx(2 * V)

    def test_nonzero_boundary_data_unsupported(self):
        p = pulse_problem(1.0, 1.0, 32, theta_bc={"left": TimeProfile("constant", 1.0)})
        with pytest.raises(UnsupportedSettingError):
            EnergyObserver(p, 1.0)
        with pytest.raises(UnsupportedSettingError):
            energy_E(initial_state(p), p)

    @pytest.mark.parametrize("delays", [(1.0, 1.0), (0.5, 0.1)])
    def test_ordering_and_monotonicity(self, delays):
        _, rep = observed(pulse_problem(*delays, 64), 1.0)
        assert np.all(rep.F >= rep.E) and np.all(rep.E >= 0)
        assert np.all(np.diff(rep.E) >= -1e-15) and np.all(np.diff(rep.F) >= -1e-15)

    def test_tilde_initial_value(self, stable_pulse):
        s = initial_state(stable_pulse)
        d = stable_pulse.delays
        np.testing.assert_array_equal(tilde_transform(s.acc_T, s.T, d, t=0.0), d.tau_T * stable_pulse.data.T0)


class TestConservationLaw:
    def test_zero_data_exact(self):
        g = Geometry1D(1.0, 1.0, 32)
        p = Problem(g, MaterialField.uniform(), DelayPair(0.5, 0.1), ProblemData.zero(g.n_nodes))
        s = initial_state(p)
        assert conservation_sides(s, p, EnergyTerms.for_problem(p, ddx)) == (0.0, 0.0)

    @pytest.mark.parametrize(
        "delays, sigma2",
        [
            ((1.0, 1.0), ()),
            ((0.5, 0.1), ()),
            ((1.0, 0.5), ("right",)),
            ((0.8, 0.3), ("left", "right")),
        ],
        ids=["stable", "growth", "boundary-flux-end", "growth-flux-ends"],
    )
    def test_residual_second_order(self, delays, sigma2):
        rel = []
        base = StepControl.for_problem(pulse_problem(*delays, 64, sigma2=sigma2), 0.5)
        for f in (1, 2, 4):
            _, rep = observed(pulse_problem(*delays, 64 * f, sigma2=sigma2), 0.5, f, base)
            rel.append(rep.relative_residual())
        ratios = np.array(rel[:-1]) / np.array(rel[1:])
        assert rel[0] < 1e-3
        assert np.all((ratios > 3.0) & (ratios < 5.0)), ratios

    def test_heterogeneous_material_with_supply(self):
        rel = []
        base = None
        for f in (1, 2, 4):
            g = Geometry1D(1.0, 1.0, 64 * f)
            x = g.x
            m = MaterialField(1.0 + 0.3 * np.sin(x), 1.0 + 0.2 * x**2, lambda xx, t: np.exp(-4 * xx**2) * np.cos(2 * t))
            p = pulse_problem(1.0, 0.6, 64 * f, material=m)
            base = base or StepControl.for_problem(p, 0.5)
            _, rep = observed(p, 0.5, f, base)
            rel.append(rep.relative_residual())
        assert 3.0 < rel[0] / rel[1] < 5.0 and 3.0 < rel[1] / rel[2] < 5.0


class TestBounds:
    def test_wrong_regime(self):
        inp = BoundInputs(np.zeros(1), np.zeros(1), np.zeros(1), 0.0, Regime.GROWTH, 6.0)
        with pytest.raises(RegimeError):
            bound_stable(inp)
        with pytest.raises(RegimeError):
            bound_growth(BoundInputs(np.zeros(1), np.zeros(1), np.zeros(1), 0.0, Regime.STABLE, 0.0))

    @pytest.mark.parametrize("delays", [(1.0, 1.0), (1.0, 0.5), (0.2, 0.1), (0.5, 0.1), (1.0, 0.25)])
    def test_bound_holds(self, delays):
        _, rep = observed(pulse_problem(*delays, 128), 1.0)
        assert rep.min_margin() >= 0.0

    def test_stable_uses_E_growth_uses_F(self):
        _, st = observed(pulse_problem(1.0, 1.0, 64), 0.5)
        _, gr = observed(pulse_problem(0.5, 0.1, 64), 0.5)
        assert st.bound_growth is None and gr.bound_stable is None
        np.testing.assert_array_equal(st.bounded_quantity, np.sqrt(st.E))
        np.testing.assert_array_equal(gr.bounded_quantity, np.sqrt(gr.F))

    def test_growth_bound_carries_exponential(self):
        _, rep = observed(pulse_problem(0.5, 0.1, 64), 1.0)
        scaled = rep.bound_growth * np.exp(-6.0 * rep.times)
        assert np.all(np.diff(scaled) >= 0)
        assert rep.bound_growth[-1] / rep.bound_growth[0] >= np.exp(6.0) * (1 - 1e-12)

    def test_supply_enters_g(self):
        m = MaterialField.uniform(rho_r=lambda x, t: np.exp(-(x / 0.2) ** 2))
        p = pulse_problem(1.0, 1.0, 64, material=m)
        _, rep = observed(p, 1.0)
        _, ref = observed(pulse_problem(1.0, 1.0, 64), 1.0)
        assert rep.g_cum[-1] > ref.g_cum[-1] > 0
        assert rep.min_margin() >= 0.0
