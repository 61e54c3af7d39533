"""Energy functionals, the integral conservation law and data-dependence bounds.

Everything is assembled from the running accumulators carried by the solver
state, so the checks cost O(1) per step and never revisit history.  Spatial
integrals use the trapezoid rule on the rod nodes.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .model import (
    DelayPair,
    IntegralAccumulator,
    Problem,
    Regime,
    hat_transform,
    tilde_transform,
    trapezoid_weights,
)

if TYPE_CHECKING:
    from .solver import TransientState

__all__ = [
    "BoundInputs",
    "EnergyObserver",
    "EnergyReport",
    "EnergyTerms",
    "HatData",
    "RegimeError",
    "TildeData",
    "UnsupportedSettingError",
    "bound_growth",
    "bound_stable",
    "conservation_residual",
    "conservation_sides",
    "energy_E",
    "energy_F",
    "hat_constitutive_residual",
]

# layout of the scalar integrand vector carried by ``acc_energy``
I_AT2, I_KU2, I_KQ2, I_RT, I_PHIU, I_R2A = range(6)


class UnsupportedSettingError(ValueError):
    """Energy functionals are only defined for zero boundary data."""


class RegimeError(ValueError):
    """A bound was requested outside the delay regime it is proven for."""


@dataclass(frozen=True, eq=False)
class TildeData:
    """Static data of the once-integrated problem.

    ``R_star`` is time dependent and is evaluated from the supply accumulator
    by :meth:`R_star_at`; ``aT0`` is its supply-free part.
    """

    aT0: np.ndarray
    phi: np.ndarray
    tildeT0: np.ndarray
    tildeq0: np.ndarray
    tildeq0_dot: np.ndarray
    tau_T: float

    @classmethod
    def for_problem(cls, problem: Problem, ddx: Callable) -> TildeData:
        d, m, p = problem.delays, problem.material, problem.data
        tq = d.tau_q
        phi = d.tau_T * ddx(p.T0, problem.geometry.dx) + m.K * (tq * p.q0 + 0.5 * tq * tq * p.q0_dot)
        return cls(
            aT0=m.a * p.T0,
            phi=phi,
            tildeT0=d.tau_T * p.T0,
            tildeq0=d.tau_T * p.q0,
            tildeq0_dot=p.q0 + d.tau_T * p.q0_dot,
            tau_T=d.tau_T,
        )

    def R_star_at(self, acc_r: IntegralAccumulator) -> np.ndarray:
        return tilde_transform(acc_r, None, DelayPair(0.0, self.tau_T)) + self.aT0


@dataclass(frozen=True, eq=False)
class HatData:
    """Source ``R`` and flux offset ``vartheta`` of the twice-integrated problem."""

    base: np.ndarray
    slope: np.ndarray
    aT0: np.ndarray
    tau_q: float

    @classmethod
    def for_problem(cls, problem: Problem, ddx: Callable) -> HatData:
        d, m, p = problem.delays, problem.material, problem.data
        tq = d.tau_q
        slope = d.tau_T * m.k * ddx(p.T0, problem.geometry.dx) + tq * p.q0 + 0.5 * tq * tq * p.q0_dot
        return cls(base=0.5 * tq * tq * p.q0, slope=slope, aT0=m.a * p.T0, tau_q=tq)

    def vartheta(self, t: float) -> np.ndarray:
        return self.slope * t + self.base

    def R(self, t: float, acc_r: IntegralAccumulator) -> np.ndarray:
        return hat_transform(acc_r, None, DelayPair(self.tau_q, 0.0)) + self.aT0 * (t + self.tau_q)


@dataclass(frozen=True, eq=False)
class EnergyTerms:
    """Per-problem constants needed to form the energy integrands each step."""

    w: np.ndarray
    a: np.ndarray
    K: np.ndarray
    K_m: float
    delays: DelayPair
    tilde: TildeData
    q0: np.ndarray
    sigma_sq: float

    @classmethod
    def for_problem(cls, problem: Problem, ddx: Callable) -> EnergyTerms:
        d, m = problem.delays, problem.material
        sigma_sq = d.sigma_sq() if d.regime() is Regime.GROWTH else 0.0
        return cls(
            w=trapezoid_weights(problem.geometry.n_nodes, problem.geometry.dx),
            a=m.a,
            K=m.K,
            K_m=m.K_m,
            delays=d,
            tilde=TildeData.for_problem(problem, ddx),
            q0=problem.data.q0,
            sigma_sq=sigma_sq,
        )

    def integrands(self, T, q, acc_T, acc_q, acc_r) -> np.ndarray:
        """Spatial integrals sampled at the accumulators' current time."""
        w, a, K = self.w, self.a, self.K
        Ttil = tilde_transform(acc_T, T, self.delays)
        u = acc_q.level1
        R = self.tilde.R_star_at(acc_r)
        return np.array(
            [
                w @ (a * Ttil * Ttil),
                w @ (K * u * u),
                w @ (K * q * q),
                w @ (R * Ttil),
                w @ (self.tilde.phi * u),
                w @ (R * R / a),
            ]
        )

    def g_integrands(self, t: float, acc_energy: IntegralAccumulator) -> np.ndarray:
        g = math.sqrt(max(float(acc_energy.level1[I_R2A]), 0.0))
        return np.array([g, math.exp(-self.sigma_sq * t) * g])

    def bracket(self, S: float) -> float:
        """Initial-data term under the square root of both bounds, for horizon ``S``."""
        d, w = self.delays, self.w
        tq, tT = d.tau_q, d.tau_T
        phi2 = self.tilde.phi**2
        inner = w @ (
            self.a * self.tilde.tildeT0**2
            + 0.5 * tT * tq * tq * self.K * self.q0**2
            + (tT / self.K_m) * phi2
        )
        return 0.5 * S * inner + 0.25 * S * S * (w @ phi2) / self.K_m

    def initial_sum(self) -> float:
        tq, tT = self.delays.tau_q, self.delays.tau_T
        return self.w @ (self.a * self.tilde.tildeT0**2) + 0.5 * tT * tq * tq * (
            self.w @ (self.K * self.q0**2)
        )


def _require_zero_boundary(problem: Problem) -> None:
    if not problem.data.has_zero_boundary_data:
        raise UnsupportedSettingError("energy functionals need zero boundary data")


def energy_E(state: TransientState, problem: Problem) -> float:
    _require_zero_boundary(problem)
    acc = state.acc_energy
    return float(0.5 * acc.level1[I_AT2] + 0.5 * acc.level2[I_KU2])


def energy_F(state: TransientState, problem: Problem) -> float:
    d = problem.delays
    return energy_E(state, problem) + 0.25 * d.tau_T * d.tau_q**2 * float(
        state.acc_energy.level1[I_KQ2]
    )


def conservation_sides(state: TransientState, problem: Problem, terms: EnergyTerms):
    """Left and right members of the integral conservation law at ``state.t``."""
    d = problem.delays
    tq, tT = d.tau_q, d.tau_T
    acc = state.acc_energy
    l1, l2 = acc.level1, acc.level2
    lhs = (
        energy_E(state, problem)
        + 0.5 * (tT + tq) * l1[I_KU2]
        + 0.25 * tT * tq * tq * l1[I_KQ2]
        + 0.25 * tq * tq * acc.last_sample[I_KU2]
        + 0.5 * l2[I_KU2]
        + tq * (tT - 0.5 * tq) * l2[I_KQ2]
    )
    rhs = (
        0.5 * state.t * terms.initial_sum()
        + l2[I_RT]
        + l2[I_PHIU]
        + tT * l1[I_PHIU]
    )
    return float(lhs), float(rhs)


def conservation_residual(state: TransientState, problem: Problem, terms: EnergyTerms) -> float:
    lhs, rhs = conservation_sides(state, problem, terms)
    return lhs - rhs


@dataclass(frozen=True)
class BoundInputs:
    times: np.ndarray
    g_cum: np.ndarray
    g_cum_weighted: np.ndarray
    bracket: float
    regime: Regime
    sigma_sq: float


def bound_stable(inp: BoundInputs) -> np.ndarray:
    """Right member of the stable-regime estimate for ``sqrt(E(t))``."""
    if inp.regime is not Regime.STABLE:
        raise RegimeError(f"stable-regime bound requested in regime {inp.regime.value}")
    return inp.g_cum / math.sqrt(2.0) + math.sqrt(inp.bracket)


def bound_growth(inp: BoundInputs) -> np.ndarray:
    """Right member of the growth-regime estimate for ``sqrt(F(t))``."""
    if inp.regime is not Regime.GROWTH:
        raise RegimeError(f"growth-regime bound requested in regime {inp.regime.value}")
    grow = np.exp(inp.sigma_sq * inp.times)
    return grow * (inp.g_cum_weighted / math.sqrt(2.0) + math.sqrt(inp.bracket))


@dataclass
class EnergyReport:
    regime: Regime
    times: np.ndarray
    E: np.ndarray
    F: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    conservation_residual: np.ndarray
    g_cum: np.ndarray
    bound_stable: np.ndarray | None = None
    bound_growth: np.ndarray | None = None

    @property
    def bound(self) -> np.ndarray | None:
        return self.bound_stable if self.bound_stable is not None else self.bound_growth

    @property
    def bounded_quantity(self) -> np.ndarray:
        """``sqrt(E)`` in the stable regime, ``sqrt(F)`` in the growth regime."""
        return np.sqrt(self.F if self.bound_growth is not None else self.E)

    def relative_residual(self) -> float:
        scale = max(np.abs(self.lhs).max(initial=0.0), np.abs(self.rhs).max(initial=0.0))
        if scale == 0.0:
            return 0.0
        return float(np.abs(self.conservation_residual).max() / scale)

    def margins(self) -> np.ndarray | None:
        """``(bound - measured) / bound`` per sample; zero where both vanish."""
        b = self.bound
        if b is None:
            return None
        diff = b - self.bounded_quantity
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(b > 0, diff / np.where(b > 0, b, 1.0), np.where(diff >= 0, 0.0, -np.inf))
        return rel

    def min_margin(self) -> float | None:
        m = self.margins()
        return None if m is None else float(m.min())

    def summary(self) -> dict:
        return {
            "regime": self.regime.value,
            "max_residual": float(np.abs(self.conservation_residual).max(initial=0.0)),
            "relative_residual": self.relative_residual(),
            "min_margin": self.min_margin(),
            "samples": int(len(self.times)),
        }


@dataclass
class EnergyObserver:
    """Collects energy, conservation and bound samples during a run.

    ``S`` is the horizon used in the bounds (normally the run's ``t_end``).
    """

    problem: Problem
    S: float
    terms: EnergyTerms = field(init=False)
    _rows: list = field(default_factory=list, init=False)

    def __post_init__(self):
        from .solver import ddx

        _require_zero_boundary(self.problem)
        self.terms = EnergyTerms.for_problem(self.problem, ddx)

    def __call__(self, state: TransientState) -> None:
        E = energy_E(state, self.problem)
        F = energy_F(state, self.problem)
        lhs, rhs = conservation_sides(state, self.problem, self.terms)
        g_cum, g_w = state.acc_g.level1
        self._rows.append((state.t, E, F, lhs, rhs, float(g_cum), float(g_w)))

    def report(self) -> EnergyReport:
        rows = np.array(self._rows, dtype=float).reshape(-1, 7)
        t, E, F, lhs, rhs, g_cum, g_w = rows.T
        regime = self.problem.delays.regime()
        inp = BoundInputs(t, g_cum, g_w, self.terms.bracket(self.S), regime, self.terms.sigma_sq)
        rep = EnergyReport(regime, t, E, F, lhs, rhs, lhs - rhs, g_cum)
        if regime is Regime.STABLE:
            rep.bound_stable = bound_stable(inp)
        elif regime is Regime.GROWTH:
            rep.bound_growth = bound_growth(inp)
        return rep


def hat_constitutive_residual(state: TransientState, problem: Problem) -> float:
    """Max-norm defect of the twice-integrated constitutive law at ``state.t``.

    Flux-prescribed ends are excluded, since the law is replaced there by the
    boundary condition.
    """
    from .solver import ddx

    d, m = problem.delays, problem.material
    hat = HatData.for_problem(problem, ddx)
    q_hat = hat_transform(state.acc_q, state.q, d, t=state.t)
    g = state.acc_gradT
    expected = -m.k * (g.level2 + d.tau_T * g.level1) + hat.vartheta(state.t)
    defect = np.abs(q_hat - expected)
    if "left" in problem.data.sigma2:
        defect[0] = 0.0
    if "right" in problem.data.sigma2:
        defect[-1] = 0.0
    return float(defect.max())
