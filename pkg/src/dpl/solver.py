"""Explicit method-of-lines solver for the rod problem.

The state is ``(T, q, v)`` with ``v = dq/dt``; space uses second-order central
differences with second-order one-sided closures at the ends, time uses the
classical four-stage Runge-Kutta scheme.
"""

from __future__ import annotations

import math
import time as _time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyTerms
from .model import (
    OUTWARD_NORMAL,
    DegenerateModelError,
    DelayPair,
    IntegralAccumulator,
    MaterialField,
    Problem,
    ProblemData,
)

__all__ = [
    "DivergenceError",
    "StepControl",
    "TrajectoryRecord",
    "TransientState",
    "characteristic_speed",
    "ddx",
    "initial_state",
    "rhs",
    "run",
    "step",
]


class DivergenceError(RuntimeError):
    def __init__(self, step_index: int, t: float):
        super().__init__(
            f"non-finite field at step {step_index} (t={t:.6g}); "
            "reduce cfl_safety / relax_safety"
        )
        self.step_index = step_index
        self.t = t


def ddx(u: np.ndarray, dx: float) -> np.ndarray:
    """Second-order first derivative on a uniform node grid."""
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - u[:-2]) / (2.0 * dx)
    out[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx)
    out[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * dx)
    return out


def characteristic_speed(m: MaterialField, d: DelayPair) -> float:
    """Largest signal speed of the principal part, ``sqrt(2 tau_T k / a) / tau_q``."""
    if d.tau_q <= 0.0 or d.tau_T <= 0.0:
        raise DegenerateModelError("characteristic speed needs tau_q > 0 and tau_T > 0")
    return math.sqrt(2.0 * d.tau_T * m.kappa_M / m.a_m) / d.tau_q


@dataclass(frozen=True)
class StepControl:
    dt: float
    t_end: float
    cfl_safety: float = 0.5
    relax_safety: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.cfl_safety <= 1.0 and 0.0 < self.relax_safety <= 1.0):
            raise ValueError("cfl_safety and relax_safety must lie in (0, 1]")
        if self.dt <= 0.0 or self.t_end < 0.0:
            raise ValueError("dt must be positive and t_end nonnegative")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @staticmethod
    def max_dt(problem: Problem, cfl_safety: float, relax_safety: float) -> float:
        d = problem.delays
        c = characteristic_speed(problem.material, d)
        # tau_T also bounds dt: the non-propagating root of the dispersion relation is ~ -1/tau_T
        return min(
            cfl_safety * problem.geometry.dx / c,
            relax_safety * d.tau_q,
            relax_safety * d.tau_T,
        )

    @classmethod
    def for_problem(
        cls,
        problem: Problem,
        t_end: float,
        cfl_safety: float = 0.5,
        relax_safety: float = 0.5,
    ) -> StepControl:
        """Largest admissible step that divides ``t_end`` into whole steps."""
        dt_max = cls.max_dt(problem, cfl_safety, relax_safety)
        if t_end == 0.0:
            return cls(dt_max, 0.0, cfl_safety, relax_safety)
        n = max(1, math.ceil(t_end / dt_max - 1e-9))
        return cls(t_end / n, t_end, cfl_safety, relax_safety)

    def validate(self, problem: Problem) -> None:
        bound = self.max_dt(problem, self.cfl_safety, self.relax_safety)
        if self.dt > bound * (1.0 + 1e-12):
            raise ValueError(f"dt={self.dt:.6g} exceeds the stability bound {bound:.6g}")
        if self.t_end > 0 and abs(self.n_steps * self.dt - self.t_end) > 1e-9 * self.t_end:
            raise ValueError("t_end must be a whole number of steps")


@dataclass
class TransientState:
    t: float
    T: np.ndarray
    q: np.ndarray
    v: np.ndarray
    acc_T: IntegralAccumulator
    acc_q: IntegralAccumulator
    acc_gradT: IntegralAccumulator
    acc_r: IntegralAccumulator
    acc_energy: IntegralAccumulator
    acc_g: IntegralAccumulator
    step_index: int = 0


def _require_tau_q(d: DelayPair) -> None:
    if d.tau_q <= 0.0:
        raise DegenerateModelError("the transient solver needs tau_q > 0")


def _impose(t: float, T, q, v, p: ProblemData):
    for end, prof in p.theta_bc.items():
        i = 0 if end == "left" else -1
        T[i] = prof.value(t)
    for end, prof in p.xi_bc.items():
        i = 0 if end == "left" else -1
        n = OUTWARD_NORMAL[end]
        q[i] = n * prof.value(t)
        v[i] = n * prof.d1(t)


def _rates(t: float, T, q, v, problem: Problem):
    d, m, p = problem.delays, problem.material, problem.data
    dx = problem.geometry.dx
    T, q, v = T.copy(), q.copy(), v.copy()
    _impose(t, T, q, v, p)
    Tt = (problem.supply(t) - ddx(q, dx)) / m.a
    for end, prof in p.theta_bc.items():
        Tt[0 if end == "left" else -1] = prof.d1(t)
    tq = d.tau_q
    vt = (2.0 / (tq * tq)) * (-q - tq * v - m.k * ddx(T, dx) - d.tau_T * m.k * ddx(Tt, dx))
    qt = v
    for end, prof in p.xi_bc.items():
        i = 0 if end == "left" else -1
        n = OUTWARD_NORMAL[end]
        qt[i] = n * prof.d1(t)
        vt[i] = n * prof.d2(t)
    return Tt, qt, vt


def rhs(state: TransientState, problem: Problem):
    """Rates ``(dT/dt, dq/dt, dv/dt)`` at the state's time, end data imposed."""
    _require_tau_q(problem.delays)
    return _rates(state.t, state.T, state.q, state.v, problem)


def initial_state(problem: Problem) -> TransientState:
    _require_tau_q(problem.delays)
    p = problem.data
    T, q, v = p.T0.copy(), p.q0.copy(), p.q0_dot.copy()
    terms = EnergyTerms.for_problem(problem, ddx)
    acc_T = IntegralAccumulator(T)
    acc_q = IntegralAccumulator(q)
    acc_gradT = IntegralAccumulator(ddx(T, problem.geometry.dx))
    acc_r = IntegralAccumulator(problem.supply(0.0))
    acc_energy = IntegralAccumulator(terms.integrands(T, q, acc_T, acc_q, acc_r))
    acc_g = IntegralAccumulator(terms.g_integrands(0.0, acc_energy))
    return TransientState(0.0, T, q, v, acc_T, acc_q, acc_gradT, acc_r, acc_energy, acc_g)


def step(
    state: TransientState,
    problem: Problem,
    ctl: StepControl,
    terms: EnergyTerms | None = None,
) -> TransientState:
    """One RK4 step of size ``ctl.dt`` followed by accumulator updates."""
    dt, t = ctl.dt, state.t
    if terms is None:
        terms = EnergyTerms.for_problem(problem, ddx)
    T, q, v = state.T, state.q, state.v
    k1 = _rates(t, T, q, v, problem)
    k2 = _rates(t + 0.5 * dt, *(y + 0.5 * dt * k for y, k in zip((T, q, v), k1)), problem)
    k3 = _rates(t + 0.5 * dt, *(y + 0.5 * dt * k for y, k in zip((T, q, v), k2)), problem)
    k4 = _rates(t + dt, *(y + dt * k for y, k in zip((T, q, v), k3)), problem)
    new = [
        y + (dt / 6.0) * (a + 2.0 * b + 2.0 * c + e)
        for y, a, b, c, e in zip((T, q, v), k1, k2, k3, k4)
    ]
    t_new = t + dt
    T, q, v = new
    _impose(t_new, T, q, v, problem.data)
    idx = state.step_index + 1
    if not (np.isfinite(T).all() and np.isfinite(q).all() and np.isfinite(v).all()):
        raise DivergenceError(idx, t_new)

    acc_T, acc_q = state.acc_T.copy(), state.acc_q.copy()
    acc_gradT, acc_r = state.acc_gradT.copy(), state.acc_r.copy()
    acc_energy, acc_g = state.acc_energy.copy(), state.acc_g.copy()
    acc_T.update(T, dt)
    acc_q.update(q, dt)
    acc_gradT.update(ddx(T, problem.geometry.dx), dt)
    acc_r.update(problem.supply(t_new), dt)
    # squares of huge but finite fields overflow here; the check below reports it
    with np.errstate(over="ignore", invalid="ignore"):
        acc_energy.update(terms.integrands(T, q, acc_T, acc_q, acc_r), dt)
        acc_g.update(terms.g_integrands(t_new, acc_energy), dt)
    if not np.isfinite(acc_energy.level2).all():
        raise DivergenceError(idx, t_new)
    return TransientState(t_new, T, q, v, acc_T, acc_q, acc_gradT, acc_r, acc_energy, acc_g, idx)


Observer = Callable[[TransientState], None]


@dataclass
class TrajectoryRecord:
    x: np.ndarray
    times: list = field(default_factory=list)
    T: list = field(default_factory=list)
    q: list = field(default_factory=list)
    v: list = field(default_factory=list)
    dt: float = 0.0
    n_steps: int = 0
    wall_time: float = 0.0
    final_state: TransientState | None = None

    def snapshot(self, s: TransientState) -> None:
        if self.times and self.times[-1] == s.t:
            return
        self.times.append(s.t)
        self.T.append(s.T.copy())
        self.q.append(s.q.copy())
        self.v.append(s.v.copy())

    def arrays(self):
        return np.array(self.times), np.array(self.T), np.array(self.q), np.array(self.v)

    def summary(self) -> dict:
        fs = self.final_state
        return {
            "t_end": fs.t if fs else 0.0,
            "n_steps": self.n_steps,
            "dt": self.dt,
            "wall_time_s": self.wall_time,
            "max_abs_T": float(np.abs(fs.T).max()) if fs else 0.0,
            "max_abs_q": float(np.abs(fs.q).max()) if fs else 0.0,
            "max_abs_v": float(np.abs(fs.v).max()) if fs else 0.0,
            "l2_T": float(np.sqrt(np.sum(fs.T**2) * (self.x[1] - self.x[0]))) if fs else 0.0,
        }


def run(
    problem: Problem,
    ctl: StepControl,
    observers: Sequence[Observer] = (),
    stride: int = 1,
    snapshot_times: Sequence[float] | None = None,
    check_control: bool = True,
    observe_stride: int | None = None,
) -> TrajectoryRecord:
    """March ``problem`` to ``ctl.t_end``.

    Snapshots are taken at step 0, every ``stride`` steps, at the final step
    and at the steps nearest to ``snapshot_times``.  Observers fire on the
    same schedule unless ``observe_stride`` gives them their own.
    ``check_control=False`` skips the step-size check so that unstable runs
    can be produced on purpose.
    """
    if check_control:
        ctl.validate(problem)
    obs_stride = stride if observe_stride is None else observe_stride
    if stride < 1 or obs_stride < 1:
        raise ValueError("stride must be >= 1")
    n = ctl.n_steps
    extra = set()
    if snapshot_times is not None:
        extra = {min(n, max(0, int(round(ts / ctl.dt)))) for ts in snapshot_times}
    terms = EnergyTerms.for_problem(problem, ddx)
    rec = TrajectoryRecord(x=problem.x.copy(), dt=ctl.dt, n_steps=n)
    start = _time.perf_counter()
    s = initial_state(problem)

    def visit(s, i):
        if i == 0 or i == n or i % obs_stride == 0:
            for obs in observers:
                obs(s)
        if i == 0 or i == n or i % stride == 0 or i in extra:
            rec.snapshot(s)

    visit(s, 0)
    for i in range(1, n + 1):
        s = step(s, problem, ctl, terms)
        visit(s, i)
    rec.final_state = s
    rec.wall_time = _time.perf_counter() - start
    return rec
