"""Energy of a Gaussian pulse in the stable and growth regimes.

Prints E(t), the bounded quantity and the a priori bound at a few times,
plus the relative conservation-law residual of each run.
"""

import numpy as np

from dpl import DelayPair, Geometry1D, MaterialField, Problem, ProblemData, StepControl, run
from dpl.energy import EnergyObserver


def pulse(tau_q: float, tau_T: float) -> Problem:
    geom = Geometry1D(1.0, 1.0, 255)
    T0 = np.exp(-((geom.x / 0.15) ** 2))
    zeros = np.zeros_like(T0)
    data = ProblemData(T0, zeros, zeros, frozenset({"left", "right"}), frozenset())
    return Problem(geom, MaterialField.uniform(), DelayPair(tau_q, tau_T), data)


def main() -> None:
    for tau_q, tau_T in ((1.0, 1.0), (0.5, 0.1)):
        problem = pulse(tau_q, tau_T)
        ctl = StepControl.for_problem(problem, 1.0)
        obs = EnergyObserver(problem, ctl.t_end)
        run(problem, ctl, [obs], stride=ctl.n_steps, observe_stride=1)
        rep = obs.report()
        print(f"tau_q={tau_q}, tau_T={tau_T}: regime {rep.regime.value}, "
              f"relative residual {rep.relative_residual():.2e}, min bound margin {rep.min_margin():.3f}")
        for k in np.linspace(0, len(rep.times) - 1, 5).astype(int):
            print(f"  t={rep.times[k]:.3f}  E={rep.E[k]:.6f}  quantity={rep.bounded_quantity[k]:.6f}  bound={rep.bound[k]:.6f}")


if __name__ == "__main__":
    main()
