"""Thermal front of a pulse launched from the left end of a long rod.

Compares the measured front speed with the characteristic speed and the
regime's a priori speed bound.
"""

import numpy as np

from dpl import DelayPair, Geometry1D, MaterialField, Problem, ProblemData, StepControl, run
from dpl.influence import track_front


def main() -> None:
    geom = Geometry1D(2.0, 6.0, 2048)
    T0 = np.exp(-(((geom.x + 1.0) / 0.1) ** 2))
    zeros = np.zeros_like(T0)
    data = ProblemData(T0, zeros, zeros, frozenset({"left", "right"}), frozenset())
    for delays in (DelayPair(1.0, 1.0), DelayPair(1.0, 0.5), DelayPair(1.0, 0.25)):
        problem = Problem(geom, MaterialField.uniform(), delays, data)
        rec = run(problem, StepControl.for_problem(problem, 3.0), stride=10)
        front = track_front(rec, 1e-8, problem)
        print(f"tau_q={delays.tau_q}, tau_T={delays.tau_T} ({delays.regime().value}): "
              f"c_emp={front.empirical_speed(geom.L):.4f}  c_char={front.c_char:.4f}  "
              f"c_bound={front.c_bound:.4f}  confined={front.confined}")


if __name__ == "__main__":
    main()
