"""Spatial decay of a time-harmonic state in a semi-infinite strip.

For several frequencies below the critical one, prints the decay length and
how the decay measure compares with its exponential envelope.
"""

import math

import numpy as np

from dpl import DelayPair, MaterialField
from dpl.steady import StripGeometry, assemble_and_solve, certify_decay, critical_frequency


def main() -> None:
    geom = StripGeometry(math.pi, 2 * math.pi, 129, 513)
    material, delays = MaterialField.uniform(), DelayPair(1.0, 0.5)
    omega_c = critical_frequency(geom, material, delays)
    print(f"critical frequency {omega_c:.6f}")
    for omega in (0.25, 0.5, 0.75, 0.95):
        sol = assemble_and_solve(geom, material, delays, omega, np.sin)
        v = certify_decay(sol, material, raise_on_failure=False)
        mid = len(v.x3) // 2
        print(f"omega={omega}: nu={v.nu:.4f}  certified={v.certified}  "
              f"M(L/2)/M(0)={v.M[mid] / v.M[0]:.3e}  envelope={v.envelope[mid] / v.M[0]:.3e}")


if __name__ == "__main__":
    main()
