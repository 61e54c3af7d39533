from __future__ import annotations

import numpy as np
import pytest

from dpl.model import ENDS, DelayPair, Geometry1D, MaterialField, Problem, ProblemData


def gaussian(x, center=0.0, width=0.15, amp=1.0):
    return amp * np.exp(-(((x - center) / width) ** 2))


def pulse_problem(
    tau_q: float = 1.0,
    tau_T: float = 1.0,
    n_cells: int = 128,
    h: float = 1.0,
    L: float = 1.0,
    center: float = 0.0,
    width: float = 0.15,
    sigma2=(),
    material: MaterialField | None = None,
    **data_kw,
) -> Problem:
    """Gaussian temperature pulse on a rod with zero flux data."""
    geom = Geometry1D(h, L, n_cells)
    x = geom.x
    sigma2 = frozenset(sigma2)
    data = ProblemData(
        gaussian(x, center, width),
        np.zeros_like(x),
        np.zeros_like(x),
        frozenset(ENDS) - sigma2,
        sigma2,
        **data_kw,
    )
    return Problem(geom, material or MaterialField.uniform(), DelayPair(tau_q, tau_T), data)


@pytest.fixture
def stable_pulse() -> Problem:
    return pulse_problem(1.0, 1.0)


@pytest.fixture
def growth_pulse() -> Problem:
    return pulse_problem(0.5, 0.1)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
