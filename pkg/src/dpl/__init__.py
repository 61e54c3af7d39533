"""Numerical laboratory for time-differential dual-phase-lag heat conduction.

Rod solver and energy analysis (:mod:`dpl.solver`, :mod:`dpl.energy`), front
tracking (:mod:`dpl.influence`), harmonic strip problem (:mod:`dpl.steady`)
and the config/CLI harness (:mod:`dpl.config`, :mod:`dpl.experiments`,
:mod:`dpl.cli`).
"""

from .energy import EnergyObserver, EnergyReport, RegimeError, UnsupportedSettingError
from .influence import FrontRecord, RegimeMismatchError, speed_bound, track_front
from .model import (
    DegenerateModelError,
    DelayPair,
    Geometry1D,
    IntegralAccumulator,
    MaterialField,
    Problem,
    ProblemData,
    Regime,
    SynchronizationError,
    TimeProfile,
    classify_regime,
    hat_transform,
    tilde_transform,
)
from .solver import DivergenceError, StepControl, TrajectoryRecord, characteristic_speed, run
from .steady import (
    StripGeometry,
    assemble_and_solve,
    certify_decay,
    critical_frequency,
    decay_rate,
    fourier_limit_solution,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateModelError",
    "DelayPair",
    "DivergenceError",
    "EnergyObserver",
    "EnergyReport",
    "FrontRecord",
    "Geometry1D",
    "IntegralAccumulator",
    "MaterialField",
    "Problem",
    "ProblemData",
    "Regime",
    "RegimeError",
    "RegimeMismatchError",
    "StepControl",
    "StripGeometry",
    "SynchronizationError",
    "TimeProfile",
    "TrajectoryRecord",
    "UnsupportedSettingError",
    "assemble_and_solve",
    "certify_decay",
    "characteristic_speed",
    "classify_regime",
    "critical_frequency",
    "decay_rate",
    "fourier_limit_solution",
    "hat_transform",
    "run",
    "speed_bound",
    "tilde_transform",
    "track_front",
]
