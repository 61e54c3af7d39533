"""Finite propagation speed: explicit speed bounds and front tracking."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import DegenerateModelError, DelayPair, MaterialField, Problem, Regime
from .solver import TrajectoryRecord, characteristic_speed

__all__ = [
    "FrontRecord",
    "RegimeMismatchError",
    "TruncationWarning",
    "speed_bound",
    "speed_bound_growth",
    "speed_bound_stable",
    "support_beyond",
    "track_front",
]


class RegimeMismatchError(ValueError):
    pass


class TruncationWarning(UserWarning):
    """The front reached the far end; the free region is no longer inside the rod."""


def speed_bound_stable(m: MaterialField, d: DelayPair) -> float:
    """Speed bound valid for ``0 < tau_q <= 2 tau_T``."""
    if not (0.0 < d.tau_q <= 2.0 * d.tau_T):
        raise RegimeMismatchError(f"stable speed bound needs 0 < tau_q <= 2 tau_T, got {d}")
    return math.sqrt(m.kappa_M / m.a_m) * math.sqrt(2.0 * d.tau_T / d.tau_q**2 + 1.0 / (d.tau_T + d.tau_q))


def speed_bound_growth(m: MaterialField, d: DelayPair) -> float:
    """Speed bound valid for ``0 < 2 tau_T < tau_q``."""
    tq, tT = d.tau_q, d.tau_T
    if not (0.0 < 2.0 * tT < tq):
        raise RegimeMismatchError(f"growth speed bound needs 0 < 2 tau_T < tau_q, got {d}")
    num = 5.0 * tq * tq + 2.0 * tT * tT - 6.0 * tq * tT
    den = tT * tT + 2.0 * tq * tq - 3.0 * tT * tq  # = (tq - tT)(2 tq - tT)
    if den <= 0.0 or num <= 0.0:
        raise DegenerateModelError(f"speed bound undefined: numerator {num:.3g}, denominator {den:.3g}")
    return math.sqrt(tT * m.kappa_M / m.a_m) * math.sqrt(num / den) / tq


def speed_bound(m: MaterialField, d: DelayPair) -> float:
    regime = d.regime()
    if regime is Regime.STABLE:
        return speed_bound_stable(m, d)
    if regime is Regime.GROWTH:
        return speed_bound_growth(m, d)
    raise RegimeMismatchError("no speed bound when tau_T = 0 < tau_q")


def _envelope(rec: TrajectoryRecord) -> tuple[np.ndarray, np.ndarray]:
    t, T, q, _ = rec.arrays()
    return t, np.maximum(np.abs(T), np.abs(q))


def support_beyond(rec: TrajectoryRecord, c: float, peak0: float) -> np.ndarray:
    """Per snapshot, the largest ``max(|T|, |q|) / peak0`` at ``x > c t``."""
    t, env = _envelope(rec)
    out = np.zeros(len(t))
    if peak0 == 0.0:
        return out
    for i, ti in enumerate(t):
        ahead = rec.x > c * ti
        out[i] = env[i][ahead].max(initial=0.0) / peak0
    return out


@dataclass
class FrontRecord:
    times: np.ndarray
    front_position: np.ndarray
    c0: float | None
    c1: float | None
    c_char: float
    threshold: float
    peak0: float
    beyond: np.ndarray
    truncated: bool = False

    @property
    def c_bound(self) -> float:
        return self.c0 if self.c0 is not None else self.c1

    @property
    def regime(self) -> str:
        return "stable" if self.c0 is not None else "growth"

    @property
    def confined(self) -> bool:
        return bool(np.all(self.beyond <= self.threshold))

    def empirical_speed(self, L: float | None = None) -> float:
        """Least-squares slope of the front over samples where it is strictly inside ``(0, L)``."""
        fp = self.front_position
        sel = fp > 0.0
        if L is not None:
            sel &= fp < L
        if sel.sum() < 2:
            return float("nan")
        slope, _ = np.polyfit(self.times[sel], fp[sel], 1)
        return float(slope)

    def verdict(self, L: float | None = None) -> dict:
        return {
            "regime": self.regime,
            "c_bound": self.c_bound,
            "c_char": self.c_char,
            "c_empirical": self.empirical_speed(L),
            "confined": self.confined,
            "threshold": self.threshold,
            "max_beyond": float(self.beyond.max(initial=0.0)),
            "truncated": self.truncated,
        }


def track_front(rec: TrajectoryRecord, threshold: float, problem: Problem) -> FrontRecord:
    """Locate the leading edge of the disturbance in every snapshot.

    The front is the largest ``x`` where ``max(|T|, |q|)`` exceeds
    ``threshold`` times the initial peak, or ``-h`` when nothing does.
    """
    m, d, geom = problem.material, problem.delays, problem.geometry
    t, env = _envelope(rec)
    x = rec.x
    peak0 = float(env[0].max()) if len(t) else 0.0
    if peak0 > 0.0 and env[0][x > 0.0].max(initial=0.0) > threshold * peak0:
        raise ValueError("initial data are not supported in [-h, 0] at this threshold")
    front = np.full(len(t), -float(geom.h))
    if peak0 > 0.0:
        for i in range(len(t)):
            hit = np.nonzero(env[i] > threshold * peak0)[0]
            if hit.size:
                front[i] = x[hit[-1]]
    regime = d.regime()
    c0 = speed_bound_stable(m, d) if regime is Regime.STABLE else None
    c1 = speed_bound_growth(m, d) if regime is Regime.GROWTH else None
    c_char = characteristic_speed(m, d)
    c = c0 if c0 is not None else c1
    if c0 is not None and c_char > c0 * (1 + 1e-12):
        raise AssertionError(f"characteristic speed {c_char} exceeds stable bound {c0}")
    truncated = bool(np.any(front >= geom.L - 2 * geom.dx))
    if truncated:
        warnings.warn("front reached the right end; shrink t_end or grow L", TruncationWarning, stacklevel=2)
    return FrontRecord(t, front, c0, c1, c_char, threshold, peak0, support_beyond(rec, c, peak0), truncated)
