"""Problem definition for the dual-phase-lag conductor.

Holds the delay pair and its regime, rod geometry, material fields, initial
and boundary data, and the running time-integral accumulators together with
the ``hat`` and ``tilde`` operators built from them.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DegenerateModelError",
    "DelayPair",
    "Geometry1D",
    "IntegralAccumulator",
    "MaterialField",
    "Problem",
    "ProblemData",
    "Regime",
    "SynchronizationError",
    "TimeProfile",
    "classify_regime",
    "hat_transform",
    "tilde_transform",
    "trapezoid_weights",
]

ENDS = ("left", "right")
OUTWARD_NORMAL = {"left": -1.0, "right": 1.0}


class DegenerateModelError(ValueError):
    """The requested operation is undefined for the given delay times."""


class SynchronizationError(RuntimeError):
    """An accumulator was read at a time it has not been advanced to."""


class Regime(enum.Enum):
    STABLE = "stable"
    GROWTH = "growth"
    DEGENERATE_ZERO_TAU_T = "degenerate-zero-tau_T"


@dataclass(frozen=True)
class DelayPair:
    """Phase lags of the heat flux (``tau_q``) and temperature gradient (``tau_T``)."""

    tau_q: float
    tau_T: float

    def __post_init__(self):
        for name in ("tau_q", "tau_T"):
            val = getattr(self, name)
            if not math.isfinite(val) or val < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {val!r}")

    def regime(self) -> Regime:
        return classify_regime(self)

    def sigma_sq(self) -> float:
        """Growth exponent ``1/tau_T - 2/tau_q``; positive exactly in the growth regime."""
        if self.tau_T <= 0.0 or self.tau_q <= 0.0:
            raise DegenerateModelError("sigma^2 needs tau_q > 0 and tau_T > 0")
        return 1.0 / self.tau_T - 2.0 / self.tau_q


def classify_regime(d: DelayPair) -> Regime:
    if d.tau_q <= 2.0 * d.tau_T:
        return Regime.STABLE
    if d.tau_T == 0.0:
        return Regime.DEGENERATE_ZERO_TAU_T
    return Regime.GROWTH


@dataclass(frozen=True)
class Geometry1D:
    """Rod occupying ``[-h, L]``; the loaded part is ``[-h, 0]``."""

    h: float
    L: float
    n_cells: int

    def __post_init__(self):
        if not (self.h > 0 and self.L > 0):
            raise ValueError("h and L must be positive")
        if self.n_cells < 16:
            raise ValueError(f"n_cells must be >= 16, got {self.n_cells}")
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "L", float(self.L))

    @property
    def dx(self) -> float:
        return (self.h + self.L) / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.h, self.L, self.n_nodes)

    def refined(self, factor: int = 2) -> Geometry1D:
        return Geometry1D(self.h, self.L, self.n_cells * factor)


def trapezoid_weights(n: int, dx: float) -> np.ndarray:
    w = np.full(n, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


SupplyFn = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True, eq=False)
class MaterialField:
    """Heat capacity ``a`` and scalar conductivity ``k`` sampled on the grid.

    ``rho_r`` is the supply density as a function ``(x, t) -> array``; ``None``
    means no supply.  Arrays may have any shape (rod nodes, strip nodes) or be
    scalars.
    """

    a: np.ndarray
    k: np.ndarray
    rho_r: SupplyFn | None = None
    a_m: float = field(init=False)
    a_M: float = field(init=False)
    kappa_m: float = field(init=False)
    kappa_M: float = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        k = np.asarray(self.k, dtype=float)
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise ValueError("heat capacity a must be finite and > 0 everywhere")
        if not np.all(np.isfinite(k)) or np.any(k <= 0):
            raise ValueError("conductivity k must be finite and > 0 everywhere")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "a_m", float(a.min()))
        object.__setattr__(self, "a_M", float(a.max()))
        object.__setattr__(self, "kappa_m", float(k.min()))
        object.__setattr__(self, "kappa_M", float(k.max()))

    @classmethod
    def uniform(cls, a: float = 1.0, k: float = 1.0, rho_r: SupplyFn | None = None):
        return cls(np.float64(a), np.float64(k), rho_r)

    @property
    def K(self) -> np.ndarray:
        """Inverse conductivity (resistivity)."""
        return 1.0 / self.k

    @property
    def K_m(self) -> float:
        return 1.0 / self.kappa_M

    def supply(self, x: np.ndarray, t: float) -> np.ndarray:
        if self.rho_r is None:
            return np.zeros_like(x, dtype=float)
        return np.broadcast_to(np.asarray(self.rho_r(x, t), dtype=float), x.shape)

    def on(self, x: np.ndarray) -> MaterialField:
        """Broadcast scalar coefficients to the node array ``x``."""
        return MaterialField(
            np.broadcast_to(self.a, x.shape).copy(),
            np.broadcast_to(self.k, x.shape).copy(),
            self.rho_r,
        )

    def scaled_supply(self, factor: float) -> MaterialField:
        if self.rho_r is None:
            return self
        fn = self.rho_r
        return MaterialField(self.a, self.k, lambda x, t: factor * fn(x, t))


@dataclass(frozen=True)
class TimeProfile:
    """Scalar boundary signal with its first two time derivatives.

    ``kind`` is ``"constant"`` (value ``amp``) or ``"sin"`` (``amp*sin(omega*t)``).
    """

    kind: str = "constant"
    amp: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "sin"):
            raise ValueError(f"unknown time profile {self.kind!r}")

    @property
    def is_zero(self) -> bool:
        return self.amp == 0.0

    def value(self, t: float) -> float:
        if self.kind == "constant":
            return self.amp
        return self.amp * math.sin(self.omega * t)

    def d1(self, t: float) -> float:
        if self.kind == "constant":
            return 0.0
        return self.amp * self.omega * math.cos(self.omega * t)

    def d2(self, t: float) -> float:
        if self.kind == "constant":
            return 0.0
        return -self.amp * self.omega**2 * math.sin(self.omega * t)

    def scaled(self, factor: float) -> TimeProfile:
        return TimeProfile(self.kind, self.amp * factor, self.omega)


ZERO = TimeProfile()


@dataclass(frozen=True, eq=False)
class ProblemData:
    """Initial fields and end conditions.

    ``sigma1`` holds the ends with prescribed temperature, ``sigma2`` the ends
    with prescribed normal flux ``q*n``; together they cover both ends.
    """

    T0: np.ndarray
    q0: np.ndarray
    q0_dot: np.ndarray
    sigma1: frozenset = frozenset(ENDS)
    sigma2: frozenset = frozenset()
    theta_bc: dict = field(default_factory=dict)
    xi_bc: dict = field(default_factory=dict)

    def __post_init__(self):
        s1, s2 = frozenset(self.sigma1), frozenset(self.sigma2)
        if s1 & s2:
            raise ValueError(f"sigma1 and sigma2 overlap at {sorted(s1 & s2)}")
        if s1 | s2 != frozenset(ENDS):
            raise ValueError("sigma1 and sigma2 must cover both rod ends")
        object.__setattr__(self, "sigma1", s1)
        object.__setattr__(self, "sigma2", s2)
        arrays = [np.asarray(getattr(self, n), dtype=float) for n in ("T0", "q0", "q0_dot")]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise ValueError("T0, q0, q0_dot must be 1D arrays of equal length")
        for name, arr in zip(("T0", "q0", "q0_dot"), arrays):
            object.__setattr__(self, name, arr)
        theta = {end: self.theta_bc.get(end, ZERO) for end in s1}
        xi = {end: self.xi_bc.get(end, ZERO) for end in s2}
        object.__setattr__(self, "theta_bc", theta)
        object.__setattr__(self, "xi_bc", xi)

    @classmethod
    def zero(cls, n_nodes: int, **kw) -> ProblemData:
        z = np.zeros(n_nodes)
        return cls(z, z.copy(), z.copy(), **kw)

    @property
    def has_zero_boundary_data(self) -> bool:
        return all(p.is_zero for p in self.theta_bc.values()) and all(
            p.is_zero for p in self.xi_bc.values()
        )

    def scaled(self, factor: float) -> ProblemData:
        return ProblemData(
            factor * self.T0,
            factor * self.q0,
            factor * self.q0_dot,
            self.sigma1,
            self.sigma2,
            {e: p.scaled(factor) for e, p in self.theta_bc.items()},
            {e: p.scaled(factor) for e, p in self.xi_bc.items()},
        )


@dataclass(frozen=True, eq=False)
class Problem:
    """Everything needed to march one rod problem."""

    geometry: Geometry1D
    material: MaterialField
    delays: DelayPair
    data: ProblemData

    def __post_init__(self):
        n = self.geometry.n_nodes
        if self.data.T0.shape != (n,):
            raise ValueError(f"data arrays have {self.data.T0.shape[0]} nodes, grid has {n}")
        mat = self.material
        if np.ndim(mat.a) == 0 or np.ndim(mat.k) == 0:
            mat = mat.on(self.geometry.x)
        if mat.a.shape != (n,) or mat.k.shape != (n,):
            raise ValueError("material arrays must match the node count")
        object.__setattr__(self, "material", mat)

    @property
    def x(self) -> np.ndarray:
        return self.geometry.x

    def supply(self, t: float) -> np.ndarray:
        return self.material.supply(self.x, t)


class IntegralAccumulator:
    """Running first, second and third time integrals of a sampled integrand.

    Each call to :meth:`update` advances time by ``dt`` using the trapezoid
    rule on the previous and new samples; the integrand may be a scalar or an
    array.
    """

    def __init__(self, initial_sample, t0: float = 0.0):
        sample = np.array(initial_sample, dtype=float)
        self.level1 = np.zeros_like(sample)
        self.level2 = np.zeros_like(sample)
        self.level3 = np.zeros_like(sample)
        self.last_sample = sample
        self.t = float(t0)

    def update(self, new_sample, dt: float) -> None:
        new = np.array(new_sample, dtype=float)
        half = 0.5 * dt
        l1 = self.level1 + half * (self.last_sample + new)
        l2 = self.level2 + half * (self.level1 + l1)
        self.level3 = self.level3 + half * (self.level2 + l2)
        self.level1, self.level2 = l1, l2
        self.last_sample = new
        self.t += dt

    def copy(self) -> IntegralAccumulator:
        out = IntegralAccumulator.__new__(IntegralAccumulator)
        out.level1 = self.level1.copy()
        out.level2 = self.level2.copy()
        out.level3 = self.level3.copy()
        out.last_sample = self.last_sample.copy()
        out.t = self.t
        return out


def _check_sync(acc: IntegralAccumulator, now, t: float | None) -> np.ndarray:
    if t is not None and not math.isclose(acc.t, t, rel_tol=1e-12, abs_tol=1e-12):
        raise SynchronizationError(f"accumulator is at t={acc.t}, requested t={t}")
    if now is None:
        return acc.last_sample
    now = np.asarray(now, dtype=float)
    if not np.allclose(now, acc.last_sample, rtol=1e-12, atol=1e-300):
        raise SynchronizationError("integrand sample does not match the accumulator's last sample")
    return now


def hat_transform(acc: IntegralAccumulator, g_now, d: DelayPair, t: float | None = None):
    """``g'' + tau_q g' + tau_q^2 g / 2`` from an accumulator synchronized with ``g``.

    ``g_now`` may be ``None`` to use the accumulator's last sample.
    """
    g_now = _check_sync(acc, g_now, t)
    tq = d.tau_q
    return acc.level2 + tq * acc.level1 + 0.5 * tq * tq * g_now


def tilde_transform(acc: IntegralAccumulator, h_now, d: DelayPair, t: float | None = None):
    """``h' + tau_T h`` from an accumulator synchronized with ``h``."""
    h_now = _check_sync(acc, h_now, t)
    return acc.level1 + d.tau_T * h_now
