"""Harmonic vibrations of a strip and their spatial decay.

The strip is ``x1 in [0, W]`` (cross-section) times ``x3 in [0, L]`` (axis).
The amplitude satisfies a complex elliptic equation with ``theta = 0`` on the
lateral sides and the far end, and ``theta = h(x1)`` on the loaded base.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import DelayPair, MaterialField

__all__ = [
    "CertificationError",
    "DecayVerdict",
    "FrequencyDomainError",
    "IdentityConvergence",
    "SolverFailure",
    "SteadyAmplitude",
    "StripGeometry",
    "assemble_and_solve",
    "certify_decay",
    "critical_frequency",
    "decay_measure",
    "decay_rate",
    "energy_identity_residual",
    "fourier_limit_solution",
    "identity_convergence",
    "lower_measure",
    "section_integrals",
]


class SolverFailure(RuntimeError):
    pass


class FrequencyDomainError(ValueError):
    pass


class CertificationError(AssertionError):
    def __init__(self, msg: str, worst_x3: float):
        super().__init__(msg)
        self.worst_x3 = worst_x3


@dataclass(frozen=True)
class StripGeometry:
    W: float
    L: float
    nx1: int
    nx3: int

    def __post_init__(self):
        if self.W <= 0 or self.L <= 0:
            raise ValueError("W and L must be positive")
        if self.nx1 < 5 or self.nx3 < 5:
            raise ValueError("need at least 5 nodes in each direction")

    @property
    def dx1(self) -> float:
        return self.W / (self.nx1 - 1)

    @property
    def dx3(self) -> float:
        return self.L / (self.nx3 - 1)

    @property
    def x1(self) -> np.ndarray:
        return np.linspace(0.0, self.W, self.nx1)

    @property
    def x3(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.nx3)

    @property
    def membrane_eigenvalue(self) -> float:
        return (math.pi / self.W) ** 2

    @property
    def discrete_membrane_eigenvalue(self) -> float:
        """Lowest eigenvalue of the three-point Dirichlet Laplacian across the section."""
        return (2.0 / self.dx1**2) * (1.0 - math.cos(math.pi * self.dx1 / self.W))

    def refined(self) -> StripGeometry:
        return StripGeometry(self.W, self.L, 2 * self.nx1 - 1, 2 * self.nx3 - 1)


@dataclass(frozen=True, eq=False)
class SteadyAmplitude:
    """Solved amplitude; arrays are indexed ``[i3, i1]``."""

    geometry: StripGeometry
    theta: np.ndarray
    Q: np.ndarray
    omega: float
    h_profile: np.ndarray
    k: np.ndarray
    a: np.ndarray
    delays: DelayPair
    residual: float


def _node_field(value, geom: StripGeometry) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=float), (geom.nx3, geom.nx1)).copy()


def _grad(theta: np.ndarray, geom: StripGeometry):
    """Second-order ``(d/dx1, d/dx3)`` with one-sided closures on every side."""
    d1 = np.gradient(theta, geom.dx1, axis=1, edge_order=2)
    d3 = np.gradient(theta, geom.dx3, axis=0, edge_order=2)
    return d1, d3


def _profile(h, geom: StripGeometry) -> np.ndarray:
    vals = np.asarray(h(geom.x1) if callable(h) else h, dtype=float)
    if vals.shape != (geom.nx1,):
        raise ValueError(f"base profile must have {geom.nx1} samples")
    scale = max(np.abs(vals).max(), 1.0)
    if abs(vals[0]) > 1e-12 * scale or abs(vals[-1]) > 1e-12 * scale:
        raise ValueError("base profile must vanish at x1 = 0 and x1 = W (corner compatibility)")
    return vals


def assemble_and_solve(
    geom: StripGeometry,
    m: MaterialField,
    d: DelayPair,
    omega: float,
    h: Callable[[np.ndarray], np.ndarray] | np.ndarray,
) -> SteadyAmplitude:
    """Five-point finite-difference solve of the amplitude problem.

    The flux amplitude is eliminated, leaving
    ``div(k grad theta) = gamma * a * theta`` with
    ``gamma = i w (1 + i w tau_q - tau_q^2 w^2 / 2) / (1 + i w tau_T)``.
    Face conductivities are arithmetic means of the node values.
    """
    if not math.isfinite(omega):
        raise ValueError("omega must be finite")
    hb = _profile(h, geom)
    k = _node_field(m.k, geom)
    a = _node_field(m.a, geom)
    w, tq, tT = omega, d.tau_q, d.tau_T
    beta = 1.0 + 1j * w * tq - 0.5 * tq * tq * w * w
    lag = 1.0 + 1j * w * tT
    gamma = 1j * w * beta / lag

    n1, n3 = geom.nx1 - 2, geom.nx3 - 2
    idx = np.arange(n1 * n3).reshape(n3, n1)
    i3, i1 = np.meshgrid(np.arange(1, geom.nx3 - 1), np.arange(1, geom.nx1 - 1), indexing="ij")
    c1, c3 = 1.0 / geom.dx1**2, 1.0 / geom.dx3**2
    ke = 0.5 * (k[i3, i1] + k[i3, i1 + 1]) * c1
    kw = 0.5 * (k[i3, i1] + k[i3, i1 - 1]) * c1
    kn = 0.5 * (k[i3, i1] + k[i3 + 1, i1]) * c3
    ks = 0.5 * (k[i3, i1] + k[i3 - 1, i1]) * c3
    diag = -(ke + kw + kn + ks) - gamma * a[i3, i1]

    rows, cols, vals = [idx.ravel()], [idx.ravel()], [diag.ravel()]
    b = np.zeros(n1 * n3, dtype=complex)
    # neighbours: (coefficient, row offset, column offset)
    for coef, o3, o1 in ((ke, 0, 1), (kw, 0, -1), (kn, 1, 0), (ks, -1, 0)):
        j3, j1 = i3 + o3, i1 + o1
        inner = (j3 >= 1) & (j3 <= geom.nx3 - 2) & (j1 >= 1) & (j1 <= geom.nx1 - 2)
        rows.append(idx[inner.nonzero()])
        cols.append(idx[(j3 - 1)[inner], (j1 - 1)[inner]])
        vals.append(coef[inner])
        base = (j3 == 0) & ~inner
        # only the base x3 = 0 carries nonzero Dirichlet data
        np.subtract.at(b, idx[base.nonzero()], coef[base] * hb[j1[base]])
    A = sp.csc_matrix(
        (np.concatenate(vals).astype(complex), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n1 * n3, n1 * n3),
    )
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        cond = _condition_estimate(A)
        raise SolverFailure(f"factorization failed ({exc}); 1-norm condition estimate {cond:.3g}") from exc
    sol = lu.solve(b)
    bnorm = np.linalg.norm(b)
    res = np.linalg.norm(A @ sol - b) / bnorm if bnorm > 0 else np.linalg.norm(A @ sol)
    if res > 1e-10:
        sol = sol + lu.solve(b - A @ sol)
        res = np.linalg.norm(A @ sol - b) / bnorm if bnorm > 0 else np.linalg.norm(A @ sol)
    if not np.all(np.isfinite(sol)) or res > 1e-10:
        cond = _condition_estimate(A)
        raise SolverFailure(f"relative residual {res:.3g} after refinement; condition estimate {cond:.3g}")

    theta = np.zeros((geom.nx3, geom.nx1), dtype=complex)
    theta[0, :] = hb
    theta[1:-1, 1:-1] = sol.reshape(n3, n1)
    g1, g3 = _grad(theta, geom)
    Q = -(lag / beta) * k * np.stack([g1, g3])
    return SteadyAmplitude(geom, theta, Q, omega, hb, k, a, d, float(res))


def _condition_estimate(A) -> float:
    try:
        lu = spla.splu(A)
        inv = spla.LinearOperator(A.shape, matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans="H"), dtype=A.dtype)
        return float(spla.norm(A, 1) * spla.onenormest(inv))
    except RuntimeError:
        return math.inf


def critical_frequency(geom: StripGeometry, m: MaterialField, d: DelayPair) -> float:
    """Frequency below which spatial decay is certified; ``inf`` when ``tau_q = 0``."""
    if d.tau_q == 0.0:
        return math.inf
    return math.sqrt(geom.membrane_eigenvalue * m.kappa_m / (d.tau_q * m.a_M))


def decay_rate(geom: StripGeometry, m: MaterialField, d: DelayPair, omega: float) -> float:
    """Decay length ``nu``: the measure decays at least like ``exp(-x3 / nu)``."""
    lam = geom.membrane_eigenvalue
    denom = lam * m.kappa_m - d.tau_q * m.a_M * omega**2
    if omega <= 0 or denom <= 0.0:
        raise FrequencyDomainError(
            f"omega={omega:.6g} is not in (0, omega_c={critical_frequency(geom, m, d):.6g})"
        )
    return math.sqrt(lam) * math.sqrt((1.0 + (d.tau_T * omega) ** 2) * m.kappa_M**2) / (2.0 * denom)


def _trap(f: np.ndarray, dx: float, axis: int = -1) -> np.ndarray:
    return np.trapezoid(f, dx=dx, axis=axis)


def decay_measure(sol: SteadyAmplitude) -> np.ndarray:
    """``M(x3) = -2 Re[(1 + i w tau_T) int k theta_3 conj(theta) dx1]`` per section."""
    _, g3 = _grad(sol.theta, sol.geometry)
    lag = 1.0 + 1j * sol.omega * sol.delays.tau_T
    integrand = lag * sol.k * g3 * np.conj(sol.theta)
    return -2.0 * np.real(_trap(integrand, sol.geometry.dx1))


def section_integrals(sol: SteadyAmplitude):
    """Per-section ``int k |grad theta|^2``, ``int a |theta|^2``, ``int |theta_1|^2``, ``int |theta|^2``.

    The cross-section derivative enters through face differences (midpoint
    rule), so no one-sided stencil is needed at the clamped sides and the
    discrete membrane inequality holds with the discrete eigenvalue.
    """
    geom = sol.geometry
    th = sol.theta
    _, g3 = _grad(th, geom)
    d1 = np.diff(th, axis=1) / geom.dx1
    k_face = 0.5 * (sol.k[:, 1:] + sol.k[:, :-1])
    lateral = np.sum(np.abs(d1) ** 2, axis=1) * geom.dx1
    grad_k = np.sum(k_face * np.abs(d1) ** 2, axis=1) * geom.dx1 + _trap(sol.k * np.abs(g3) ** 2, geom.dx1)
    th2 = np.abs(th) ** 2
    return grad_k, _trap(sol.a * th2, geom.dx1), lateral, _trap(th2, geom.dx1)


def energy_identity_residual(sol: SteadyAmplitude) -> np.ndarray:
    """Defect of ``-dM/dx3 = 2 int k|grad theta|^2 - 2 tau_q w^2 int a|theta|^2`` at interior sections."""
    geom = sol.geometry
    M = decay_measure(sol)
    G, A, _, _ = section_integrals(sol)
    dM = (M[2:] - M[:-2]) / (2.0 * geom.dx3)
    rhs = 2.0 * G[1:-1] - 2.0 * sol.delays.tau_q * sol.omega**2 * A[1:-1]
    return -dM - rhs


def lower_measure(sol: SteadyAmplitude, m: MaterialField) -> np.ndarray:
    """``M*(x3) = 2 (1 - w^2/w_c^2) int_{x3}^{L} int k |grad theta|^2``."""
    geom = sol.geometry
    wc = critical_frequency(geom, m, sol.delays)
    G = section_integrals(sol)[0]
    # cumulative trapezoid from the far end back to x3
    seg = 0.5 * (G[1:] + G[:-1]) * geom.dx3
    tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    factor = 1.0 - (sol.omega / wc) ** 2 if math.isfinite(wc) else 1.0
    return 2.0 * factor * tail


@dataclass(frozen=True)
class DecayVerdict:
    """Outcome of :func:`certify_decay`; margins are relative to ``M(0)``."""

    omega: float
    omega_c: float
    nu: float
    certified: bool
    min_margin: float
    min_sign_margin: float
    min_lower_margin: float
    worst_x3: float
    x3: np.ndarray
    M: np.ndarray
    envelope: np.ndarray
    Mstar: np.ndarray

    def summary(self) -> dict:
        return {
            "omega": self.omega,
            "omega_c": self.omega_c,
            "nu": self.nu,
            "certified": self.certified,
            "min_margin": self.min_margin,
            "min_sign_margin": self.min_sign_margin,
            "min_lower_margin": self.min_lower_margin,
            "worst_x3": self.worst_x3,
        }


ROUNDOFF = 1e-12


def certify_decay(
    sol: SteadyAmplitude,
    m: MaterialField,
    tol: float = 0.05,
    raise_on_failure: bool = True,
) -> DecayVerdict:
    """Check ``0 <= M <= M(0) exp(-x3/nu) (1 + tol)`` and ``M >= M*`` at every section.

    The sign and lower-measure checks allow ``1e-12 M(0)`` of round-off.
    """
    geom, d = sol.geometry, sol.delays
    wc = critical_frequency(geom, m, d)
    nu = decay_rate(geom, m, d, sol.omega)
    x3 = geom.x3
    M = decay_measure(sol)
    Mstar = lower_measure(sol, m)
    envelope = M[0] * np.exp(-x3 / nu)
    scale = max(abs(M[0]), np.abs(M).max(), np.abs(Mstar).max())
    if scale == 0.0:
        return DecayVerdict(sol.omega, wc, nu, True, 0.0, 0.0, 0.0, float("nan"), x3, M, envelope, Mstar)
    upper = (envelope * (1.0 + tol) - M) / scale
    sign = M / scale
    lower = (M - Mstar) / scale
    slack = np.minimum(np.minimum(upper, sign + ROUNDOFF), lower + ROUNDOFF)
    i = int(np.argmin(slack))
    certified = bool(slack[i] >= 0.0)
    verdict = DecayVerdict(
        sol.omega, wc, nu, certified,
        float(upper.min()), float(sign.min()), float(lower.min()), float(x3[i]),
        x3, M, envelope, Mstar,
    )
    if not certified and raise_on_failure:
        raise CertificationError(f"decay certificate violated at x3={x3[i]:.6g}", float(x3[i]))
    return verdict


def fourier_limit_solution(geom: StripGeometry, omega: float, mode: int = 1) -> np.ndarray:
    """Closed form for ``tau_q = tau_T = 0``, ``k = a = 1`` and ``h = sin(mode pi x1 / W)``.

    ``theta = sin(n pi x1/W) sinh(mu (L - x3)) / sinh(mu L)`` with
    ``mu^2 = (n pi/W)^2 + i w``.
    """
    mu = np.sqrt((mode * math.pi / geom.W) ** 2 + 1j * omega)
    x1, x3 = geom.x1, geom.x3
    # sinh ratio written with decaying exponentials to avoid overflow for long strips
    ratio = (np.exp(-mu * x3) - np.exp(-mu * (2 * geom.L - x3))) / (1.0 - np.exp(-2 * mu * geom.L))
    return np.outer(ratio, np.sin(mode * math.pi * x1 / geom.W))


@dataclass(frozen=True)
class IdentityConvergence:
    """Max identity defect on the sections shared by every grid, per level."""

    geometries: tuple
    errors: np.ndarray

    @property
    def orders(self) -> np.ndarray:
        return np.log2(self.errors[:-1] / self.errors[1:])


def identity_convergence(
    geom: StripGeometry,
    m: MaterialField,
    d: DelayPair,
    omega: float,
    h,
    levels: int = 3,
) -> IdentityConvergence:
    """Identity defect under repeated halving of both spacings, starting from ``geom``.

    The defect is compared on the coarse-grid sections ``2 .. nx3 - 3``, which
    are nodes of every finer grid; the end sections use one-sided stencils
    whose error constants differ from the interior ones.
    """
    if levels < 2:
        raise ValueError("need at least two levels")
    geoms = [geom]
    for _ in range(levels - 1):
        geoms.append(geoms[-1].refined())
    sections = np.arange(2, geom.nx3 - 2)
    errors = []
    for lev, g in enumerate(geoms):
        sol = assemble_and_solve(g, m, d, omega, h)
        res = energy_identity_residual(sol)
        # res[j - 1] is the defect at section j
        errors.append(np.abs(res[sections * 2**lev - 1]).max())
    return IdentityConvergence(tuple(geoms), np.array(errors))
