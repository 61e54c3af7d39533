"""Plain-text experiment configs.

INI-style sections ``[experiment]``, ``[geometry]``, ``[material]``,
``[delays]``, ``[initial]``, ``[boundary]``, ``[supply]`` (rod experiments) or
``[strip]`` (steady-decay).  Fields are numbers or analytic profiles::

    gaussian(center, width, amp)   amp * exp(-((x - center) / width)^2)
    step(a, b, amp)                amp on [a, b], zero elsewhere
    sine(mode, amp)                amp * sin(mode * pi * x1 / W)   ([strip] only)
    zero
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import (
    ENDS,
    DelayPair,
    Geometry1D,
    MaterialField,
    Problem,
    ProblemData,
    TimeProfile,
)
from .steady import StripGeometry

__all__ = ["ConfigError", "ExperimentSpec", "KINDS", "load_config", "parse_config", "parse_profile"]

KINDS = (
    "uniqueness-zero-data",
    "conservation-law",
    "continuous-dependence",
    "influence-domain",
    "steady-decay",
    "convergence-study",
)
ROD_SECTIONS = ("geometry", "material", "delays", "initial", "boundary")
STRIP_SECTIONS = ("strip", "material", "delays")


class ConfigError(ValueError):
    def __init__(self, msg: str, lineno: int | None = None, source: str = "<config>"):
        where = f"{source}:{lineno}: " if lineno else f"{source}: "
        super().__init__(where + msg)
        self.lineno = lineno


@dataclass
class ExperimentSpec:
    kind: str
    params: dict
    output_dir: Path | None = None
    problem: Problem | None = None
    strip: StripGeometry | None = None
    strip_material: MaterialField | None = None
    strip_delays: DelayPair | None = None
    h_profile: object = None
    name: str = "experiment"
    source: str = "<config>"
    text: str = field(default="", repr=False)

    def problem_at(self, factor: int = 1) -> Problem:
        """The rod problem with ``factor`` times as many cells, profiles resampled."""
        if self.problem is None:
            raise ValueError(f"experiment kind {self.kind!r} has no rod problem")
        if factor == 1:
            return self.problem
        return _rod_problem(_Reader(self.text, self.source), factor)


_CALL = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def _args(text: str, n: int, name: str) -> list[float]:
    parts = [p for p in (text or "").split(",") if p.strip()]
    if len(parts) != n:
        raise ValueError(f"{name} takes {n} arguments, got {len(parts)}")
    return [float(p) for p in parts]


def parse_profile(text: str, W: float | None = None):
    """Spatial profile as a vectorized callable ``x -> array``."""
    text = text.strip()
    try:
        value = float(text)
    except ValueError:
        pass
    else:
        return lambda x: np.full(np.shape(x), value)
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"cannot parse profile {text!r}")
    name, arg = m.groups()
    if name == "zero":
        return lambda x: np.zeros(np.shape(x))
    if name == "gaussian":
        c, w, amp = _args(arg, 3, name)
        if w <= 0:
            raise ValueError("gaussian width must be positive")
        return lambda x: amp * np.exp(-(((np.asarray(x) - c) / w) ** 2))
    if name == "step":
        lo, hi, amp = _args(arg, 3, name)
        return lambda x: np.where((np.asarray(x) >= lo) & (np.asarray(x) <= hi), amp, 0.0)
    if name == "sine":
        if W is None:
            raise ValueError("sine profiles are only available in [strip]")
        mode, amp = _args(arg, 2, name)
        return lambda x: amp * np.sin(mode * math.pi * np.asarray(x) / W)
    raise ValueError(f"unknown profile {name!r}")


def parse_time_profile(text: str) -> TimeProfile:
    text = text.strip()
    try:
        return TimeProfile("constant", float(text))
    except ValueError:
        pass
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"cannot parse time profile {text!r}")
    name, arg = m.groups()
    if name == "zero":
        return TimeProfile()
    if name == "sin":
        amp, omega = _args(arg, 2, name)
        return TimeProfile("sin", amp, omega)
    raise ValueError(f"unknown time profile {name!r}")


def _time_factor(text: str):
    text = text.strip()
    if text in ("", "constant"):
        return lambda t: 1.0
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"cannot parse supply time factor {text!r}")
    name, arg = m.groups()
    if name == "sin":
        (omega,) = _args(arg, 1, name)
        return lambda t: math.sin(omega * t)
    if name == "exp":
        (rate,) = _args(arg, 1, name)
        return lambda t: math.exp(rate * t)
    raise ValueError(f"unknown supply time factor {name!r}")


class _Reader:
    """configparser wrapper that reports line numbers for offending keys."""

    def __init__(self, text: str, source: str):
        self.source = source
        self.cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        self.cp.optionxform = str
        try:
            self.cp.read_string(text, source=source)
        except configparser.ParsingError as exc:
            lineno = exc.errors[0][0] if exc.errors else None
            raise ConfigError(f"syntax error: {exc.errors[0][1].strip() if exc.errors else exc}", lineno, source)
        except configparser.Error as exc:
            raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None), source)
        self.lines: dict[tuple[str, str | None], int] = {}
        section = None
        for i, line in enumerate(text.splitlines(), 1):
            s = line.strip()
            if s.startswith("["):
                section = s.strip("[] ").strip()
                self.lines[(section, None)] = i
            elif section and "=" in s and not s.startswith(("#", ";")):
                self.lines[(section, s.split("=", 1)[0].strip())] = i

    def require(self, *sections: str) -> None:
        for sec in sections:
            if not self.cp.has_section(sec):
                raise ConfigError(f"missing section [{sec}]", None, self.source)

    def has(self, section: str, key: str) -> bool:
        return self.cp.has_option(section, key)

    def raw(self, section: str, key: str, default: str | None = None) -> str:
        if self.cp.has_option(section, key):
            return self.cp.get(section, key)
        if default is None:
            raise ConfigError(f"missing key {key!r} in [{section}]", self.lines.get((section, None)), self.source)
        return default

    def convert(self, section: str, key: str, fn, default: str | None = None):
        text = self.raw(section, key, default)
        try:
            return fn(text)
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[{section}] {key}: {exc}", self.lines.get((section, key)), self.source) from None

    def num(self, section, key, default=None) -> float:
        return self.convert(section, key, float, None if default is None else repr(default))

    def int_(self, section, key, default=None) -> int:
        return self.convert(section, key, int, None if default is None else str(default))

    def floats(self, section, key, default=None) -> list[float]:
        return self.convert(section, key, lambda s: [float(v) for v in s.split(",") if v.strip()], default)

    def fail(self, section: str, key: str | None, msg: str):
        raise ConfigError(msg, self.lines.get((section, key)) or self.lines.get((section, None)), self.source)


def _material(r: _Reader, x=None, supply=None) -> MaterialField:
    a_fn = r.convert("material", "a", parse_profile, "1.0")
    k_fn = r.convert("material", "k", parse_profile, "1.0")
    if x is None:
        a, k = np.float64(a_fn(0.0)), np.float64(k_fn(0.0))
    else:
        a, k = a_fn(x), k_fn(x)
    try:
        return MaterialField(a, k, supply)
    except ValueError as exc:
        r.fail("material", None, str(exc))


def _delays(r: _Reader) -> DelayPair:
    tq = r.num("delays", "tau_q")
    tT = r.num("delays", "tau_T")
    try:
        return DelayPair(tq, tT)
    except ValueError as exc:
        r.fail("delays", None, str(exc))


def _rod_problem(r: _Reader, factor: int = 1) -> Problem:
    r.require(*ROD_SECTIONS)
    h, L, n = r.num("geometry", "h"), r.num("geometry", "L"), r.int_("geometry", "n_cells")
    try:
        geom = Geometry1D(h, L, factor * n)
    except ValueError as exc:
        r.fail("geometry", None, str(exc))
    x = geom.x
    supply = None
    if r.cp.has_section("supply"):
        s_fn = r.convert("supply", "rho_r", parse_profile, "zero")
        t_fn = r.convert("supply", "time", _time_factor, "constant")
        if np.any(s_fn(x)):
            supply = lambda xx, t, s_fn=s_fn, t_fn=t_fn: s_fn(xx) * t_fn(t)  # noqa: E731
    material = _material(r, x, supply)
    delays = _delays(r)
    T0 = r.convert("initial", "T0", parse_profile, "zero")(x)
    q0 = r.convert("initial", "q0", parse_profile, "zero")(x)
    q0_dot = r.convert("initial", "q0_dot", parse_profile, "zero")(x)
    sigma1, sigma2, theta, xi = set(), set(), {}, {}
    for end in ENDS:
        kind = r.raw("boundary", end, "dirichlet").strip().lower()
        value = r.convert("boundary", f"{end}_value", parse_time_profile, "0")
        if kind in ("dirichlet", "temperature"):
            sigma1.add(end)
            theta[end] = value
        elif kind in ("flux", "neumann"):
            sigma2.add(end)
            xi[end] = value
        else:
            r.fail("boundary", end, f"end condition must be 'dirichlet' or 'flux', got {kind!r}")
    try:
        data = ProblemData(T0, q0, q0_dot, frozenset(sigma1), frozenset(sigma2), theta, xi)
        return Problem(geom, material, delays, data)
    except ValueError as exc:
        r.fail("boundary", None, str(exc))


def parse_config(text: str, source: str = "<config>") -> ExperimentSpec:
    r = _Reader(text, source)
    r.require("experiment")
    kind = r.raw("experiment", "kind").strip()
    if kind not in KINDS:
        r.fail("experiment", "kind", f"unknown experiment kind {kind!r}; expected one of {', '.join(KINDS)}")
    params: dict = {}
    spec = ExperimentSpec(kind=kind, params=params, source=source, text=text)
    spec.name = r.raw("experiment", "name", Path(source).stem.split(":")[-1] if source != "<config>" else kind)
    if r.has("experiment", "output_dir"):
        spec.output_dir = Path(r.raw("experiment", "output_dir"))

    if kind == "steady-decay":
        r.require(*STRIP_SECTIONS)
        dims = r.num("strip", "W"), r.num("strip", "L"), r.int_("strip", "nx1"), r.int_("strip", "nx3")
        try:
            strip = StripGeometry(*dims)
        except ValueError as exc:
            r.fail("strip", None, str(exc))
        spec.strip = strip
        spec.strip_material = _material(r)
        spec.strip_delays = _delays(r)
        spec.h_profile = r.convert("strip", "h", lambda s: parse_profile(s, strip.W), "sine(1, 1)")
        if r.has("experiment", "omegas"):
            params["omegas"] = r.floats("experiment", "omegas")
        elif r.has("experiment", "omega_fractions"):
            params["omega_fractions"] = r.floats("experiment", "omega_fractions")
        else:
            r.fail("experiment", None, "steady-decay needs 'omegas' or 'omega_fractions'")
        params["tolerance"] = r.num("experiment", "tolerance", 0.05)
        params["identity_levels"] = r.int_("experiment", "identity_levels", 0)
        params["min_identity_order"] = r.num("experiment", "min_identity_order", 1.99)
        return spec

    spec.problem = _rod_problem(r)
    params["t_end"] = r.num("experiment", "t_end")
    params["cfl_safety"] = r.num("experiment", "cfl_safety", 0.5)
    params["relax_safety"] = r.num("experiment", "relax_safety", 0.5)
    params["stride"] = r.int_("experiment", "stride", 1)
    if r.has("experiment", "snapshot_times"):
        params["snapshot_times"] = r.floats("experiment", "snapshot_times")
    params["levels"] = r.int_("experiment", "levels", 3 if kind in ("conservation-law", "convergence-study") else 1)
    params["residual_tolerance"] = r.num("experiment", "residual_tolerance", 1e-3)
    params["ratio_range"] = r.floats("experiment", "ratio_range", "3, 5")
    params["margin_tolerance"] = r.num("experiment", "margin_tolerance", 1e-8)
    params["zero_tolerance"] = r.num("experiment", "zero_tolerance", 1e-12)
    params["threshold"] = r.num("experiment", "threshold", 1e-8)
    params["speed_slack"] = r.num("experiment", "speed_slack", 0.1)
    if not 0 < params["cfl_safety"] <= 1 or not 0 < params["relax_safety"] <= 1:
        r.fail("experiment", "cfl_safety", "cfl_safety and relax_safety must lie in (0, 1]")
    return spec


def load_config(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path))
