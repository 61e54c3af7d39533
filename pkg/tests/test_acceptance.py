"""Acceptance criteria, one test per criterion.

Each test records a single PASS/FAIL line, printed in the "acceptance
criteria" section at the end of the pytest run.
"""

import configparser
import contextlib
import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from dpl.config import parse_config, parse_profile
from dpl.cli import preset_text
from dpl.experiments import run_experiment
from dpl.influence import speed_bound_stable
from dpl.model import DelayPair, MaterialField, Problem, ProblemData, TimeProfile
from dpl.solver import StepControl, characteristic_speed, run
from dpl.steady import StripGeometry, assemble_and_solve, fourier_limit_solution


@contextlib.contextmanager
def criterion(number: int, title: str):
    """Record one PASS/FAIL line; the body fills ``detail`` with the measured values."""
    detail: list[str] = []
    try:
        yield detail
    except BaseException as exc:
        reason = f"{type(exc).__name__}: {exc}".splitlines()[0]
        ACCEPTANCE_LINES.append(f"FAIL criterion {number} ({title}): {'; '.join(detail + [reason])}")
        raise
    ACCEPTANCE_LINES.append(f"PASS criterion {number} ({title}): {'; '.join(detail)}")


def preset(name: str):
    return parse_config(preset_text(name), f"preset:{name}")


def check_map(res):
    return {c.name: c for c in res.checks}


def test_criterion_1_zero_data_uniqueness(tmp_path):
    with criterion(1, "zero data stay zero") as detail:
        spec = preset("zero-data")
        assert spec.problem.geometry.n_nodes == 512
        assert spec.params["t_end"] == 5 * spec.problem.delays.tau_q
        start = time.perf_counter()
        res = run_experiment(spec, tmp_path)
        elapsed = time.perf_counter() - start
        peaks = {c.name: c.value for c in res.checks}
        detail.append(", ".join(f"{k} = {v:.3g}" for k, v in peaks.items()))
        detail.append(f"runtime {elapsed:.2f} s")
        assert all(v <= 1e-12 for v in peaks.values())
        assert elapsed < 10.0


def test_criterion_2_conservation_law(tmp_path):
    with criterion(2, "conservation law residual") as detail:
        start = time.perf_counter()
        for name in ("conservation-stable", "conservation-growth"):
            spec = preset(name)
            assert spec.problem.geometry.n_nodes == 256 and spec.params["cfl_safety"] == 0.5
            assert spec.params["levels"] == 3
            res = run_experiment(spec, tmp_path / name)
            rel = [res.info[f"level{i}_relative_residual"] for i in range(3)]
            ratios = [rel[0] / rel[1], rel[1] / rel[2]]
            detail.append(f"{name}: rel {rel[0]:.3g}, ratios {ratios[0]:.3f}, {ratios[1]:.3f}")
            assert rel[0] <= 1e-3
            assert all(3.0 <= r <= 5.0 for r in ratios)
        elapsed = time.perf_counter() - start
        detail.append(f"runtime {elapsed:.1f} s")
        assert elapsed < 120.0


def test_criterion_3_continuous_dependence_bounds(tmp_path):
    with criterion(3, "continuous-dependence bounds") as detail:
        sigma_sq = DelayPair(0.5, 0.1).sigma_sq()
        detail.append(f"sigma^2(0.5, 0.1) = {sigma_sq!r}")
        assert sigma_sq == 6.0
        for name, regime in (("bounds-stable", "stable"), ("bounds-growth", "growth")):
            res = run_experiment(preset(name), tmp_path / name)
            margin = check_map(res)["min relative bound margin"].value
            detail.append(f"{name} ({res.info['regime']}): min margin {margin:.4g}")
            assert res.info["regime"] == regime
            assert margin >= -1e-8


def test_criterion_4_influence_domain(tmp_path):
    with criterion(4, "domain of influence") as detail:
        unit = MaterialField.uniform()
        c0 = speed_bound_stable(unit, DelayPair(1.0, 1.0))
        c_char = characteristic_speed(unit, DelayPair(1.0, 1.0))
        detail.append(f"c0 = {c0:.13f}, c_char = {c_char:.13f}")
        assert abs(c0 - math.sqrt(2.5)) <= 1e-12
        assert abs(c_char - math.sqrt(2.0)) <= 1e-12
        for name in ("influence-stable", "influence-growth"):
            spec = preset(name)
            assert np.all(spec.problem.data.T0[spec.problem.x > 0] <= 1e-8)
            res = run_experiment(spec, tmp_path / name)
            info = res.info
            detail.append(
                f"{name}: beyond {info['max_beyond']:.2g}, c_emp {info['c_empirical']:.4f} "
                f"<= 1.1 c_char {1.1 * info['c_char']:.4f} <= c_bound {info['c_bound']:.4f}"
            )
            assert info["max_beyond"] <= 1e-8 and info["confined"]
            assert info["c_empirical"] <= 1.1 * info["c_char"] <= info["c_bound"]
            assert not info["truncated"]


def test_criterion_5_steady_decay(tmp_path):
    with criterion(5, "steady-state spatial decay") as detail:
        spec = preset("steady-decay")
        g, m, d = spec.strip, spec.strip_material, spec.strip_delays
        assert (g.nx1, g.nx3, g.W) == (129, 513, math.pi)
        assert d.tau_q == 1.0 and m.kappa_m == m.kappa_M == m.a_m == m.a_M == 1.0
        assert spec.params["omegas"] == [0.25, 0.5, 0.75]
        for w in spec.params["omegas"]:
            one = parse_config(preset_text("steady-decay").replace("omegas = 0.25, 0.5, 0.75", f"omegas = {w}"))
            start = time.perf_counter()
            res = run_experiment(one, tmp_path / f"w{w}")
            elapsed = time.perf_counter() - start
            checks = check_map(res)
            cert = checks[f"decay certificate at omega={w:.6g}"]
            order = checks[f"identity residual order at omega={w:.6g}"]
            verdict = json.loads((tmp_path / f"w{w}" / "decay_verdict.json").read_text())["verdicts"][0]
            level_orders = verdict["identity_orders"]
            detail.append(
                f"w={w}: certified {cert.passed} (margins upper {verdict['min_margin']:.2g}, "
                f"sign {verdict['min_sign_margin']:.2g}, lower {verdict['min_lower_margin']:.2g}), "
                f"identity orders {level_orders[0]:.4f}, {level_orders[1]:.4f}, {elapsed:.1f} s"
            )
            assert cert.passed
            assert verdict["min_sign_margin"] >= -1e-12 and verdict["min_lower_margin"] >= -1e-12
            assert order.passed  # observed order >= 1.99
            # the observed order approaches 2 from below: the gap shrinks under refinement
            assert 2.0 - level_orders[1] < 0.5 * (2.0 - level_orders[0])
            assert elapsed < 60.0


def test_criterion_6_fourier_limit():
    with criterion(6, "Fourier-limit oracle") as detail:
        g = StripGeometry(math.pi, 2 * math.pi, 129, 513)
        zero = DelayPair(0.0, 0.0)
        for w in (0.5, 1.0, 2.0):
            sol = assemble_and_solve(g, MaterialField.uniform(), zero, w, lambda x1: np.sin(x1))
            exact = fourier_limit_solution(g, w)
            mid = g.nx3 // 2
            err = np.abs(sol.theta[mid] - exact[mid]).max() / np.abs(exact[mid]).max()
            detail.append(f"w={w}: mid-strip rel. error {err:.2e}")
            assert err <= 1e-3


def _initial_profiles(name: str, x: np.ndarray) -> list[np.ndarray]:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string(preset_text(name))
    return [parse_profile(cp.get("initial", key, fallback="zero"))(x) for key in ("T0", "q0", "q0_dot")]


def test_criterion_7_superposition():
    with criterion(7, "superposition") as detail:
        rod_presets = ["bounds-stable", "bounds-growth", "bounds-boundary", "conservation-stable", "influence-stable", "influence-growth"]
        rng = np.random.default_rng(20261018)
        first, second = rng.choice(rod_presets, size=2, replace=False)
        base = preset(first).problem
        x = base.x
        amp1, amp2 = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        s1, s2 = rng.uniform(-1, 1, 2)

        def data(fields, amps):
            T0, q0, q0_dot = fields
            return ProblemData(
                T0, q0, q0_dot, frozenset({"left"}), frozenset({"right"}),
                theta_bc={"left": TimeProfile("sin", amps[0], 2.0)},
                xi_bc={"right": TimeProfile("sin", amps[1], 1.5)},
            )

        def material(s):
            return MaterialField(base.material.a, base.material.k, lambda xx, t: s * np.exp(-xx**2) * np.cos(t))

        f1 = _initial_profiles(first, x)
        # the second data set is the other preset's initial state, mirrored so that it differs
        f2 = [f[::-1] for f in _initial_profiles(second, x)]
        combined = [a + b for a, b in zip(f1, f2)]
        problems = [
            Problem(base.geometry, material(s1), base.delays, data(f1, amp1)),
            Problem(base.geometry, material(s2), base.delays, data(f2, amp2)),
            Problem(base.geometry, material(s1 + s2), base.delays, data(combined, amp1 + amp2)),
        ]
        ctl = StepControl.for_problem(problems[0], 1.0)
        r1, r2, r12 = (run(p, ctl, stride=max(1, ctl.n_steps // 10)) for p in problems)
        worst = 0.0
        for field in ("T", "q", "v"):
            a, b, c = (np.array(getattr(r, field)) for r in (r1, r2, r12))
            worst = max(worst, np.abs(c - (a + b)).max() / np.abs(c).max())
        detail.append(f"presets {first} + {second}, {ctl.n_steps} steps, max relative defect {worst:.2e}")
        assert worst <= 1e-10


@pytest.fixture(autouse=True, scope="module")
def _ordered_lines():
    yield
    ACCEPTANCE_LINES.sort(key=lambda s: int(s.split("criterion ")[1].split()[0]))
