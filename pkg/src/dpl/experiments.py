"""Experiment drivers: run a parsed config, check its claim, persist the reports.

Every driver returns an :class:`ExperimentResult` whose checks decide the
exit status.  Floats go to disk with 17 significant digits so that reruns can
be compared bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentSpec
from .energy import EnergyObserver, EnergyReport
from .influence import track_front
from .model import Regime
from .solver import StepControl, TrajectoryRecord, TransientState, run
from .steady import (
    StripGeometry,
    assemble_and_solve,
    certify_decay,
    critical_frequency,
    decay_measure,
    identity_convergence,
)

__all__ = ["Check", "ExperimentResult", "SpecError", "emit_plots", "run_experiment", "write_csv"]

FMT = "%.17g"

CLAIMS = {
    "uniqueness-zero-data": "zero data produce the zero solution (uniqueness)",
    "conservation-law": "the integral conservation law holds along the discrete trajectory",
    "continuous-dependence": "the energy stays below its continuous-dependence bound",
    "influence-domain": "disturbances stay inside the explicit domain of influence",
    "steady-decay": "harmonic amplitudes decay exponentially along the strip below the critical frequency",
    "convergence-study": "the transient scheme is second-order accurate",
}


class SpecError(ValueError):
    """The config is well formed but unsuitable for its experiment kind."""


@dataclass
class Check:
    name: str
    value: float
    limit: float
    passed: bool
    relation: str = "<="
    flag_only: bool = False

    @property
    def margin(self) -> float:
        if self.relation == "<=":
            return self.limit - self.value
        if self.relation == ">=":
            return self.value - self.limit
        return 0.0 if self.passed else -1.0

    def line(self) -> str:
        tag = "PASS" if self.passed else ("FLAG" if self.flag_only else "FAIL")
        return f"{tag} {self.name}: {self.value:.6g} {self.relation} {self.limit:.6g} (margin {self.margin:.3g})"


@dataclass
class ExperimentResult:
    name: str
    kind: str
    output_dir: Path
    checks: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed or c.flag_only for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def summary_text(self) -> str:
        lines = [
            f"experiment: {self.name}",
            f"kind: {self.kind}",
            f"claim: {CLAIMS[self.kind]}",
            f"status: {'PASS' if self.passed else 'FAIL'}",
        ]
        worst = min(self.checks, key=lambda c: c.margin, default=None)
        if worst is not None:
            lines.append(f"tightest check: {worst.name} (margin {worst.margin:.6g})")
        lines.append("checks:")
        lines += [f"  {c.line()}" for c in self.checks]
        if self.info:
            lines.append("details:")
            lines += [f"  {k}: {_fmt(v)}" for k, v in self.info.items()]
        return "\n".join(lines) + "\n"


def _fmt(v):
    return f"{v:.17g}" if isinstance(v, float) else str(v)


def _plain(obj):
    """JSON-ready copy; numpy scalars become Python floats (shortest exact repr)."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_csv(path: Path, header: str, columns) -> Path:
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, fmt=FMT, delimiter=",", header=header, comments="")
    return path


def write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(_plain(payload), indent=2) + "\n")
    return path


# -- transient helpers ---------------------------------------------------


def _control(spec: ExperimentSpec, factor: int = 1) -> StepControl:
    """Step control for refinement ``factor``: the base step divided by ``factor``."""
    p = spec.params
    base = StepControl.for_problem(spec.problem_at(1), p["t_end"], p["cfl_safety"], p["relax_safety"])
    return StepControl(base.dt / factor, p["t_end"], p["cfl_safety"], p["relax_safety"])


def _write_run(out: Path, rec: TrajectoryRecord, res: ExperimentResult) -> None:
    t, T, q, v = rec.arrays()
    n = len(rec.x)
    res.artifacts.append(
        write_csv(
            out / "snapshots.csv",
            "t,x,T,q,v",
            [np.repeat(t, n), np.tile(rec.x, len(t)), T.ravel(), q.ravel(), v.ravel()],
        )
    )
    res.artifacts.append(write_json(out / "run_summary.json", rec.summary()))


def _write_energy(out: Path, rep: EnergyReport, res: ExperimentResult, extra: dict) -> None:
    bound = rep.bound if rep.bound is not None else np.full(len(rep.times), np.nan)
    res.artifacts.append(
        write_csv(
            out / "energy.csv",
            "t,E,F,residual,bound,g_cum",
            [rep.times, rep.E, rep.F, rep.conservation_residual, bound, rep.g_cum],
        )
    )
    res.artifacts.append(write_json(out / "energy_summary.json", {**rep.summary(), **extra}))


def _energy_run(spec: ExperimentSpec, factor: int):
    problem = spec.problem_at(factor)
    ctl = _control(spec, factor)
    obs = EnergyObserver(problem, ctl.t_end)
    rec = run(
        problem, ctl, [obs],
        stride=spec.params["stride"] * factor,
        snapshot_times=spec.params.get("snapshot_times"),
    )
    return problem, rec, obs.report()


def _uniqueness(spec: ExperimentSpec, out: Path, res: ExperimentResult) -> None:
    problem = spec.problem
    d = problem.data
    if (
        np.any(d.T0) or np.any(d.q0) or np.any(d.q0_dot)
        or not d.has_zero_boundary_data or problem.material.rho_r is not None
    ):
        raise SpecError("uniqueness-zero-data needs zero initial, boundary and supply data")
    peak = {"T": 0.0, "q": 0.0, "v": 0.0}

    def track(s: TransientState) -> None:
        for name in peak:
            peak[name] = max(peak[name], float(np.abs(getattr(s, name)).max()))

    ctl = _control(spec)
    rec = run(problem, ctl, [track], stride=spec.params["stride"], observe_stride=1)
    tol = spec.params["zero_tolerance"]
    res.checks += [Check(f"max|{k}| over all steps", v, tol, v <= tol) for k, v in peak.items()]
    res.info.update(n_steps=rec.n_steps, dt=rec.dt, wall_time_s=rec.wall_time)
    _write_run(out, rec, res)


def _conservation(spec: ExperimentSpec, out: Path, res: ExperimentResult) -> None:
    p = spec.params
    levels = max(1, p["levels"])
    rel, reports = [], []
    for lev in range(levels):
        problem, rec, rep = _energy_run(spec, 2**lev)
        rel.append(rep.relative_residual())
        reports.append((problem, rec, rep))
        res.info[f"level{lev}_nodes"] = problem.geometry.n_nodes
        res.info[f"level{lev}_relative_residual"] = rel[-1]
    problem, rec, rep = reports[0]
    res.checks.append(Check("relative residual (base grid)", rel[0], p["residual_tolerance"], rel[0] <= p["residual_tolerance"]))
    lo, hi = p["ratio_range"]
    # the identity is regime-free, but a degraded ratio in the growth regime is only flagged
    flag = problem.delays.regime() is Regime.GROWTH
    ratios = [rel[i] / rel[i + 1] if rel[i + 1] > 0 else math.inf for i in range(levels - 1)]
    for i, r in enumerate(ratios):
        ok = lo <= r <= hi
        res.checks.append(Check(f"residual ratio level{i}/level{i + 1} >= {lo:g}", r, lo, ok, ">=", flag))
        res.checks.append(Check(f"residual ratio level{i}/level{i + 1} <= {hi:g}", r, hi, ok, "<=", flag))
    _write_energy(out, rep, res, {"relative_residuals": rel, "ratios": ratios})
    _write_run(out, rec, res)


def _continuous_dependence(spec: ExperimentSpec, out: Path, res: ExperimentResult) -> None:
    problem, rec, rep = _energy_run(spec, 1)
    if rep.bound is None:
        raise SpecError("continuous-dependence bounds need tau_q > 0 and tau_T > 0")
    tol = spec.params["margin_tolerance"]
    margin = rep.min_margin()
    res.checks.append(Check("min relative bound margin", margin, -tol, margin >= -tol, ">="))
    res.info.update(regime=rep.regime.value, sigma_sq=problem.delays.sigma_sq(), S=rec.final_state.t)
    _write_energy(out, rep, res, {"sigma_sq": problem.delays.sigma_sq()})
    _write_run(out, rec, res)


def _influence(spec: ExperimentSpec, out: Path, res: ExperimentResult) -> None:
    p = spec.params
    problem = spec.problem
    rec = run(problem, _control(spec), stride=p["stride"], snapshot_times=p.get("snapshot_times"))
    front = track_front(rec, p["threshold"], problem)
    L = problem.geometry.L
    c_emp = front.empirical_speed(L)
    slack = 1.0 + p["speed_slack"]
    res.checks += [
        Check("max field beyond c t / initial peak", float(front.beyond.max(initial=0.0)), p["threshold"], front.confined),
        Check("empirical front speed / c_char", c_emp / front.c_char, slack, bool(c_emp <= slack * front.c_char)),
        Check(f"{slack:g} c_char / c_bound", slack * front.c_char / front.c_bound, 1.0, bool(slack * front.c_char <= front.c_bound)),
    ]
    res.info.update(front.verdict(L))
    res.artifacts.append(
        write_csv(out / "front.csv", "t,front_position,c0_t_or_c1_t", [front.times, front.front_position, front.c_bound * front.times])
    )
    res.artifacts.append(write_json(out / "front_verdict.json", front.verdict(L)))
    _write_run(out, rec, res)


def _convergence(spec: ExperimentSpec, out: Path, res: ExperimentResult) -> None:
    p = spec.params
    levels = max(3, p["levels"])
    finals = []
    for lev in range(levels):
        problem = spec.problem_at(2**lev)
        rec = run(problem, _control(spec, 2**lev), stride=max(1, _control(spec, 2**lev).n_steps))
        s = rec.final_state
        finals.append((s.T, s.q))
        res.info[f"level{lev}_nodes"] = problem.geometry.n_nodes
    # compare on the coarse nodes shared by consecutive grids
    diffs = []
    for lev in range(levels - 1):
        (Ta, qa), (Tb, qb) = finals[lev], finals[lev + 1]
        diffs.append(max(np.abs(Ta - Tb[::2]).max(), np.abs(qa - qb[::2]).max()))
    lo, hi = p["ratio_range"]
    for i in range(len(diffs) - 1):
        r = diffs[i] / diffs[i + 1] if diffs[i + 1] > 0 else math.inf
        res.checks.append(Check(f"difference ratio {i}/{i + 1} >= {lo:g}", r, lo, r >= lo, ">="))
        res.checks.append(Check(f"difference ratio {i}/{i + 1} <= {hi:g}", r, hi, r <= hi))
    res.info["differences"] = ", ".join(f"{d:.6g}" for d in diffs)
    res.artifacts.append(write_json(out / "convergence.json", {"differences": diffs, "levels": levels}))


def _coarsened(geom: StripGeometry, times: int) -> StripGeometry:
    f = 2**times
    if (geom.nx1 - 1) % f or (geom.nx3 - 1) % f:
        raise SpecError(f"strip grid {geom.nx1}x{geom.nx3} cannot be halved {times} times")
    return StripGeometry(geom.W, geom.L, (geom.nx1 - 1) // f + 1, (geom.nx3 - 1) // f + 1)


def _steady(spec: ExperimentSpec, out: Path, res: ExperimentResult) -> None:
    p = spec.params
    geom, m, d = spec.strip, spec.strip_material, spec.strip_delays
    wc = critical_frequency(geom, m, d)
    if "omegas" in p:
        omegas = p["omegas"]
    else:
        if not math.isfinite(wc):
            raise SpecError("omega_fractions need a finite critical frequency (tau_q > 0)")
        omegas = [f * wc for f in p["omega_fractions"]]
    verdicts = []
    for i, w in enumerate(omegas):
        sol = assemble_and_solve(geom, m, d, w, spec.h_profile)
        x1, x3 = geom.x1, geom.x3
        res.artifacts.append(
            write_csv(
                out / f"amplitude_{i}.csv",
                "x1,x3,Re(theta),Im(theta)",
                [np.tile(x1, len(x3)), np.repeat(x3, len(x1)), sol.theta.real.ravel(), sol.theta.imag.ravel()],
            )
        )
        if not 0.0 < w < wc:
            M = decay_measure(sol)
            nan = np.full_like(M, np.nan)
            res.artifacts.append(write_csv(out / f"decay_{i}.csv", "x3,M,envelope,Mstar", [x3, M, nan, nan]))
            verdicts.append({"omega": w, "omega_c": wc, "certified": False, "note": "outside (0, omega_c): reported only"})
            continue
        v = certify_decay(sol, m, p["tolerance"], raise_on_failure=False)
        res.artifacts.append(write_csv(out / f"decay_{i}.csv", "x3,M,envelope,Mstar", [x3, v.M, v.envelope, v.Mstar]))
        entry = v.summary()
        res.checks.append(Check(f"decay certificate at omega={w:.6g}", v.min_margin, 0.0, v.certified, ">="))
        if p["identity_levels"] >= 2:
            ic = identity_convergence(_coarsened(geom, p["identity_levels"] - 1), m, d, w, spec.h_profile, p["identity_levels"])
            order = float(ic.orders.min())
            entry.update(identity_errors=ic.errors, identity_orders=ic.orders)
            lim = p["min_identity_order"]
            res.checks.append(Check(f"identity residual order at omega={w:.6g}", order, lim, order >= lim, ">="))
        verdicts.append(entry)
    res.info.update(omega_c=wc, omegas=", ".join(f"{w:.6g}" for w in omegas))
    res.artifacts.append(write_json(out / "decay_verdict.json", {"verdicts": verdicts}))


DRIVERS = {
    "uniqueness-zero-data": _uniqueness,
    "conservation-law": _conservation,
    "continuous-dependence": _continuous_dependence,
    "influence-domain": _influence,
    "steady-decay": _steady,
    "convergence-study": _convergence,
}


def run_experiment(spec: ExperimentSpec, output_dir: str | Path | None = None) -> ExperimentResult:
    """Run ``spec``, write its reports into ``output_dir`` and return the checks.

    Raises :class:`~dpl.solver.DivergenceError` when the march blows up and
    :class:`SpecError` when the config does not fit its kind.
    """
    out = Path(output_dir or spec.output_dir or Path("dpl-output") / spec.name)
    out.mkdir(parents=True, exist_ok=True)
    res = ExperimentResult(spec.name, spec.kind, out)
    DRIVERS[spec.kind](spec, out, res)
    res.artifacts.append(write_json(out / "checks.json", {
        "name": spec.name, "kind": spec.kind, "passed": res.passed,
        "checks": [{**asdict(c), "margin": c.margin} for c in res.checks],
    }))
    summary = out / "summary.txt"
    summary.write_text(res.summary_text())
    res.artifacts.append(summary)
    return res


# -- plot scripts --------------------------------------------------------

EXPECTED_REPORTS = ("energy.csv", "front.csv", "decay_<i>.csv")


def emit_plots(report_dir: str | Path) -> list[Path]:
    """Write gnuplot scripts for every report series found in ``report_dir``."""
    out = Path(report_dir)
    if not out.is_dir():
        raise FileNotFoundError(f"{out} is not a directory")
    scripts = []
    if (out / "energy.csv").exists():
        regime = "stable"
        if (out / "energy_summary.json").exists():
            regime = json.loads((out / "energy_summary.json").read_text()).get("regime", regime)
        col, label = ("3", "sqrt(F)") if regime == "growth" else ("2", "sqrt(E)")
        scripts.append(_script(out / "energy.gp", "energy.png", "t", "energy", [
            f"'energy.csv' using 1:(sqrt(${col})) with lines title '{label}'",
            "'energy.csv' using 1:5 with lines dashtype 2 title 'bound'",
        ], logscale=regime == "growth"))
    if (out / "front.csv").exists():
        scripts.append(_script(out / "front.gp", "front.png", "t", "x", [
            "'front.csv' using 1:2 with linespoints title 'front position'",
            "'front.csv' using 1:3 with lines dashtype 2 title 'c t'",
        ]))
    decay = sorted(out.glob("decay_*.csv"))
    if decay:
        omegas = {}
        if (out / "decay_verdict.json").exists():
            verdicts = json.loads((out / "decay_verdict.json").read_text())["verdicts"]
            omegas = {f"decay_{i}": v["omega"] for i, v in enumerate(verdicts)}
        series = []
        for f in decay:
            tag = f"omega={omegas[f.stem]:.4g}" if f.stem in omegas else f.stem.replace("_", " ")
            series += [
                f"'{f.name}' using 1:2 with lines title 'M, {tag}'",
                f"'{f.name}' using 1:3 with lines dashtype 2 title 'envelope, {tag}'",
            ]
        scripts.append(_script(out / "decay.gp", "decay.png", "x3", "M(x3)", series, logscale=True))
    if not scripts:
        raise FileNotFoundError(f"no report series in {out}; expected one of: {', '.join(EXPECTED_REPORTS)}")
    return scripts


def _script(path: Path, png: str, xlabel: str, ylabel: str, series: list[str], logscale: bool = False) -> Path:
    lines = [
        "# run with: gnuplot " + path.name,
        "set datafile separator ','",
        "# first row holds the column names",
        "set key autotitle columnheader",
        "set terminal pngcairo noenhanced size 900,600",
        f"set output '{png}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set key top right",
    ]
    if logscale:
        lines.append("set logscale y")
    lines.append("plot " + ", \\\n     ".join(series))
    path.write_text("\n".join(lines) + "\n")
    return path
