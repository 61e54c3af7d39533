"""Command line entry point: ``dpl run``, ``dpl plots`` and ``dpl presets``.

Exit codes: 0 every check passed, 1 a claim check failed, 2 usage or config
error, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from .config import ConfigError, load_config, parse_config
from .experiments import SpecError, emit_plots, run_experiment
from .model import DegenerateModelError
from .solver import DivergenceError
from .steady import SolverFailure

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3
OUTPUT_ENV = "DPL_OUTPUT_ROOT"


def preset_names() -> list[str]:
    root = resources.files("dpl") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def preset_text(name: str) -> str:
    return (resources.files("dpl") / "presets" / f"{name}.cfg").read_text()


def _load(target: str):
    path = Path(target)
    if path.suffix == ".cfg" or path.exists():
        return load_config(path)
    if target in preset_names():
        return parse_config(preset_text(target), f"preset:{target}")
    raise ConfigError("no such config file or preset (see 'dpl presets')", None, target)


def _output_root(out: str | None) -> Path:
    if out:
        return Path(out)
    return Path(os.environ.get(OUTPUT_ENV, "dpl-output"))


def run_one(target: str, out_root: str) -> tuple[int, str]:
    """Load, run and report one experiment; returns ``(exit code, message)``."""
    try:
        spec = _load(target)
        res = run_experiment(spec, Path(out_root) / spec.name)
    except ConfigError as exc:
        return EXIT_USAGE, f"config error: {exc}"
    except DivergenceError as exc:
        return EXIT_DIVERGED, f"{target}: diverged: {exc}"
    except (SpecError, DegenerateModelError, SolverFailure) as exc:
        return EXIT_USAGE, f"{target}: {exc}"
    except ValueError as exc:
        return EXIT_USAGE, f"{target}: invalid setting: {exc}"
    return res.exit_code, f"[{res.output_dir}]\n{res.summary_text()}"


def _combine(codes: list[int]) -> int:
    for code in (EXIT_DIVERGED, EXIT_USAGE, EXIT_FAIL):
        if code in codes:
            return code
    return EXIT_OK


def cmd_run(args) -> int:
    root = str(_output_root(args.out))
    if args.jobs > 1 and len(args.configs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_one, args.configs, [root] * len(args.configs)))
    else:
        results = [run_one(c, root) for c in args.configs]
    for code, msg in results:
        print(msg, file=sys.stderr if code in (EXIT_USAGE, EXIT_DIVERGED) else sys.stdout)
    return _combine([c for c, _ in results])


def cmd_plots(args) -> int:
    try:
        scripts = emit_plots(args.report_dir)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for s in scripts:
        print(s)
    return EXIT_OK


def cmd_presets(args) -> int:
    for name in preset_names():
        first = preset_text(name).splitlines()[0].lstrip("# ").strip()
        print(f"{name:24s} {first}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpl", description="Dual-phase-lag heat conduction experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run experiment configs or presets")
    p_run.add_argument("configs", nargs="+", metavar="CONFIG", help="config file or preset name")
    p_run.add_argument("--jobs", type=int, default=1, help="run independent configs in parallel")
    p_run.add_argument("--out", default=None, help=f"output root (default ${OUTPUT_ENV} or ./dpl-output)")
    p_run.set_defaults(func=cmd_run)
    p_plots = sub.add_parser("plots", help="write gnuplot scripts for a report directory")
    p_plots.add_argument("report_dir")
    p_plots.set_defaults(func=cmd_plots)
    p_pre = sub.add_parser("presets", help="list bundled presets")
    p_pre.set_defaults(func=cmd_presets)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
