"""Command-line interface: ``nscyl {constants,run,verify,sweep}``.

Exit status: 0 all checks pass, 1 a check failed, 2 input error,
3 numerical abort.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .config import ConfigError, load_config
from .kernel import QuadratureError, QuadratureSpec
from .pipeline import (
    EXIT_INPUT_ERROR, EXIT_NUMERICAL_ABORT, EXIT_OK, InputError,
    cmd_constants, cmd_run, cmd_sweep, cmd_verify,
)
from .spectral import THREADS_ENV

log = logging.getLogger("nscyl")


def _constants(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        spec, M = cfg.quadrature, cfg.M
    else:
        spec, M = QuadratureSpec(), None
    if args.M is not None:
        M = args.M
    if M is not None and not M > 0:
        raise ConfigError(f"M must be positive, got {M}")
    out = Path(args.out or ".")
    path = cmd_constants(spec, M, out)
    log.info("wrote %s", path)
    return EXIT_OK


def _run(args) -> int:
    cfg = load_config(args.config)
    every = max(1, args.progress_every)

    def progress(n, t):
        if n % every == 0:
            log.info("step %d  t = %.6g", n, t)

    result, out = cmd_run(cfg, Path(args.out) if args.out else None, progress)
    log.info("%s: %d steps in %.1f s -> %s", result.status, result.trajectory.steps,
             result.wall_time, out)
    if not result.trajectory.complete:
        log.error("run aborted: %s (partial outputs flagged in the manifest)",
                  result.trajectory.message)
        return EXIT_NUMERICAL_ABORT
    return EXIT_OK


def _verify(args) -> int:
    status, doc = cmd_verify(Path(args.run_dir), Path(args.constants) if args.constants else None,
                             args.windows, Path(args.out) if args.out else None)
    for r in doc["reports"]:
        if r["verdict"] == "fail":
            log.warning("FAIL %s lhs=%.6g rhs=%.6g at %s", r["name"], float(r["lhs"]),
                        float(r["rhs"]), r["location"])
    log.info("summary: %s", doc["summary"])
    return status


def _sweep(args) -> int:
    path = Path(args.config)
    try:
        raw = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as err:
        raise ConfigError(f"cannot read {path}: {err}") from None
    load_config(path)  # validate the base document up front
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if args.param == "seed":
        values = [int(v) for v in values]
    else:
        values = [float(v) for v in values]
    out = cmd_sweep(raw, args.param, values, Path(args.out or "sweep"), str(path))
    log.info("wrote %s", out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nscyl",
        description="Navier-Stokes on a periodic cylinder with energy-bound verification.",
        epilog=f"Set {THREADS_ENV} to control FFT worker threads.",
    )
    parser.add_argument("--quiet", action="store_true", help="only report errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="compute kernel and framework constants")
    p.add_argument("--config", help="YAML config (quadrature and constants sections)")
    p.add_argument("--M", type=float, help="vorticity bound for the framework constants")
    p.add_argument("--out", help="output directory [.]")
    p.set_defaults(func=_constants)

    p = sub.add_parser("run", help="integrate a configured scenario")
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--progress-every", type=int, default=1000, help="log every N steps")
    p.set_defaults(func=_run)

    p = sub.add_parser("verify", help="check every inequality on a run directory")
    p.add_argument("run_dir", help="directory written by 'run'")
    p.add_argument("--constants", help="constants.json from 'constants' (recomputed if absent)")
    p.add_argument("--windows", help="'auto' or 'a:b,a:b,...' (default: the run's windows)")
    p.add_argument("--out", help="report file or directory [RUN_DIR/report.json]")
    p.set_defaults(func=_verify)

    p = sub.add_parser("sweep", help="run a parameter sweep and fit trends")
    p.add_argument("--config", required=True, help="base YAML configuration")
    p.add_argument("--param", required=True, choices=["T", "U", "seed"])
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", help="output directory [sweep]")
    p.set_defaults(func=_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", force=True)
    try:
        return args.func(args)
    except (ConfigError, InputError, ValueError) as err:
        log.error("%s", err)
        return EXIT_INPUT_ERROR
    except QuadratureError as err:
        log.error("%s", err)
        return EXIT_NUMERICAL_ABORT


if __name__ == "__main__":
    sys.exit(main())
