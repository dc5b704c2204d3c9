"""Run, verify and sweep pipelines, and every file they emit."""

from __future__ import annotations

import hashlib
import json
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    Constants, check_A2prime, check_A5, check_balance, check_C4, check_dissipation,
    check_global_flux, check_growth, check_L2_energy, check_local_flux, check_max_principle,
    check_monotone_energy, derive_constants, measure_JT, summarize,
)
from .config import ConfigError, RunConfig, parse_config, parse_windows, set_key
from .dynamics import Trajectory, run
from .energetics import CSV_FORMAT, EnergyLedger, energy_profiles
from .equilibria import DistanceRecorder, fit_loglog_slope, occupation_time
from .kernel import KernelConstants, QuadratureSpec, compute_kernel_constants
from .report import FAIL, BoundReport
from .scenarios import build_initial_state
from .spectral import Grid

MANIFEST = "manifest.json"
CONSTANTS = "constants.json"
REPORT = "report.json"
SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_NUMERICAL_ABORT = 3


class InputError(RuntimeError):
    """Missing, corrupt or inconsistent run outputs."""


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=True) + "\n")


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------


def constants_document(k: KernelConstants, c: Constants | None) -> dict:
    return {"schema": SCHEMA_VERSION, "kernel": k.to_dict(),
            "framework": c.to_dict() if c is not None else None}


def cmd_constants(quadrature: QuadratureSpec, M: float | None, out_dir: Path) -> Path:
    """Compute kernel and framework constants and write ``constants.json``."""
    k = compute_kernel_constants(quadrature)
    c = derive_constants(k, M) if M is not None else None
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / CONSTANTS
    _write_json(path, constants_document(k, c))
    return path


def load_kernel_constants(path: Path) -> KernelConstants:
    try:
        data = json.loads(Path(path).read_text())
        return KernelConstants.from_dict(data["kernel"])
    except (OSError, ValueError, KeyError, TypeError) as err:
        raise InputError(f"cannot read kernel constants from {path}: {err}") from None


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    config: RunConfig
    trajectory: Trajectory
    ledger: EnergyLedger
    distances: list
    M: float
    wall_time: float
    files: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        return self.trajectory.status


def vorticity_bound(initial_sup: float, configured: float | None) -> float:
    """M used for the constants: the configured value or ``sup|omega(0)|`` (1 for zero data)."""
    if configured is not None:
        return configured
    return initial_sup if initial_sup > 0 else 1.0


def execute(cfg: RunConfig, progress=None) -> RunResult:
    """Integrate and collect the ledger and distance records in memory."""
    grid = cfg.grid
    state0 = build_initial_state(grid, cfg.sim.initial_condition)
    M = vorticity_bound(state0.sup_omega, cfg.M)
    if state0.sup_omega > M * (1 + 1e-12):
        raise ConfigError(f"constants.M = {M} is below sup|omega(0)| = {state0.sup_omega}")
    ledger = EnergyLedger(grid, windows=cfg.windows, checkpoints=cfg.sim.checkpoints)
    recorders = [DistanceRecorder(R, cfg.center) for R in cfg.distance_radii]

    def feed(state):
        ledger.accumulate(energy_profiles(state))

    t0 = time.perf_counter()
    traj = run(cfg.sim, [feed, *recorders], initial_state=state0, on_step=progress)
    wall = time.perf_counter() - t0
    return RunResult(cfg, traj, ledger, recorders, M, wall)


def write_run(result: RunResult, out_dir: Path | None = None) -> Path:
    """Write ledger, histories, distances, trajectory and the manifest."""
    cfg = result.config
    out = Path(out_dir) if out_dir is not None else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    for stale in list(out.glob("ledger_T*.csv")) + list(out.glob("distances_R*.csv")):
        stale.unlink()
    files = [p for p in result.ledger.write_csv(out)]
    win = out / "windows.json"
    _write_json(win, result.ledger.window_summary())
    files.append(win)
    for rec in result.distances:
        t, d, m = rec.arrays()
        path = out / f"distances_R{rec.R:.12g}.csv"
        with open(path, "w") as fh:
            fh.write("t,d_R,m_star\n")
            for row in zip(t, d, m):
                fh.write(",".join(CSV_FORMAT % v for v in row) + "\n")
        files.append(path)
    traj = result.trajectory
    if cfg.save_trajectory and traj.snapshots:
        path = out / "trajectory.npz"
        with open(path, "wb") as fh:
            np.savez(fh, t=np.array([t for t, _ in traj.snapshots]),
                     omega=np.stack([s.omega.values for _, s in traj.snapshots]),
                     m0=np.array(traj.snapshots[0][1].m0))
        files.append(path)

    manifest = {
        "schema": SCHEMA_VERSION,
        "code_version": __version__,
        "python": platform.python_version(),
        "config": cfg.raw,
        "grid": {"L": cfg.grid.L, "N1": cfg.grid.N1, "N2": cfg.grid.N2},
        "M": result.M,
        "center": cfg.center,
        "distance_radii": cfg.distance_radii,
        "epsilons": cfg.epsilons,
        "status": traj.status,
        "message": traj.message,
        "partial": not traj.complete,
        "steps": traj.steps,
        "final_time": traj.times[-1],
        "wall_time_s": round(result.wall_time, 3),
        "constants_file": None,
        "files": {p.name: sha256(p) for p in files},
    }
    _write_json(out / MANIFEST, manifest)
    result.files = manifest["files"]
    return out


def cmd_run(cfg: RunConfig, out_dir: Path | None = None, progress=None) -> tuple[RunResult, Path]:
    result = execute(cfg, progress)
    return result, write_run(result, out_dir)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def load_manifest(run_dir: Path) -> dict:
    run_dir = Path(run_dir)
    path = run_dir / MANIFEST
    if not path.exists():
        raise InputError(f"{run_dir} has no {MANIFEST}")
    try:
        manifest = json.loads(path.read_text())
    except ValueError as err:
        raise InputError(f"corrupt manifest: {err}") from None
    files = manifest.get("files")
    if not isinstance(files, dict) or not files:
        raise InputError("manifest lists no files")
    for name, digest in files.items():
        p = run_dir / name
        if not p.exists():
            raise InputError(f"file listed in the manifest is missing: {name}")
        if sha256(p) != digest:
            raise InputError(f"digest mismatch for {name}")
    return manifest


def _distance_file(run_dir: Path, R: float) -> tuple[np.ndarray, np.ndarray]:
    path = run_dir / f"distances_R{R:.12g}.csv"
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


def verify_battery(ledger: EnergyLedger, c: Constants, sup_omega, windows, center: float,
                   distances: dict | None = None, epsilons=()) -> list[BoundReport]:
    """Every check on every checkpoint of ``ledger``."""
    grid = ledger.grid
    L = grid.L
    reports: list[BoundReport] = []
    final = ledger.t
    reports.append(check_A2prime(ledger, c, final))
    reports.append(check_A5(ledger, c, final))
    reports.append(check_C4(ledger, c, final))
    reports.append(check_max_principle(sup_omega))
    box = (center - L / 2, center + L / 2)
    for T in ledger.times:
        for w in [box, *windows]:
            r = check_balance(ledger, *w, T)
            r.location["T"] = T
            reports.append(r)
        for (a, b) in windows:
            reports.extend(check_local_flux(ledger, a, b, T, c))
        reports.extend(check_global_flux(ledger, T, c))
        reports.extend(check_L2_energy(ledger, T, c))
        for R in (L / 8, L / 4):
            reports.extend(check_dissipation(ledger, R, T, c, center=center, specialize=R == L / 8))
        reports.extend(check_growth(ledger, T, c))
        reports.append(check_monotone_energy(ledger, T))
        R_grid = np.linspace(L / 64, L / 2, 64)
        reports.append(measure_JT(ledger, T, R_grid, center=center, c=c).report)
        for R, (t, d) in (distances or {}).items():
            for eps in epsilons:
                rec = occupation_time(t, d, eps, R, T)
                reports.append(BoundReport("occupation_time", rec.time_outside, T, "trend",
                                           location={"T": T, "R": R},
                                           constants={"epsilon": eps, "fraction": rec.fraction}))
    return reports


def cmd_verify(run_dir: Path, constants_file: Path | None = None, windows=None,
               out: Path | None = None) -> tuple[int, dict]:
    """Run the check battery on a run directory and write ``report.json``.

    Returns the exit status (0 pass, 1 any unconditional check failed) and
    the report document.  Input problems raise :class:`InputError`.
    """
    run_dir = Path(run_dir)
    manifest = load_manifest(run_dir)
    try:
        grid = Grid(**manifest["grid"])
        M = float(manifest["M"])
        center = float(manifest.get("center", grid.L / 2))
    except (KeyError, TypeError, ValueError) as err:
        raise InputError(f"manifest is missing run metadata: {err}") from None
    try:
        summary = json.loads((run_dir / "windows.json").read_text())
        ledger = EnergyLedger.from_files(grid, run_dir, summary)
    except (OSError, ValueError, KeyError) as err:
        raise InputError(f"cannot load the ledger: {err}") from None
    if constants_file is not None:
        k = load_kernel_constants(constants_file)
    else:
        k = compute_kernel_constants()
    c = derive_constants(k, M)
    if windows is None:
        wins = ledger.windows
    else:
        try:
            wins = parse_windows(windows, grid, center)
        except ConfigError as err:
            raise InputError(str(err)) from None
    sup_omega = ledger.run_history()["sup_omega"]
    distances = {}
    for R in manifest.get("distance_radii", []):
        try:
            distances[float(R)] = _distance_file(run_dir, float(R))
        except OSError as err:
            raise InputError(f"missing distance record for R = {R}: {err}") from None
    reports = verify_battery(ledger, c, sup_omega, wins, center, distances,
                             manifest.get("epsilons", []))
    horizon = {f"{T:.12g}": {"required_L": c.horizon(T), "ok": c.horizon_ok(grid.L, T)}
               for T in ledger.times}
    doc = {
        "schema": SCHEMA_VERSION,
        "run_dir": str(run_dir),
        "run_status": manifest.get("status"),
        "constants": {"kernel": k.to_dict(), "framework": c.to_dict()},
        "horizon": horizon,
        "summary": summarize(reports),
        "reports": [r.to_dict() for r in reports],
    }
    out_path = Path(out) if out is not None else run_dir / REPORT
    if out_path.suffix != ".json":
        out_path.mkdir(parents=True, exist_ok=True)
        out_path = out_path / REPORT
    _write_json(out_path, doc)
    failed = any(r.verdict == FAIL for r in reports)
    return (EXIT_CHECK_FAILED if failed else EXIT_OK), doc


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

SWEEP_PARAMETERS = ("T", "U", "seed")


def _sweep_override(raw: dict, param: str, value) -> dict:
    if param == "T":
        data = set_key(raw, "time.T", float(value))
        cps = [cp for cp in data.get("time", {}).get("checkpoints", []) or [] if cp <= float(value)]
        return set_key(data, "time.checkpoints", cps)
    if param == "U":
        kind = raw.get("ic", {}).get("kind")
        key = "amplitude" if kind == "random_band_limited" else ("A" if kind == "taylor_green" else "U")
        return set_key(raw, f"ic.params.{key}", float(value))
    if param == "seed":
        return set_key(raw, "ic.seed", int(value))
    raise ConfigError(f"cannot sweep over '{param}'; choose from {SWEEP_PARAMETERS}")


def cmd_sweep(raw: dict, param: str, values, out_dir: Path, source: str = "<sweep>") -> Path:
    """Run one configuration per value and aggregate the trend quantities.

    Writes ``sweep.csv`` (one row per run) and ``sweep_fit.json`` (log-log
    slopes against the swept value, or ensemble statistics for seeds).
    Failed runs are recorded and the sweep continues.
    """
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    if param not in SWEEP_PARAMETERS:
        raise ConfigError(f"cannot sweep over '{param}'; choose from {SWEEP_PARAMETERS}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in values:
        row = {"param": param, "value": value, "status": "ok", "message": ""}
        try:
            data = _sweep_override(raw, param, value)
            data = set_key(data, "output.dir", str(out_dir / f"{param}_{value}"))
            cfg = parse_config(data, source)
            result, run_dir = cmd_run(cfg)
            row["status"] = result.status
            snap = result.ledger.at()
            hist = result.ledger.run_history()
            T = result.ledger.t
            row["T"] = T
            row["e_star_T"] = float(np.max(snap.eT))
            row["sup_u_T"] = float(hist["sup_u"][-1])
            row["E_star_T"] = snap.E_star
            for rec in result.distances:
                t, d, _ = rec.arrays()
                for eps in cfg.epsilons:
                    occ = occupation_time(t, d, eps, rec.R, T)
                    row[f"time_outside_R{rec.R:g}_eps{eps:g}"] = occ.time_outside
        except Exception as err:  # noqa: BLE001 - one failed run must not stop the sweep
            row["status"] = "error"
            row["message"] = f"{type(err).__name__}: {err}"
        rows.append(row)

    numeric = sorted({k for r in rows for k, v in r.items()
                      if isinstance(v, float) and k not in ("value",)})
    cols = ["param", "value", "status", *numeric, "message"]
    with open(out_dir / "sweep.csv", "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            cells = []
            for ccol in cols:
                v = r.get(ccol, "")
                cells.append(CSV_FORMAT % v if isinstance(v, float) else str(v).replace(",", ";"))
            fh.write(",".join(cells) + "\n")

    ok = [r for r in rows if r["status"] == "complete"]
    fit = {"param": param, "runs": len(rows), "completed": len(ok), "quantities": {}}
    for q in numeric:
        ys = np.array([r[q] for r in ok if q in r], dtype=float)
        if ys.size == 0:
            continue
        if param == "seed":
            mean = float(np.mean(ys))
            sd = float(np.std(ys, ddof=1)) if ys.size > 1 else 0.0
            half = 1.96 * sd / math.sqrt(ys.size)
            fit["quantities"][q] = {"mean": mean, "std": sd, "ci95": [mean - half, mean + half]}
        else:
            xs = np.array([float(r["value"]) for r in ok if q in r])
            fit["quantities"][q] = {"loglog_slope": fit_loglog_slope(xs, ys),
                                    "nonincreasing": bool(np.all(np.diff(ys) <= 1e-12 * np.abs(ys[:-1])))}
    _write_json(out_dir / "sweep_fit.json", fit)
    return out_dir / "sweep.csv"
