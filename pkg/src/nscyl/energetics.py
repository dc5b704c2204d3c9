"""Energy density, flux and dissipation profiles and their time integrals.

Per horizontal station x1:

* ``e = <|u|^2>/2 + 1``           energy density
* ``h = <(|u|^2/2 + p) u1>``      inviscid flux
* ``d = <|grad u|^2>``            dissipation rate
* ``f = d1 e - h``                total flux, so that ``d_t e = d1 f - d``

``<.>`` is the vertical average.  The ledger integrates e, f, d and e^2 in
time with the trapezoid rule (identical weights for all of them) and keeps
O(N1) state plus a handful of scalars per step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fields import FlowState, check_circulation, velocity_hats
from .spectral import Grid, line_derivative, window_indices, window_integral

CSV_FORMAT = "%.17g"
LEDGER_COLUMNS = ("x1", "e0", "eT", "E", "F", "D", "EE")
RUN_COLUMNS = ("t", "e_star", "sup_u", "sup_omega", "EE_star")
POINTWISE_COLUMNS = (
    "t", "dt", "E_star", "sup_d", "sup_m", "a2_coef", "a2_x1", "a5_coef", "a5_x1",
    "h_coef", "mb2_excess", "mb2_x1",
)
PAIR_TOL = 1e-12


class TimeRegressionError(ValueError):
    """Raised when profiles are accumulated out of time order."""


@dataclass(frozen=True, eq=False)
class EnergyProfiles:
    """Profiles of one state.

    Attributes:
        t: time.
        e, h, d, f: energy density, inviscid flux, dissipation, total flux.
        de: spectral ``d1 e``.
        m: mean vertical flow ``<u2>``.
        sup_u: max speed on the grid.
        sup_omega: max |omega| on the grid.
    """

    t: float
    e: np.ndarray
    h: np.ndarray
    d: np.ndarray
    f: np.ndarray
    de: np.ndarray
    m: np.ndarray
    sup_u: float
    sup_omega: float


def profiles_from_arrays(grid: Grid, omega: np.ndarray, m0: float, t: float = 0.0,
                         omega_hat: np.ndarray | None = None) -> EnergyProfiles:
    w_hat = grid.fft(omega) if omega_hat is None else omega_hat
    u1h, u2h = velocity_hats(grid, w_hat, m0)
    fields = grid.ifft(np.stack([
        u1h, u2h,
        grid.ik1 * u1h, grid.ik2 * u1h,
        grid.ik1 * u2h, grid.ik2 * u2h,
    ]))
    u1, u2 = fields[0], fields[1]
    q_hat = grid.fft(omega * u1)
    p = -u1 * u1 - 2 * grid.ifft(grid.ik2 * grid.inv_neg_ksq * q_hat)
    ke = 0.5 * (u1 * u1 + u2 * u2)
    e = ke.mean(axis=1) + 1.0
    h = ((ke + p) * u1).mean(axis=1)
    d = (fields[2] ** 2 + fields[3] ** 2 + fields[4] ** 2 + fields[5] ** 2).mean(axis=1)
    de = line_derivative(grid, e)
    return EnergyProfiles(
        t=float(t), e=e, h=h, d=d, f=de - h, de=de, m=u2.mean(axis=1),
        sup_u=float(np.sqrt(np.max(2 * ke))), sup_omega=float(np.max(np.abs(omega))),
    )


def energy_profiles(state: FlowState) -> EnergyProfiles:
    """Profiles e, h, d, f of ``state``; vertical averages are exact grid means."""
    check_circulation(state.grid, state.omega_hat, state.sup_omega)
    return profiles_from_arrays(state.grid, state.omega.values, state.m0, state.t,
                                omega_hat=state.omega_hat)


def pair_coefficient(num: np.ndarray, e: np.ndarray, d: np.ndarray,
                     abs_tol: float = PAIR_TOL) -> np.ndarray:
    """Smallest c with ``num <= c e d + abs_tol`` at each sample (inf if impossible)."""
    excess = np.maximum(num - abs_tol, 0.0)
    ed = e * d
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(ed > 0, excess / np.where(ed > 0, ed, 1.0), np.where(excess > 0, np.inf, 0.0))
    return coef


@dataclass
class LedgerSnapshot:
    """Ledger state at one checkpoint time."""

    T: float
    e0: np.ndarray
    eT: np.ndarray
    E: np.ndarray
    F: np.ndarray
    D: np.ndarray
    EE: np.ndarray
    steps: int = 0
    window_sup_A: dict = field(default_factory=dict)

    @property
    def e_star0(self) -> float:
        return float(np.max(self.e0))

    @property
    def E_star(self) -> float:
        return float(np.max(self.E))

    @property
    def EE_star(self) -> float:
        return float(math.sqrt(np.max(self.EE)))


def _key(window) -> str:
    a, b = window
    return f"{a:.12g}:{b:.12g}"


class EnergyLedger:
    """Time-integrated energy bookkeeping for one run.

    Args:
        grid: spatial grid.
        windows: windows ``(a, b)`` whose available energy is tracked at every step.
        checkpoints: times at which full snapshots are stored (the latest time
            is always available as well).
    """

    def __init__(self, grid: Grid, windows=(), checkpoints=()):
        self.grid = grid
        self.windows = [tuple(map(float, w)) for w in windows]
        for a, b in self.windows:
            window_indices(grid, a, b)
        self.checkpoint_times = sorted(float(t) for t in checkpoints)
        self.snapshots: dict[float, LedgerSnapshot] = {}
        self.t: float | None = None
        self.steps = 0
        self._rows: list[tuple] = []
        self._pointwise: list[tuple] = []
        self._e0_window: dict[str, float] = {}
        self._sup_A: dict[str, float] = {}

    # -- accumulation -----------------------------------------------------

    def accumulate(self, p: EnergyProfiles) -> "EnergyLedger":
        """Add one time level; the first call fixes the initial data."""
        if self.t is None:
            n = self.grid.N1
            self.e0 = p.e.copy()
            self.E = np.zeros(n)
            self.F = np.zeros(n)
            self.D = np.zeros(n)
            self.EE = np.zeros(n)
            for w in self.windows:
                a0 = window_integral(self.grid, self.e0, *w)
                self._e0_window[_key(w)] = a0
                self._sup_A[_key(w)] = a0
            dt = 0.0
        else:
            dt = p.t - self.t
            if not dt > 0:
                raise TimeRegressionError(f"time {p.t} does not advance past {self.t}")
            half = 0.5 * dt
            self.E += half * (self._e + p.e)
            self.F += half * (self._f + p.f)
            self.D += half * (self._d + p.d)
            self.EE += half * (self._e ** 2 + p.e ** 2)
            self.steps += 1
            for w in self.windows:
                k = _key(w)
                A = self._available(w)
                if A > self._sup_A[k]:
                    self._sup_A[k] = A
        self.t = p.t
        self._e, self._f, self._d = p.e, p.f, p.d
        self.eT = p.e
        self._record(p, dt)
        for T in self.checkpoint_times:
            if abs(T - p.t) <= 1e-9 * max(1.0, T):
                self.snapshots[T] = self._snapshot(T)
        return self

    def _available(self, w) -> float:
        ia, ib = window_indices(self.grid, *w)
        n = self.grid.N1
        return self._e0_window[_key(w)] + self.F[ib % n] - self.F[ia % n]

    def _record(self, p: EnergyProfiles, dt: float) -> None:
        a2 = pair_coefficient(p.f ** 2, p.e, p.d)
        a5 = pair_coefficient(p.de ** 2, p.e, p.d)
        hc = pair_coefficient(p.h ** 2, p.e, p.d)
        ia2 = int(np.argmax(a2))
        ia5 = int(np.argmax(a5))
        mb2 = p.m ** 2 - 4 * p.e
        imb = int(np.argmax(mb2))
        x = self.grid.x1
        e_star = float(np.max(p.e))
        self._rows.append((p.t, e_star, p.sup_u, p.sup_omega, math.sqrt(float(np.max(self.EE)))))
        self._pointwise.append((
            p.t, dt, float(np.max(self.E)), float(np.max(p.d)), float(np.max(np.abs(p.m))),
            float(a2[ia2]), float(x[ia2]), float(a5[ia5]), float(x[ia5]),
            float(np.max(hc)), float(mb2[imb]), float(x[imb]),
        ))

    def _snapshot(self, T: float) -> LedgerSnapshot:
        return LedgerSnapshot(
            T=T, e0=self.e0.copy(), eT=self.eT.copy(), E=self.E.copy(), F=self.F.copy(),
            D=self.D.copy(), EE=self.EE.copy(), steps=self.steps,
            window_sup_A={k: v for k, v in self._sup_A.items()},
        )

    # -- queries ------------------------------------------------------------

    def at(self, T: float | None = None) -> LedgerSnapshot:
        """Snapshot at checkpoint ``T`` or, with ``T=None``, at the latest time."""
        if self.t is None:
            raise ValueError("ledger is empty")
        if T is None or abs(T - self.t) <= 1e-9 * max(1.0, abs(T)):
            if T is not None and T in self.snapshots:
                return self.snapshots[T]
            return self._snapshot(self.t)
        for key, snap in self.snapshots.items():
            if abs(key - T) <= 1e-9 * max(1.0, T):
                return snap
        raise KeyError(f"no ledger snapshot at T = {T}; available: {sorted(self.snapshots)}")

    @property
    def times(self) -> list[float]:
        return sorted(set(self.snapshots) | ({self.t} if self.t is not None else set()))

    def run_history(self) -> dict[str, np.ndarray]:
        arr = np.array(self._rows, dtype=float).reshape(-1, len(RUN_COLUMNS))
        return {c: arr[:, i] for i, c in enumerate(RUN_COLUMNS)}

    def pointwise_history(self) -> dict[str, np.ndarray]:
        arr = np.array(self._pointwise, dtype=float).reshape(-1, len(POINTWISE_COLUMNS))
        return {c: arr[:, i] for i, c in enumerate(POINTWISE_COLUMNS)}

    def history(self, T: float | None = None) -> dict[str, np.ndarray]:
        """Per-step scalars (run and pointwise columns) up to time ``T``."""
        hist = self.run_history()
        hist.update({k: v for k, v in self.pointwise_history().items() if k != "t"})
        if T is not None:
            keep = hist["t"] <= T * (1 + 1e-12) + 1e-12
            hist = {k: v[keep] for k, v in hist.items()}
        return hist

    # -- export / import -------------------------------------------------------

    def write_csv(self, directory: Path) -> list[Path]:
        """Write one ledger CSV per snapshot plus the run and pointwise histories."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for T in self.times:
            snap = self.at(T)
            path = directory / f"ledger_T{T:.12g}.csv"
            data = np.column_stack([self.grid.x1, snap.e0, snap.eT, snap.E, snap.F, snap.D, snap.EE])
            _write_table(path, LEDGER_COLUMNS, data)
            written.append(path)
        for name, cols, rows in (("run.csv", RUN_COLUMNS, self._rows),
                                 ("pointwise.csv", POINTWISE_COLUMNS, self._pointwise)):
            path = directory / name
            _write_table(path, cols, np.array(rows, dtype=float).reshape(-1, len(cols)))
            written.append(path)
        return written

    def window_summary(self) -> dict:
        return {
            "windows": [list(w) for w in self.windows],
            "sup_A": {f"{T:.12g}": self.at(T).window_sup_A for T in self.times},
            "e0_window": dict(self._e0_window),
        }

    @classmethod
    def from_files(cls, grid: Grid, directory: Path, window_summary: dict | None = None) -> "EnergyLedger":
        """Rebuild a read-only ledger from the CSV files written by :meth:`write_csv`."""
        directory = Path(directory)
        ledger = cls(grid)
        paths = sorted(directory.glob("ledger_T*.csv"))
        if not paths:
            raise FileNotFoundError(f"no ledger files in {directory}")
        for path in paths:
            data = _read_table(path, LEDGER_COLUMNS)
            if data.shape[0] != grid.N1:
                raise ValueError(f"{path.name}: expected {grid.N1} rows, found {data.shape[0]}")
            if not np.allclose(data[:, 0], grid.x1, rtol=0, atol=1e-9 * grid.L):
                raise ValueError(f"{path.name}: x1 column does not match the grid")
            T = float(path.stem[len("ledger_T"):])
            snap = LedgerSnapshot(T, *(data[:, i] for i in range(1, 7)))
            ledger.snapshots[T] = snap
        if window_summary:
            ledger.windows = [tuple(w) for w in window_summary.get("windows", [])]
            ledger._e0_window = dict(window_summary.get("e0_window", {}))
            for T, sups in window_summary.get("sup_A", {}).items():
                for snapT, snap in ledger.snapshots.items():
                    if abs(snapT - float(T)) <= 1e-9 * max(1.0, snapT):
                        snap.window_sup_A = dict(sups)
        run = _read_table(directory / "run.csv", RUN_COLUMNS)
        pw = _read_table(directory / "pointwise.csv", POINTWISE_COLUMNS)
        ledger._rows = [tuple(r) for r in run]
        ledger._pointwise = [tuple(r) for r in pw]
        last = max(ledger.snapshots)
        snap = ledger.snapshots[last]
        ledger.t = last
        ledger.e0, ledger.eT = snap.e0, snap.eT
        ledger.E, ledger.F, ledger.D, ledger.EE = snap.E, snap.F, snap.D, snap.EE
        ledger.checkpoint_times = sorted(ledger.snapshots)
        ledger.steps = len(ledger._rows) - 1
        return ledger


def _write_table(path: Path, columns, data: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in data:
            fh.write(",".join(CSV_FORMAT % v for v in row) + "\n")


def _read_table(path: Path, columns) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != tuple(columns):
            raise ValueError(f"{Path(path).name}: unexpected header {header}")
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(-1, len(columns))
    if not np.all(np.isfinite(data) | np.isinf(data)):
        raise ValueError(f"{Path(path).name}: non-numeric entries")
    return data


def available_energy(ledger: EnergyLedger, a: float, b: float, T: float | None = None) -> float:
    """``int_a^b e(x,0) dx + F(b,T) - F(a,T)`` with endpoints snapped to the grid."""
    snap = ledger.at(T)
    grid = ledger.grid
    ia, ib = window_indices(grid, a, b)
    n = grid.N1
    return window_integral(grid, snap.e0, a, b) + snap.F[ib % n] - snap.F[ia % n]


def dissipated_energy(ledger: EnergyLedger, a: float, b: float, T: float | None = None) -> float:
    """``int_a^b D(x,T) dx``."""
    return window_integral(ledger.grid, ledger.at(T).D, a, b)


def balance_residual(ledger: EnergyLedger, a: float, b: float, T: float | None = None) -> float:
    """Defect of the integrated balance ``int (e_T - e_0) - [F]_a^b + D = 0``."""
    snap = ledger.at(T)
    grid = ledger.grid
    ia, ib = window_indices(grid, a, b)
    n = grid.N1
    change = window_integral(grid, snap.eT - snap.e0, a, b)
    flux = snap.F[ib % n] - snap.F[ia % n]
    return abs(change - flux + window_integral(grid, snap.D, a, b))


def ledger_callback(ledger: EnergyLedger):
    """Callback for :func:`nscyl.dynamics.run` that feeds ``ledger`` every step."""
    def _cb(state: FlowState) -> None:
        ledger.accumulate(energy_profiles(state))
    return _cb
