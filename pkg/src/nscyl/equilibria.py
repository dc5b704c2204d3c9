"""Distance to the family of vertical shear-free flows ``(0, m)`` and occupation times."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .fields import FlowState, VelocityField, reconstruct_velocity
from .report import FAIL, PASS, SKIP, TREND, BoundReport
from .spectral import Grid, window_indices, window_integral

TERNARY_TOL = 1e-10


def _window_rows(grid: Grid, R: float, center: float | None) -> np.ndarray:
    if not R > 0:
        raise ValueError("R must be positive")
    if 2 * R > grid.L * (1 + 1e-12):
        raise ValueError(f"window of half-width {R} exceeds the box of length {grid.L}")
    c = grid.L / 2 if center is None else center
    ia, ib = window_indices(grid, c - R, c + R)
    return np.arange(ia, ib + 1) % grid.N1


def _g(u1sq: np.ndarray, u2: np.ndarray, m: float) -> float:
    return float(np.sqrt(np.max(u1sq + (u2 - m) ** 2)))


def distance_to_equilibria(u: VelocityField, R: float, center: float | None = None) -> tuple[float, float]:
    """``d_R = inf_m max_{|x1 - c| <= R} |u - (0, m)|`` and the optimal m.

    ``g(m)`` is a maximum of convex functions, so ternary search on
    ``[min u2 - 1, max u2 + 1]`` converges to the global minimum.
    """
    rows = _window_rows(u.grid, R, center)
    return distance_from_arrays(u.u1.values[rows], u.u2.values[rows])


def distance_from_arrays(u1: np.ndarray, u2: np.ndarray) -> tuple[float, float]:
    u1sq = (u1 * u1).ravel()
    u2 = u2.ravel()
    lo, hi = float(np.min(u2)) - 1.0, float(np.max(u2)) + 1.0
    while hi - lo > TERNARY_TOL:
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if _g(u1sq, u2, m1) <= _g(u1sq, u2, m2):
            hi = m2
        else:
            lo = m1
    m = 0.5 * (lo + hi)
    return _g(u1sq, u2, m), m


def distance_brute_force(u: VelocityField, R: float, center: float | None = None,
                         samples: int = 1_000_000, chunk: int = 2000) -> tuple[float, float]:
    """Reference: scan ``samples`` equispaced candidates on the ternary bracket."""
    rows = _window_rows(u.grid, R, center)
    u1sq = (u.u1.values[rows] ** 2).ravel()
    u2 = u.u2.values[rows].ravel()
    cand = np.linspace(float(np.min(u2)) - 1, float(np.max(u2)) + 1, samples)
    best, best_m = math.inf, float("nan")
    for s in range(0, samples, chunk):
        mm = cand[s:s + chunk, None]
        vals = np.max(u1sq[None, :] + (u2[None, :] - mm) ** 2, axis=1)
        j = int(np.argmin(vals))
        if vals[j] < best:
            best, best_m = float(vals[j]), float(mm[j, 0])
    return math.sqrt(best), best_m


def _grad_l2_window(u: VelocityField, R: float, center: float | None) -> float:
    grid = u.grid
    total = np.zeros(grid.N1)
    for comp in (u.u1.values, u.u2.values):
        h = grid.fft(comp)
        d = grid.ifft(np.stack([grid.ik1 * h, grid.ik2 * h]))
        total += (d[0] ** 2 + d[1] ** 2).mean(axis=1)
    c = grid.L / 2 if center is None else center
    return math.sqrt(max(window_integral(grid, total, c - R, c + R), 0.0))


def check_dist_lemma(u: VelocityField, omega, R: float, theta: float, M: float,
                     center: float | None = None) -> BoundReport:
    """Ratio ``d_R / (M^theta R^{(1+theta)/2} ||grad u||_{L2(B_R)}^{1-theta})`` for one state.

    The constant in front is not explicit, so a single ratio has no verdict;
    :func:`dist_lemma_ensemble` judges boundedness over an ensemble.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    w = omega.values if hasattr(omega, "values") else np.asarray(omega)
    if float(np.max(np.abs(w))) > M * (1 + 1e-12):
        raise ValueError("vorticity exceeds M")
    dist, m_star = distance_to_equilibria(u, R, center)
    grad = _grad_l2_window(u, R, center)
    denom = M ** theta * R ** ((1 + theta) / 2) * grad ** (1 - theta)
    if dist <= TERNARY_TOL and grad <= 1e-12:
        return BoundReport("dist_lemma_ratio", 0.0, 0.0, SKIP, location={"R": R},
                           note="equilibrium: distance and gradient vanish")
    ratio = dist / denom if denom > 0 else math.inf
    return BoundReport("dist_lemma_ratio", ratio, float("nan"), TREND,
                       location={"R": R, "m_star": m_star},
                       constants={"theta": theta, "M": M, "d_R": dist, "grad_L2": grad})


def dist_lemma_ensemble(reports, factor: float = 10.0) -> BoundReport:
    """Uniform boundedness: ``max rho <= factor * median rho`` over non-trivial ratios."""
    rhos = np.array([r.lhs for r in reports if r.verdict != SKIP], dtype=float)
    if rhos.size == 0:
        return BoundReport("dist_lemma_bounded", 0.0, 0.0, SKIP, note="no non-trivial states")
    med = float(np.median(rhos))
    top = float(np.max(rhos))
    verdict = PASS if np.all(np.isfinite(rhos)) and top <= factor * med else FAIL
    return BoundReport("dist_lemma_bounded", top, factor * med, verdict,
                       constants={"median": med, "count": int(rhos.size)})


class DistanceRecorder:
    """Callback recording ``(t, d_R, m*)`` at every step for one window."""

    def __init__(self, R: float, center: float | None = None):
        self.R = float(R)
        self.center = center
        self.t: list[float] = []
        self.d: list[float] = []
        self.m: list[float] = []

    def __call__(self, state: FlowState) -> None:
        u = reconstruct_velocity(state)
        dist, m = distance_to_equilibria(u, self.R, self.center)
        self.t.append(state.t)
        self.d.append(dist)
        self.m.append(m)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.array(self.t), np.array(self.d), np.array(self.m)


@dataclass
class OccupationRecord:
    """Time spent at distance >= epsilon from the equilibria on ``[0, T]``."""

    epsilon: float
    R: float
    T: float
    time_outside: float
    samples: int

    def __post_init__(self):
        if not 0 <= self.time_outside <= self.T * (1 + 1e-12):
            raise ValueError("time_outside must lie in [0, T]")

    @property
    def fraction(self) -> float:
        return self.time_outside / self.T

    def to_dict(self) -> dict:
        out = asdict(self)
        out["fraction"] = self.fraction
        return out


def occupation_time(t, d_R, epsilon: float, R: float, T: float) -> OccupationRecord:
    """Left-rectangle quadrature of ``1{d_R(t) >= epsilon}`` over ``[0, T]``.

    Step ``[t_n, t_{n+1})`` counts as outside when ``d_R(t_n) >= epsilon``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    t = np.asarray(t, dtype=float)
    d_R = np.asarray(d_R, dtype=float)
    if t.shape != d_R.shape or t.size < 2:
        raise ValueError("need matching time and distance samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must increase")
    keep = t <= T * (1 + 1e-12)
    t, d_R = t[keep], d_R[keep]
    widths = np.diff(t)
    outside = float(np.sum(widths[d_R[:-1] >= epsilon]))
    return OccupationRecord(epsilon=epsilon, R=R, T=float(T), time_outside=min(outside, T),
                            samples=int(t.size))


def fit_loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x over positive entries."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def occupation_trend(records) -> BoundReport:
    """Fractions across a T-sweep, monotonicity, and the fitted growth exponent."""
    records = sorted(records, key=lambda r: r.T)
    fr = [r.fraction for r in records]
    decreasing = all(b < a for a, b in zip(fr, fr[1:]))
    slope = fit_loglog_slope([r.T for r in records], [r.time_outside for r in records])
    return BoundReport("occupation_fraction", fr[-1], fr[0], TREND,
                       constants={"T": [r.T for r in records], "fractions": fr,
                                  "loglog_slope": slope, "decreasing": decreasing},
                       note="time_outside ~ T^slope; compare with 3/4 + c")
