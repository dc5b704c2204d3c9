"""Framework constants and the inequality checks run on an energy ledger.

Constants for a vorticity bound M:

* ``C4`` bounds ``h^2 <= C4 e d``.  Split ``h = h1 + h2`` with
  ``h1 = <|u|^2 u1 / 2>`` and ``h2 = <p u1>``.  Since ``<u1> = 0`` the ``m^2``
  part of ``|u|^2`` drops out of h1, and the vertical Poincare inequality
  ``||u1||_{L2(T)} <= d^{1/2} / (2 pi)`` together with ``||u||_{L2(T)}^2 <= 2e``
  and ``e >= 1`` give ``|h1| <= c_a C1 M (ed)^{1/2}`` with
  ``c_a = 3 sqrt(2) / (4 pi)`` and ``|h2| <= c_b C2 M^2 (ed)^{1/2}`` with
  ``c_b = 1 / (2 pi)``.
* ``gamma = 2`` from ``(d1 e)^2 <= 2 e d`` (Cauchy-Schwarz).
* ``beta = 2 gamma + 2 C4`` from ``f = d1 e - h`` and ``(a - b)^2 <= 2a^2 + 2b^2``.
* ``sigma = (beta gamma)^{1/4}``,
  ``sqrt(kappa) = sigma (1 + sigma) + sqrt(sigma^2 (1 + sigma)^2 + 1 + sigma)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .energetics import EnergyLedger, dissipated_energy
from .kernel import KernelConstants
from .report import CAVEAT, FAIL, PASS, SKIP, TREND, BoundReport
from .spectral import window_indices, window_integral

GAMMA = 2.0
POINCARE = 1 / (2 * math.pi)
C_A = 3 * math.sqrt(2) / (4 * math.pi)
C_B = POINCARE
LOOSE_REL_TOL = 1e-6


def kappa_from_sigma(sigma: float) -> float:
    """kappa with ``sqrt(kappa) = sigma (1+sigma) + sqrt(sigma^2 (1+sigma)^2 + (1+sigma))``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    a = sigma * (1 + sigma)
    root = a + math.sqrt(a * a + 1 + sigma)
    return root * root


@dataclass(frozen=True)
class Constants:
    """Constants of the energy framework for one vorticity bound M."""

    M: float
    C1: float
    C2: float
    C4: float
    beta: float
    gamma: float
    sigma: float
    kappa: float
    delta: float | None = None
    c_a: float = C_A
    c_b: float = C_B
    poincare: float = POINCARE
    provenance: tuple = ()

    def horizon(self, T: float) -> float:
        """Box length needed so that the periodic run emulates the line up to time T."""
        return 4 * math.sqrt(self.beta * self.kappa * T)

    def horizon_ok(self, L: float, T: float) -> bool:
        return L >= self.horizon(T)

    def with_delta(self, delta: float) -> "Constants":
        return replace(self, delta=float(delta))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["provenance"] = list(self.provenance)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "Constants":
        names = {f for f in cls.__dataclass_fields__}
        kw = {k: v for k, v in data.items() if k in names}
        kw["provenance"] = tuple(kw.get("provenance", ()))
        return cls(**kw)


def derive_constants(k: KernelConstants, M: float, delta: float | None = None) -> Constants:
    """Assemble C4, beta, gamma, sigma and kappa from the kernel constants and M."""
    if not (M > 0 and math.isfinite(M)):
        raise ValueError(f"vorticity bound M must be positive, got {M}")
    C1, C2 = float(k.C1), float(k.C2)
    C4 = (C_A * C1 * M + C_B * C2 * M * M) ** 2
    beta = 2 * GAMMA + 2 * C4
    sigma = (beta * GAMMA) ** 0.25
    kappa = kappa_from_sigma(sigma)
    trace = (
        f"M = {M:.12g} (sup of |omega| at t = 0)",
        f"C1 = {C1:.12g}, C2 = {C2:.12g} from the kernel norms",
        "||u1||_L2(T) <= d^(1/2)/(2 pi) (Poincare, <u1> = 0); ||u||_L2(T)^2 <= 2e; e >= 1",
        f"|<|u|^2 u1>/2| <= (||u1_osc||/2 + ||u2_osc||) M sqrt(2e) sqrt(d)/(2 pi) <= c_a C1 M sqrt(ed), "
        f"c_a = 3 sqrt(2)/(4 pi) = {C_A:.12g}",
        f"|<p u1>| <= C2 M^2 sqrt(d)/(2 pi) <= c_b C2 M^2 sqrt(ed), c_b = 1/(2 pi) = {C_B:.12g}",
        f"C4 = (c_a C1 M + c_b C2 M^2)^2 = {C4:.12g}",
        "gamma = 2 from (d1 e)^2 = <u . d1 u>^2 <= 2 e d",
        f"beta = 2 gamma + 2 C4 = {beta:.12g}",
        f"sigma = (beta gamma)^(1/4) = {sigma:.12g}",
        f"kappa = (sigma(1+sigma) + sqrt(sigma^2(1+sigma)^2 + 1 + sigma))^2 = {kappa:.12g}",
    )
    return Constants(M=float(M), C1=C1, C2=C2, C4=C4, beta=beta, gamma=GAMMA, sigma=sigma,
                     kappa=kappa, delta=delta, provenance=trace)


def _horizon_caveat(ledger: EnergyLedger, T: float, c: Constants) -> str | None:
    need = c.horizon(T)
    if ledger.grid.L >= need:
        return None
    return f"horizon-violated: L = {ledger.grid.L:.6g} < 4 sqrt(beta kappa T) = {need:.6g}"


def _worst(hist: dict, column: str, xcol: str | None = None) -> tuple[float, dict]:
    values = hist[column]
    if values.size == 0:
        return 0.0, {}
    i = int(np.argmax(values))
    loc = {"t": float(hist["t"][i])}
    if xcol:
        loc["x1"] = float(hist[xcol][i])
    return float(values[i]), loc


def _T(ledger: EnergyLedger, T: float | None) -> float:
    return ledger.t if T is None else float(T)


def check_A2prime(ledger: EnergyLedger, c: Constants, T: float | None = None) -> BoundReport:
    """Worst ``f^2 / (e d)`` over all stored samples against beta.

    Each sample is reduced to the smallest coefficient that satisfies
    ``f^2 <= coef e d + 1e-12``, so d = 0 points need no division.
    """
    hist = ledger.history(T)
    lhs, loc = _worst(hist, "a2_coef", "a2_x1")
    return BoundReport.compare("A2prime", lhs, c.beta, rel_tol=LOOSE_REL_TOL, location=loc,
                               constants={"beta": c.beta})


def check_A5(ledger: EnergyLedger, c: Constants | None = None, T: float | None = None) -> BoundReport:
    """Worst ``(d1 e)^2 / (e d)`` against gamma = 2."""
    hist = ledger.history(T)
    lhs, loc = _worst(hist, "a5_coef", "a5_x1")
    return BoundReport.compare("A5", lhs, GAMMA, location=loc, constants={"gamma": GAMMA})


def check_C4(ledger: EnergyLedger, c: Constants, T: float | None = None) -> BoundReport:
    """Empirical ``sup h^2 / (e d)`` against the derived C4."""
    hist = ledger.history(T)
    lhs, loc = _worst(hist, "h_coef")
    return BoundReport.compare("C4_empirical", lhs, c.C4, rel_tol=LOOSE_REL_TOL, location=loc,
                               constants={"C4": c.C4})


def _window_slice(ledger: EnergyLedger, a: float, b: float) -> np.ndarray:
    ia, ib = window_indices(ledger.grid, a, b)
    return np.arange(ia, ib + 1) % ledger.grid.N1


def check_local_flux(ledger: EnergyLedger, a: float, b: float, T: float | None, c: Constants) -> list[BoundReport]:
    """Local flux bounds at both ends of ``[a, b]``.

    ``F(a,T) <= sqrt(beta e*([a,b],0) E*([a,b],T)) + beta E*([a,b],T) / (b - a)`` and
    ``-F(b,T) <=`` the same right-hand side.  Endpoints snap to the grid.
    """
    T = _T(ledger, T)
    snap = ledger.at(T)
    grid = ledger.grid
    ia, ib = window_indices(grid, a, b)
    idx = _window_slice(ledger, a, b)
    length = (ib - ia) * grid.dx1
    e_star = float(np.max(snap.e0[idx]))
    E_star = float(np.max(snap.E[idx]))
    rhs = math.sqrt(c.beta * e_star * E_star) + c.beta * E_star / length
    consts = {"beta": c.beta, "e_star_window_0": e_star, "E_star_window_T": E_star}
    xa, xb = ia * grid.dx1, ib * grid.dx1
    return [
        BoundReport.compare("local_flux_left", snap.F[ia % grid.N1], rhs,
                            location={"x1": xa, "T": T, "window": [xa, xb]}, constants=consts),
        BoundReport.compare("local_flux_right", -snap.F[ib % grid.N1], rhs,
                            location={"x1": xb, "T": T, "window": [xa, xb]}, constants=consts),
    ]


def check_global_flux(ledger: EnergyLedger, T: float | None, c: Constants) -> list[BoundReport]:
    """``|F(x,T)| <= sqrt(beta e*(0) E*(T))`` and ``|F(x,T)| <= e*(0) sqrt(kappa beta T)``."""
    T = _T(ledger, T)
    snap = ledger.at(T)
    absF = np.abs(snap.F)
    i = int(np.argmax(absF))
    loc = {"x1": float(ledger.grid.x1[i]), "T": T}
    caveat = _horizon_caveat(ledger, T, c)
    e0, E = snap.e_star0, snap.E_star
    return [
        BoundReport.compare("fluxbound", absF[i], math.sqrt(c.beta * e0 * E), location=loc,
                            constants={"beta": c.beta, "e_star_0": e0, "E_star_T": E}, caveat=caveat),
        BoundReport.compare("flux_kappa", absF[i], e0 * math.sqrt(c.kappa * c.beta * T), location=loc,
                            constants={"beta": c.beta, "kappa": c.kappa, "e_star_0": e0},
                            caveat=caveat),
    ]


def check_L2_energy(ledger: EnergyLedger, T: float | None, c: Constants) -> list[BoundReport]:
    """Global energy bounds, Cauchy-Schwarz chain and the windowed L2 bound on tracked windows."""
    T = _T(ledger, T)
    snap = ledger.at(T)
    caveat = _horizon_caveat(ledger, T, c)
    e0 = snap.e_star0
    EE = snap.EE_star
    E = snap.E_star
    consts = {"kappa": c.kappa, "e_star_0": e0}
    reports = [
        BoundReport.compare("L2energy_EE", EE, c.kappa * e0 * math.sqrt(T), location={"T": T},
                            constants=consts, caveat=caveat),
        BoundReport.compare("L2energy_E", E, c.kappa * e0 * T, location={"T": T},
                            constants=consts, caveat=caveat),
        BoundReport.compare("cauchy_schwarz", E, math.sqrt(T) * EE, location={"T": T}),
    ]
    grid = ledger.grid
    for (a, b) in ledger.windows:
        key = f"{a:.12g}:{b:.12g}"
        if key not in snap.window_sup_A:
            continue
        ia, ib = window_indices(grid, a, b)
        idx = _window_slice(ledger, a, b)
        length = (ib - ia) * grid.dx1
        sup_A = float(snap.window_sup_A[key])
        ee = np.sqrt(snap.EE[idx])
        j = int(np.argmax(ee))
        rhs = (math.sqrt(T) / length + math.sqrt(GAMMA)) * sup_A
        reports.append(BoundReport.compare(
            "L2first", ee[j], rhs,
            location={"x1": float(grid.x1[idx[j]]), "T": T, "window": [ia * grid.dx1, ib * grid.dx1]},
            constants={"gamma": GAMMA, "sup_A": sup_A}))
    return reports


def _centered_window(ledger: EnergyLedger, R: float, center: float | None) -> tuple[float, float]:
    L = ledger.grid.L
    if not R > 0:
        raise ValueError("R must be positive")
    if 2 * R > L * (1 + 1e-12):
        raise ValueError(f"window [-{R}, {R}] exceeds the box of length {L}")
    c = L / 2 if center is None else center
    return c - R, c + R


def check_dissipation(ledger: EnergyLedger, R: float, T: float | None, c: Constants,
                      center: float | None = None, specialize: bool = True) -> list[BoundReport]:
    """``int_{-R}^{R} e(x,T) dx + D([-R,R],T) <= 2 e*(0) (R + sqrt(kappa beta T))``.

    The window is centred at ``center`` (default L/2).  With ``specialize``
    the same check is emitted for ``R = sqrt(beta T)`` when it fits the box.
    """
    T = _T(ledger, T)
    snap = ledger.at(T)
    caveat = _horizon_caveat(ledger, T, c)
    e0 = snap.e_star0

    def one(name: str, radius: float) -> BoundReport:
        a, b = _centered_window(ledger, radius, center)
        lhs = window_integral(ledger.grid, snap.eT, a, b) + dissipated_energy(ledger, a, b, T)
        rhs = 2 * e0 * (radius + math.sqrt(c.kappa * c.beta * T))
        return BoundReport.compare(name, lhs, rhs, location={"R": radius, "T": T, "window": [a, b]},
                                   constants={"kappa": c.kappa, "beta": c.beta, "e_star_0": e0},
                                   caveat=caveat)

    reports = [one("dissip", R)]
    if specialize:
        Rs = math.sqrt(c.beta * T)
        if 2 * Rs <= ledger.grid.L:
            reports.append(one("dissip_sqrt_beta_T", Rs))
        else:
            reports.append(BoundReport("dissip_sqrt_beta_T", float("nan"), float("nan"), SKIP,
                                       location={"R": Rs, "T": T}, note="window exceeds the box"))
    return reports


def check_growth(ledger: EnergyLedger, T: float | None, c: Constants) -> list[BoundReport]:
    """Growth max-form, the mean-flow chain and the pointwise-ratio trend.

    * ``e*(T) <= max(4 e*(0), (4 e*(0))^{2/3} (delta kappa beta T)^{1/3})`` with
      ``delta = 2 sup d`` over ``[0, T]``.
    * ``m^2 <= 4 e + 2 C1^2 M^2`` at every sample.
    * ``sup|m(t)| <= M a / 2 + (2 C1^2 M^2 + 4 e*(0)(1 + sqrt(kappa beta t) / a))^{1/2}``
      with ``a = t^{1/6}`` at every step ``t > 0``.
    * trend: ``sup|u(T)| / T^{1/6}`` next to ``K e*(0)^{1/3}``, ``K = 3 (M/2)^{1/3} (beta kappa)^{1/6}``.
    """
    T = _T(ledger, T)
    snap = ledger.at(T)
    hist = ledger.history(T)
    caveat = _horizon_caveat(ledger, T, c)
    e0 = snap.e_star0
    delta = c.delta if c.delta is not None else 2 * float(np.max(hist["sup_d"]))
    eT = float(np.max(snap.eT))
    rhs = max(4 * e0, (4 * e0) ** (2 / 3) * (delta * c.kappa * c.beta * T) ** (1 / 3))
    reports = [BoundReport.compare("growth_max_form", eT, rhs, location={"T": T},
                                   constants={"delta": delta, "kappa": c.kappa, "beta": c.beta,
                                              "e_star_0": e0}, caveat=caveat)]

    Cm = 2 * c.C1 ** 2 * c.M ** 2
    lhs, loc = _worst(hist, "mb2_excess", "mb2_x1")
    reports.append(BoundReport.compare("mbound2", lhs, Cm, rel_tol=LOOSE_REL_TOL, location=loc,
                                       constants={"C": Cm}, note="max of m^2 - 4e against C"))

    t = hist["t"]
    pos = t > 0
    if np.any(pos):
        tt = t[pos]
        a = tt ** (1 / 6)
        bound = c.M * a / 2 + np.sqrt(Cm + 4 * e0 * (1 + np.sqrt(c.kappa * c.beta * tt) / a))
        sup_m = hist["sup_m"][pos]
        j = int(np.argmax(sup_m / bound))
        reports.append(BoundReport.compare("mbound4", sup_m[j], bound[j], location={"t": float(tt[j])},
                                           constants={"C": Cm, "kappa": c.kappa, "beta": c.beta},
                                           caveat=caveat))
    K = 3 * (c.M / 2) ** (1 / 3) * (c.beta * c.kappa) ** (1 / 6)
    sup_u = float(hist["sup_u"][-1])
    ratio = sup_u / T ** (1 / 6)
    reports.append(BoundReport("pointwise_ratio", ratio, K * e0 ** (1 / 3), TREND,
                               location={"T": T}, constants={"K": K, "e_star_0": e0},
                               note="limsup statement; reported as a trend"))
    return reports


def is_equilibrium(ledger: EnergyLedger, tol: float = 1e-14) -> bool:
    hist = ledger.history()
    return bool(hist["sup_d"].size and hist["sup_d"][0] <= tol and np.max(hist["sup_d"]) <= tol)


def check_monotone_energy(ledger: EnergyLedger, T: float | None = None,
                          equilibrium: bool | None = None) -> BoundReport:
    """Some station must lose energy by time T unless the run is an equilibrium."""
    T = _T(ledger, T)
    snap = ledger.at(T)
    diff = snap.eT - snap.e0
    i = int(np.argmin(diff))
    eq = is_equilibrium(ledger) if equilibrium is None else equilibrium
    loc = {"x1": float(ledger.grid.x1[i]), "T": T}
    if eq:
        return BoundReport("monotone_energy", diff[i], 0.0, SKIP, location=loc,
                           note="equilibrium run")
    verdict = PASS if diff[i] < 0 else FAIL
    return BoundReport("monotone_energy", diff[i], 0.0, verdict, location=loc,
                       note="pass iff min_x (e(x,T) - e(x,0)) < 0")


@dataclass
class JTResult:
    """Estimate of the measure of the set of radii where window energy did not decrease."""

    measure: float
    indicator: np.ndarray
    R_grid: np.ndarray
    threshold: float | None
    report: BoundReport = field(repr=False, default=None)


def measure_JT(ledger: EnergyLedger, T: float | None, R_grid, center: float | None = None,
               c: Constants | None = None) -> JTResult:
    """``meas{R : int_{-R}^{R} e(x,T) >= int_{-R}^{R} e(x,0)}`` by trapezoid over ``R_grid``."""
    T = _T(ledger, T)
    snap = ledger.at(T)
    R_grid = np.asarray(R_grid, dtype=float)
    if R_grid.ndim != 1 or R_grid.size < 2 or np.any(np.diff(R_grid) <= 0):
        raise ValueError("R_grid must be increasing with at least two points")
    if R_grid[0] <= 0 or R_grid[-1] > ledger.grid.L / 2 * (1 + 1e-12):
        raise ValueError("R_grid must lie in (0, L/2]")
    diff = snap.eT - snap.e0
    ind = np.array([
        window_integral(ledger.grid, diff, *_centered_window(ledger, R, center)) >= 0 for R in R_grid
    ], dtype=float)
    measure = float(np.trapezoid(ind, R_grid))
    ones = np.nonzero(ind)[0]
    threshold = float(R_grid[ones[-1]]) if ones.size else 0.0
    eq = is_equilibrium(ledger)
    note = "equilibrium: indicator identically 1, excluded" if eq else (
        f"indicator vanishes for R > {threshold:.6g}" if threshold < R_grid[-1] else
        "indicator does not vanish within the box")
    caveat = _horizon_caveat(ledger, T, c) if c is not None else None
    report = BoundReport("J_T_measure", measure, float(R_grid[-1] - R_grid[0]),
                         SKIP if eq else (CAVEAT if caveat else TREND),
                         location={"T": T}, note=(note + (" " + caveat if caveat else "")).strip())
    return JTResult(measure, ind, R_grid, threshold, report)


def check_balance(ledger: EnergyLedger, a: float, b: float, T: float | None = None,
                  rel: float = 1e-3) -> BoundReport:
    """Integrated balance defect against ``rel * max(D([a,b],T), 1)``."""
    from .energetics import balance_residual

    T = _T(ledger, T)
    res = balance_residual(ledger, a, b, T)
    D = dissipated_energy(ledger, a, b, T)
    return BoundReport.compare("balance", res, rel * max(D, 1.0), rel_tol=0.0, abs_tol=0.0,
                               location={"window": [a, b], "T": T}, constants={"D": D})


def check_max_principle(sup_omega, rel: float = 1e-8) -> BoundReport:
    """Largest overshoot ``||omega(t)|| - min_{s<t} ||omega(s)||`` against ``rel ||omega(0)||_inf``."""
    s = np.asarray(sup_omega, dtype=float)
    if s.size < 2:
        worst, i = 0.0, 0
    else:
        inc = s[1:] - np.minimum.accumulate(s)[:-1]
        worst = float(np.max(inc))
        i = int(np.argmax(inc)) + 1
    return BoundReport.compare("max_principle", max(worst, 0.0), rel * s[0], rel_tol=0.0, abs_tol=0.0,
                               location={"step": i}, constants={"sup_omega_0": float(s[0])})


def summarize(reports) -> dict:
    counts = {v: 0 for v in (PASS, FAIL, CAVEAT, TREND, SKIP)}
    for r in reports:
        counts[r.verdict] += 1
    return counts
