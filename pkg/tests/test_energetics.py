"""Energy profiles, the time-integrated ledger and its CSV form."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nscyl.dynamics import SimConfig, run
from nscyl.energetics import (
    EnergyLedger, EnergyProfiles, TimeRegressionError, available_energy, balance_residual,
    dissipated_energy, energy_profiles, ledger_callback, pair_coefficient,
)
from nscyl.fields import FlowState
from nscyl.scenarios import equilibrium, kolmogorov, random_band_limited
from nscyl.spectral import Grid, window_integral

GRID = Grid(8.0, 64, 16)


def fine_grid_profiles(omega: np.ndarray, m0: float, L: float):
    """e, h, d, f from the definitions on a twice finer grid (complex FFT, Poisson pressure)."""
    N1, N2 = omega.shape
    F1, F2 = 2 * N1, 2 * N2
    W = np.fft.fft2(omega) / omega.size
    Wf = np.zeros((F1, F2), dtype=complex)
    h1, h2 = N1 // 2, N2 // 2
    for a in range(-h1 + 1, h1):
        for b in range(-h2 + 1, h2):
            Wf[a % F1, b % F2] = W[a % N1, b % N2]
    k1 = (2 * np.pi / L * np.fft.fftfreq(F1, 1 / F1))[:, None] * np.ones((1, F2))
    k2 = (2 * np.pi * np.fft.fftfreq(F2, 1 / F2))[None, :] * np.ones((F1, 1))
    ksq = k1**2 + k2**2
    osc = k2 != 0
    psi = np.where(osc, -Wf / np.where(osc, ksq, 1), 0)
    U1 = -1j * k2 * psi
    U2 = 1j * k1 * psi
    col = (~osc) & (k1 != 0)
    U2[col] = Wf[col] / (1j * k1[col])
    U2[0, 0] = m0

    def phys(h):
        return np.real(np.fft.ifft2(h) * h.size)

    def spec(v):
        return np.fft.fft2(v) / v.size

    u1, u2 = phys(U1), phys(U2)
    grads = [phys(1j * k * U) for U in (U1, U2) for k in (k1, k2)]
    a1 = u1 * grads[0] + u2 * grads[1]
    a2 = u1 * grads[2] + u2 * grads[3]
    div_a = spec(a1) * 1j * k1 + spec(a2) * 1j * k2
    P = np.where(ksq > 0, div_a / np.where(ksq > 0, ksq, 1), 0)
    p = phys(P)
    ke = 0.5 * (u1**2 + u2**2)
    e = ke.mean(axis=1) + 1
    h = ((ke + p) * u1).mean(axis=1)
    d = sum(g**2 for g in grads).mean(axis=1)
    kl = 2 * np.pi / L * np.fft.fftfreq(F1, 1 / F1)
    de = np.real(np.fft.ifft(1j * kl * np.fft.fft(e)))
    return e[::2], h[::2], d[::2], (de - h)[::2]


def kolmogorov_ledger(T: float, dt: float = 1e-3, U: float = 1.0, windows=()):
    ledger = EnergyLedger(GRID, windows=windows, checkpoints=[T / 2, T])
    cfg = SimConfig(grid=GRID, dt=dt, T_final=T, checkpoints=(T / 2,))
    run(cfg, [ledger_callback(ledger)], initial_state=kolmogorov(GRID, U=U))
    return ledger


def constant_profiles(grid: Grid, t: float, e: float = 2.0) -> EnergyProfiles:
    z = np.zeros(grid.N1)
    return EnergyProfiles(t=t, e=np.full(grid.N1, e), h=z, d=z, f=z, de=z, m=z,
                          sup_u=0.0, sup_omega=0.0)


class TestProfiles:
    def test_equilibrium(self):
        p = energy_profiles(equilibrium(GRID, 1.5))
        np.testing.assert_allclose(p.e, 0.5 * 1.5**2 + 1, rtol=1e-15)
        assert not np.any(p.h) and not np.any(p.d) and np.max(np.abs(p.f)) < 1e-15

    def test_kolmogorov_closed_forms(self):
        U, k = 1.3, 2 * np.pi / GRID.L
        p = energy_profiles(kolmogorov(GRID, U=U))
        x = GRID.x1
        np.testing.assert_allclose(p.e, 0.5 * U**2 * np.sin(k * x) ** 2 + 1, atol=1e-13)
        np.testing.assert_allclose(p.d, k**2 * U**2 * np.cos(k * x) ** 2, atol=1e-13)
        assert np.max(np.abs(p.h)) < 1e-15
        np.testing.assert_allclose(p.f, U**2 * k * np.sin(k * x) * np.cos(k * x), atol=1e-13)

    @given(seed=st.integers(0, 10_000), m0=st.floats(-1, 1))
    def test_against_fine_grid_definitions(self, seed, m0):
        s = random_band_limited(GRID, amplitude=1.5, k_max=3, seed=seed,
                                kx_max=2 * np.pi * 15 / GRID.L)
        s = FlowState(s.omega, m0=m0)
        p = energy_profiles(s)
        e, h, d, f = fine_grid_profiles(s.omega.values, m0, GRID.L)
        for got, want in ((p.e, e), (p.h, h), (p.d, d), (p.f, f)):
            assert np.max(np.abs(got - want)) < 1e-6

    @given(seed=st.integers(0, 10_000))
    def test_invariants(self, seed):
        p = energy_profiles(random_band_limited(GRID, amplitude=2.0, k_max=3, seed=seed))
        assert np.all(p.e >= 1) and np.all(p.d >= 0)


class TestPairCoefficient:
    def test_degenerate_points(self):
        coef = pair_coefficient(np.array([0.0, 1e-13, 1.0, 4.0]), np.ones(4),
                                np.array([0.0, 0.0, 0.0, 2.0]))
        assert coef[0] == 0 and coef[1] == 0 and coef[2] == math.inf and coef[3] == pytest.approx(2.0)


class TestLedger:
    def test_constant_profiles(self):
        led = EnergyLedger(GRID)
        for t in np.linspace(0, 1.0, 7):
            led.accumulate(constant_profiles(GRID, float(t)))
        snap = led.at()
        np.testing.assert_allclose(snap.E, 2.0 * 1.0, rtol=1e-15)
        np.testing.assert_allclose(snap.EE, 4.0, rtol=1e-15)
        assert not np.any(snap.F) and not np.any(snap.D)

    def test_trapezoid_exact_for_linear(self):
        def prof(t):
            z = np.zeros(GRID.N1)
            e = 1 + t * (1 + GRID.x1)
            return EnergyProfiles(t=t, e=e, h=z, d=3 * t * np.ones(GRID.N1), f=-t * np.ones(GRID.N1),
                                  de=z, m=z, sup_u=0.0, sup_omega=0.0)

        one = EnergyLedger(GRID).accumulate(prof(0.0)).accumulate(prof(0.4))
        two = EnergyLedger(GRID).accumulate(prof(0.0)).accumulate(prof(0.2)).accumulate(prof(0.4))
        for name in ("E", "F", "D"):
            np.testing.assert_allclose(getattr(one.at(), name), getattr(two.at(), name), rtol=1e-14)
        np.testing.assert_allclose(one.at().D, 1.5 * 0.16, rtol=1e-14)

    def test_time_must_advance(self):
        led = EnergyLedger(GRID).accumulate(constant_profiles(GRID, 0.0))
        with pytest.raises(TimeRegressionError):
            led.accumulate(constant_profiles(GRID, 0.0))

    def test_empty(self):
        with pytest.raises(ValueError):
            EnergyLedger(GRID).at()

    def test_missing_checkpoint(self):
        led = EnergyLedger(GRID).accumulate(constant_profiles(GRID, 0.0))
        led.accumulate(constant_profiles(GRID, 1.0))
        with pytest.raises(KeyError):
            led.at(0.5)

    def test_kolmogorov_integrals(self):
        T, U = 1.0, 1.0
        led = kolmogorov_ledger(T, U=U)
        k = 2 * np.pi / GRID.L
        x = GRID.x1
        g = (1 - math.exp(-2 * k**2 * T)) / (2 * k**2)
        E = T + 0.5 * U**2 * np.sin(k * x) ** 2 * g
        D = k**2 * U**2 * np.cos(k * x) ** 2 * g
        snap = led.at(T)
        np.testing.assert_allclose(snap.E, E, rtol=1e-4)
        assert np.max(np.abs(snap.D - D)) <= 1e-4 * np.max(D)
        a, b = 1.0, 3.0
        ia, ib = round(a / GRID.dx1), round(b / GRID.dx1)
        xa, xb = ia * GRID.dx1, ib * GRID.dx1
        exact_D = U**2 * g * k**2 * (0.5 * (xb - xa) + (np.sin(2 * k * xb) - np.sin(2 * k * xa)) / (4 * k))
        assert dissipated_energy(led, a, b, T) == pytest.approx(exact_D, rel=1e-4)

    def test_balance_and_monotonicity(self):
        led = kolmogorov_ledger(1.0, windows=[(1.0, 3.0), (2.0, 7.5)])
        for a, b in led.windows:
            for T in (0.5, 1.0):
                D = dissipated_energy(led, a, b, T)
                assert balance_residual(led, a, b, T) < 1e-3 * max(D, 1)
                A = available_energy(led, a, b, T)
                assert A == pytest.approx(window_integral(GRID, led.at(T).eT, a, b) + D, abs=1e-4)
            assert dissipated_energy(led, a, b, 1.0) >= dissipated_energy(led, a, b, 0.5)
        assert np.all(led.at(1.0).E >= led.at(0.5).E)
        snap = led.at(1.0)
        assert snap.E_star <= math.sqrt(1.0) * snap.EE_star * (1 + 1e-12)

    def test_available_energy_at_zero(self):
        led = EnergyLedger(GRID).accumulate(energy_profiles(kolmogorov(GRID)))
        assert available_energy(led, 1.0, 4.0) == window_integral(GRID, led.at().e0, 1.0, 4.0)

    def test_equilibrium(self):
        c = 0.8
        led = EnergyLedger(GRID, windows=[(1.0, 5.0)], checkpoints=[1.0])
        cfg = SimConfig(grid=GRID, dt=0.1, T_final=1.0)
        run(cfg, [ledger_callback(led)], initial_state=equilibrium(GRID, c))
        assert available_energy(led, 1.0, 5.0, 1.0) == pytest.approx(4.0 * (0.5 * c * c + 1), rel=1e-13)
        assert dissipated_energy(led, 1.0, 5.0, 1.0) == 0
        assert balance_residual(led, 1.0, 5.0, 1.0) < 1e-12

    def test_balance_converges_under_dt(self):
        s0 = random_band_limited(GRID, amplitude=3.0, k_max=2, seed=4)
        res = []
        for dt in (0.004, 0.002):
            led = EnergyLedger(GRID)
            run(SimConfig(grid=GRID, dt=dt, T_final=0.2), [ledger_callback(led)], initial_state=s0)
            res.append(balance_residual(led, 1.0, 4.0))
        assert math.log2(res[0] / res[1]) > 1.8

    def test_csv_round_trip(self, tmp_path):
        led = kolmogorov_ledger(0.2, dt=0.01, windows=[(1.0, 3.0)])
        led.write_csv(tmp_path)
        back = EnergyLedger.from_files(GRID, tmp_path, led.window_summary())
        for T in led.times:
            a, b = led.at(T), back.at(T)
            for name in ("e0", "eT", "E", "F", "D", "EE"):
                np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
            assert a.window_sup_A == b.window_sup_A
        for k, v in led.history().items():
            np.testing.assert_array_equal(v, back.history()[k])

    def test_from_files_rejects_wrong_grid(self, tmp_path):
        kolmogorov_ledger(0.2, dt=0.01).write_csv(tmp_path)
        with pytest.raises(ValueError):
            EnergyLedger.from_files(Grid(8.0, 32, 16), tmp_path)
        with pytest.raises(FileNotFoundError):
            EnergyLedger.from_files(GRID, tmp_path / "missing")
