"""Velocity reconstruction, pressure and the kernel velocity bounds."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nscyl.fields import (
    CirculationError, FlowState, check_velocity_bounds, curl, divergence, pressure_field,
    pressure_residual, reconstruct_velocity,
)
from nscyl.report import PASS
from nscyl.scenarios import kolmogorov, random_band_limited
from nscyl.spectral import Grid, RealField

GRID = Grid(8.0, 64, 32)


def resolved_state(seed: int, amplitude: float = 1.0, m0: float = 0.3) -> FlowState:
    """Random state whose quadratic products stay below the Nyquist modes of GRID."""
    kx = 2 * np.pi * (GRID.N1 // 4 - 1) / GRID.L
    s = random_band_limited(GRID, amplitude=amplitude, k_max=GRID.N2 // 4 - 1, seed=seed,
                            kx_max=kx)
    return FlowState(s.omega, m0=m0)


def spectral_d(values, axis):
    h = GRID.fft(values)
    return GRID.ifft((GRID.ik1 if axis == 1 else GRID.ik2) * h)


class TestReconstruction:
    def test_equilibrium(self):
        u = reconstruct_velocity(FlowState(RealField(GRID, np.zeros(GRID.shape)), m0=1.7))
        assert np.all(u.u1.values == 0)
        assert np.all(u.u2.values == 1.7)
        assert np.all(u.m == 1.7)

    def test_single_vertical_mode(self):
        _, X2 = GRID.mesh
        state = FlowState(RealField(GRID, -2 * np.pi * np.cos(2 * np.pi * X2)))
        u = reconstruct_velocity(state)
        assert np.max(np.abs(u.u1.values - np.sin(2 * np.pi * X2))) < 1e-10
        assert np.max(np.abs(u.u2.values)) < 1e-10

    def test_kolmogorov_profile(self):
        u = reconstruct_velocity(kolmogorov(GRID, U=2.0))
        exact = 2.0 * np.sin(2 * np.pi * GRID.x1 / GRID.L)
        assert np.max(np.abs(u.u2.values - exact[:, None])) < 1e-12
        assert np.max(np.abs(u.u1.values)) < 1e-14

    @given(seed=st.integers(0, 10_000))
    def test_round_trip(self, seed):
        state = resolved_state(seed)
        u = reconstruct_velocity(state)
        assert np.max(np.abs(curl(u).values - state.omega.values)) < 1e-8
        assert np.max(np.abs(divergence(u).values)) < 1e-10
        assert np.max(np.abs(u.u1.values.mean(axis=1))) < 1e-10
        assert np.mean(u.m) == pytest.approx(state.m0, abs=1e-12)

    def test_rejects_circulation(self):
        with pytest.raises(CirculationError):
            reconstruct_velocity(FlowState(RealField(GRID, np.ones(GRID.shape))))

    @given(seed=st.integers(0, 10_000))
    def test_riesz_identities(self, seed):
        state = resolved_state(seed)
        u = reconstruct_velocity(state)
        w_hat = GRID.fft(state.omega.values)
        osc = GRID.oscillating
        inv = np.where(osc, 1.0 / np.where(osc, GRID.ksq, 1.0), 0.0)
        r1r2 = GRID.ifft(-GRID.k1 * GRID.k2 * inv * w_hat)
        r11 = GRID.ifft(GRID.k1**2 * inv * w_hat)
        d1u1 = spectral_d(u.u1.values, 1)
        d2u2 = spectral_d(u.u2.values, 2)
        d1u2_osc = spectral_d(u.u2.values - u.m[:, None], 1)
        assert np.max(np.abs(d1u1 + d2u2)) < 1e-8
        assert np.max(np.abs(d1u1 - r1r2)) < 1e-8
        assert np.max(np.abs(d1u2_osc - r11)) < 1e-8


class TestPressure:
    def test_constant_flow(self):
        state = FlowState(RealField(GRID, np.zeros(GRID.shape)), m0=3.0)
        u = reconstruct_velocity(state)
        assert np.all(pressure_field(u, state.omega).values == 0)

    def test_kolmogorov(self):
        state = kolmogorov(GRID, U=1.0)
        p = pressure_field(reconstruct_velocity(state), state.omega).values
        assert np.max(np.abs(p)) < 1e-14

    @given(seed=st.integers(0, 10_000))
    def test_identity_oracle(self, seed):
        state = resolved_state(seed)
        u = reconstruct_velocity(state)
        w = state.omega.values
        u1, u2 = u.u1.values, u.u2.values
        # div((u . grad) u) - Delta(u1^2) - 2 d2(omega u1), assembled from derivatives
        a1 = u1 * spectral_d(u1, 1) + u2 * spectral_d(u1, 2)
        a2 = u1 * spectral_d(u2, 1) + u2 * spectral_d(u2, 2)
        div_a = spectral_d(a1, 1) + spectral_d(a2, 2)
        lap_u1sq = spectral_d(spectral_d(u1 * u1, 1), 1) + spectral_d(spectral_d(u1 * u1, 2), 2)
        uid = div_a - lap_u1sq - 2 * spectral_d(w * u1, 2)
        assert np.max(np.abs(uid)) < 1e-6
        p = pressure_field(u, state.omega)
        assert np.max(np.abs(pressure_residual(u, state.omega, p))) < 1e-6


class TestVelocityBounds:
    def test_zero(self, kernel_constants):
        state = FlowState(RealField(GRID, np.zeros(GRID.shape)))
        reports = check_velocity_bounds(reconstruct_velocity(state), state.omega, 1.0,
                                        kernel_constants)
        assert [r.verdict for r in reports] == [PASS, PASS]
        assert all(r.lhs == 0 and r.rhs == 0 for r in reports)

    def test_single_mode(self, kernel_constants):
        _, X2 = GRID.mesh
        state = FlowState(RealField(GRID, -2 * np.pi * np.cos(2 * np.pi * X2)))
        reports = check_velocity_bounds(reconstruct_velocity(state), state.omega, None,
                                        kernel_constants)
        assert all(r.verdict == PASS for r in reports)
        assert reports[0].slack > 0

    def test_random_ensemble(self, kernel_constants):
        verdicts = []
        for seed in range(100):
            state = resolved_state(seed, amplitude=1.0 + seed % 3)
            u = reconstruct_velocity(state)
            verdicts += [r.verdict for r in check_velocity_bounds(u, state.omega, state.sup_omega,
                                                                 kernel_constants)]
        assert verdicts.count(PASS) == len(verdicts) == 200

    def test_M_too_small(self, kernel_constants):
        state = resolved_state(0, amplitude=2.0)
        with pytest.raises(ValueError):
            check_velocity_bounds(reconstruct_velocity(state), state.omega, 1.0, kernel_constants)
