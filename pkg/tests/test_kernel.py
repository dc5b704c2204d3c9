"""Kernel evaluation, kernel norms and the direct Biot-Savart path."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from nscyl.fields import FlowState, reconstruct_velocity
from nscyl.kernel import (
    KernelConstants, KernelSingularityError, QuadratureError, QuadratureSpec,
    assemble_kernel_constants, biot_savart_direct, compute_kernel_constants, kernel_d1K,
    kernel_d1Kbar, kernel_d2K, kernel_K, kernel_l1_norms,
)
from nscyl.spectral import Grid, RealField


def closed_form_K(x1, x2):
    return np.log(2 * np.cosh(2 * np.pi * x1) - 2 * np.cos(2 * np.pi * x2)) / (4 * np.pi)


def d1Kbar_oracle_norm() -> float:
    """||d1Kbar||_1 from the closed-form x2-antiderivative of d1K.

    For x1 > 0 and theta0 = arccos(exp(-2 pi x1)), the positive part of
    d1Kbar on [0, 1/2] integrates to
    ``P = atan(coth(pi x1) tan(theta0 / 2)) / (2 pi) - theta0 / (4 pi)``;
    the full norm is ``8 int_0^inf P dx1``.
    """
    def P(x1):
        q = math.exp(-2 * math.pi * x1)
        theta0 = math.acos(q)
        coth = 1 / math.tanh(math.pi * x1)
        return math.atan(coth * math.tan(theta0 / 2)) / (2 * math.pi) - theta0 / (4 * math.pi)

    val, _ = integrate.quad(P, 0, 30, limit=400, epsabs=1e-14, epsrel=1e-12)
    return 8 * val


class TestKernelValues:
    def test_half_period_value(self):
        assert kernel_K(0.0, 0.5) == pytest.approx(math.log(2) / (2 * math.pi), rel=1e-14)

    def test_asymptotic(self):
        assert abs(kernel_K(5.0, 0.25) - 2.5) < 1e-10
        assert abs(kernel_K(11.0, 0.25) - 5.5) < 1e-14

    @given(x1=st.floats(-6, 6), x2=st.floats(-2, 2))
    def test_symmetry(self, x1, x2):
        if abs(x1) < 1e-6:
            return
        k = kernel_K(x1, x2)
        assert kernel_K(-x1, x2) == pytest.approx(k, rel=1e-12, abs=1e-14)
        assert kernel_K(x1, -x2) == pytest.approx(k, rel=1e-12, abs=1e-14)
        assert kernel_K(x1, x2 + 1) == pytest.approx(k, rel=1e-9, abs=1e-12)

    @given(x1=st.floats(0.05, 9.5), x2=st.floats(0.0, 1.0))
    def test_matches_closed_form(self, x1, x2):
        assert kernel_K(x1, x2) == pytest.approx(closed_form_K(x1, x2), rel=1e-10, abs=1e-13)

    def test_continuous_across_asymptotic_switch(self):
        assert kernel_K(10.0, 0.3) == pytest.approx(kernel_K(10.0 + 1e-12, 0.3), abs=1e-11)

    def test_singularity(self):
        with pytest.raises(KernelSingularityError):
            kernel_K(0.0, 0.0)
        with pytest.raises(KernelSingularityError):
            kernel_K(0.0, 3.0)

    @given(x1=st.floats(0.05, 3.0), x2=st.floats(0.0, 1.0))
    def test_derivatives_against_finite_differences(self, x1, x2):
        h = 1e-6
        d1 = (closed_form_K(x1 + h, x2) - closed_form_K(x1 - h, x2)) / (2 * h)
        d2 = (closed_form_K(x1, x2 + h) - closed_form_K(x1, x2 - h)) / (2 * h)
        assert kernel_d1K(x1, x2) == pytest.approx(d1, abs=1e-7)
        assert kernel_d2K(x1, x2) == pytest.approx(d2, abs=1e-7)
        assert kernel_d1Kbar(x1, x2) == pytest.approx(d1 - 0.5, abs=1e-7)

    @pytest.mark.parametrize("x1", [0.3, 2.0, 50.0, 400.0])
    def test_d2K_vanishes_on_symmetry_lines(self, x1):
        assert kernel_d2K(x1, 0.0) == 0.0
        assert abs(kernel_d2K(x1, 0.5)) < 1e-15

    def test_derivatives_finite_far_out(self):
        vals = [kernel_d1Kbar(500.0, 0.1), kernel_d2K(500.0, 0.1), kernel_d1K(-500.0, 0.1)]
        assert np.all(np.isfinite(vals))
        assert kernel_d1K(-500.0, 0.1) == pytest.approx(-0.5)


class TestKernelNorms:
    def test_d2K_norm_closed_form(self, kernel_constants):
        # int_0^{1/2} d2K dx2 = K(x1, 1/2) - K(x1, 0); int_0^inf log coth = pi^2 / 8
        assert kernel_constants.norm_d2K == pytest.approx(0.25, rel=1e-9)

    def test_d1Kbar_norm_independent_oracle(self, kernel_constants):
        assert kernel_constants.norm_d1Kbar == pytest.approx(d1Kbar_oracle_norm(), rel=1e-8)

    def test_refinement_stable(self, kernel_constants):
        assert all(0 <= v < 5e-3 for v in kernel_constants.refinement_change.values())

    def test_positive_constants(self, kernel_constants):
        assert kernel_constants.C1 > 0 and kernel_constants.C2 > 0

    def test_assembly(self):
        C1, C2, trace = assemble_kernel_constants(0.25, 0.2)
        assert C1 == pytest.approx(0.5)
        assert C2 == pytest.approx(0.5**2 + 2 * 0.25 * 0.5)
        assert trace

    def test_coarse_quadrature_rejected(self):
        with pytest.raises(QuadratureError):
            compute_kernel_constants(QuadratureSpec(cutoff=10, order=2, levels=4))

    @pytest.mark.parametrize("kw", [{"cutoff": 5}, {"order": 1}, {"levels": 2}])
    def test_spec_validation(self, kw):
        with pytest.raises(ValueError):
            QuadratureSpec(**kw)

    def test_norms_deterministic(self):
        spec = QuadratureSpec()
        assert kernel_l1_norms(spec) == kernel_l1_norms(spec)

    def test_round_trip_dict(self, kernel_constants):
        again = KernelConstants.from_dict(kernel_constants.to_dict())
        assert again == kernel_constants


class TestDirectBiotSavart:
    @staticmethod
    def vorticity(y1, y2, c=0.0):
        r = y1 - c
        env = np.exp(-r * r / (2 * 0.6**2))
        return env * (np.cos(2 * np.pi * y2) + 0.5 * np.sin(4 * np.pi * y2 + 0.3))

    def test_matches_spectral_reconstruction(self):
        L = 16.0
        g = Grid(L, 256, 32)
        X1, X2 = g.mesh
        c = L / 2
        state = FlowState(RealField(g, self.vorticity(X1, X2, c)))
        u = reconstruct_velocity(state)
        idx = [(120, 3), (128, 10), (136, 17), (112, 29)]
        targets = np.array([[g.x1[i], g.x2[j]] for i, j in idx])
        direct = biot_savart_direct(lambda y1, y2: self.vorticity(y1, y2, c), targets,
                                    h=1 / 64, half_width=5.0)
        spectral = np.array([[u.u1.values[i, j], u.u2.values[i, j] - u.m[i]] for i, j in idx])
        assert np.max(np.abs(direct - spectral)) < 1e-4

    def test_step_must_divide_period(self):
        with pytest.raises(ValueError):
            biot_savart_direct(lambda a, b: a * 0, [[0.0, 0.0]], h=0.3)
