"""Flow state, velocity reconstruction and pressure.

The velocity is recovered from the vorticity in two parts.  On the
oscillating modes (k2 != 0) a stream function solves ``Delta psi = omega``
and ``u = (-d2 psi, d1 psi)``.  The vertical average of the vertical
velocity, ``m(x1)``, satisfies ``m' = <omega>``; its own mean ``m0`` is not
determined by the vorticity and is carried in the state.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .report import BoundReport
from .spectral import Grid, RealField

CIRCULATION_TOL = 1e-10


class CirculationError(ValueError):
    """Raised when the vorticity has non-zero total circulation."""


@dataclass(frozen=True, eq=False)
class FlowState:
    """Vorticity samples, mean vertical velocity ``m0`` and time ``t``."""

    omega: RealField
    m0: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.m0) or not np.isfinite(self.t):
            raise ValueError("m0 and t must be finite")
        object.__setattr__(self, "m0", float(self.m0))
        object.__setattr__(self, "t", float(self.t))

    @property
    def grid(self) -> Grid:
        return self.omega.grid

    @cached_property
    def omega_hat(self) -> np.ndarray:
        return self.grid.fft(self.omega.values)

    @property
    def circulation(self) -> float:
        """Integral of omega over one period cell."""
        return float(np.mean(self.omega.values) * self.grid.L)

    @property
    def sup_omega(self) -> float:
        return float(np.max(np.abs(self.omega.values)))

    def with_values(self, values: np.ndarray, t: float) -> "FlowState":
        return FlowState(RealField(self.grid, values), self.m0, t)


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Velocity samples with the vertical-average profile ``m``."""

    u1: RealField
    u2: RealField
    m: np.ndarray

    @property
    def grid(self) -> Grid:
        return self.u1.grid

    @property
    def speed(self) -> np.ndarray:
        return np.hypot(self.u1.values, self.u2.values)


def check_circulation(grid: Grid, omega_hat: np.ndarray, omega_scale: float) -> None:
    mean = omega_hat[0, 0].real
    if abs(mean) > CIRCULATION_TOL * max(1.0, omega_scale):
        raise CirculationError(
            f"vorticity has non-zero mean {mean:.3e}; total circulation must vanish")


def mean_profile_hat(grid: Grid, omega_hat: np.ndarray, m0: float) -> np.ndarray:
    """Coefficients (full FFT layout in k1) of m with m' = <omega>, mean m0."""
    col = omega_hat[:, 0]
    ik = grid.ik1[:, 0]
    m_hat = np.zeros_like(col)
    nz = ik != 0
    m_hat[nz] = col[nz] / ik[nz]
    m_hat[0] = m0
    return m_hat


def velocity_hats(grid: Grid, omega_hat: np.ndarray, m0: float) -> tuple[np.ndarray, np.ndarray]:
    """Spectral velocity components from spectral vorticity."""
    psi = omega_hat * grid.inv_neg_ksq
    u1h = -grid.ik2 * psi
    u2h = grid.ik1 * psi
    u2h[:, 0] = mean_profile_hat(grid, omega_hat, m0)
    return u1h, u2h


def reconstruct_velocity(state: FlowState) -> VelocityField:
    """Velocity of ``state``; refuses states with non-zero circulation."""
    grid = state.grid
    w_hat = state.omega_hat
    check_circulation(grid, w_hat, state.sup_omega)
    u1h, u2h = velocity_hats(grid, w_hat, state.m0)
    u = grid.ifft(np.stack([u1h, u2h]))
    m = u[1].mean(axis=1)
    return VelocityField(RealField(grid, u[0]), RealField(grid, u[1]), m)


def pressure_from_arrays(grid: Grid, u1: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """p = -u1^2 - 2 d2 Delta^{-1}(omega u1)."""
    q_hat = grid.fft(omega * u1)
    corr = grid.ifft(grid.ik2 * grid.inv_neg_ksq * q_hat)
    return -u1 * u1 - 2 * corr


def pressure_field(u: VelocityField, omega: RealField) -> RealField:
    """Pressure of the velocity/vorticity pair (defined up to a constant)."""
    return RealField(u.grid, pressure_from_arrays(u.grid, u.u1.values, omega.values))


def _spectral_grad(grid: Grid, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h = grid.fft(values)
    d = grid.ifft(np.stack([grid.ik1 * h, grid.ik2 * h]))
    return d[0], d[1]


def curl(u: VelocityField) -> RealField:
    """d1 u2 - d2 u1."""
    grid = u.grid
    h1 = grid.fft(u.u1.values)
    h2 = grid.fft(u.u2.values)
    return RealField(grid, grid.ifft(grid.ik1 * h2 - grid.ik2 * h1))


def divergence(u: VelocityField) -> RealField:
    grid = u.grid
    h1 = grid.fft(u.u1.values)
    h2 = grid.fft(u.u2.values)
    return RealField(grid, grid.ifft(grid.ik1 * h1 + grid.ik2 * h2))


def pressure_residual(u: VelocityField, omega: RealField, p: RealField) -> np.ndarray:
    """-Delta p - div((u . grad) u), evaluated spectrally."""
    grid = u.grid
    u1, u2 = u.u1.values, u.u2.values
    d11, d21 = _spectral_grad(grid, u1)
    d12, d22 = _spectral_grad(grid, u2)
    a1 = u1 * d11 + u2 * d21
    a2 = u1 * d12 + u2 * d22
    div_a = grid.ifft(grid.ik1 * grid.fft(a1) + grid.ik2 * grid.fft(a2))
    lap_p = grid.ifft(-grid.ksq * grid.fft(p.values))
    return -lap_p - div_a


def check_velocity_bounds(u: VelocityField, omega: RealField, M: float | None,
                          k) -> list[BoundReport]:
    """Compare sup|u| against C1 ||omega||_inf and sup|p| against C2 ||omega||_inf^2.

    Only the oscillating part of the velocity is controlled by the vorticity;
    the comparison uses componentwise maxima.  ``M``, when given, must bound
    ``||omega||_inf``.  ``k`` is any object with ``C1`` and ``C2`` attributes
    (normally :class:`nscyl.kernel.KernelConstants`).
    """
    C1, C2 = k.C1, k.C2
    w_sup = float(np.max(np.abs(omega.values)))
    if M is not None and w_sup > M * (1 + 1e-12):
        raise ValueError(f"||omega||_inf = {w_sup} exceeds M = {M}")
    grid = u.grid
    u1 = u.u1.values
    u2_osc = u.u2.values - u.m[:, None]
    lhs_u = float(max(np.max(np.abs(u1)), np.max(np.abs(u2_osc))))
    i, j = np.unravel_index(np.argmax(np.maximum(np.abs(u1), np.abs(u2_osc))), grid.shape)
    p = pressure_from_arrays(grid, u1, omega.values)
    lhs_p = float(np.max(np.abs(p)))
    pi, pj = np.unravel_index(np.argmax(np.abs(p)), grid.shape)
    return [
        BoundReport.compare("velocity_sup", lhs_u, C1 * w_sup,
                            location={"x1": float(grid.x1[i]), "x2": float(grid.x2[j])},
                            constants={"C1": C1, "sup_omega": w_sup}),
        BoundReport.compare("pressure_sup", lhs_p, C2 * w_sup**2,
                            location={"x1": float(grid.x1[pi]), "x2": float(grid.x2[pj])},
                            constants={"C2": C2, "sup_omega": w_sup}),
    ]
