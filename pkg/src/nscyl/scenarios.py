"""Initial conditions.

Every builder returns a :class:`FlowState` with zero total circulation.
Flows whose vorticity depends on x1 only are built from their vertical
velocity profile, so that ``m`` is reproduced exactly by the reconstruction.
"""

from __future__ import annotations

import inspect

import numpy as np

from .dynamics import InitialCondition
from .fields import FlowState
from .spectral import Grid, RealField, line_derivative


def _state(grid: Grid, omega: np.ndarray, m0: float) -> FlowState:
    w_hat = grid.fft(omega)
    w_hat[0, 0] = 0.0
    return FlowState(RealField(grid, grid.ifft(w_hat)), m0=m0, t=0.0)


def _from_vertical_profile(grid: Grid, u2: np.ndarray, extra: np.ndarray | None = None) -> FlowState:
    omega = np.repeat(line_derivative(grid, u2)[:, None], grid.N2, axis=1)
    if extra is not None:
        omega = omega + extra
    return _state(grid, omega, float(np.mean(u2)))


def equilibrium(grid: Grid, c: float = 0.0) -> FlowState:
    """Constant vertical flow ``u = (0, c)``."""
    return FlowState(RealField(grid, np.zeros(grid.shape)), m0=c)


def zero(grid: Grid) -> FlowState:
    return equilibrium(grid, 0.0)


def taylor_green(grid: Grid, A: float = 1.0, k: int = 1, k2: int = 1) -> FlowState:
    """``omega = A cos(2 pi k x1 / L) cos(2 pi k2 x2)``, a steady Euler flow that decays."""
    X1, X2 = grid.mesh
    omega = A * np.cos(2 * np.pi * k * X1 / grid.L) * np.cos(2 * np.pi * k2 * X2)
    return _state(grid, omega, 0.0)


def kolmogorov(grid: Grid, U: float = 1.0, k: int = 1) -> FlowState:
    """``u = (0, U sin(2 pi k x1 / L))``."""
    return _from_vertical_profile(grid, U * np.sin(2 * np.pi * k * grid.x1 / grid.L))


def _envelope(grid: Grid, width: float | None, center: float | None) -> np.ndarray:
    if width is None:
        return np.ones(grid.N1)
    c = grid.L / 2 if center is None else center
    r = (grid.x1 - c + grid.L / 2) % grid.L - grid.L / 2
    return np.exp(-0.5 * (r / width) ** 2)


def shear_pulse(grid: Grid, U: float = 1.0, wavelength: float = 4.0, width: float = 2.0,
                center: float | None = None, perturbation: float = 0.0) -> FlowState:
    """Gaussian-enveloped Kolmogorov profile, localized around ``center``.

    ``u2 = U sin(2 pi (x1 - c) / wavelength) exp(-(x1 - c)^2 / (2 width^2))``.
    A non-zero ``perturbation`` adds the oscillating vorticity
    ``perturbation * U * 2 pi * envelope(x1) * cos(2 pi x2)``, which makes the
    flow genuinely two-dimensional.
    """
    c = grid.L / 2 if center is None else center
    env = _envelope(grid, width, c)
    r = (grid.x1 - c + grid.L / 2) % grid.L - grid.L / 2
    u2 = U * np.sin(2 * np.pi * r / wavelength) * env
    extra = None
    if perturbation:
        extra = (perturbation * U * 2 * np.pi * env[:, None]
                 * np.cos(2 * np.pi * grid.x2)[None, :])
    return _from_vertical_profile(grid, u2, extra)


def random_band_limited(grid: Grid, amplitude: float = 1.0, k_max: int = 4, seed: int = 0,
                        kx_max: float | None = None, envelope_width: float | None = None,
                        center: float | None = None, mean_flow: float = 0.0,
                        slope: float = 0.0) -> FlowState:
    """Random vorticity with ``||omega||_inf = amplitude``.

    Args:
        amplitude: target sup norm of the vorticity.
        k_max: largest vertical mode index.
        seed: RNG seed; equal seeds give bitwise-identical states.
        kx_max: largest horizontal wavenumber (physical units); defaults to
            ``2 pi k_max``.  Both cutoffs are capped by the dealiasing band.
        envelope_width: optional Gaussian localization in x1.
        center: envelope centre (defaults to L/2).
        mean_flow: far-field value of the mean vertical flow.
        slope: spectral decay exponent applied to coefficient amplitudes.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    rng = np.random.default_rng(seed)
    kx_max = 2 * np.pi * k_max if kx_max is None else kx_max
    band = (np.abs(grid.k1) <= kx_max) & (grid.index2[None, :] <= k_max) & grid.dealias_mask
    band[0, 0] = False
    kmag = np.sqrt(grid.ksq)
    weight = np.where(band, (1 + kmag) ** (-slope), 0.0)
    coeffs = (rng.standard_normal(grid.spectral_shape)
              + 1j * rng.standard_normal(grid.spectral_shape)) * weight
    omega = grid.ifft(coeffs)
    env = _envelope(grid, envelope_width, center)

    mean_part = omega.mean(axis=1)
    osc = (omega - mean_part[:, None]) * env[:, None]
    # localize the mean flow m rather than <omega>, so the circulation stays zero
    m_hat = np.zeros(grid.N1 // 2 + 1, dtype=complex)
    line = grid.fft_line(mean_part)
    ik = grid.ik1_line
    nz = ik != 0
    m_hat[nz] = line[nz] / ik[nz]
    m = grid.ifft_line(m_hat) * env
    total = osc + line_derivative(grid, m)[:, None]

    w_hat = grid.fft(total) * grid.dealias_mask
    w_hat[0, 0] = 0.0
    total = grid.ifft(w_hat)
    sup = np.max(np.abs(total))
    scale = amplitude / sup if sup > 0 else 0.0
    m_mean = float(np.mean(m))
    return FlowState(RealField(grid, total * scale), m0=m_mean * scale + mean_flow)


SCENARIOS = {
    "zero": zero,
    "equilibrium": equilibrium,
    "taylor_green": taylor_green,
    "kolmogorov": kolmogorov,
    "shear_pulse": shear_pulse,
    "random_band_limited": random_band_limited,
}


def scenario_parameters(kind: str) -> list[str]:
    if kind not in SCENARIOS:
        raise KeyError(kind)
    sig = inspect.signature(SCENARIOS[kind])
    return [p for p in sig.parameters if p != "grid"]


def build_initial_state(grid: Grid, ic: InitialCondition) -> FlowState:
    """Instantiate a scenario; the seed is forwarded when the scenario takes one."""
    if ic.kind not in SCENARIOS:
        raise ValueError(f"unknown initial condition {ic.kind!r}; choose from {sorted(SCENARIOS)}")
    builder = SCENARIOS[ic.kind]
    allowed = scenario_parameters(ic.kind)
    params = dict(ic.params)
    unknown = set(params) - set(allowed)
    if unknown:
        raise ValueError(f"unknown parameters for {ic.kind}: {sorted(unknown)}")
    if "seed" in allowed and ic.seed is not None:
        params.setdefault("seed", ic.seed)
    return builder(grid, **params)
