"""Time integration of the vorticity equation ``d_t omega + u . grad omega = Delta omega``.

The scheme is Heun's method applied to the integrating-factor variable
``exp(-t Delta) omega``: diffusion is integrated exactly, advection is
explicit and second order.  The mean vertical velocity ``m0`` does not
change on the periodic box and is carried through unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .fields import FlowState, check_circulation, velocity_hats
from .spectral import Grid, RealField

EVENT_TOL = 1e-9


class CFLError(RuntimeError):
    """Raised when a step would violate the advective CFL limit.

    Attributes:
        admissible_dt: the largest step accepted for the current velocity.
    """

    def __init__(self, dt: float, admissible_dt: float):
        super().__init__(f"dt = {dt:.3e} exceeds the CFL limit {admissible_dt:.3e}")
        self.dt = dt
        self.admissible_dt = admissible_dt


@dataclass(frozen=True)
class InitialCondition:
    """Scenario tag, parameters and seed."""

    kind: str
    params: dict = field(default_factory=dict)
    seed: int | None = None


@dataclass(frozen=True)
class SimConfig:
    """Numerical parameters of one run.

    Attributes:
        grid: spatial grid.
        dt: target time step.
        T_final: final time.
        cfl_safety: factor in (0, 1] on the advective limit ``dt max|u| <= c dx``.
        dealias: apply the 2/3 rule to the advection term.
        initial_condition: scenario used by :func:`nscyl.scenarios.build_initial_state`.
        output_cadence: spacing of stored snapshots (``None`` stores only the ends).
        checkpoints: times the steps must land on exactly (ledger snapshots).
        dt_min: optional starting step; the step doubles every ``ramp_steps``
            steps until it reaches ``dt``.
        ramp_steps: steps spent at each level of the ramp.
        max_retries: CFL retries with a halved step before aborting.
        nonlinear: include the advection term (off only for tests).
    """

    grid: Grid
    dt: float
    T_final: float
    cfl_safety: float = 0.5
    dealias: bool = True
    initial_condition: InitialCondition = InitialCondition("zero")
    output_cadence: float | None = None
    checkpoints: tuple = ()
    dt_min: float | None = None
    ramp_steps: int = 20
    max_retries: int = 6
    nonlinear: bool = True

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.T_final > 0 and math.isfinite(self.T_final)):
            raise ValueError(f"T_final must be positive, got {self.T_final}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if self.output_cadence is not None and self.output_cadence <= 0:
            raise ValueError("output cadence must be positive")
        if self.dt_min is not None and not 0 < self.dt_min <= self.dt:
            raise ValueError("dt_min must lie in (0, dt]")
        if self.ramp_steps < 1:
            raise ValueError("ramp_steps must be >= 1")
        cps = tuple(sorted(float(t) for t in self.checkpoints))
        if any(t <= 0 or t > self.T_final * (1 + 1e-12) for t in cps):
            raise ValueError("checkpoints must lie in (0, T_final]")
        object.__setattr__(self, "checkpoints", cps)

    def event_times(self) -> list[float]:
        """Sorted times the integrator must hit exactly."""
        times = set(self.checkpoints) | {self.T_final}
        if self.output_cadence is not None:
            n = int(math.floor(self.T_final / self.output_cadence + EVENT_TOL))
            times |= {k * self.output_cadence for k in range(1, n + 1)}
        return sorted(t for t in times if 0 < t <= self.T_final * (1 + 1e-12))


@dataclass
class Trajectory:
    """Stored snapshots plus per-step bookkeeping.

    Attributes:
        snapshots: ``(t, FlowState)`` pairs at the output cadence.
        times: every accepted time level, starting at 0.
        sup_omega: ``||omega||_inf`` at every time level.
        status: ``"complete"``, ``"cfl_abort"`` or ``"nan_abort"``.
        message: diagnostic for aborted runs.
    """

    snapshots: list = field(default_factory=list)
    times: list = field(default_factory=list)
    sup_omega: list = field(default_factory=list)
    status: str = "complete"
    message: str = ""

    @property
    def final(self) -> FlowState:
        return self.snapshots[-1][1]

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def complete(self) -> bool:
        return self.status == "complete"


class Integrator:
    """Array-level stepper with cached integrating factors."""

    def __init__(self, grid: Grid, m0: float, *, dealias: bool = True, nonlinear: bool = True,
                 cfl_safety: float = 1.0):
        self.grid = grid
        self.m0 = float(m0)
        self.dealias = dealias
        self.nonlinear = nonlinear
        self.cfl_safety = cfl_safety
        self._factors: dict[float, np.ndarray] = {}
        self.dx = min(grid.dx1, grid.dx2)

    def factor(self, dt: float) -> np.ndarray:
        E = self._factors.get(dt)
        if E is None:
            if len(self._factors) > 64:
                self._factors.clear()
            E = np.exp(-self.grid.ksq * dt)
            self._factors[dt] = E
        return E

    def advection(self, w_hat: np.ndarray) -> tuple[np.ndarray, float]:
        """Spectral ``u . grad omega`` and ``max|u|`` on the grid."""
        g = self.grid
        u1h, u2h = velocity_hats(g, w_hat, self.m0)
        phys = g.ifft(np.stack([u1h, u2h, g.ik1 * w_hat, g.ik2 * w_hat]))
        umax = float(np.sqrt(np.max(phys[0] ** 2 + phys[1] ** 2)))
        if not self.nonlinear:
            return np.zeros_like(w_hat), umax
        adv = g.fft(phys[0] * phys[2] + phys[1] * phys[3])
        if self.dealias:
            adv *= g.dealias_mask
        adv[0, 0] = 0.0
        return adv, umax

    def admissible_dt(self, umax: float) -> float:
        return math.inf if umax == 0 else self.cfl_safety * self.dx / umax

    def step(self, w_hat: np.ndarray, dt: float) -> np.ndarray:
        N1, umax = self.advection(w_hat)
        limit = self.admissible_dt(umax)
        if dt > limit:
            raise CFLError(dt, limit)
        E = self.factor(dt)
        stage = E * (w_hat - dt * N1)
        N2, _ = self.advection(stage)
        return E * w_hat - 0.5 * dt * (E * N1 + N2)


def nonlinear_term(state: FlowState, dealias: bool = True) -> RealField:
    """``u . grad omega`` on the grid, dealiased, with zero mean."""
    grid = state.grid
    check_circulation(grid, state.omega_hat, state.sup_omega)
    adv, _ = Integrator(grid, state.m0, dealias=dealias).advection(state.omega_hat)
    return RealField(grid, grid.ifft(adv))


def step(state: FlowState, dt: float, *, cfl_safety: float = 1.0, nonlinear: bool = True,
         dealias: bool = True) -> FlowState:
    """Advance ``state`` by one step of length ``dt``.

    Raises:
        CFLError: if ``dt max|u| > cfl_safety min(dx1, dx2)``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = state.grid
    check_circulation(grid, state.omega_hat, state.sup_omega)
    integ = Integrator(grid, state.m0, dealias=dealias, nonlinear=nonlinear,
                       cfl_safety=cfl_safety)
    w_new = integ.step(state.omega_hat, dt)
    return state.with_values(grid.ifft(w_new), state.t + dt)


Callback = Callable[[FlowState], None]


def _ramp_dt(config: SimConfig, n: int) -> float:
    if config.dt_min is None:
        return config.dt
    return min(config.dt, config.dt_min * 2.0 ** (n // config.ramp_steps))


def run(config: SimConfig, callbacks: Iterable[Callback] = (), initial_state: FlowState | None = None,
        on_step: Callable[[int, float], None] | None = None) -> Trajectory:
    """Integrate from the configured initial condition to ``T_final``.

    Each callback receives every accepted state, including the initial one.
    Steps are shortened to land exactly on checkpoints, output times and
    ``T_final``.  A CFL failure halves the step (persistently) up to
    ``max_retries`` times; beyond that, or on non-finite values, the run
    stops and the partial trajectory is returned with an abort status.
    """
    if initial_state is None:
        from .scenarios import build_initial_state

        initial_state = build_initial_state(config.grid, config.initial_condition)
    grid = config.grid
    if initial_state.grid != grid:
        raise ValueError("initial state grid differs from the configured grid")
    check_circulation(grid, initial_state.omega_hat, initial_state.sup_omega)
    callbacks = list(callbacks)
    integ = Integrator(grid, initial_state.m0, dealias=config.dealias,
                       nonlinear=config.nonlinear, cfl_safety=config.cfl_safety)

    traj = Trajectory()
    state = initial_state
    traj.snapshots.append((state.t, state))
    traj.times.append(state.t)
    traj.sup_omega.append(state.sup_omega)
    for cb in callbacks:
        cb(state)

    events = config.event_times()
    stored = set(config.checkpoints) | {config.T_final}
    if config.output_cadence is not None:
        stored |= set(events)
    t = state.t
    w_hat = state.omega_hat
    n = 0
    cap = math.inf
    ev = 0
    while ev < len(events):
        target = events[ev]
        dt = min(_ramp_dt(config, n), cap)
        remaining = target - t
        hit = remaining <= dt * (1 + EVENT_TOL)
        dt_step = remaining if hit else dt
        retries = 0
        while True:
            try:
                w_new = integ.step(w_hat, dt_step)
                break
            except CFLError as err:
                retries += 1
                if retries > config.max_retries:
                    traj.status = "cfl_abort"
                    traj.message = f"t = {t:.6g}: {err}"
                    return traj
                cap = min(dt, err.admissible_dt) / 2
                dt = cap
                hit = remaining <= dt * (1 + EVENT_TOL)
                dt_step = remaining if hit else dt
        values = grid.ifft(w_new)
        if not np.all(np.isfinite(values)):
            traj.status = "nan_abort"
            traj.message = f"non-finite vorticity after t = {t:.6g}"
            return traj
        t = target if hit else t + dt_step
        n += 1
        state = state.with_values(values, t)
        w_hat = state.omega_hat
        traj.times.append(t)
        traj.sup_omega.append(state.sup_omega)
        for cb in callbacks:
            cb(state)
        if on_step is not None:
            on_step(n, t)
        if hit:
            if target in stored:
                traj.snapshots.append((t, state))
            ev += 1
    return traj
