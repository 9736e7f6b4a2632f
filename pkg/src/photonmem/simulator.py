"""Direct integration of the scaled light-matter equations.

The field is slaved to the polarization in the comoving frame, so a run
steps only (P, S) with classical RK4 and rebuilds the field profile at every
stage by a cumulative sum in space.  The spatial layout is staggered: P and S
live at cell midpoints, the field at cell faces, with the P equation driven
by the face average.  That pairing makes the semi-discrete photon-number
balance

    d/dtau [ sum (|P|^2 + |S|^2) dz ] = |E_in|^2 - |E_out|^2 - 2 sum |P|^2 dz

hold exactly, so the only balance defect left is the RK4 time-stepping error
(which the energy audit measures, and which shrinks 16x per step halving).
Input energy, leaked energy and decayed energy are integrated as additional
RK4 state components for the same reason.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Union

import numpy as np

from . import fast as _fast
from .core import (
    ControlField,
    EfficiencyBreakdown,
    FieldMode,
    InstabilityError,
    MediumParams,
    SpaceGrid,
    SpinWave,
    TimeGrid,
    resample_spinwave,
)

__all__ = [
    "EnsembleState",
    "SimulationResult",
    "AuditReport",
    "simulate_storage",
    "simulate_retrieval",
    "simulate_fast_storage",
    "apply_finite_pi_pulse",
    "energy_audit",
]

Waveform = Union[FieldMode, ControlField, Callable[[np.ndarray], np.ndarray], None]

DEFAULT_N_ZETA = 256
DEFECT_TOL = 1e-4
RING_DOWN_P_TOL = 1e-10
RING_DOWN_MAX_TIME = 40.0
MAX_STEPS = 20_000_000


@dataclass(frozen=True, eq=False)
class EnsembleState:
    """Snapshot of the medium: field, polarization and spin wave vs position.

    All three arrays are sampled at the cell midpoints of a uniform grid.
    """

    grid: SpaceGrid
    E: np.ndarray
    P: np.ndarray
    S: np.ndarray
    tau: float

    def excitation_norm2(self) -> float:
        w = self.grid.weights
        return float(np.dot(w, np.abs(self.P) ** 2 + np.abs(self.S) ** 2))


@dataclass(frozen=True, eq=False)
class SimulationResult:
    final_state: EnsembleState
    output_mode: FieldMode
    breakdown: EfficiencyBreakdown
    diagnostics: dict


@dataclass(frozen=True)
class AuditReport:
    """Photon-number bookkeeping for one run; ``defect`` is the imbalance."""

    input_norm2: float
    initial_excitation: float
    stored: float
    leaked: float
    decayed: float
    residual_polarization: float
    defect: float

    def balanced(self, tol: float = DEFECT_TOL) -> bool:
        return abs(self.defect) <= tol


def _waveform_on(times: np.ndarray, wf: Waveform) -> np.ndarray:
    """Evaluate an input/control specification on the given times.

    Sampled waveforms are cubic-spline interpolated inside their window and
    zero outside; callables are evaluated directly and must be vectorized.
    """
    if wf is None:
        return np.zeros(times.size, dtype=complex)
    if isinstance(wf, (FieldMode, ControlField)):
        from scipy.interpolate import CubicSpline

        g = wf.grid
        spline = CubicSpline(g.times, wf.samples)
        vals = np.asarray(spline(times), dtype=complex)
        vals[(times < g.tau0 - 1e-12) | (times > g.t_end + 1e-12)] = 0.0
        return vals
    vals = np.asarray(wf(times), dtype=complex)
    if vals.shape != times.shape:
        raise ValueError("callable waveform must return one value per time")
    return vals


def _max_abs(wf: Waveform, window: tuple[float, float]) -> float:
    if wf is None:
        return 0.0
    if isinstance(wf, (FieldMode, ControlField)):
        return float(np.max(np.abs(wf.samples)))
    probe = np.linspace(window[0], window[1], 513)
    return float(np.max(np.abs(np.asarray(wf(probe), dtype=complex))))


def default_dtau(
    params: MediumParams,
    ctrl: Waveform,
    window: tuple[float, float],
    input_mode: FieldMode | None = None,
) -> float:
    """Step-size heuristic: resolve the control power, detuning rotation,
    collective coupling, and any sampled-input structure.

    The control term takes the looser of a power-resolving bound (.5/|w|^2,
    right for moderate drives) and a rotation-resolving bound (.3/|w|, right
    for brief strong spikes such as shaped-control leading edges); the
    balance-defect refinement loop catches any case where that is too
    optimistic.
    """
    omega_max = _max_abs(ctrl, window)
    dt = min(0.05, 0.5 / math.sqrt(1.0 + params.delta**2), 2.0 / (1.0 + 0.7 * params.d))
    if omega_max > 0:
        dt = min(dt, max(0.5 / omega_max**2, 0.3 / omega_max))
    if isinstance(ctrl, ControlField):
        dt = min(dt, ctrl.grid.dtau)
    if input_mode is not None:
        dt = min(dt, input_mode.grid.dtau)
    return dt


class _Integrator:
    """RK4 evolution of (P, S) plus energy accumulators on a fixed window."""

    def __init__(self, params: MediumParams, n_zeta: int, damping: float = 1.0):
        self.params = params
        self.grid = SpaceGrid.uniform_midpoint(n_zeta)
        self.dz = 1.0 / n_zeta
        self.sqrt_d = math.sqrt(params.d)
        self.damping = damping
        self.decay_coeff = -(damping + 1j * params.delta)

    def field_profile(self, p: np.ndarray, e_in: complex):
        """Cell-center field values and the exit-face value for given P."""
        cs = np.cumsum(p) * self.dz
        e_end = e_in + 1j * self.sqrt_d * cs[-1]
        e_centers = e_in + 1j * self.sqrt_d * (cs - 0.5 * self.dz * p)
        return e_centers, e_end

    def _rhs(self, p, s, e_in, om):
        e_centers, e_end = self.field_profile(p, e_in)
        dp = self.decay_coeff * p + 1j * self.sqrt_d * e_centers + 1j * om * s
        ds = 1j * np.conj(om) * p
        dleak = abs(e_end) ** 2
        ddec = 2.0 * self.damping * self.dz * float(np.sum(np.abs(p) ** 2))
        din = abs(e_in) ** 2
        return dp, ds, din, dleak, ddec

    def run(self, p0, s0, t0, dt, n_steps, e_in_half, om_half, record_output=True):
        """March n_steps of RK4; half-grid arrays hold the drive at stage times."""
        p = np.array(p0, dtype=complex)
        s = np.array(s0, dtype=complex)
        acc_in = acc_leak = acc_dec = 0.0
        n0 = self.dz * float(np.sum(np.abs(p) ** 2 + np.abs(s) ** 2))
        out = np.empty(n_steps + 1, dtype=complex) if record_output else None
        if record_output:
            out[0] = self.field_profile(p, e_in_half[0])[1]
        check_every = 64
        for k in range(n_steps):
            e0, e1, e2 = e_in_half[2 * k], e_in_half[2 * k + 1], e_in_half[2 * k + 2]
            w0, w1, w2 = om_half[2 * k], om_half[2 * k + 1], om_half[2 * k + 2]
            k1 = self._rhs(p, s, e0, w0)
            k2 = self._rhs(p + 0.5 * dt * k1[0], s + 0.5 * dt * k1[1], e1, w1)
            k3 = self._rhs(p + 0.5 * dt * k2[0], s + 0.5 * dt * k2[1], e1, w1)
            k4 = self._rhs(p + dt * k3[0], s + dt * k3[1], e2, w2)
            p = p + (dt / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            s = s + (dt / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            acc_in += (dt / 6.0) * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
            acc_leak += (dt / 6.0) * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
            acc_dec += (dt / 6.0) * (k1[4] + 2.0 * k2[4] + 2.0 * k3[4] + k4[4])
            if record_output:
                out[k + 1] = self.field_profile(p, e2)[1]
            if (k + 1) % check_every == 0 or k == n_steps - 1:
                n_now = self.dz * float(np.sum(np.abs(p) ** 2 + np.abs(s) ** 2))
                if not np.isfinite(n_now):
                    raise InstabilityError(
                        f"non-finite state at tau={t0 + (k + 1) * dt:.3f}; reduce dtau"
                    )
                # leaked/decayed energy never returns, so the excitation still
                # in the medium can only exceed the injected budget through
                # numerical blow-up
                if self.damping >= 1.0 and n_now > n0 + acc_in + 1e-6:
                    raise InstabilityError(
                        "excitation grew beyond the injected energy; reduce dtau"
                    )
        return p, s, out, acc_in, acc_leak, acc_dec, n0


def _half_grid(wf: Waveform, t0: float, dt: float, n_steps: int) -> np.ndarray:
    times = t0 + 0.5 * dt * np.arange(2 * n_steps + 1)
    return _waveform_on(times, wf)


def _run_window(
    integ: _Integrator,
    p0,
    s0,
    window: tuple[float, float],
    dtau: float,
    input_mode: Waveform,
    ctrl: Waveform,
):
    t0, t1 = window
    n_steps = max(2, int(math.ceil((t1 - t0) / dtau - 1e-12)))
    if n_steps > MAX_STEPS:
        raise InstabilityError(f"required {n_steps} steps exceeds limit; widen dtau")
    dt = (t1 - t0) / n_steps
    e_half = _half_grid(input_mode, t0, dt, n_steps)
    om_half = _half_grid(ctrl, t0, dt, n_steps)
    p, s, out, acc_in, acc_leak, acc_dec, n0 = integ.run(
        p0, s0, t0, dt, n_steps, e_half, om_half
    )
    out_grid = TimeGrid(tau0=t0, dtau=dt, n=n_steps + 1)
    return p, s, FieldMode(grid=out_grid, samples=out), acc_in, acc_leak, acc_dec, n0, dt, n_steps


def _ring_down(integ: _Integrator, p, s, t_start: float, dt_cap: float = 0.02):
    """Flush residual polarization with the drive off; S is frozen exactly.

    Returns the additional leaked/decayed energy and the flushed state.
    """
    dz = integ.dz
    leak = dec = 0.0
    t = t_start
    dt = min(dt_cap, 0.5 / math.sqrt(1.0 + integ.params.delta**2), 2.0 / (1.0 + 0.7 * integ.params.d))
    while dz * float(np.sum(np.abs(p) ** 2)) > RING_DOWN_P_TOL and t - t_start < RING_DOWN_MAX_TIME:
        n_steps = max(2, int(round(5.0 / dt)))
        e_half = np.zeros(2 * n_steps + 1, dtype=complex)
        p, s, _, _, dl, dd, _ = integ.run(
            p, s, t, dt, n_steps, e_half, e_half, record_output=False
        )
        leak += dl
        dec += dd
        t += n_steps * dt
    return p, s, leak, dec, t - t_start


def _make_result(
    integ, p, s, output_mode, denom, stored, leaked, decayed, residual_p,
    acc_in, n0, dtau, n_steps, refinements, kind, ring_time,
) -> SimulationResult:
    defect = (stored + residual_p + leaked + decayed) - (n0 + acc_in)
    scale = denom if denom > 0 else 1.0
    if kind == "storage":
        br = EfficiencyBreakdown(
            eta_storage=stored / scale,
            eta_total=stored / scale,
            leak_fraction=leaked / scale,
            decay_fraction=decayed / scale,
            residual_fraction=residual_p / scale,
        )
    else:
        br = EfficiencyBreakdown(
            eta_retrieval=leaked / scale,
            eta_total=leaked / scale,
            leak_fraction=leaked / scale,
            decay_fraction=decayed / scale,
            residual_fraction=(stored + residual_p) / scale,
        )
    e_centers, _ = integ.field_profile(p, 0.0)
    state = EnsembleState(
        grid=integ.grid, E=e_centers, P=p, S=s,
        tau=output_mode.grid.t_end + ring_time,
    )
    diagnostics = {
        "kind": kind,
        "dtau": dtau,
        "n_steps": n_steps,
        "n_zeta": integ.grid.n,
        "refinements": refinements,
        "defect": defect,
        "input_norm2": acc_in,
        "initial_excitation": n0,
        "stored": stored,
        "leaked": leaked,
        "decayed": decayed,
        "residual_polarization": residual_p,
        "ring_down_time": ring_time,
    }
    return SimulationResult(
        final_state=state, output_mode=output_mode, breakdown=br, diagnostics=diagnostics
    )


def simulate_storage(
    input_mode: FieldMode,
    ctrl: Waveform,
    params: MediumParams,
    n_zeta: int = DEFAULT_N_ZETA,
    dtau: float | None = None,
    max_refinements: int = 3,
    ring_down: bool = True,
) -> SimulationResult:
    """Map an input mode onto the spin wave with the given control.

    Integrates over the input window, then (by default) lets the leftover
    polarization ring down with the drive off so the reported fractions
    satisfy the storage sum rule.  The step size is halved automatically
    until the energy-balance defect is below tolerance.
    """
    if n_zeta < 64:
        raise ValueError("n_zeta must be at least 64")
    window = (input_mode.grid.tau0, input_mode.grid.t_end)
    dt0 = dtau if dtau is not None else default_dtau(params, ctrl, window, input_mode)
    refinements = 0
    while True:
        integ = _Integrator(params, n_zeta)
        try:
            p0 = np.zeros(n_zeta, dtype=complex)
            p, s, out_mode, acc_in, leak, dec, n0, dt, n_steps = _run_window(
                integ, p0, p0, window, dt0, input_mode, ctrl
            )
            ring_time = 0.0
            if ring_down:
                p, s, rl, rd, ring_time = _ring_down(
                    integ, p, s, window[1], dt_cap=0.02 / 2**refinements
                )
                leak += rl
                dec += rd
            stored = integ.dz * float(np.sum(np.abs(s) ** 2))
            residual_p = integ.dz * float(np.sum(np.abs(p) ** 2))
            defect = (stored + residual_p + leak + dec) - (n0 + acc_in)
            if abs(defect) > DEFECT_TOL:
                raise InstabilityError(
                    f"balance defect {defect:.2e} above tolerance; reduce dtau"
                )
        except InstabilityError:
            if refinements >= max_refinements:
                raise
            refinements += 1
            dt0 /= 2.0
            continue
        return _make_result(
            integ, p, s, out_mode, acc_in, stored, leak, dec, residual_p,
            acc_in, n0, dt, n_steps, refinements, "storage", ring_time,
        )


def simulate_retrieval(
    s: SpinWave,
    ctrl: Waveform,
    params: MediumParams,
    direction: str = "backward",
    n_zeta: int = DEFAULT_N_ZETA,
    dtau: float | None = None,
    max_refinements: int = 3,
    ring_down: bool = True,
    window: tuple[float, float] | None = None,
) -> SimulationResult:
    """Retrieve a stored spin wave onto the output field.

    ``s`` is given in the storage frame; ``direction="backward"`` flips it
    into the retrieval propagation frame internally, ``"forward"`` uses it as
    is.  The integration window defaults to the control's grid span.
    """
    from .core import flip as _flip

    if direction not in ("backward", "forward"):
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    if window is None:
        if isinstance(ctrl, ControlField):
            window = (ctrl.grid.tau0, ctrl.grid.t_end)
        else:
            raise ValueError("window is required when the control is a callable")
    s_frame = _flip(s) if direction == "backward" else s
    sim_grid = SpaceGrid.uniform_midpoint(n_zeta)
    s0 = resample_spinwave(s_frame, sim_grid).samples

    dt0 = dtau if dtau is not None else default_dtau(params, ctrl, window)
    refinements = 0
    while True:
        integ = _Integrator(params, n_zeta)
        try:
            p, s_end, out_mode, acc_in, leak, dec, n0, dt, n_steps = _run_window(
                integ, np.zeros(n_zeta, dtype=complex), s0, window, dt0, None, ctrl
            )
            ring_time = 0.0
            if ring_down:
                p, s_end, rl, rd, ring_time = _ring_down(
                    integ, p, s_end, window[1], dt_cap=0.02 / 2**refinements
                )
                leak += rl
                dec += rd
            remaining_s = integ.dz * float(np.sum(np.abs(s_end) ** 2))
            residual_p = integ.dz * float(np.sum(np.abs(p) ** 2))
            defect = (remaining_s + residual_p + leak + dec) - (n0 + acc_in)
            if abs(defect) > DEFECT_TOL:
                raise InstabilityError(
                    f"balance defect {defect:.2e} above tolerance; reduce dtau"
                )
        except InstabilityError:
            if refinements >= max_refinements:
                raise
            refinements += 1
            dt0 /= 2.0
            continue
        return _make_result(
            integ, p, s_end, out_mode, n0, remaining_s, leak, dec, residual_p,
            acc_in, n0, dt, n_steps, refinements, "retrieval", ring_time,
        )


def simulate_fast_storage(
    input_mode: FieldMode,
    params: MediumParams,
    n_zeta: int = DEFAULT_N_ZETA,
    dtau: float | None = None,
    max_refinements: int = 3,
    pulse_strength: float | None = None,
) -> SimulationResult:
    """Free absorption of the input followed by a swap pulse at the window end.

    Requires resonance.  The swap is the ideal instantaneous map by default;
    passing ``pulse_strength`` simulates a finite pulse of that constant Rabi
    frequency and quarter-period area instead (for convergence studies).
    """
    if params.delta != 0.0:
        raise ValueError("fast storage requires resonance (delta = 0)")
    window = (input_mode.grid.tau0, input_mode.grid.t_end)
    dt0 = dtau if dtau is not None else default_dtau(params, None, window, input_mode)
    refinements = 0
    while True:
        integ = _Integrator(params, n_zeta)
        try:
            z0 = np.zeros(n_zeta, dtype=complex)
            p, s, out_mode, acc_in, leak, dec, n0, dt, n_steps = _run_window(
                integ, z0, z0, window, dt0, input_mode, None
            )
            state = EnsembleState(
                grid=integ.grid, E=integ.field_profile(p, 0.0)[0], P=p, S=s, tau=window[1]
            )
            if pulse_strength is None:
                state = _fast.pi_pulse(state)
            else:
                state, extra_leak, extra_dec = apply_finite_pi_pulse(
                    state, params, pulse_strength
                )
                leak += extra_leak
                dec += extra_dec
            stored = integ.dz * float(np.sum(np.abs(state.S) ** 2))
            residual_p = integ.dz * float(np.sum(np.abs(state.P) ** 2))
            defect = (stored + residual_p + leak + dec) - (n0 + acc_in)
            if abs(defect) > DEFECT_TOL:
                raise InstabilityError(
                    f"balance defect {defect:.2e} above tolerance; reduce dtau"
                )
        except InstabilityError:
            if refinements >= max_refinements:
                raise
            refinements += 1
            dt0 /= 2.0
            continue
        return _make_result(
            integ, state.P, state.S, out_mode, acc_in, stored, leak, dec, residual_p,
            acc_in, n0, dt, n_steps, refinements, "storage", 0.0,
        )


def apply_finite_pi_pulse(
    state: EnsembleState,
    params: MediumParams,
    omega0: float,
    n_substeps: int = 256,
):
    """Drive a constant resonant control of quarter-period area through the
    full equations.  Approaches the ideal swap as ``omega0`` grows."""
    if omega0 <= 0:
        raise ValueError("pulse strength must be positive")
    integ = _Integrator(params, state.grid.n)
    duration = 0.5 * math.pi / omega0
    dt = duration / n_substeps
    e_half = np.zeros(2 * n_substeps + 1, dtype=complex)
    om_half = np.full(2 * n_substeps + 1, omega0, dtype=complex)
    p, s, _, _, leak, dec, _ = integ.run(
        state.P, state.S, state.tau, dt, n_substeps, e_half, om_half, record_output=False
    )
    new = replace(state, E=integ.field_profile(p, 0.0)[0], P=p, S=s, tau=state.tau + duration)
    return new, leak, dec


def energy_audit(result: SimulationResult) -> AuditReport:
    """Photon-number balance of a finished run.

    Checks injected energy + initial excitation against stored + leaked +
    decayed + residual polarization; the defect is pure integrator error and
    shrinks at fourth order in the step size.
    """
    d = result.diagnostics
    return AuditReport(
        input_norm2=d["input_norm2"],
        initial_excitation=d["initial_excitation"],
        stored=d["stored"],
        leaked=d["leaked"],
        decayed=d["decayed"],
        residual_polarization=d["residual_polarization"],
        defect=d["defect"],
    )
