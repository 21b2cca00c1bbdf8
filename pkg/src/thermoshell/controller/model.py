"""Low-order discrete model of command-to-surface dynamics, fit from a step response."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from ..commands import ControlCommand
from ..errors import IdentificationError
from ..loop import pump_flow

FIT_RMS_LIMIT = 0.2  # degC over the identification window
MIN_RATIO = 1.5  # between neighbouring modal time constants


@dataclass(frozen=True)
class ReducedModel:
    """Diagonal (modal) state-space model in deviation coordinates.

    ``x[k+1] = A x[k] + B (u[k] - u_ref)``, ``y[k] = C x[k] + D (u[k] - u_ref) + y_ref``.
    Order 0 is a pure gain carried by ``D``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float
    tick: float
    u_ref: float
    y_ref: float
    time_constants: tuple = ()
    fit_rms: float = 0.0

    @property
    def order(self):
        return int(self.A.shape[0])

    @property
    def dc_gain(self):
        if self.order == 0:
            return float(self.D)
        return float(self.C @ np.linalg.solve(np.eye(self.order) - self.A, self.B)) + float(self.D)

    def steady_state(self, u):
        """State holding the output constant under constant input ``u``."""
        if self.order == 0:
            return np.zeros(0)
        return np.linalg.solve(np.eye(self.order) - self.A, self.B * (u - self.u_ref))

    def step(self, x, u):
        return self.A @ x + self.B * (u - self.u_ref)

    def output(self, x, u):
        return float(self.C @ x) + self.D * (u - self.u_ref) + self.y_ref

    def dominant_pole(self):
        return float(np.max(self.A.diagonal())) if self.order else 0.0


def first_order_model(time_constant, gain, tick, u_ref=0.0, y_ref=0.0):
    """Exact zero-order-hold discretization of ``gain / (tau s + 1)``."""
    a = np.exp(-tick / time_constant)
    return ReducedModel(np.array([[a]]), np.array([(1 - a) * gain]), np.array([1.0]), 0.0, tick,
                        u_ref, y_ref, (float(time_constant),))


def _modal_basis(times, taus):
    return 1.0 - np.exp(-np.outer(times, 1.0 / taus))


def fit_step_response(times, response, step, tick, order=3, u_ref=0.0, y_ref=0.0, limit=FIT_RMS_LIMIT):
    """Fit ``sum_i g_i (1 - exp(-t/tau_i))`` to a step response sampled at ``tick``.

    ``response`` is the output deviation for an input step of ``step`` applied
    at ``t = 0``. Time constants are found by variable projection (gains by
    linear least squares inside the residual); the result is discretized exactly.
    A response that is already flat at the first sample gives an order-0 model.
    """
    times = np.asarray(times, dtype=float)
    y = np.asarray(response, dtype=float)
    if step == 0:
        raise ValueError("step must be nonzero")
    span = times[-1] - times[0]
    if order == 0 or np.max(np.abs(y - y[-1])) <= 1e-9 * max(1.0, abs(y[-1])):
        gain = float(np.mean(y[1:]) / step) if y.size > 1 else float(y[-1] / step)
        rms = float(np.sqrt(np.mean((y[1:] - gain * step) ** 2))) if y.size > 1 else 0.0
        model = ReducedModel(np.zeros((0, 0)), np.zeros(0), np.zeros(0), gain, tick, u_ref, y_ref, (), rms)
        return _check(model, rms, limit)

    # slowest log-tau first, then positive gaps: keeps the modes ordered and
    # at least MIN_RATIO apart so the modal gains stay well conditioned
    def log_taus_of(p):
        return p[0] - np.concatenate(([0.0], np.cumsum(p[1:])))

    def gains(p):
        basis = _modal_basis(times, np.exp(log_taus_of(p)))
        g, *_ = np.linalg.lstsq(basis, y, rcond=None)
        return basis, g

    def residual(p):
        basis, g = gains(p)
        return basis @ g - y

    lo, hi = np.log(tick / 4.0), np.log(10.0 * span)
    gap_lo, gap_hi = np.log(MIN_RATIO), hi - lo
    lower = np.r_[lo, np.full(order - 1, gap_lo)]
    upper = np.r_[hi, np.full(order - 1, gap_hi)]
    best = None
    for top in (span / 4.0, span / 8.0, span / 2.0):  # deterministic multi-start
        for gap in (1.0, 2.0):
            seed = np.clip(np.r_[np.log(top), np.full(order - 1, gap)], lower + 1e-9, upper - 1e-9)
            sol = least_squares(residual, seed, bounds=(lower, upper), xtol=1e-12, ftol=1e-12, gtol=1e-12)
            if best is None or sol.cost < best.cost:
                best = sol
    taus = np.exp(log_taus_of(best.x))
    _, g = gains(best.x)
    a = np.exp(-tick / taus)
    rms = float(np.sqrt(np.mean(residual(best.x) ** 2)))
    model = ReducedModel(np.diag(a), (1 - a) * g / step, np.ones(order), 0.0, tick, u_ref, y_ref,
                         tuple(float(t) for t in taus), rms)
    return _check(model, rms, limit)


def _check(model, rms, limit):
    if rms > limit:
        raise IdentificationError(f"reduced-model fit rms {rms:.3g} degC exceeds {limit} degC", residual_rms=rms)
    return model


def identify_reduced_model(plant, nominal_flow=None, tick=0.5, order=3, step=30.0, duration=300.0,
                           dt=0.05, base_command=None, limit=FIT_RMS_LIMIT):
    """Reduced model from the simulated command-to-surface step response.

    The plant starts at rest at ``base_command`` (default ambient) and the
    Peltier command steps by ``step`` at ``t = 0``; the pump runs at the
    voltage giving ``nominal_flow`` (default full flow). The response is
    sampled at the control tick over ``duration`` seconds.
    """
    plant.network.validate()
    cfg = plant.config
    pump = cfg.pump
    voltage = pump.v_max if nominal_flow is None else _voltage_for_flow(pump, nominal_flow)
    base = cfg.ambient_temp if base_command is None else base_command
    flow = pump_flow(pump, voltage)
    temps = plant.steady_state(base, flow)
    state = plant.initial_state()
    state.temperatures[:] = temps
    sub = int(round(tick / dt))
    if abs(sub * dt - tick) > 1e-9:
        raise ValueError("tick must be a multiple of dt")
    cmd = ControlCommand(base + step, voltage)
    s = plant.idx["surface"]
    y0 = float(temps[s])
    n = int(round(duration / tick))
    out = np.empty(n + 1)
    out[0] = 0.0
    for k in range(1, n + 1):
        for _ in range(sub):
            state = plant.step(state, cmd, dt=dt)
        out[k] = state.temperatures[s] - y0
    times = tick * np.arange(n + 1)
    return fit_step_response(times, out, step, tick, order, u_ref=base, y_ref=y0, limit=limit)


def _voltage_for_flow(pump, flow):
    if flow <= 0:
        return pump.v_min
    return pump.deadband + min(flow / pump.q_max, 1.0) * (pump.v_max - pump.deadband)


def identify_pump_channel(plant, hold_voltage=None, tick=0.5, order=2, face_offset=20.0, duration=120.0,
                          dt=0.05, limit=FIT_RMS_LIMIT):
    """Surface response to a pump-voltage step, normalized per volt and per kelvin of gap.

    The plant starts at the steady state with faces ``face_offset`` above
    ambient and the pump at ``hold_voltage`` (default 40 % of maximum); the
    pump then steps to full voltage. The gain is divided by the initial
    tank-to-surface temperature gap so the MPC can rescale it online.
    """
    from .mpc import PumpChannel

    cfg = plant.config
    pump = cfg.pump
    hold = 0.4 * pump.v_max if hold_voltage is None else hold_voltage
    face = cfg.ambient_temp + face_offset
    temps = plant.steady_state(face, pump_flow(pump, hold))
    state = plant.initial_state()
    state.temperatures[:] = temps
    s, tank = plant.idx["surface"], plant.idx["tank"]
    gap = float(temps[tank] - temps[s])
    dv = pump.v_max - hold
    sub = int(round(tick / dt))
    n = int(round(duration / tick))
    out = np.zeros(n + 1)
    cmd = ControlCommand(face, pump.v_max)
    for k in range(1, n + 1):
        for _ in range(sub):
            state = plant.step(state, cmd, dt=dt)
        out[k] = state.temperatures[s] - temps[s]
    model = fit_step_response(tick * np.arange(n + 1), out / gap, dv, tick, order, u_ref=hold, y_ref=0.0,
                              limit=limit / abs(gap))
    return PumpChannel(model)
