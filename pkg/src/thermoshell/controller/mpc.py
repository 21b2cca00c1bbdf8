"""Offset-free tracking MPC on a reduced modal model, condensed into a box QP.

Decision variables are the Peltier commands over the control horizon (and, in
joint mode, the pump voltages); beyond the control horizon the last input is
held until the end of the prediction horizon. The output prediction adds a
constant disturbance equal to the current plant/model mismatch.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..commands import ControlCommand
from ..errors import ConfigError
from .model import ReducedModel
from .qp import solve_box_qp


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 20  # control moves
    tick: float = 0.5  # s
    q: float = 1.0  # tracking weight
    r: float = 0.02  # input-move weight
    rho: float = 0.0  # pump-use weight
    order: int = 3
    prediction_horizon: int = 240  # ticks; >= horizon
    joint: bool = False
    preview: bool = False  # False: future setpoints are assumed equal to the current one
    u_min: float = 12.0
    u_max: float = 77.0
    v_min: float = 0.0
    v_max: float = 5.0
    tol: float = 1e-8
    max_iter: int = 500

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("mpc.horizon must be >= 1", key="mpc.horizon")
        if self.prediction_horizon < self.horizon:
            raise ConfigError("mpc.prediction_horizon must be >= mpc.horizon", key="mpc.prediction_horizon")
        if not self.r > 0:
            raise ConfigError("mpc.r must be > 0", key="mpc.r")
        if self.q < 0 or self.rho < 0:
            raise ConfigError("mpc.q and mpc.rho must be >= 0", key="mpc.q")
        if not self.tick > 0:
            raise ConfigError("mpc.tick must be > 0", key="mpc.tick")
        if not self.u_min < self.u_max or not self.v_min < self.v_max:
            raise ConfigError("input bounds are empty", key="mpc.u_max")


@dataclass(frozen=True)
class PumpChannel:
    """Surface response to pump voltage, per volt and per kelvin of tank-to-surface gap."""

    model: ReducedModel  # u_ref is the holding voltage; gain is per V per K


@dataclass
class MpcEstimate:
    """Model states and the measured output used for the disturbance term."""

    x: np.ndarray
    u_prev: float
    y_meas: float
    x_pump: np.ndarray = field(default_factory=lambda: np.zeros(0))
    p_prev: float = 0.0
    gap: float = 0.0  # tank minus surface, K


@dataclass
class MpcProblem:
    H: np.ndarray
    g: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    offset: np.ndarray  # decision = z + offset gives absolute inputs
    const: float
    n_u: int


@dataclass
class MpcResult:
    command: ControlCommand
    inputs: np.ndarray  # absolute Peltier commands over the control horizon
    pump_inputs: np.ndarray
    objective: float
    iterations: int
    converged: bool
    pg_norm: float


def _hold_map(nc, np_):
    """(np_ x nc) map from control moves to inputs at steps 0..np_-1."""
    m = np.zeros((np_, nc))
    for j in range(np_):
        m[j, min(j, nc - 1)] = 1.0
    return m


def _forced_response(model, nc, np_):
    """Output deviation at steps 1..np_ per unit deviation of each control move."""
    hold = _hold_map(nc, np_ + 1)
    out = np.zeros((np_, nc))
    n = model.order
    for c in range(nc):
        x = np.zeros(n)
        for j in range(np_):
            x = model.A @ x + model.B * hold[j, c] if n else x
            out[j, c] = (float(model.C @ x) if n else 0.0) + model.D * hold[j + 1, c]
    return out


def _free_response(model, x, np_):
    out = np.zeros(np_)
    n = model.order
    for j in range(np_):
        if n:
            x = model.A @ x
            out[j] = float(model.C @ x)
    return out


def _move_matrix(nc):
    d = np.eye(nc)
    d[1:, :-1] -= np.eye(nc - 1)
    return d


_PHI = {"model": None, "shape": None, "value": None}


def _phi(model, nc, np_):
    # single-entry cache; holds a reference so identity comparison stays valid
    if _PHI["model"] is not model or _PHI["shape"] != (nc, np_):
        _PHI.update(model=model, shape=(nc, np_), value=(_forced_response(model, nc, np_), _move_matrix(nc)))
    return _PHI["value"]


def _disturbance(model, estimate, config, pump):
    """Measured minus modelled surface temperature at the current tick."""
    d = estimate.y_meas - model.output(estimate.x, estimate.u_prev)
    if config.joint and pump is not None and pump.model.order:
        d -= float(pump.model.C @ estimate.x_pump)
    return d


def build_problem(model, estimate, window, config, pump=None):
    """Condensed QP ``0.5 z'Hz + g'z + const`` over deviation inputs ``z``.

    The objective equals ``sum Q (y - r)^2 + R sum du^2 (+ R sum dp^2 + rho sum p^2)``
    with ``y`` the predicted surface temperatures at ticks ``1..Np``.
    """
    nc, np_ = config.horizon, config.prediction_horizon
    r = np.asarray(window, dtype=float)[:np_]
    if r.size < np_:
        raise ValueError(f"profile window has {r.size} entries, need {np_}")
    phi, dmat = _phi(model, nc, np_)
    d = _disturbance(model, estimate, config, pump)
    free = _free_response(model, estimate.x, np_) + model.y_ref + d
    e0 = np.zeros(nc)
    e0[0] = 1.0
    blocks_phi = [phi]
    offsets = [np.full(nc, model.u_ref)]
    lower = [np.full(nc, config.u_min - model.u_ref)]
    upper = [np.full(nc, config.u_max - model.u_ref)]
    prev = [estimate.u_prev - model.u_ref]
    if config.joint:
        if pump is None:
            raise ValueError("joint mode needs a pump channel")
        pm = pump.model
        scaled = replace(pm, B=pm.B * estimate.gap, D=pm.D * estimate.gap)
        free = free + _free_response(pm, estimate.x_pump, np_)
        blocks_phi.append(_forced_response(scaled, nc, np_))
        offsets.append(np.full(nc, pm.u_ref))
        lower.append(np.full(nc, config.v_min - pm.u_ref))
        upper.append(np.full(nc, config.v_max - pm.u_ref))
        prev.append(estimate.p_prev - pm.u_ref)
    big_phi = np.hstack(blocks_phi)
    m = len(blocks_phi)
    H = 2.0 * config.q * big_phi.T @ big_phi
    err = free - r
    g = 2.0 * config.q * big_phi.T @ err
    const = config.q * float(err @ err)
    for b in range(m):
        sl = slice(b * nc, (b + 1) * nc)
        H[sl, sl] += 2.0 * config.r * dmat.T @ dmat
        g[sl] -= 2.0 * config.r * dmat.T @ e0 * prev[b]
        const += config.r * prev[b] ** 2
    if config.joint and config.rho > 0:
        sl = slice(nc, 2 * nc)
        p_ref = pump.model.u_ref
        H[sl, sl] += 2.0 * config.rho * np.eye(nc)
        g[sl] += 2.0 * config.rho * p_ref
        const += config.rho * nc * p_ref ** 2
    return MpcProblem(H, g, np.concatenate(lower), np.concatenate(upper), np.concatenate(offsets), const, nc)


def mpc_objective(model, estimate, window, config, inputs, pump_inputs=None, pump=None):
    """The MPC cost of absolute input sequences, by forward simulation of the model.

    Independent of :func:`build_problem`; used as the oracle's cost function.
    """
    nc, np_ = config.horizon, config.prediction_horizon
    u = [inputs[min(j, nc - 1)] for j in range(np_ + 1)]
    d = _disturbance(model, estimate, config, pump)
    x = np.array(estimate.x, dtype=float)
    xp = np.array(estimate.x_pump, dtype=float)
    cost = 0.0
    for j in range(np_):
        x = model.step(x, u[j])
        y = model.output(x, u[j + 1]) + d
        if config.joint:
            pm = pump.model
            p = pump_inputs[min(j, nc - 1)]
            xp = pm.A @ xp + pm.B * estimate.gap * (p - pm.u_ref)
            y += float(pm.C @ xp)
        cost += config.q * (y - window[j]) ** 2
    prev = estimate.u_prev
    for v in inputs[:nc]:
        cost += config.r * (v - prev) ** 2
        prev = v
    if config.joint:
        prev = estimate.p_prev
        for v in pump_inputs[:nc]:
            cost += config.r * (v - prev) ** 2 + config.rho * v ** 2
            prev = v
    return cost


def mpc_step(model, estimate, window, config, pump=None, warm_start=None, tick_index=0, pump_voltage=None):
    """Solve one receding-horizon problem and return the first move.

    ``pump_voltage`` is passed through when not in joint mode. The caller is
    responsible for falling back when ``result.converged`` is false.
    """
    prob = build_problem(model, estimate, window, config, pump)
    x0 = None if warm_start is None else np.clip(warm_start - prob.offset, prob.lower, prob.upper)
    sol = solve_box_qp(prob.H, prob.g, prob.lower, prob.upper, x0, config.tol, config.max_iter)
    absolute = sol.x + prob.offset
    nc = config.horizon
    u0 = float(absolute[0])
    pump_inputs = absolute[nc:2 * nc] if config.joint else np.zeros(0)
    v0 = float(pump_inputs[0]) if config.joint else (config.v_max if pump_voltage is None else pump_voltage)
    # first move on (or within solver tolerance of) a bound counts as saturated
    span = config.u_max - config.u_min
    clamped = bool(u0 <= config.u_min + 1e-6 * span or u0 >= config.u_max - 1e-6 * span)
    u0 = min(max(u0, config.u_min), config.u_max)
    v0 = min(max(v0, config.v_min), config.v_max)
    cmd = ControlCommand(u0, v0, tick_index, clamped=clamped)
    return MpcResult(cmd, absolute[:nc], pump_inputs, sol.objective + prob.const, sol.iterations,
                     sol.converged, sol.pg_norm)


@dataclass
class TickDiagnostics:
    tick_index: int
    iterations: int
    objective: float
    pg_norm: float
    converged: bool
    clamped: bool
    fallback: bool


class MpcController:
    """Receding-horizon controller advanced once per tick by the scenario runner.

    Keeps the internal-model states (driven by the inputs actually applied),
    a warm start, and a PI fallback used on ticks where the solver does not
    converge.
    """

    def __init__(self, model, config, fallback, pump_channel=None):
        self.model = model
        self.config = config
        self.fallback = fallback  # PiController
        self.pump_channel = pump_channel
        self.x = np.zeros(model.order)
        self.x_pump = np.zeros(pump_channel.model.order if pump_channel else 0)
        self.u_prev = model.u_ref
        self.p_prev = pump_channel.model.u_ref if pump_channel else config.v_max
        self.gap = 0.0
        self._warm = None

    def reset(self, command=None, measurement=None, setpoint=None, pump_voltage=None):
        """Start from rest at ``command`` (model at its steady state for that input)."""
        u = self.model.u_ref if command is None else command
        self.x = self.model.steady_state(u)
        self.u_prev = u
        if self.pump_channel is not None:
            self.x_pump = np.zeros(self.pump_channel.model.order)
            self.p_prev = self.pump_channel.model.u_ref if pump_voltage is None else pump_voltage
        self._warm = None
        self.fallback.reset(u, measurement, setpoint)

    def update(self, tick_index, measurement, window, pump_voltage):
        cfg = self.config
        self.gap = measurement.get("tank", 0.0) - measurement["surface"]
        est = MpcEstimate(self.x, self.u_prev, measurement["surface"], self.x_pump, self.p_prev, self.gap)
        res = mpc_step(self.model, est, window, cfg, self.pump_channel, self._warm, tick_index, pump_voltage)
        cmd = res.command
        fallback = not res.converged
        if fallback:
            pi_cmd, _ = self.fallback.update(tick_index, measurement, window, cmd.pump_voltage)
            cmd = replace(pi_cmd, fallback=True, tick_index=tick_index)
            self._warm = None
        else:
            warm = np.concatenate([res.inputs[1:], res.inputs[-1:]])
            if cfg.joint:
                warm = np.concatenate([warm, res.pump_inputs[1:], res.pump_inputs[-1:]])
            self._warm = warm
            # keep the fallback integrator aligned with the applied command
            self.fallback.reset(cmd.peltier_command)
        self._advance(cmd)
        diag = TickDiagnostics(tick_index, res.iterations, res.objective, res.pg_norm, res.converged,
                               cmd.clamped, fallback)
        return cmd, diag

    def _advance(self, cmd):
        self.x = self.model.step(self.x, cmd.peltier_command)
        self.u_prev = cmd.peltier_command
        if self.pump_channel is not None:
            pm = self.pump_channel.model
            self.x_pump = pm.A @ self.x_pump + pm.B * self.gap * (cmd.pump_voltage - pm.u_ref)
            self.p_prev = cmd.pump_voltage
