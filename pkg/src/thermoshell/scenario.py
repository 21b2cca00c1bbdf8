"""Closed-loop scenario runner and the metrics computed from its telemetry."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .commands import ControlCommand
from .controller.mpc import MpcConfig, MpcController
from .controller.pi import PiController, PiGains
from .controller.pump import PumpScheduler
from .errors import InvariantViolation
from .simulator import FACES, TELEMETRY_COLUMNS, Plant, PlantConfig, TimeSeries


@dataclass
class OpenLoopController:
    """Piecewise-constant command schedule (``levels[i]`` for ``hold`` seconds each)."""

    levels: tuple = (22.0,)
    hold: float = 1e9
    tick: float = 0.5

    def reset(self, *args, **kw):
        pass

    def level_at(self, elapsed):
        return float(self.levels[min(int(elapsed // self.hold), len(self.levels) - 1)])

    def update(self, tick_index, measurement, window, pump_voltage):
        return ControlCommand(self.level_at(tick_index * self.tick), pump_voltage, tick_index), None


@dataclass
class RunResult:
    telemetry: TimeSeries
    diagnostics: list
    final_state: object
    face_energy: float  # J, heat delivered by the Peltier faces (absolute, summed)
    electrical_energy: float  # J, current mode only
    bounds: tuple  # (u_min, u_max, v_min, v_max) the commands must respect


def precondition(plant, face_temp, pump_voltage):
    """Plant state at the steady state for a held face temperature and pump voltage."""
    state = plant.initial_state()
    state.temperatures[:] = plant.steady_state(face_temp, plant.flow_for(pump_voltage))
    return state


def run_closed_loop(plant, controller, profile, duration, dt=0.05, tick=0.5, disturbances=(),
                    initial_state=None, pump=None, fixed_pump=None, initial_command=None, record_every=1,
                    face_pin=None):
    """Advance plant and controller together; telemetry at every ``record_every`` ticks.

    ``pump`` is a :class:`PumpScheduler` driven by the surface error, unless
    ``fixed_pump`` gives a constant voltage or the controller sets the pump
    itself (joint MPC). Commands are applied with zero-order hold over a tick.

    ``face_pin(elapsed)`` optionally holds both Peltier faces at an imposed
    temperature, an external forcing outside the command path. The command
    channel then saturates at its bounds (flagged as clamped) and the tick is
    marked as disturbed.
    """
    cfg = plant.config
    sub = int(round(tick / dt))
    if sub < 1 or abs(sub * dt - tick) > 1e-9 * tick:
        raise ValueError("tick must be an integer multiple of dt")
    state = initial_state if initial_state is not None else plant.initial_state()
    n_ticks = int(round(duration / tick))
    joint = isinstance(controller, MpcController) and controller.config.joint
    horizon = controller.config.prediction_horizon if isinstance(controller, MpcController) else 1
    ts = TimeSeries(TELEMETRY_COLUMNS)
    diags = []
    face_energy = electrical = 0.0
    idx = plant.idx
    s, tank = idx["surface"], idx["tank"]
    start_cmd = initial_command if initial_command is not None else float(np.mean(plant.face_temps(state)))
    controller.reset(start_cmd, {"surface": float(state.temperatures[s])}, profile.value(state.time))
    t_start = state.time
    for k in range(n_ticks):
        t = t_start + k * tick  # exact tick clock; the plant accumulates dt
        meas = {"surface": float(state.temperatures[s]), "tank": float(state.temperatures[tank])}
        r_now = profile.value(t)
        if fixed_pump is not None:
            v = fixed_pump
        elif pump is not None:
            v = pump(r_now - meas["surface"])
        else:
            v = cfg.pump.v_max
        if isinstance(controller, MpcController) and controller.config.preview:
            window = profile.window(t, tick, horizon)
        else:
            window = np.full(horizon, r_now)
        cmd, diag = controller.update(k, meas, window, v)
        pinned = None
        if face_pin is not None:
            level = float(face_pin(k * tick))
            pinned = {f: level for f in FACES}
            u = min(max(level, cfg.command_min), cfg.command_max)
            cmd = ControlCommand(u, cmd.pump_voltage, k, cmd.clamped or u != level, cmd.fallback)
        if not joint:
            cmd = ControlCommand(cmd.peltier_command, v, k, cmd.clamped, cmd.fallback)
        if diag is not None:
            diags.append(diag)
        if k % record_every == 0:
            active_now = pinned is not None or any(d.active(t) for d in disturbances)
            ts.append(_row(plant, state, t, r_now, cmd, active_now))
        for _ in range(sub):
            active = [d for d in disturbances if d.active(state.time)]
            state = plant.step(state, cmd, active, dt, pinned)
            face_energy += abs(state.energy.peltier)
            electrical += state.energy.electrical
    bounds = (cfg.command_min, cfg.command_max, cfg.pump.v_min, cfg.pump.v_max)
    return RunResult(ts, diags, state, face_energy, electrical, bounds)


def _row(plant, state, t, setpoint, cmd, disturbed):
    # plant state at the tick start and the command held over [t, t + tick)
    temps = state.temperatures
    idx = plant.idx
    return (t, setpoint, float(temps[idx["surface"]]), float(temps[idx["tank"]]), float(temps[idx["cover_in"]]),
            float(temps[idx["cover_out"]]), float(temps[idx[FACES[0]]]), float(temps[idx[FACES[1]]]),
            cmd.peltier_command, cmd.pump_voltage, int(cmd.clamped), int(disturbed))


# -- metrics ------------------------------------------------------------------

def count_violations(telemetry, bounds):
    """Ticks whose Peltier command or pump voltage leaves the declared box."""
    u_min, u_max, v_min, v_max = bounds
    u = telemetry["u_peltier_C"]
    v = telemetry["u_pump_V"]
    return int(np.count_nonzero((u < u_min) | (u > u_max) | (v < v_min) | (v > v_max)))


def assert_no_violations(telemetry, bounds):
    n = count_violations(telemetry, bounds)
    if n:
        raise InvariantViolation(f"{n} ticks violate the actuator bounds {bounds}")


def settle_time(t, y, r, band=0.5, start=0.0, stop=None):
    """Time after ``start`` at which ``|y - r|`` enters ``band`` and stays until ``stop``; nan if never."""
    stop = t[-1] if stop is None else stop
    sel = (t >= start) & (t <= stop)
    tt, err = t[sel], np.abs(y[sel] - r)
    if tt.size == 0 or err[-1] > band:
        return math.nan
    outside = np.flatnonzero(err > band)
    if outside.size == 0:
        return float(tt[0] - start)
    return float(tt[outside[-1] + 1] - start)


def max_run_length(flags, dt):
    best = run = 0
    for f in flags:
        run = run + 1 if f else 0
        best = max(best, run)
    return best * dt


@dataclass
class RunSummary:
    scenario: str
    controller: str
    duration_s: float
    rms_error_C: float
    iae_C_s: float
    settle_time_s: float
    max_clamp_duration_s: float
    face_energy_J: float
    electrical_energy_J: float
    violations: int
    surface_min_C: float
    surface_max_C: float
    surface_final_C: float
    fallback_ticks: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        out = asdict(self)
        extra = out.pop("extra")
        out.update(extra)
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in out.items()}


def summarize(name, kind, result, tick=0.5):
    ts = result.telemetry
    t, y, r = ts["t_s"], ts["T_surface_C"], ts["setpoint_C"]
    err = y - r
    sample = t[1] - t[0] if t.size > 1 else tick
    final_change = np.flatnonzero(np.diff(r) != 0)
    start = float(t[final_change[-1] + 1]) if final_change.size else float(t[0])
    fallback = sum(1 for d in result.diagnostics if getattr(d, "fallback", False))
    return RunSummary(
        scenario=name, controller=kind, duration_s=float(t[-1] + sample),
        rms_error_C=float(np.sqrt(np.mean(err ** 2))), iae_C_s=float(np.sum(np.abs(err)) * sample),
        settle_time_s=settle_time(t, y, r[-1], start=start),
        max_clamp_duration_s=max_run_length(ts["clamped"] > 0, sample),
        face_energy_J=result.face_energy, electrical_energy_J=result.electrical_energy,
        violations=count_violations(ts, result.bounds),
        surface_min_C=float(y.min()), surface_max_C=float(y.max()), surface_final_C=float(y[-1]),
        fallback_ticks=fallback)


# -- figure-specific analyses ---------------------------------------------------

def water_plateau_time(t, tank, t0, t1, band=0.2):
    """Last time in ``[t0, t1)`` the tank enters (and then stays within) ``band`` of its value at ``t1``."""
    sel = (t >= t0) & (t < t1)
    tt, w = t[sel], tank[sel]
    final = w[-1]
    outside = np.flatnonzero(np.abs(w - final) > band)
    if outside.size == 0:
        return float(tt[0])
    if outside[-1] + 1 >= tt.size:
        return math.nan
    return float(tt[outside[-1] + 1])


def staircase_settling(telemetry, step_times, hold, band=0.5, plateau_band=0.2):
    """Per-step surface settle time, water plateau time and their difference (s).

    Times are relative to each step. A negative difference means the surface
    was on target before the water had plateaued.
    """
    t = telemetry["t_s"]
    y = telemetry["T_surface_C"]
    r = telemetry["setpoint_C"]
    w = telemetry["T_water_tank_C"]
    rows = []
    for t0 in step_times:
        t1 = t0 + hold
        sel = (t >= t0) & (t < t1)
        if not sel.any():
            continue  # the run ended before this step
        level = float(r[sel][-1])
        settle = settle_time(t, y, level, band, start=t0, stop=t1 - 1e-9)
        plateau = water_plateau_time(t, w, t0, t1, plateau_band) - t0
        rows.append({"start_s": t0, "setpoint_C": level, "settle_s": settle, "plateau_s": plateau,
                     "after_plateau_s": settle - plateau})
    return rows


def crossover_reach_time(config=None, hot_setpoint=51.0, cold_face=12.0, band=0.5, dt=0.05, tick=0.5,
                         duration=240.0, controller=None, model=None):
    """Time for the surface to first reach ``hot_setpoint +- band`` after a hot command.

    The plant starts from the deep-cooled steady state (faces at
    ``cold_face``, pump at full voltage); the MPC then tracks the hot setpoint.
    """
    from .controller.model import identify_reduced_model
    from .controller.profiles import SetpointProfile

    config = config or PlantConfig()
    plant = Plant(config)
    v = config.pump.v_max
    state = precondition(plant, cold_face, v)
    if controller is None:
        model = model or identify_reduced_model(plant)
        mcfg = MpcConfig(u_min=config.command_min, u_max=config.command_max)
        controller = MpcController(model, mcfg, PiController(PiGains(4.0, 0.1, config.command_min,
                                                                     config.command_max, config.ambient_temp)))
    profile = SetpointProfile("constant", mean=hot_setpoint)
    res = run_closed_loop(plant, controller, profile, duration, dt, tick, initial_state=state, fixed_pump=v,
                          initial_command=cold_face)
    t = res.telemetry["t_s"]
    y = res.telemetry["T_surface_C"]
    hit = np.flatnonzero(np.abs(y - hot_setpoint) <= band)
    return float(t[hit[0]]) if hit.size else math.inf


def default_mpc_controller(plant, mpc_config=None, pi_gains=None, model=None):
    from .controller.model import identify_reduced_model

    cfg = plant.config
    mcfg = mpc_config or MpcConfig(u_min=cfg.command_min, u_max=cfg.command_max,
                                   v_min=cfg.pump.v_min, v_max=cfg.pump.v_max)
    model = model or identify_reduced_model(plant, tick=mcfg.tick, order=mcfg.order)
    gains = pi_gains or PiGains(4.0, 0.1, cfg.command_min, cfg.command_max, cfg.ambient_temp)
    return MpcController(model, mcfg, PiController(gains, mcfg.tick))


__all__ = ["OpenLoopController", "PumpScheduler", "RunResult", "RunSummary", "run_closed_loop", "precondition",
           "count_violations", "assert_no_violations", "settle_time", "summarize", "staircase_settling",
           "water_plateau_time", "crossover_reach_time", "default_mpc_controller"]
