"""Build plant, profile and controller from a ScenarioConfig and run them."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import capsense
from .calibration import read_parameters_file
from .config import ScenarioConfig
from .controller.model import identify_pump_channel, identify_reduced_model
from .controller.mpc import MpcConfig, MpcController
from .controller.pi import PiController, PiGains, relay_autotune
from .controller.profiles import SetpointProfile, SetpointWarning
from .controller.pump import PumpScheduler
from .loop import ML_PER_MIN, PumpMap
from .materials import CoverGeometry, FilmCoefficients, LoopGeometry, Material
from .peltier import PeltierSpecs
from .scenario import OpenLoopController, RunResult, run_closed_loop, precondition, summarize
from .simulator import Disturbance, Plant, PlantConfig

MATERIAL_NAMES = ("gel", "foam", "water", "tpu", "coating")


def plant_config(cfg: ScenarioConfig) -> PlantConfig:
    g = cfg.values["geometry"]
    lp = cfg.values["loop"]
    pe = cfg.values["peltier"]
    pu = cfg.values["pump"]
    m = cfg.values["materials"]
    materials = tuple(Material(n, m[f"{n}_conductivity"], m[f"{n}_density"], m[f"{n}_specific_heat"])
                      for n in MATERIAL_NAMES)
    cover = CoverGeometry(g["gel_thickness"], g["foam_thickness"], g["channel_diameter"], g["channel_pitch"],
                          g["active_area"], g["channel_total_length"] or None, g["tpu_thickness"],
                          g["coating_thickness"], g["n_channel_cells"])
    loop = LoopGeometry(lp["tube_inner_diameter"], lp["tube_length"], lp["tank_volume"], pe["face_area"],
                        lp["n_tube_cells"])
    specs = PeltierSpecs(pe["delta_t_max"], pe["q_max"], pe["v_max"], pe["i_max"], pe["hot_side_ref_temp"],
                         pe["face_area"])
    pump = PumpMap(pu["v_min"], pu["v_max"], pu["q_max_ml_min"] * ML_PER_MIN, pu["deadband"])
    pc = PlantConfig(cover, loop, materials, FilmCoefficients(lp["water_wall_h"], lp["surface_ambient_h"]),
                     specs, pump, lp["ambient_temp"], pe["mode"], pe["command_min"], pe["command_max"],
                     pe["lag_time_constant"], pe["sink_resistance"], lp["stratification_offset"],
                     cfg["integrator.scheme"], pe["inner_kp"], pe["inner_ki"])
    if cfg["calibration.file"]:
        pc = read_parameters_file(cfg.resolve(cfg["calibration.file"])).apply(pc)
    return pc


def profile(cfg):
    p = cfg.values["profile"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SetpointWarning)
        return SetpointProfile(p["kind"], tuple(p["levels"]), p["hold"], p["start"], p["initial"], p["low"],
                               p["high"], p["mean"], p["amplitude"], p["period"], p["phase"])


def duration(cfg, prof=None):
    d = cfg["profile.duration"]
    return d if d > 0 else (prof or profile(cfg)).duration


def disturbances(cfg):
    d = cfg.values["disturbances"]
    out = []
    if d["hand_duration"] > 0:
        out.append(Disturbance("hand_contact", d["hand_start"], d["hand_duration"], d["hand_area"],
                               d["hand_skin_temp"], d["hand_contact_conductance"]))
    if d["ambient_shift_duration"] > 0:
        out.append(Disturbance("ambient_shift", d["ambient_shift_start"], d["ambient_shift_duration"],
                               delta=d["ambient_shift_delta"]))
    return tuple(out)


def mpc_config(cfg, pc):
    m = cfg.values["mpc"]
    return MpcConfig(m["horizon"], cfg["controller.tick"], m["q"], m["r"], m["rho"], m["order"],
                     m["prediction_horizon"], cfg["pump.mode"] == "mpc", m["preview"], pc.command_min,
                     pc.command_max, pc.pump.v_min, pc.pump.v_max, m["tol"], m["max_iter"])


def pi_gains(cfg, plant):
    pc = plant.config
    if cfg["pi.autotune"]:
        return relay_autotune(plant).gains
    center = cfg["pi.center"]
    return PiGains(cfg["pi.kp"], cfg["pi.ki"], pc.command_min, pc.command_max,
                   pc.ambient_temp if math.isnan(center) else center)


_MODEL_CACHE = {}


def reduced_model(plant, cfg):
    """Identified model, cached per plant configuration within the process."""
    m = cfg.values["mpc"]
    key = (repr(plant.config), cfg["controller.tick"], m["order"], m["identification_step"],
           m["identification_duration"])
    if key not in _MODEL_CACHE:
        _MODEL_CACHE[key] = identify_reduced_model(plant, tick=cfg["controller.tick"], order=m["order"],
                                                   step=m["identification_step"],
                                                   duration=m["identification_duration"])
    return _MODEL_CACHE[key]


def controller(cfg, plant, kind=None):
    kind = kind or cfg["controller.kind"]
    pc = plant.config
    tick = cfg["controller.tick"]
    if kind in ("open_loop", "pinned_faces"):
        levels = cfg["controller.open_loop_levels"] or (pc.ambient_temp,)
        return OpenLoopController(tuple(levels), cfg["controller.open_loop_hold"], tick)
    gains = pi_gains(cfg, plant)
    if kind == "pi":
        return PiController(gains, tick)
    mc = mpc_config(cfg, pc)
    channel = None
    if mc.joint:
        channel = identify_pump_channel(plant, cfg["pump.hold_fraction"] * pc.pump.v_max, tick)
    return MpcController(reduced_model(plant, cfg), mc, PiController(gains, tick), channel)


@dataclass
class ScenarioRun:
    config: ScenarioConfig
    result: RunResult
    summary: object
    kind: str


def run_scenario(cfg, kind=None):
    """Run one closed-loop scenario; returns a :class:`ScenarioRun`."""
    pc = plant_config(cfg)
    plant = Plant(pc)
    kind = kind or cfg["controller.kind"]
    ctl = controller(cfg, plant, kind)
    prof = profile(cfg)
    pu = cfg.values["pump"]
    pump = fixed = None
    if pu["mode"] == "fixed" or kind in ("open_loop", "pinned_faces"):
        fixed = pu["voltage"]
    elif pu["mode"] == "schedule" or kind != "mpc":
        pump = PumpScheduler(pu["hysteresis_c"], pc.pump.v_max, pu["hold_fraction"], pu["release_fraction"])
    face = cfg["controller.precondition_face"]
    state = None
    initial_command = None
    if not math.isnan(face):
        state = precondition(plant, face, cfg["controller.precondition_pump"])
        initial_command = face
    result = run_closed_loop(plant, ctl, prof, duration(cfg, prof), cfg["integrator.dt"], cfg["controller.tick"],
                             disturbances(cfg), state, pump, fixed, initial_command, cfg["output.record_every"],
                             ctl.level_at if kind == "pinned_faces" else None)
    summary = summarize(cfg["output.name"], kind, result, cfg["controller.tick"])
    summary.extra.update(_figure_metrics(cfg, result))
    return ScenarioRun(cfg, result, summary, kind)


def _figure_metrics(cfg, result):
    from .scenario import staircase_settling

    out = {}
    prof = profile(cfg)
    if prof.kind == "step_sequence":
        rows = staircase_settling(result.telemetry, prof.step_times(), prof.hold)
        out["steps"] = [{k: (None if isinstance(v, float) and not math.isfinite(v) else round(v, 6))
                         for k, v in r.items()} for r in rows]
        lag = [r["after_plateau_s"] for r in rows]
        out["max_settle_after_plateau_s"] = (max(lag) if all(math.isfinite(v) for v in lag) else None)
    levels = cfg["controller.open_loop_levels"]
    if cfg["controller.kind"] in ("open_loop", "pinned_faces") and len(levels) > 1:
        ts = result.telemetry
        hold = cfg["controller.open_loop_hold"]
        ends = []
        for i in range(len(levels)):
            sel = ts["t_s"] < (i + 1) * hold if i < len(levels) - 1 else ts["t_s"] >= 0
            ends.append(float(ts["T_surface_C"][np.flatnonzero(sel)[-1]]))
        out["level_end_surface_C"] = ends
    if cfg["disturbances.hand_duration"] > 0:
        ts = result.telemetry
        t0 = cfg["disturbances.hand_start"]
        sel = (ts["t_s"] >= t0) & (ts["t_s"] < t0 + cfg["disturbances.hand_duration"])
        out["hand_max_deviation_C"] = (float(np.max(np.abs(ts["T_surface_C"][sel] - ts["setpoint_C"][sel])))
                                       if sel.any() else None)  # run ended before the contact
    return out


def run_capsense(cfg):
    """Replay or synthesize a stream; returns ``(times, raw, calibration, normalized, flags, stats)``."""
    c = cfg.values["capsense"]
    if c["stream"]:
        times, raw = capsense.read_stream_csv(cfg.resolve(c["stream"]))
    else:
        contacts = (capsense.grasp_protocol(c["duration"], c["quiet"], c["touch"], c["release"])
                    if c["protocol"] == "grasp" else ())
        times, raw = capsense.synthetic_stream(c["stack"], c["duration"], c["rate"], contacts, c["contact_level"],
                                               c["seed"], c["cover_temperature"], c["flow"])
    cal, norm, flags = capsense.process_stream(times, raw, c["calibration_window"], c["threshold"], c["debounce"])
    free = times >= times[0] + c["calibration_window"]
    base = capsense.baseline(c["stack"])
    stats = {"stack": c["stack"], "raw_mean_window": 1.0 / cal.gain, "gain": cal.gain, "offset": cal.offset,
             "published_mean": base.mean, "published_std": base.std,
             "normalized_mean_window": float(np.mean(norm[~free])) if np.any(~free) else None,
             "contact_samples": int(np.count_nonzero(flags)), "samples": int(len(times))}
    return times, raw, cal, norm, flags, stats
