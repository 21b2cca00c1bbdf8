"""Time integration of the coupled cover / water loop / Peltier plant.

One call to :meth:`Plant.step` does, in order: Peltier faces (first-order lag
in command mode, inner current loop otherwise), plug-flow advection of the
water ring, then one implicit-Euler (or RK4) step of the conductance network
with the faces, ambient, structure and any hand contact as boundaries.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .commands import ControlCommand
from .errors import ConfigError, EstimationError, IntegrationError
from .loop import PumpMap, advect_temperatures, pump_flow
from .materials import (CoverGeometry, FilmCoefficients, LoopGeometry, build_network,
                        default_materials)
from .peltier import PeltierSpecs, derive_peltier_coefficients, face_heat_flows

ONE_MINUS_INV_E = 1.0 - math.exp(-1.0)  # 0.63212...
SANITY_BOUNDS = (-20.0, 120.0)
FACES = ("peltier_top", "peltier_bottom")

TELEMETRY_COLUMNS = (
    "t_s", "setpoint_C", "T_surface_C", "T_water_tank_C", "T_water_cover_in_C",
    "T_water_cover_out_C", "T_peltier_top_C", "T_peltier_bottom_C", "u_peltier_C",
    "u_pump_V", "clamped", "disturbance_active",
)
INTEGER_COLUMNS = ("clamped", "disturbance_active")


@dataclass(frozen=True)
class Disturbance:
    kind: str  # hand_contact | ambient_shift
    start: float
    duration: float
    area: float = 0.005  # m^2
    skin_temp: float = 33.0  # degC
    contact_conductance: float = 100.0  # W/(m^2 K)
    delta: float = 0.0  # K, ambient_shift only

    def __post_init__(self):
        if self.kind not in ("hand_contact", "ambient_shift"):
            raise ConfigError(f"unknown disturbance kind {self.kind!r}", key="disturbances.kind")
        if self.start < 0 or not self.duration > 0:
            raise ConfigError("disturbance needs start >= 0 and duration > 0", key="disturbances.duration")
        if self.kind == "hand_contact" and not (self.area > 0 and self.contact_conductance >= 0):
            raise ConfigError("hand contact area must be > 0", key="disturbances.hand_area")

    def active(self, t):
        return self.start <= t < self.start + self.duration


@dataclass(frozen=True)
class PlantConfig:
    cover: CoverGeometry = field(default_factory=CoverGeometry)
    loop: LoopGeometry = field(default_factory=LoopGeometry)
    materials: tuple = field(default_factory=lambda: tuple(default_materials()))
    films: FilmCoefficients = field(default_factory=FilmCoefficients)
    peltier_specs: PeltierSpecs = field(default_factory=PeltierSpecs)
    pump: PumpMap = field(default_factory=PumpMap)
    ambient_temp: float = 22.0
    peltier_mode: str = "command"
    command_min: float = 12.0
    command_max: float = 77.0
    lag_tau: float = 3.0
    sink_resistance: float = 0.15
    stratification_offset: float = 0.0
    scheme: str = "implicit"  # implicit | rk4
    inner_kp: float = 2.0  # A/K, current-mode face loop
    inner_ki: float = 0.5  # A/(K s)

    def __post_init__(self):
        if self.scheme not in ("implicit", "rk4"):
            raise ConfigError(f"unknown integrator {self.scheme!r}", key="integrator.scheme")
        if abs(self.loop.tank_face_area - self.peltier_specs.face_area) > 1e-12:
            raise ConfigError("loop face area must match Peltier face area", key="peltier.face_area")

    def with_updates(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class StepEnergy:
    """Energy bookkeeping for one step, J. Positive means into the plant."""

    storage: float
    peltier: float
    ambient: float
    hand: float
    electrical: float
    gross: float

    @property
    def residual(self):
        return self.storage - (self.peltier + self.ambient + self.hand + self.electrical)


@dataclass
class SimState:
    time: float
    temperatures: np.ndarray
    flow_rate: float = 0.0
    command: ControlCommand | None = None
    current_integral: np.ndarray = field(default_factory=lambda: np.zeros(2))
    currents: np.ndarray = field(default_factory=lambda: np.zeros(2))
    energy: StepEnergy | None = None


class Plant:
    """Assembled plant with cached implicit-step factorizations."""

    def __init__(self, config=None, network=None):
        self.config = config or PlantConfig()
        cfg = self.config
        self.network = network or build_network(cfg.cover, cfg.loop, list(cfg.materials), cfg.ambient_temp,
                                                 cfg.films, cfg.peltier_mode, sink_resistance=cfg.sink_resistance)
        self.peltier = derive_peltier_coefficients(cfg.peltier_specs, cfg.command_min, cfg.command_max, cfg.lag_tau)
        net = self.network
        self.ids = net.ids
        self.n = len(self.ids)
        self.capacity = net.capacities()
        self.laplacian = net.laplacian()
        self.dynamic = net.dynamic_mask()
        self.water = np.array([net.index(i) for i in net.loop])
        self.water_volumes = np.array([net.node(i).water_volume for i in net.loop])
        water = {m.name: m for m in cfg.materials}["water"]
        self.rho_c_water = water.volumetric_heat_capacity
        self.idx = {name: net.index(name) for name in
                    ("ambient", "structure", "tank", "gel", "surface", "foam") + FACES}
        channel = [net.index(i) for i in net.loop if i.startswith("channel_")]
        supply = [net.index(i) for i in net.loop if i.startswith("supply_")]
        self.idx["cover_in"] = supply[-1]
        self.idx["cover_out"] = channel[-1]
        self.face_idx = np.array([self.idx[f] for f in FACES])
        if cfg.peltier_mode == "current":
            self.sink_idx = np.array([net.index("sink_top"), net.index("sink_bottom")])
        self._cache = {}

    # -- states -------------------------------------------------------------
    def initial_state(self, temperature=None):
        temps = self.network.initial_temperatures()
        if temperature is not None:
            temps[:] = temperature
        temps[self.idx["ambient"]] = self.config.ambient_temp
        temps[self.idx["structure"]] = self.config.ambient_temp
        return SimState(0.0, temps)

    def temperature(self, state, node):
        return float(state.temperatures[self.idx[node] if node in self.idx else self.network.index(node)])

    def face_temps(self, state):
        return state.temperatures[self.face_idx].copy()

    def tank_probes(self, state):
        """Upper / middle / lower tank readings of the well-mixed tank."""
        t = self.temperature(state, "tank")
        off = self.config.stratification_offset
        return t + off, t, t - off

    def flow_for(self, voltage):
        return pump_flow(self.config.pump, voltage)

    # -- linear operators ----------------------------------------------------
    def _unknown_mask(self, pinned):
        mask = self.dynamic.copy()
        for node in pinned:
            mask[self.network.index(node)] = False
        return mask

    def _operators(self, dt, hand_g, pinned_key):
        key = (dt, hand_g, pinned_key, self.config.scheme)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        u = self._unknown_mask(pinned_key)
        lap = self.laplacian.copy()
        s = self.idx["surface"]
        lap[s, s] += hand_g
        uu = np.ix_(u, u)
        ub = np.ix_(u, ~u)
        cu = self.capacity[u]
        ops = {"u": u, "cu": cu, "L_uu": lap[uu], "L_ub": lap[ub], "cut": self._cut_edges(u)}
        if self.config.scheme == "implicit":
            ops["inv"] = np.linalg.inv(np.diag(cu) + dt * lap[uu])
        self._cache[key] = ops
        return ops

    def continuous_system(self, flow, pinned=()):
        """Linear ODE ``C dT_u/dt = M T_u + N T_b`` including advection.

        Returns ``(mask_u, C_u, M, N)`` over unknown (dynamic, unpinned) nodes.
        """
        u = self._unknown_mask(tuple(pinned))
        n = self.n
        adv = np.zeros((n, n))
        mc = self.rho_c_water * flow
        ring = list(self.water)
        for k, i in enumerate(ring):
            j = ring[k - 1]
            adv[i, i] -= mc
            adv[i, j] += mc
        full = -self.laplacian + adv
        return u, self.capacity[u], full[np.ix_(u, u)], full[np.ix_(u, ~u)]

    def steady_state(self, face_temp, flow, pinned=None):
        """Exact asymptote of the semi-discrete plant with faces held at ``face_temp``."""
        pinned = dict(pinned or {})
        for f in FACES:
            pinned.setdefault(f, face_temp)
        u, _, m, nmat = self.continuous_system(flow, tuple(k for k in pinned if self.dynamic[self.network.index(k)]))
        temps = self.initial_state().temperatures
        for node, value in pinned.items():
            temps[self.network.index(node)] = value
        try:
            temps[u] = np.linalg.solve(m, -nmat @ temps[~u])
        except np.linalg.LinAlgError:
            # at zero flow the tube cells have no heat path and float freely
            raise EstimationError("steady state undefined: some water cells are isolated at this flow") from None
        return temps

    # -- stepping ------------------------------------------------------------
    def step(self, state, command, disturbances=(), dt=0.05, pinned=None):
        """Advance ``state`` by ``dt`` seconds under ``command``.

        ``pinned`` maps node ids to temperatures held fixed for this step (used
        by measurement protocols and the controllable-range experiment).
        """
        if not dt > 0:
            raise ValueError("dt must be > 0")
        cfg = self.config
        pinned = pinned or {}
        # catch bad input before the implicit solve smears it over every node
        self._check(state.temperatures)
        temps = state.temperatures.copy()
        t_next = state.time + dt
        pump = cfg.pump
        voltage = min(max(command.pump_voltage, pump.v_min), pump.v_max)
        flow = pump_flow(pump, voltage)
        u_cmd = min(max(command.peltier_command, self.peltier.command_min), self.peltier.command_max)

        # boundary conditions for this step
        temps[self.idx["ambient"]] = cfg.ambient_temp
        hand_g, skin = 0.0, 0.0
        for d in disturbances:
            if d.kind == "ambient_shift":
                temps[self.idx["ambient"]] += d.delta
            else:
                g = d.contact_conductance * min(d.area, cfg.cover.active_area)
                skin = (skin * hand_g + d.skin_temp * g) / (hand_g + g) if hand_g + g > 0 else d.skin_temp
                hand_g += g

        currents = state.currents
        integral = state.current_integral
        sources = np.zeros(self.n)
        electrical = 0.0
        if cfg.peltier_mode == "command":
            decay = math.exp(-dt / self.peltier.lag_time_constant)
            for f in self.face_idx:
                temps[f] = u_cmd + (temps[f] - u_cmd) * decay
        else:
            currents, integral, sources, electrical = self._current_mode(temps, u_cmd, integral, dt)
        for node, value in pinned.items():
            temps[self.network.index(node)] = value

        # advection: energy-neutral transport of the water ring
        if flow > 0:
            w = self.water
            temps[w] = advect_temperatures(temps[w], self.water_volumes, flow * dt)
            for node, value in pinned.items():
                temps[self.network.index(node)] = value

        pinned_key = tuple(sorted(k for k in pinned if self.dynamic[self.network.index(k)]))
        ops = self._operators(dt, hand_g, pinned_key)
        u = ops["u"]
        tb = temps[~u]
        tu0 = temps[u]
        s_u = sources[u].copy()
        if hand_g > 0:
            s_u[int(np.count_nonzero(u[: self.idx["surface"]]))] += hand_g * skin
        drive = -ops["L_ub"] @ tb + s_u
        if cfg.scheme == "implicit":
            tu1 = ops["inv"] @ (ops["cu"] * tu0 + dt * drive)
            mean_t = tu1
        else:
            def rate(x):
                return (drive - ops["L_uu"] @ x) / ops["cu"]
            k1 = rate(tu0)
            k2 = rate(tu0 + 0.5 * dt * k1)
            k3 = rate(tu0 + 0.5 * dt * k2)
            k4 = rate(tu0 + dt * k3)
            tu1 = tu0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            mean_t = (tu0 + 2 * (tu0 + 0.5 * dt * k1) + 2 * (tu0 + 0.5 * dt * k2) + (tu0 + dt * k3)) / 6.0
        temps[u] = tu1

        energy = self._energy(ops, temps, tu0, mean_t, hand_g, skin, sources, electrical, dt)
        self._check(temps)
        return SimState(t_next, temps, flow, command, integral, currents, energy)

    def _current_mode(self, temps, u_cmd, integral, dt):
        cfg, p = self.config, self.peltier
        currents = np.zeros(2)
        integral = integral.copy()
        sources = np.zeros(self.n)
        electrical = 0.0
        for k in range(2):
            wf, sk = self.face_idx[k], self.sink_idx[k]
            err = u_cmd - temps[wf]
            raw = cfg.inner_kp * err + cfg.inner_ki * (integral[k] + err * dt)
            cur = min(max(raw, -p.i_max), p.i_max)
            if cur == raw or np.sign(err) != np.sign(raw):
                integral[k] += err * dt
            if cur >= 0:  # heating the water: water face is the hot side
                q_cold, q_hot = face_heat_flows(p, cur, temps[sk], temps[wf])
                sources[wf] += q_hot
                sources[sk] -= q_cold
            else:
                q_cold, q_hot = face_heat_flows(p, -cur, temps[wf], temps[sk])
                sources[wf] -= q_cold
                sources[sk] += q_hot
            electrical += q_hot - q_cold
            currents[k] = cur
        return currents, integral, sources, electrical

    def _cut_edges(self, u):
        """Edges crossing from unknown to known nodes, as arrays."""
        pos = -np.ones(self.n, dtype=int)
        pos[u] = np.arange(int(u.sum()))
        inner, outer, g, is_face = [], [], [], []
        for a, b, cond in self.network.edges:
            ia, ib = self.network.index(a), self.network.index(b)
            if cond == 0 or u[ia] == u[ib]:
                continue
            i_in, i_out = (ia, ib) if u[ia] else (ib, ia)
            inner.append(pos[i_in])
            outer.append(i_out)
            g.append(cond)
            is_face.append(self.ids[i_out].startswith("peltier"))
        return (np.array(inner, dtype=int), np.array(outer, dtype=int), np.array(g, dtype=float),
                np.array(is_face, dtype=bool), int(pos[self.idx["surface"]]))

    def _energy(self, ops, temps, tu0, mean_t, hand_g, skin, sources, electrical, dt):
        inner, outer, g, is_face, surf = ops["cut"]
        q = g * (temps[outer] - mean_t[inner]) * dt
        peltier = float(q[is_face].sum())
        ambient = float(q[~is_face].sum())
        gross = float(np.abs(q).sum())
        hand = 0.0
        if hand_g > 0:
            hand = hand_g * (skin - mean_t[surf]) * dt
            gross += abs(hand)
        u = ops["u"]
        src = float(sources[u].sum()) * dt
        gross += float(np.abs(sources[u]).sum()) * dt
        storage = float(np.dot(ops["cu"], temps[u] - tu0))
        return StepEnergy(storage, peltier, ambient, hand, src, gross)

    def _check(self, temps):
        bad = ~np.isfinite(temps) | (temps < SANITY_BOUNDS[0]) | (temps > SANITY_BOUNDS[1])
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise IntegrationError(f"temperature at node {self.ids[i]!r} left the sanity envelope: {temps[i]}",
                                   node=self.ids[i])

    def total_enthalpy(self, state):
        """Sum of C_i T_i over dynamic nodes, J relative to 0 degC."""
        return float(np.dot(self.capacity[self.dynamic], state.temperatures[self.dynamic]))


class TimeSeries:
    """Column store of telemetry with fixed-format CSV output."""

    def __init__(self, columns=TELEMETRY_COLUMNS):
        self.columns = tuple(columns)
        self._rows = []
        self._data = None

    def append(self, row):
        self._rows.append(tuple(row))
        self._data = None

    def __len__(self):
        return len(self._rows)

    def __getitem__(self, name):
        if self._data is None:
            arr = np.array(self._rows, dtype=float).reshape(len(self._rows), len(self.columns))
            self._data = {c: arr[:, k] for k, c in enumerate(self.columns)}
        return self._data[name]

    @classmethod
    def from_arrays(cls, **columns):
        ts = cls(tuple(columns))
        for row in zip(*columns.values()):
            ts.append(row)
        return ts

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv_text())

    def to_csv_text(self):
        ints = {k for k, c in enumerate(self.columns) if c in INTEGER_COLUMNS}
        lines = [",".join(self.columns)]
        for row in self._rows:
            lines.append(",".join(str(int(v)) if k in ints else f"{v:.6g}" for k, v in enumerate(row)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            ts = cls(header)
            for row in reader:
                ts.append(float(v) for v in row)
        return ts


NODE_COLUMNS = {"surface": "T_surface_C", "tank": "T_water_tank_C", "cover_in": "T_water_cover_in_C",
                "cover_out": "T_water_cover_out_C"}


def step_response_time_constant(series, node, settle_tol=0.01, monotone_tol=0.01):
    """Time to 63.212 % of the asymptotic change, linearly interpolated.

    The first sample is taken as the instant of the step and the last sample
    as the asymptote. Raises :class:`EstimationError` when the tail is still
    moving by more than ``settle_tol`` of the total change or the trace
    reverses by more than ``monotone_tol`` of it.
    """
    col = node if node in series.columns else NODE_COLUMNS.get(node, node)
    t = np.asarray(series["t_s"], dtype=float)
    y = np.asarray(series[col], dtype=float)
    if y.size < 3:
        raise EstimationError("series too short")
    change = y[-1] - y[0]
    if abs(change) < 1e-12:
        raise EstimationError(f"no step visible on {node!r}")
    z = (y - y[0]) / change
    tail = z[int(0.95 * z.size):]
    if tail.max() - tail.min() > settle_tol:
        raise EstimationError(f"{node!r} has not settled: tail spread {tail.max() - tail.min():.3g} of the change")
    if np.any(np.maximum.accumulate(z) - z > monotone_tol):
        raise EstimationError(f"{node!r} response is not monotone")
    k = int(np.argmax(z >= ONE_MINUS_INV_E))
    if k == 0:
        return 0.0
    frac = (ONE_MINUS_INV_E - z[k - 1]) / (z[k] - z[k - 1])
    return float(t[k - 1] + frac * (t[k] - t[k - 1]) - t[0])


def record_nodes(plant, state, nodes):
    return [state.time] + [plant.temperature(state, n) for n in nodes]


def simulate_open_loop(plant, state, command, duration, dt, nodes=("surface", "tank"), pinned=None,
                       disturbances=(), sample_every=1):
    """Run a constant command; return a TimeSeries of ``nodes`` (column per node id)."""
    ts = TimeSeries(("t_s",) + tuple(nodes))
    ts.append(record_nodes(plant, state, nodes))
    n_steps = int(round(duration / dt))
    for k in range(n_steps):
        active = [d for d in disturbances if d.active(state.time)]
        state = plant.step(state, command, active, dt, pinned)
        if (k + 1) % sample_every == 0:
            ts.append(record_nodes(plant, state, nodes))
    return ts, state


def exact_response(plant, pinned, flow, duration, dt, nodes=("surface", "tank"), initial=None):
    """Sampled solution of the semi-discrete linear plant via the matrix exponential.

    Independent of the stepping scheme: with boundaries held, the unknown
    temperatures obey ``T(t) = T_ss + expm(A t) (T0 - T_ss)`` exactly.
    """
    from scipy.linalg import expm

    dyn_pins = tuple(k for k in pinned if plant.dynamic[plant.network.index(k)])
    u, cu, m, nmat = plant.continuous_system(flow, dyn_pins)
    temps = (initial.temperatures if initial is not None else plant.initial_state().temperatures).copy()
    for node, value in pinned.items():
        temps[plant.network.index(node)] = value
    a = m / cu[:, None]
    tb = temps[~u]
    t_ss = np.linalg.solve(m, -nmat @ tb)
    prop = expm(a * dt)
    dev = temps[u] - t_ss
    n_steps = int(round(duration / dt))
    out = np.empty((n_steps + 1, dev.size))
    out[0] = dev
    for k in range(n_steps):
        dev = prop @ dev
        out[k + 1] = dev
    out += t_ss
    pos = np.cumsum(u) - 1
    cols = {"t_s": np.arange(n_steps + 1) * dt}
    for node in nodes:
        i = plant.idx[node] if node in plant.idx else plant.network.index(node)
        cols[node] = out[:, pos[i]] if u[i] else np.full(n_steps + 1, temps[i])
    return TimeSeries.from_arrays(**cols)
