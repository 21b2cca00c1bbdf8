"""Material properties, cover/loop geometry and the lumped thermal network.

The network is a graph of heat-capacity nodes joined by conductance edges.
Water cells are ordinary nodes that are additionally listed, in flow order,
in ``ThermalNetwork.loop`` so the simulator can advect them.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError

REQUIRED_MATERIALS = ("gel", "foam", "water", "tpu")


@dataclass(frozen=True)
class Material:
    name: str
    conductivity: float  # W/(m K)
    density: float  # kg/m^3
    specific_heat: float  # J/(kg K)

    def __post_init__(self):
        for attr in ("conductivity", "density", "specific_heat"):
            value = getattr(self, attr)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"material {self.name!r}: {attr} must be > 0, got {value}",
                                  key=f"materials.{self.name}_{attr}")

    @property
    def volumetric_heat_capacity(self):
        return self.density * self.specific_heat


def default_materials():
    """Gel/foam densities and gel/water conductivities are measured values;
    specific heats, foam and TPU conductivities are handbook values."""
    return [
        Material("gel", 0.37, 1200.0, 1500.0),
        Material("foam", 0.04, 100.0, 1400.0),
        Material("water", 0.604, 998.0, 4186.0),
        Material("tpu", 0.20, 1200.0, 1800.0),
        Material("coating", 0.20, 1200.0, 1800.0),
    ]


@dataclass(frozen=True)
class CoverGeometry:
    gel_thickness: float = 1e-3
    foam_thickness: float = 6e-3
    channel_diameter: float = 3e-3  # semicircular conduits
    channel_pitch: float = 10e-3
    active_area: float = 0.02
    channel_total_length: float | None = None  # defaults to active_area / pitch
    tpu_thickness: float = 400e-6
    coating_thickness: float = 30e-6
    n_channel_cells: int = 10

    def __post_init__(self):
        if self.channel_total_length is None:
            object.__setattr__(self, "channel_total_length",
                               self.active_area / self.channel_pitch if self.active_area > 0 else 0.0)
        if self.active_area <= 0:
            raise ConfigError("active_area must be > 0", key="geometry.active_area")
        for name in ("gel_thickness", "foam_thickness", "channel_diameter", "channel_pitch",
                     "channel_total_length", "tpu_thickness", "coating_thickness"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be > 0, got {value}", key=f"geometry.{name}")
        if self.channel_pitch <= self.channel_diameter:
            raise ConfigError("channel_pitch must exceed channel_diameter", key="geometry.channel_pitch")
        implied = self.channel_pitch * self.channel_total_length
        if abs(implied - self.active_area) > 0.2 * self.active_area:
            raise ConfigError(
                f"active_area {self.active_area} inconsistent with pitch x channel length = {implied:.4g}",
                key="geometry.active_area")
        if int(self.n_channel_cells) < 1:
            raise ConfigError("n_channel_cells must be >= 1", key="geometry.n_channel_cells")

    @property
    def channel_cross_section(self):
        return math.pi * self.channel_diameter ** 2 / 8.0

    @property
    def channel_volume(self):
        return self.channel_cross_section * self.channel_total_length

    @property
    def gel_contact_area(self):
        """Flat face of the semicircle, wetted against the gel."""
        return self.channel_diameter * self.channel_total_length

    @property
    def foam_contact_area(self):
        """Curved face of the semicircle, lined with TPU film."""
        return 0.5 * math.pi * self.channel_diameter * self.channel_total_length


@dataclass(frozen=True)
class LoopGeometry:
    tube_inner_diameter: float = 2.5e-3
    tube_length: float = 1.46
    tank_volume: float = 3e-5
    tank_face_area: float = 40e-3 * 40e-3  # per Peltier face
    n_tube_cells: int = 10

    def __post_init__(self):
        for name in ("tube_inner_diameter", "tube_length", "tank_volume", "tank_face_area"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be > 0, got {value}", key=f"loop.{name}")
        if int(self.n_tube_cells) < 2:
            raise ConfigError("n_tube_cells must be >= 2 (supply and return)", key="loop.n_tube_cells")

    @property
    def tube_cross_section(self):
        return math.pi * (self.tube_inner_diameter / 2.0) ** 2

    @property
    def tube_volume(self):
        return self.tube_cross_section * self.tube_length


@dataclass(frozen=True)
class FilmCoefficients:
    """Convective film coefficients; no measured values exist, so they are calibrated."""

    water_wall: float = 1000.0  # W/(m^2 K), tank faces and channel walls
    surface_ambient: float = 8.0  # W/(m^2 K)

    def __post_init__(self):
        if not (self.water_wall >= 0 and self.surface_ambient >= 0):
            raise ConfigError("film coefficients must be >= 0")


@dataclass
class Node:
    id: str
    capacity: float  # J/K; 0 for boundary nodes
    initial_temperature: float
    kind: str = "dynamic"  # dynamic | fixed | driven
    water_volume: float = 0.0


@dataclass
class ThermalNetwork:
    nodes: list
    edges: list  # (node_a, node_b, conductance W/K)
    loop: list = field(default_factory=list)  # water node ids in flow order
    ambient: str = "ambient"

    def __post_init__(self):
        self._index = {n.id: i for i, n in enumerate(self.nodes)}
        if len(self._index) != len(self.nodes):
            raise ConfigError("duplicate node ids in thermal network")

    def index(self, node_id):
        return self._index[node_id]

    def node(self, node_id):
        return self.nodes[self._index[node_id]]

    @property
    def ids(self):
        return [n.id for n in self.nodes]

    def capacities(self):
        return np.array([n.capacity for n in self.nodes], dtype=float)

    def initial_temperatures(self):
        return np.array([n.initial_temperature for n in self.nodes], dtype=float)

    def dynamic_mask(self):
        return np.array([n.kind == "dynamic" for n in self.nodes])

    def conductance(self, a, b):
        return sum(g for x, y, g in self.edges if {x, y} == {a, b})

    def laplacian(self):
        """Symmetric conductance Laplacian L; heat into node i is -(L T)_i."""
        n = len(self.nodes)
        lap = np.zeros((n, n))
        for a, b, g in self.edges:
            i, j = self._index[a], self._index[b]
            lap[i, i] += g
            lap[j, j] += g
            lap[i, j] -= g
            lap[j, i] -= g
        return lap

    def total_capacity(self):
        return float(sum(n.capacity for n in self.nodes if n.kind == "dynamic"))

    def with_boundary_edges_zeroed(self):
        """Copy with every edge touching a fixed or driven node set to 0 W/K."""
        kinds = {n.id: n.kind for n in self.nodes}
        edges = [(a, b, 0.0 if (kinds[a] != "dynamic" or kinds[b] != "dynamic") else g)
                 for a, b, g in self.edges]
        return ThermalNetwork([replace(n) for n in self.nodes], edges, list(self.loop), self.ambient)

    def validate(self, sources=("peltier_top", "peltier_bottom"), target="surface"):
        for n in self.nodes:
            if n.kind == "dynamic" and not n.capacity > 0:
                raise ConfigError(f"dynamic node {n.id!r} needs positive heat capacity")
        for a, b, g in self.edges:
            if not (math.isfinite(g) and g >= 0):
                raise ConfigError(f"edge {a}-{b} has invalid conductance {g}")
        ambient = [n for n in self.nodes if n.id == self.ambient and n.kind == "fixed"]
        if len(ambient) != 1:
            raise ConfigError("network needs exactly one fixed ambient node")
        adjacency = {n.id: set() for n in self.nodes}
        for a, b, g in self.edges:
            if g > 0:
                adjacency[a].add(b)
                adjacency[b].add(a)
        for a, b in zip(self.loop, self.loop[1:] + self.loop[:1]):
            adjacency[a].add(b)
        for src in sources:
            if src not in adjacency:
                continue
            seen, todo = {src}, deque([src])
            while todo:
                for nxt in adjacency[todo.popleft()]:
                    if nxt not in seen:
                        seen.add(nxt)
                        todo.append(nxt)
            if target not in seen:
                raise ConfigError(f"no heat path from {src!r} to {target!r}")
        return self


def series_conductance(layers):
    """Conductance of slabs stacked in series.

    Parameters
    ----------
    layers : sequence of (thickness m, conductivity W/(m K), area m^2)

    Returns
    -------
    float
        ``1 / sum(t_i / (k_i A_i))`` in W/K.
    """
    layers = list(layers)
    if not layers:
        raise ConfigError("series_conductance needs at least one layer")
    resistance = 0.0
    for t, k, area in layers:
        if not (t > 0 and k > 0 and area > 0) or not all(map(math.isfinite, (t, k, area))):
            raise ConfigError(f"layer entries must be positive, got {(t, k, area)}")
        resistance += t / (k * area)
    return 1.0 / resistance


def in_series(*conductances):
    if any(g <= 0 for g in conductances):
        return 0.0
    return 1.0 / sum(1.0 / g for g in conductances)


def _material_table(materials):
    table = {m.name: m for m in materials}
    missing = [name for name in REQUIRED_MATERIALS if name not in table]
    if missing:
        raise ConfigError(f"missing material(s): {', '.join(missing)}", key="materials")
    table.setdefault("coating", Material("coating", 0.20, 1200.0, 1800.0))
    return table


def water_cell_ids(cover, loop):
    n_supply = int(loop.n_tube_cells) // 2
    n_return = int(loop.n_tube_cells) - n_supply
    return (["tank"]
            + [f"supply_{i}" for i in range(n_supply)]
            + [f"channel_{i}" for i in range(int(cover.n_channel_cells))]
            + [f"return_{i}" for i in range(n_return)])


def build_network(cover, loop, materials, ambient_temp, films=None, peltier_mode="command",
                  face_capacity=5.5, sink_resistance=0.15):
    """Assemble the cover/loop thermal network.

    Topology: Peltier faces -> tank -> supply tube -> cover channels -> return
    tube -> tank (advection ring); each channel cell exchanges heat with the
    gel slab through a convective film and with the foam slab through film +
    TPU liner; gel conducts to the surface skin, which loses heat to ambient;
    foam conducts to the robot structure (fixed at ambient).

    In ``peltier_mode="current"`` the two Peltier water-side faces become
    dynamic ceramic nodes and each gets a heat-sink node tied to ambient
    through ``sink_resistance`` K/W.
    """
    if not math.isfinite(ambient_temp):
        raise ConfigError("ambient temperature must be finite", key="materials.ambient_temp")
    films = films or FilmCoefficients()
    mat = _material_table(materials)
    water, gel, foam, tpu, coat = (mat[k] for k in ("water", "gel", "foam", "tpu", "coating"))
    area = cover.active_area
    t0 = float(ambient_temp)

    nodes = [Node("ambient", 0.0, t0, "fixed"), Node("structure", 0.0, t0, "fixed")]
    edges = []
    if peltier_mode == "command":
        nodes += [Node("peltier_top", 0.0, t0, "driven"), Node("peltier_bottom", 0.0, t0, "driven")]
    elif peltier_mode == "current":
        for face in ("top", "bottom"):
            nodes += [Node(f"peltier_{face}", face_capacity, t0), Node(f"sink_{face}", face_capacity, t0)]
            edges.append((f"sink_{face}", "ambient", 1.0 / sink_resistance))
    else:
        raise ConfigError(f"unknown peltier mode {peltier_mode!r}", key="peltier.mode")

    rho_c_w = water.volumetric_heat_capacity
    ids = water_cell_ids(cover, loop)
    n_supply = int(loop.n_tube_cells) // 2
    n_ch = int(cover.n_channel_cells)
    tube_cell_vol = loop.tube_volume / int(loop.n_tube_cells)
    ch_cell_vol = cover.channel_volume / n_ch
    for cid in ids:
        if cid == "tank":
            vol = loop.tank_volume
        elif cid.startswith("channel_"):
            vol = ch_cell_vol
        else:
            vol = tube_cell_vol
        nodes.append(Node(cid, rho_c_w * vol, t0, water_volume=vol))

    nodes.append(Node("gel", gel.volumetric_heat_capacity * cover.gel_thickness * area, t0))
    nodes.append(Node("surface", coat.volumetric_heat_capacity * cover.coating_thickness * area, t0))
    nodes.append(Node("foam", foam.volumetric_heat_capacity * cover.foam_thickness * area, t0))

    face_g = films.water_wall * loop.tank_face_area
    edges += [("peltier_top", "tank", face_g), ("peltier_bottom", "tank", face_g)]

    gel_film = films.water_wall * cover.gel_contact_area / n_ch
    liner_area = cover.foam_contact_area / n_ch
    for i in range(n_ch):
        cid = ids[1 + n_supply + i]
        edges.append((cid, "gel", gel_film))
        foam_side = in_series(films.water_wall * liner_area,
                              series_conductance([(cover.tpu_thickness, tpu.conductivity, liner_area),
                                                  (cover.foam_thickness / 2, foam.conductivity, area / n_ch)]))
        edges.append((cid, "foam", foam_side))

    edges.append(("gel", "surface", gel.conductivity * area / cover.gel_thickness))
    edges.append(("surface", "ambient", films.surface_ambient * area))
    edges.append(("foam", "structure", foam.conductivity * area / (cover.foam_thickness / 2)))

    return ThermalNetwork(nodes, edges, ids).validate()
