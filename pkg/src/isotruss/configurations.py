"""Builders for the canonical robot configurations.

Three structures are supported:

``single``      one octahedron from 3 tubes (6 nodes, 6 active rollers)
``solar``       two vertically stacked octahedra, top face replaced by a
                rigid panel modeled as 3 locked virtual edges (9 nodes,
                6 tubes, 12 active rollers)
``locomotion``  two octahedra sharing a central vertical tube triangle
                (9 nodes, 7 tubes, 14 active rollers)

All node coordinates are in the tube frame: nodes sit at roller vertices
and edges are tube segments, so edge lengths are exactly what the rollers
meter out.  The physical robot's larger effective side (joint centers sit
joint_offset beyond each roller) only enters metric reporting, where
lengths are scaled by effective_side / (tube_length/3).

The ground plane is z = 0 and builders rest each structure on it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import fsolve

from .kinematics import TrussState, state_from_positions
from .topology import TrussTopology, build_topology

CONFIG_NAMES = ("single", "solar", "locomotion")


@dataclass(frozen=True)
class RobotSpec:
    tube_length: float = 3.65          # m
    tube_diameter: float = 0.100       # m
    joint_offset: float = 0.2917       # m, roller vertex to joint center
    effective_side: float = 1.8        # m, between joint centers
    active_roller_mass: float = 1.98   # kg
    passive_roller_mass: float = 1.0   # kg
    triangle_mass: float = 4.96        # kg
    pressure_structural: float = 76.0  # kPa
    pressure_low_torque: float = 41.0  # kPa

    @property
    def tube_side(self) -> float:
        return self.tube_length / 3.0

    @property
    def scale(self) -> float:
        """Tube-frame to effective-frame length ratio."""
        return self.effective_side / self.tube_side


# measured stowage per configuration: (volume m^3, footprint m^2); the
# single-octahedron row is three stacked triangles
_STOWED = {
    "single": (3 * 0.043, 0.15),
    "solar": (0.30, 0.87),
    "locomotion": (0.301, 1.05),
}


def validate_spec(spec: RobotSpec) -> None:
    if min(spec.tube_length, spec.tube_diameter, spec.effective_side) <= 0:
        raise ValueError("dimensions must be positive")
    decomposed = spec.tube_side + 2.0 * spec.joint_offset
    if abs(decomposed - spec.effective_side) > 1e-3:
        raise ValueError(
            f"effective side {spec.effective_side} m inconsistent with tube "
            f"side + 2 x joint offset = {decomposed:.4f} m")
    total = 2.0 * spec.active_roller_mass + spec.passive_roller_mass
    if abs(total - spec.triangle_mass) > 1e-3:
        raise ValueError(
            f"triangle mass {spec.triangle_mass} kg != 2 active + 1 passive "
            f"= {total:.3f} kg")


def _ring(radius: float, azimuths_deg, z: float) -> list[tuple]:
    pts = []
    for az in azimuths_deg:
        a = math.radians(az)
        pts.append((radius * math.cos(a), radius * math.sin(a), z))
    return pts


_OCTA_TRIANGLES = [(4, 0, 1), (5, 1, 2), (3, 2, 0)]


def build_single_octahedron(spec: RobotSpec | None = None,
                            ) -> tuple[TrussTopology, TrussState]:
    """Regular octahedron resting on a face, apex rollers passive."""
    spec = spec or RobotSpec()
    validate_spec(spec)
    s = spec.tube_side
    r = s / math.sqrt(3.0)
    h = s * math.sqrt(6.0) / 3.0
    pts = _ring(r, (90, 210, 330), 0.0) + _ring(r, (30, 150, 270), h)
    topo = build_topology(3, _OCTA_TRIANGLES)
    state = state_from_positions(np.array(pts), topo,
                                 pressure=spec.pressure_structural)
    return topo, state


def build_solar_array(spec: RobotSpec | None = None,
                      ) -> tuple[TrussTopology, TrussState]:
    """Two stacked octahedra; the top face is a rigid panel.

    Nodes 0-2 bottom ring, 3-5 middle ring, 6-8 top ring.  The panel is
    three locked virtual edges at the tube-frame side length.  Lower tubes
    run at structural pressure, upper tubes at the low-torque pressure.
    """
    spec = spec or RobotSpec()
    validate_spec(spec)
    s = spec.tube_side
    r = s / math.sqrt(3.0)
    h = s * math.sqrt(6.0) / 3.0
    pts = (_ring(r, (90, 210, 330), 0.0)
           + _ring(r, (30, 150, 270), h)
           + _ring(r, (90, 210, 330), 2.0 * h))
    triangles = _OCTA_TRIANGLES + [(7, 4, 5), (8, 5, 3), (6, 3, 4)]
    panel = [(6, 7, s), (7, 8, s), (8, 6, s)]
    topo = build_topology(6, triangles, virtual_edges=panel)
    pressure = np.array([spec.pressure_structural] * 3
                        + [spec.pressure_low_torque] * 3)
    state = state_from_positions(np.array(pts), topo, pressure=pressure)
    return topo, state


def _settle_outer_face(s: float) -> tuple[float, float, float]:
    """Place one outer octahedron face so its lowest vertex touches ground.

    The outer face stays a rigid equilateral triangle of side s; unknowns
    are its center (y_c, z_c) and tilt angle about the x axis.  Conditions:
    the foot vertex reaches z = 0, the top strut keeps its nominal length,
    and the front tube's two apex edges keep their combined length (tube
    perimeter is conserved while the rollers redistribute it).
    """
    r = s / math.sqrt(3.0)
    c_front = np.array([s / 2.0, 0.0, 0.0])
    c_top = np.array([0.0, 0.0, s * math.sqrt(3.0) / 2.0])

    def vertices(params):
        y_c, z_c, alpha = params
        sa, ca = math.sin(alpha), math.cos(alpha)
        o1 = np.array([r * math.sqrt(3.0) / 2.0, y_c - 0.5 * r * sa,
                       z_c + 0.5 * r * ca])
        o3 = np.array([0.0, y_c + r * sa, z_c - r * ca])
        return o1, o3

    def equations(params):
        o1, o3 = vertices(params)
        return [
            o3[2],
            np.linalg.norm(o1 - c_top) - s,
            np.linalg.norm(o3 - c_front) + np.linalg.norm(o1 - c_front) - 2.0 * s,
        ]

    x0 = (s * math.sqrt(6.0) / 3.0, s * math.sqrt(3.0) / 6.0, 0.0)
    sol, info, ier, msg = fsolve(equations, x0, full_output=True)
    if ier != 1:
        raise RuntimeError(f"ground-settling solve failed: {msg}")
    return float(sol[0]), float(sol[1]), float(sol[2])


def build_locomotion(spec: RobotSpec | None = None,
                     ) -> tuple[TrussTopology, TrussState]:
    """Two octahedra sharing a vertical central tube triangle.

    Nodes: 0 front, 1 rear, 2 top (central triangle in the x-z plane);
    3-5 right outer face, 6-8 left outer face (5 and 8 are the feet).
    The build is settled: each outer face is tilted and shifted so its
    foot rests on the ground alongside the central triangle's front and
    rear nodes, deforming the front/rear tubes while conserving their
    perimeters.
    """
    spec = spec or RobotSpec()
    validate_spec(spec)
    s = spec.tube_side
    r = s / math.sqrt(3.0)
    y_c, z_c, alpha = _settle_outer_face(s)
    sa, ca = math.sin(alpha), math.cos(alpha)

    right = [
        (r * math.sqrt(3.0) / 2.0, y_c - 0.5 * r * sa, z_c + 0.5 * r * ca),
        (-r * math.sqrt(3.0) / 2.0, y_c - 0.5 * r * sa, z_c + 0.5 * r * ca),
        (0.0, y_c + r * sa, z_c - r * ca),
    ]
    left = [(x, -y, z) for x, y, z in right]
    pts = [(s / 2.0, 0.0, 0.0), (-s / 2.0, 0.0, 0.0),
           (0.0, 0.0, s * math.sqrt(3.0) / 2.0)] + right + left

    triangles = [
        (2, 0, 1),            # central tube
        (2, 3, 4), (0, 5, 3), (1, 4, 5),    # right octahedron
        (2, 6, 7), (0, 8, 6), (1, 7, 8),    # left octahedron
    ]
    topo = build_topology(7, triangles)
    state = state_from_positions(np.array(pts), topo,
                                 pressure=spec.pressure_structural)
    return topo, state


_BUILDERS = {
    "single": build_single_octahedron,
    "solar": build_solar_array,
    "locomotion": build_locomotion,
}


def build_robot(name: str, spec: RobotSpec | None = None,
                ) -> tuple[TrussTopology, TrussState]:
    if name not in _BUILDERS:
        raise ValueError(f"unknown configuration '{name}' "
                         f"(expected one of {CONFIG_NAMES})")
    return _BUILDERS[name](spec)


def node_groups(name: str) -> dict[str, tuple[int, ...]]:
    """Named node sets used by motion scripts and stability checks."""
    if name == "single":
        return {"bottom": (0, 1, 2), "top": (3, 4, 5)}
    if name == "solar":
        return {"bottom": (0, 1, 2), "middle": (3, 4, 5), "top": (6, 7, 8)}
    if name == "locomotion":
        return {
            "front": (0,), "rear": (1,), "top": (2,),
            "right_outer": (3, 4, 5), "left_outer": (6, 7, 8),
            "feet": (5, 8), "contacts": (0, 1, 5, 8),
        }
    raise ValueError(f"unknown configuration '{name}'")


def node_masses(topology: TrussTopology, spec: RobotSpec | None = None,
                ) -> np.ndarray:
    """Per-node mass from the roller units parked at each vertex, kg."""
    spec = spec or RobotSpec()
    masses = np.zeros(topology.node_count)
    for triangle in topology.roller_slots():
        for node, kind, _ in triangle:
            masses[node] += (spec.passive_roller_mass if kind == "passive"
                             else spec.active_roller_mass)
    return masses


def geometry_metrics(spec: RobotSpec | None = None,
                     config_name: str = "solar") -> dict:
    """Deployment metrics in the effective (joint-center) frame.

    Deployed volume uses the regular-octahedron model V = n (sqrt(2)/3) a^3
    with a the effective side.  Height is the built structure's peak node
    scaled from tube frame to effective frame.
    """
    spec = spec or RobotSpec()
    if config_name not in _BUILDERS:
        raise ValueError(f"unknown configuration '{config_name}'")
    a = spec.effective_side
    n_octa = 1 if config_name == "single" else 2
    volume = n_octa * (math.sqrt(2.0) / 3.0) * a ** 3
    stowed_volume, footprint = _STOWED[config_name]
    _, state = _BUILDERS[config_name](spec)
    height = float(np.max(state.positions()[:, 2])) * spec.scale
    return {
        "deployed_volume": volume,
        "stowed_volume": stowed_volume,
        "stow_ratio": volume / stowed_volume,
        "footprint": footprint,
        "joint_offset": (a - spec.tube_side) / 2.0,
        "height": height,
        "scale": spec.scale,
    }
