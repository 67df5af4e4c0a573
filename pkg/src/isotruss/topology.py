"""Truss connectivity: triangles of tube edges, roller placement, incidence.

A robot is a set of closed inflated tubes, each pinched into a triangle by
three roller units.  Two units per triangle are motorized (active) and one is
a passive anchor.  Edges are directed along each triangle's cycle, starting
at the passive vertex, so edge ``3t`` leaves triangle ``t``'s passive unit.

Roller arc positions are measured along the tube from the passive unit in
cycle direction.  For a triangle with edge lengths ``(L1, L2, L3)`` the two
active units sit at arc positions ``d_A = L1`` and ``d_B = L1 + L2``, which
gives the per-triangle rate map (edge rates from active-roller rates)::

        [ L1. ]   [ +1   0 ]
        [ L2. ] = [ -1  +1 ] @ [d_A., d_B.]
        [ L3. ]   [  0  -1 ]

Columns sum to zero: moving a roller only redistributes tube length, so the
perimeter of every triangle is invariant by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

TOPOLOGY_FORMAT_VERSION = 1

# Edge-rate block for one triangle, columns ordered (passive, active A, active B).
# Advancing a roller in cycle direction lengthens its upstream edge and
# shortens its downstream edge.
_B_ALL_BLOCK = np.array([[-1.0, 1.0, 0.0],
                         [0.0, -1.0, 1.0],
                         [1.0, 0.0, -1.0]])
_B_ACTIVE_BLOCK = _B_ALL_BLOCK[:, 1:]


class TopologyError(ValueError):
    """Raised for malformed triangle definitions."""


@dataclass(frozen=True)
class TrussTopology:
    """Immutable connectivity of a truss robot.

    ``triangles`` holds each triangle's node ids in cycle order starting at
    the passive vertex.  ``passive_slots`` remembers which slot of the
    original vertex triple was passive, so serialization round-trips.
    ``virtual_edges`` are rigid non-tube members (node, node, length in m).
    """

    node_count: int
    triangles: tuple[tuple[int, int, int], ...]
    passive_slots: tuple[int, ...]
    virtual_edges: tuple[tuple[int, int, float], ...] = ()

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    @property
    def edge_count(self) -> int:
        return 3 * len(self.triangles)

    @property
    def active_count(self) -> int:
        return 2 * len(self.triangles)

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Directed tube edges, three per triangle, cycle order."""
        out = []
        for tri in self.triangles:
            p, a, b = tri
            out.extend([(p, a), (a, b), (b, p)])
        return tuple(out)

    def roller_slots(self) -> tuple[tuple[tuple[int, str, int | None], ...], ...]:
        """Per-triangle roller tags: (vertex id, kind, global active index).

        Slot 0 is always the passive unit; slots 1 and 2 carry the global
        active-roller indices ``2t`` and ``2t + 1``.
        """
        out = []
        for t, tri in enumerate(self.triangles):
            p, a, b = tri
            out.append(((p, "passive", None),
                        (a, "active", 2 * t),
                        (b, "active", 2 * t + 1)))
        return tuple(out)

    def edge_triangle(self, edge_index: int) -> int:
        return edge_index // 3


@dataclass(frozen=True)
class IncidenceMatrices:
    """Linear maps from roller rates to edge-length rates.

    ``B_all_T`` covers all three rollers per triangle (passive included),
    ``B_active_T`` only the motorized pair.  ``P`` sums edge rates per
    triangle; ``P @ B_active_T == 0`` expresses perimeter invariance.
    """

    B_all_T: np.ndarray     # (3T, 3T)
    B_active_T: np.ndarray  # (3T, 2T)
    P: np.ndarray           # (T, 3T)


def build_topology(triangle_count: int,
                   vertex_map: list[tuple[int, int, int]],
                   passive_slots: list[int] | int = 0,
                   virtual_edges: list[tuple[int, int, float]] | None = None,
                   ) -> TrussTopology:
    """Assemble a topology from per-triangle vertex triples.

    ``vertex_map[t]`` lists triangle ``t``'s node ids; ``passive_slots[t]``
    selects which of the three is the passive vertex (a single int applies
    to every triangle).  Triples are rotated so the cycle starts there.
    """
    if triangle_count != len(vertex_map):
        raise TopologyError(f"expected {triangle_count} vertex triples, got {len(vertex_map)}")
    if isinstance(passive_slots, int):
        passive_slots = [passive_slots] * triangle_count
    if len(passive_slots) != triangle_count:
        raise TopologyError("one passive slot per triangle required")

    triangles = []
    referenced: set[int] = set()
    for t, tri in enumerate(vertex_map):
        tri = tuple(int(v) for v in tri)
        if len(tri) != 3 or len(set(tri)) != 3:
            raise TopologyError(f"triangle {t} must reference three distinct nodes, got {tri}")
        if any(v < 0 for v in tri):
            raise TopologyError(f"triangle {t} has a negative node id")
        s = int(passive_slots[t])
        if s not in (0, 1, 2):
            raise TopologyError(f"triangle {t}: passive slot must be 0, 1 or 2, got {s}")
        triangles.append(tri[s:] + tri[:s])
        referenced.update(tri)

    virtuals = []
    for i, j, length in (virtual_edges or []):
        i, j = int(i), int(j)
        if i == j:
            raise TopologyError("virtual edge endpoints must differ")
        if length <= 0:
            raise TopologyError("virtual edge length must be positive")
        virtuals.append((i, j, float(length)))
        referenced.update((i, j))

    node_count = max(referenced) + 1
    return TrussTopology(node_count=node_count,
                         triangles=tuple(triangles),
                         passive_slots=tuple(int(s) for s in passive_slots),
                         virtual_edges=tuple(virtuals))


def incidence_matrices(topology: TrussTopology) -> IncidenceMatrices:
    """Block-diagonal incidence maps for the whole robot."""
    T = topology.triangle_count
    B_all = np.zeros((3 * T, 3 * T))
    B_active = np.zeros((3 * T, 2 * T))
    P = np.zeros((T, 3 * T))
    for t in range(T):
        B_all[3 * t:3 * t + 3, 3 * t:3 * t + 3] = _B_ALL_BLOCK
        B_active[3 * t:3 * t + 3, 2 * t:2 * t + 2] = _B_ACTIVE_BLOCK
        P[t, 3 * t:3 * t + 3] = 1.0
    return IncidenceMatrices(B_all_T=B_all, B_active_T=B_active, P=P)


def save_topology(topology: TrussTopology, path: str) -> None:
    """Write the topology to a YAML file (versioned schema)."""
    doc = {
        "format_version": TOPOLOGY_FORMAT_VERSION,
        "node_count": topology.node_count,
        "triangles": [
            {"nodes": _original_triple(tri, slot), "passive_slot": slot}
            for tri, slot in zip(topology.triangles, topology.passive_slots)
        ],
        "virtual_edges": [[i, j, length] for i, j, length in topology.virtual_edges],
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def _original_triple(cycle: tuple[int, int, int], passive_slot: int) -> list[int]:
    # invert the rotation applied by build_topology
    k = (-passive_slot) % 3
    rotated = cycle[k:] + cycle[:k]
    return list(rotated)


def load_topology(path: str) -> TrussTopology:
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise TopologyError(f"topology file {path} is not valid YAML: {e}") from e
    if not isinstance(doc, dict):
        raise TopologyError(f"topology file {path} is not a mapping")
    version = doc.get("format_version")
    if version != TOPOLOGY_FORMAT_VERSION:
        raise TopologyError(f"unsupported topology format version: {version!r}")
    vertex_map = [tuple(item["nodes"]) for item in doc["triangles"]]
    slots = [item["passive_slot"] for item in doc["triangles"]]
    virtuals = [tuple(v) for v in doc.get("virtual_edges", [])]
    topo = build_topology(len(vertex_map), vertex_map, slots, virtuals)
    declared = doc.get("node_count")
    if declared is not None and declared != topo.node_count:
        raise TopologyError(
            f"file declares {declared} nodes but triangles reference {topo.node_count}")
    return topo
