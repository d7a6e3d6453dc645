"""Per-time-step link graphs: typed edges with propagation latency.

Edge kinds:

* UL - user to satellite, directional.
* ISL - satellite to satellite, bidirectional.  Intra-orbit neighbors (slots
  +-1 in the plane ring) are always present; inter-orbit partners are the
  mutually nearest line-of-sight satellites in each adjacent plane, which
  keeps every satellite at two intra-orbit and at most two inter-orbit links.
* FL - satellite to gateway, directional.
* TL - gateway to gateway terrestrial fiber, bidirectional full mesh.

UL/ISL/FL latency is slant range over the vacuum speed of light; TL latency
is great-circle distance over 2c/3 (fiber refractive index 1.5).

Graphs list candidate edges only; exclusivity and capacity are handled by the
optimization model downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from gwplan.orbital import (
    Ephemeris,
    elevation_angles,
    ground_ecef,
    haversine_km,
    line_of_sight,
)
from gwplan.scenario import Scenario

SPEED_OF_LIGHT_M_S = 299792458.0
TERRESTRIAL_SPEED_M_S = 2.0 * SPEED_OF_LIGHT_M_S / 3.0


class NodeKind(str, Enum):
    USER = "user"
    SAT = "sat"
    GW = "gw"


class EdgeKind(str, Enum):
    UL = "UL"
    ISL = "ISL"
    FL = "FL"
    TL = "TL"


@dataclass(frozen=True)
class NodeRef:
    kind: NodeKind
    index: int


@dataclass(frozen=True)
class Edge:
    id: int
    kind: EdgeKind
    u: NodeRef
    v: NodeRef
    latency_s: float
    bidirectional: bool
    capacity_group: int


@dataclass(frozen=True)
class SnapshotGraph:
    """Candidate link graph at one time step."""

    t: int
    n_users: int
    n_sats: int
    n_gateways: int
    edges: tuple[Edge, ...]
    directed: bool = False
    _out: dict = field(default_factory=dict, repr=False, compare=False)
    _in: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        for e in self.edges:
            self._out.setdefault(e.u, []).append(e)
            self._in.setdefault(e.v, []).append(e)

    def out_edges(self, node: NodeRef) -> list[Edge]:
        return self._out.get(node, [])

    def in_edges(self, node: NodeRef) -> list[Edge]:
        return self._in.get(node, [])

    def of_kind(self, kind: EdgeKind) -> list[Edge]:
        return [e for e in self.edges if e.kind == kind]


def _vacuum_latency_s(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.linalg.norm(p - q)) * 1000.0 / SPEED_OF_LIGHT_M_S


def _intra_orbit_pairs(planes: int, sats_per_plane: int) -> list[tuple[int, int]]:
    """Undirected in-plane ring edges, deduplicated (K=2 gives one edge)."""
    pairs = set()
    K = sats_per_plane
    for p in range(planes):
        for k in range(K):
            a, b = p * K + k, p * K + (k + 1) % K
            if a != b:
                pairs.add((min(a, b), max(a, b)))
    return sorted(pairs)


def _adjacent_plane_pairs(planes: int) -> list[tuple[int, int]]:
    pairs = set()
    for p in range(planes):
        q = (p + 1) % planes
        if q != p:
            pairs.add((min(p, q), max(p, q)))
    return sorted(pairs)


def _nearest_visible(
    sat: int, others: np.ndarray, pos: np.ndarray, grazing_km: float
) -> int | None:
    """Index into ``others`` of the nearest line-of-sight satellite, or None.

    Ties break toward the lower satellite index (others is given sorted).
    """
    d = np.linalg.norm(pos[others] - pos[sat], axis=1)
    best: int | None = None
    best_d = np.inf
    for j in np.argsort(d, kind="stable"):
        if d[j] >= best_d:
            break
        if line_of_sight(pos[sat], pos[others[j]], grazing_km):
            best, best_d = int(others[j]), d[j]
            break
    return best


def _inter_orbit_pairs(
    eph: Ephemeris, pos: np.ndarray, planes: int, grazing_km: float
) -> list[tuple[int, int]]:
    """Mutually nearest line-of-sight partners across each adjacent plane pair."""
    out: list[tuple[int, int]] = []
    for p, q in _adjacent_plane_pairs(planes):
        in_p = np.flatnonzero(eph.plane == p)
        in_q = np.flatnonzero(eph.plane == q)
        choice_p = {a: _nearest_visible(a, in_q, pos, grazing_km) for a in in_p}
        choice_q = {b: _nearest_visible(b, in_p, pos, grazing_km) for b in in_q}
        for a in in_p:
            b = choice_p[a]
            if b is not None and choice_q[b] == a:
                out.append((int(min(a, b)), int(max(a, b))))
    return sorted(set(out))


def build_snapshot(scenario: Scenario, eph: Ephemeris, t: int) -> SnapshotGraph:
    """Candidate edges at step t (1-based)."""
    pos = eph.at(t)
    grazing = scenario.isl_grazing_altitude_km
    edges: list[Edge] = []
    next_id = 0

    def add(kind: EdgeKind, u: NodeRef, v: NodeRef, latency: float, bidi: bool) -> None:
        nonlocal next_id
        edges.append(
            Edge(
                id=next_id,
                kind=kind,
                u=u,
                v=v,
                latency_s=latency,
                bidirectional=bidi,
                capacity_group=next_id,
            )
        )
        next_id += 1

    for d in scenario.traffic:
        site = ground_ecef(d.user_latitude_deg, d.user_longitude_deg)
        elev = elevation_angles(site, pos)
        for j in np.flatnonzero(elev >= d.min_elevation_deg):
            add(
                EdgeKind.UL,
                NodeRef(NodeKind.USER, d.id),
                NodeRef(NodeKind.SAT, int(j)),
                _vacuum_latency_s(site, pos[j]),
                False,
            )

    for a, b in _intra_orbit_pairs(scenario.constellation.planes,
                                   scenario.constellation.sats_per_plane):
        add(
            EdgeKind.ISL,
            NodeRef(NodeKind.SAT, a),
            NodeRef(NodeKind.SAT, b),
            _vacuum_latency_s(pos[a], pos[b]),
            True,
        )
    for a, b in _inter_orbit_pairs(eph, pos, scenario.constellation.planes, grazing):
        add(
            EdgeKind.ISL,
            NodeRef(NodeKind.SAT, a),
            NodeRef(NodeKind.SAT, b),
            _vacuum_latency_s(pos[a], pos[b]),
            True,
        )

    gw_sites = [ground_ecef(g.latitude_deg, g.longitude_deg) for g in scenario.gateways]
    for j in range(scenario.n_sats):
        for g in scenario.gateways:
            site = gw_sites[g.id]
            elev = elevation_angles(site, pos[j : j + 1])[0]
            if elev >= g.min_elevation_deg:
                add(
                    EdgeKind.FL,
                    NodeRef(NodeKind.SAT, j),
                    NodeRef(NodeKind.GW, g.id),
                    _vacuum_latency_s(pos[j], site),
                    False,
                )

    for g1 in scenario.gateways:
        for g2 in scenario.gateways:
            if g1.id < g2.id:
                dist_km = haversine_km(
                    g1.latitude_deg,
                    g1.longitude_deg,
                    g2.latitude_deg,
                    g2.longitude_deg,
                )
                add(
                    EdgeKind.TL,
                    NodeRef(NodeKind.GW, g1.id),
                    NodeRef(NodeKind.GW, g2.id),
                    dist_km * 1000.0 / TERRESTRIAL_SPEED_M_S,
                    True,
                )

    return SnapshotGraph(
        t=t,
        n_users=scenario.n_users,
        n_sats=scenario.n_sats,
        n_gateways=scenario.n_gateways,
        edges=tuple(edges),
    )


def build_all(scenario: Scenario, eph: Ephemeris) -> list[SnapshotGraph]:
    return [build_snapshot(scenario, eph, t) for t in range(1, scenario.time.steps + 1)]


def directed_expansion(g: SnapshotGraph) -> SnapshotGraph:
    """Replace each bidirectional edge by two directed edges.

    The pair shares the original edge's capacity group, so a per-group
    capacity bound covers the sum of both directions.  UL/FL edges keep their
    ids unchanged; reverse edges get fresh ids after the originals.
    """
    edges: list[Edge] = []
    reverse: list[Edge] = []
    next_id = max((e.id for e in g.edges), default=-1) + 1
    for e in g.edges:
        if not e.bidirectional:
            edges.append(e)
            continue
        edges.append(
            Edge(
                id=e.id,
                kind=e.kind,
                u=e.u,
                v=e.v,
                latency_s=e.latency_s,
                bidirectional=False,
                capacity_group=e.capacity_group,
            )
        )
        reverse.append(
            Edge(
                id=next_id,
                kind=e.kind,
                u=e.v,
                v=e.u,
                latency_s=e.latency_s,
                bidirectional=False,
                capacity_group=e.capacity_group,
            )
        )
        next_id += 1
    return SnapshotGraph(
        t=g.t,
        n_users=g.n_users,
        n_sats=g.n_sats,
        n_gateways=g.n_gateways,
        edges=tuple(edges + reverse),
        directed=True,
    )


def snapshot_to_dict(g: SnapshotGraph) -> dict:
    return {
        "t": g.t,
        "nodes": {"users": g.n_users, "sats": g.n_sats, "gateways": g.n_gateways},
        "directed": g.directed,
        "edges": [
            {
                "id": e.id,
                "kind": e.kind.value,
                "u": [e.u.kind.value, e.u.index],
                "v": [e.v.kind.value, e.v.index],
                "latency_s": e.latency_s,
                "capacity_group": e.capacity_group,
            }
            for e in g.edges
        ],
    }


def write_graph_json(graphs: list[SnapshotGraph], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([snapshot_to_dict(g) for g in graphs], fh, indent=1)
        fh.write("\n")
