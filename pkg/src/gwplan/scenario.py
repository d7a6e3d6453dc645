"""Problem instances: constellation, gateway sites, traffic, capacities, weights.

A Scenario is immutable after construction and owns every scalar parameter of
a planning run.  Instances come from YAML files (see ``load_scenario`` for the
schema) or from :func:`default_scenario`.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import yaml

DEFAULT_USER_MIN_ELEVATION_DEG = 10.0
DEFAULT_GATEWAY_MIN_ELEVATION_DEG = 5.0
DEFAULT_ISL_GRAZING_ALTITUDE_KM = 80.0
DEFAULT_EPOCH = "2024-01-01T00:00:00Z"

WEIGHT_SUM_TOL = 1e-9


class ScenarioError(ValueError):
    """Scenario file failed to parse or violated an invariant."""


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ScenarioError(message)


@dataclass(frozen=True)
class ConstellationSpec:
    """Walker-style circular constellation: ``planes`` x ``sats_per_plane``."""

    planes: int
    sats_per_plane: int
    altitude_km: float
    inclination_deg: float
    eccentricity: float = 0.0
    raan_first_plane_deg: float = 0.0
    raan_spacing_deg: float | None = None
    phasing_offset_deg: float | None = None

    def __post_init__(self) -> None:
        _require(self.planes >= 1, "constellation.planes must be >= 1")
        _require(self.sats_per_plane >= 1, "constellation.sats_per_plane must be >= 1")
        _require(self.altitude_km > 0, "constellation.altitude_km must be > 0")
        _require(
            self.eccentricity == 0.0,
            "constellation.eccentricity must be 0 (circular orbits only)",
        )
        if self.raan_spacing_deg is None:
            object.__setattr__(self, "raan_spacing_deg", 360.0 / self.planes)
        if self.phasing_offset_deg is None:
            object.__setattr__(
                self, "phasing_offset_deg", 360.0 / (self.planes * self.sats_per_plane)
            )

    @property
    def total_sats(self) -> int:
        return self.planes * self.sats_per_plane


@dataclass(frozen=True)
class GatewaySite:
    id: int
    name: str
    latitude_deg: float
    longitude_deg: float
    min_elevation_deg: float = DEFAULT_GATEWAY_MIN_ELEVATION_DEG

    def __post_init__(self) -> None:
        _require(
            -90.0 <= self.latitude_deg <= 90.0,
            f"gateways[{self.id}].latitude_deg out of range [-90, 90]",
        )
        _require(
            -180.0 <= self.longitude_deg <= 180.0,
            f"gateways[{self.id}].longitude_deg out of range [-180, 180]",
        )


@dataclass(frozen=True)
class TrafficDemand:
    """One user-generated traffic flow and its destination gateway."""

    id: int
    user_latitude_deg: float
    user_longitude_deg: float
    flow_mbps: float
    destination_gateway: int
    min_elevation_deg: float = DEFAULT_USER_MIN_ELEVATION_DEG

    def __post_init__(self) -> None:
        _require(self.flow_mbps > 0, f"traffic[{self.id}].flow_mbps must be > 0")
        _require(
            -90.0 <= self.user_latitude_deg <= 90.0,
            f"traffic[{self.id}].user_latitude_deg out of range [-90, 90]",
        )
        _require(
            -180.0 <= self.user_longitude_deg <= 180.0,
            f"traffic[{self.id}].user_longitude_deg out of range [-180, 180]",
        )


@dataclass(frozen=True)
class LinkCapacities:
    """Uniform per-kind link capacities; terrestrial links are uncapacitated."""

    user_mbps: float
    isl_mbps: float
    feeder_mbps: float

    def __post_init__(self) -> None:
        _require(self.user_mbps > 0, "capacities.user_mbps must be > 0")
        _require(self.isl_mbps > 0, "capacities.isl_mbps must be > 0")
        _require(self.feeder_mbps > 0, "capacities.feeder_mbps must be > 0")


@dataclass(frozen=True)
class CostWeights:
    """Convex weights on gateway count, flow gap, and latency; sum to 1."""

    gateway: float
    flow: float
    latency: float
    latency_norm_s: float

    def __post_init__(self) -> None:
        _require(self.gateway >= 0, "weights.gateway must be >= 0")
        _require(self.flow >= 0, "weights.flow must be >= 0")
        _require(self.latency >= 0, "weights.latency must be >= 0")
        total = self.gateway + self.flow + self.latency
        _require(
            abs(total - 1.0) <= WEIGHT_SUM_TOL,
            f"weights must sum to 1 (got {total!r})",
        )
        _require(self.latency_norm_s > 0, "weights.latency_norm_s must be > 0")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.gateway, self.flow, self.latency)


@dataclass(frozen=True)
class TimeGrid:
    """Discrete steps 1..steps, spaced step_s seconds from the epoch."""

    epoch: str = DEFAULT_EPOCH
    step_s: float = 60.0
    steps: int = 31

    def __post_init__(self) -> None:
        _require(self.step_s > 0, "time.step_s must be > 0")
        _require(self.steps >= 1, "time.steps must be >= 1")

    def elapsed_s(self, t: int) -> float:
        """Seconds since epoch for step index t in 1..steps."""
        _require(1 <= t <= self.steps, f"time step {t} outside 1..{self.steps}")
        return (t - 1) * self.step_s


@dataclass(frozen=True)
class Scenario:
    constellation: ConstellationSpec
    gateways: tuple[GatewaySite, ...]
    traffic: tuple[TrafficDemand, ...]
    capacities: LinkCapacities
    weights: CostWeights
    time: TimeGrid
    big_m_mbps: float | None = None
    isl_grazing_altitude_km: float = DEFAULT_ISL_GRAZING_ALTITUDE_KM
    solver_options: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "gateways", tuple(self.gateways))
        object.__setattr__(self, "traffic", tuple(self.traffic))
        object.__setattr__(self, "solver_options", dict(self.solver_options))
        if self.big_m_mbps is None:
            object.__setattr__(self, "big_m_mbps", self.capacities.isl_mbps)
        _require(len(self.gateways) >= 1, "gateways must be non-empty")
        ids = [g.id for g in self.gateways]
        _require(
            sorted(ids) == list(range(len(ids))),
            "gateways ids must be unique and dense 0..N-1",
        )
        _require(
            [g.id for g in self.gateways] == list(range(len(ids))),
            "gateways must be listed in id order",
        )
        valid = set(ids)
        for d in self.traffic:
            _require(
                d.destination_gateway in valid,
                f"traffic[{d.id}].destination_gateway references unknown "
                f"gateway {d.destination_gateway}",
            )
        tids = [d.id for d in self.traffic]
        _require(
            tids == list(range(len(tids))),
            "traffic ids must be unique and dense 0..N-1",
        )
        _require(
            self.big_m_mbps >= self.capacities.isl_mbps,
            "big_m_mbps must be >= capacities.isl_mbps "
            "(a smaller value silently tightens the flow-activation coupling)",
        )
        _require(
            self.isl_grazing_altitude_km >= 0,
            "isl_grazing_altitude_km must be >= 0",
        )

    @property
    def n_users(self) -> int:
        return len(self.traffic)

    @property
    def n_gateways(self) -> int:
        return len(self.gateways)

    @property
    def n_sats(self) -> int:
        return self.constellation.total_sats

    def digest(self) -> str:
        """Stable content hash of the scenario (hex sha256)."""
        text = yaml.safe_dump(scenario_to_dict(self), sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# YAML serialization
#
# Schema (all angles in degrees, capacities in Mbps, times in seconds):
#
#   constellation:
#     planes: 6
#     sats_per_plane: 10
#     altitude_km: 800.0
#     inclination_deg: 55.0
#     eccentricity: 0.0                 # optional, must be 0
#     raan_first_plane_deg: 30.0        # optional, default 0
#     raan_spacing_deg: 60.0            # optional, default 360/planes
#     phasing_offset_deg: 6.0           # optional, default 360/(planes*sats)
#   gateways:                           # list of sites, ids dense 0..N-1
#     - {id: 0, name: us-east, lat: 38.9, lon: -77.4, min_elev: 5.0}
#   traffic:                            # list of demands, ids dense 0..N-1
#     - {id: 0, lat: 49.63, lon: 6.16, flow_mbps: 50.0, destination: 0,
#        min_elev: 10.0}
#   capacities: {user_mbps: 250.0, isl_mbps: 1000.0, feeder_mbps: 500.0}
#   weights: {gateway: 0.3, flow: 0.4, latency: 0.3, latency_norm_s: 0.1}
#   time: {epoch: "2024-01-01T00:00:00Z", step_s: 60.0, steps: 31}
#   big_m_mbps: 1000.0                  # optional, default = isl capacity
#   isl_grazing_altitude_km: 80.0       # optional
#   solver: {mip_gap: 1.0e-6}           # optional, passed to the solver
# ---------------------------------------------------------------------------


def load_scenario(path: str) -> Scenario:
    """Load and validate a scenario YAML file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"parse error in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError(f"parse error in {path}: top level must be a mapping")
    return scenario_from_dict(raw)


def save_scenario(scenario: Scenario, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(scenario_to_dict(scenario), fh, sort_keys=False)


def scenario_from_dict(raw: Mapping[str, Any]) -> Scenario:
    try:
        cons = raw["constellation"]
        constellation = ConstellationSpec(
            planes=int(cons["planes"]),
            sats_per_plane=int(cons["sats_per_plane"]),
            altitude_km=float(cons["altitude_km"]),
            inclination_deg=float(cons["inclination_deg"]),
            eccentricity=float(cons.get("eccentricity", 0.0)),
            raan_first_plane_deg=float(cons.get("raan_first_plane_deg", 0.0)),
            raan_spacing_deg=_opt_float(cons.get("raan_spacing_deg")),
            phasing_offset_deg=_opt_float(cons.get("phasing_offset_deg")),
        )
        gateways = tuple(
            GatewaySite(
                id=int(g["id"]),
                name=str(g.get("name", f"gw-{g['id']}")),
                latitude_deg=float(g["lat"]),
                longitude_deg=float(g["lon"]),
                min_elevation_deg=float(
                    g.get("min_elev", DEFAULT_GATEWAY_MIN_ELEVATION_DEG)
                ),
            )
            for g in raw["gateways"]
        )
        traffic = tuple(
            TrafficDemand(
                id=int(d["id"]),
                user_latitude_deg=float(d["lat"]),
                user_longitude_deg=float(d["lon"]),
                flow_mbps=float(d["flow_mbps"]),
                destination_gateway=int(d["destination"]),
                min_elevation_deg=float(
                    d.get("min_elev", DEFAULT_USER_MIN_ELEVATION_DEG)
                ),
            )
            for d in raw["traffic"]
        )
        caps = raw["capacities"]
        capacities = LinkCapacities(
            user_mbps=float(caps["user_mbps"]),
            isl_mbps=float(caps["isl_mbps"]),
            feeder_mbps=float(caps["feeder_mbps"]),
        )
        wts = raw["weights"]
        weights = CostWeights(
            gateway=float(wts["gateway"]),
            flow=float(wts["flow"]),
            latency=float(wts["latency"]),
            latency_norm_s=float(wts["latency_norm_s"]),
        )
        tm = raw.get("time", {})
        time = TimeGrid(
            epoch=str(tm.get("epoch", DEFAULT_EPOCH)),
            step_s=float(tm.get("step_s", 60.0)),
            steps=int(tm.get("steps", 31)),
        )
        big_m = _opt_float(raw.get("big_m_mbps"))
        grazing = float(
            raw.get("isl_grazing_altitude_km", DEFAULT_ISL_GRAZING_ALTITUDE_KM)
        )
        solver_options = dict(raw.get("solver", {}))
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"parse error: {exc!r}") from exc
    return Scenario(
        constellation=constellation,
        gateways=gateways,
        traffic=traffic,
        capacities=capacities,
        weights=weights,
        time=time,
        big_m_mbps=big_m,
        isl_grazing_altitude_km=grazing,
        solver_options=solver_options,
    )


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    out: dict[str, Any] = {
        "constellation": {
            "planes": s.constellation.planes,
            "sats_per_plane": s.constellation.sats_per_plane,
            "altitude_km": s.constellation.altitude_km,
            "inclination_deg": s.constellation.inclination_deg,
            "eccentricity": s.constellation.eccentricity,
            "raan_first_plane_deg": s.constellation.raan_first_plane_deg,
            "raan_spacing_deg": s.constellation.raan_spacing_deg,
            "phasing_offset_deg": s.constellation.phasing_offset_deg,
        },
        "gateways": [
            {
                "id": g.id,
                "name": g.name,
                "lat": g.latitude_deg,
                "lon": g.longitude_deg,
                "min_elev": g.min_elevation_deg,
            }
            for g in s.gateways
        ],
        "traffic": [
            {
                "id": d.id,
                "lat": d.user_latitude_deg,
                "lon": d.user_longitude_deg,
                "flow_mbps": d.flow_mbps,
                "destination": d.destination_gateway,
                "min_elev": d.min_elevation_deg,
            }
            for d in s.traffic
        ],
        "capacities": {
            "user_mbps": s.capacities.user_mbps,
            "isl_mbps": s.capacities.isl_mbps,
            "feeder_mbps": s.capacities.feeder_mbps,
        },
        "weights": {
            "gateway": s.weights.gateway,
            "flow": s.weights.flow,
            "latency": s.weights.latency,
            "latency_norm_s": s.weights.latency_norm_s,
        },
        "time": {
            "epoch": s.time.epoch,
            "step_s": s.time.step_s,
            "steps": s.time.steps,
        },
        "big_m_mbps": s.big_m_mbps,
        "isl_grazing_altitude_km": s.isl_grazing_altitude_km,
    }
    if s.solver_options:
        out["solver"] = dict(s.solver_options)
    return out


def _opt_float(v: Any) -> float | None:
    return None if v is None else float(v)


# ---------------------------------------------------------------------------
# Built-in scenarios
# ---------------------------------------------------------------------------

# Representative, globally spread teleport-style sites.  These are placeholder
# coordinates chosen for this package's built-in scenario; they are not survey
# data and carry no significance beyond being plausible gateway locations.
_DEFAULT_GATEWAYS: Sequence[tuple[str, float, float]] = (
    ("us-east", 38.90, -77.40),
    ("luxembourg", 49.68, 6.33),
    ("japan-kanto", 36.30, 140.50),
    ("congo-basin", -4.30, 15.30),
    ("us-west", 48.15, -119.68),
    ("west-australia", -29.00, 115.30),
    ("brazil-sp", -22.90, -47.20),
    ("south-africa", -25.90, 27.70),
    ("india-east", 13.10, 80.30),
    ("hawaii", 21.67, -158.03),
)

# Two user clusters: Luxembourg and Tokyo.
_USER_CLUSTERS: Sequence[tuple[float, float]] = ((49.63, 6.16), (35.71, 139.49))


def default_scenario() -> Scenario:
    """Runnable built-in scenario: 6x10 constellation, 20 users, 10 gateways."""
    constellation = ConstellationSpec(
        planes=6,
        sats_per_plane=10,
        altitude_km=800.0,
        inclination_deg=55.0,
        eccentricity=0.0,
        raan_first_plane_deg=30.0,
    )
    gateways = tuple(
        GatewaySite(id=i, name=name, latitude_deg=lat, longitude_deg=lon)
        for i, (name, lat, lon) in enumerate(_DEFAULT_GATEWAYS)
    )
    traffic = []
    uid = 0
    for lat, lon in _USER_CLUSTERS:
        for k in range(10):
            traffic.append(
                TrafficDemand(
                    id=uid,
                    user_latitude_deg=lat,
                    user_longitude_deg=lon,
                    flow_mbps=50.0,
                    destination_gateway=k % len(gateways),
                )
            )
            uid += 1
    return Scenario(
        constellation=constellation,
        gateways=gateways,
        traffic=tuple(traffic),
        capacities=LinkCapacities(user_mbps=250.0, isl_mbps=1000.0, feeder_mbps=500.0),
        weights=CostWeights(gateway=0.3, flow=0.4, latency=0.3, latency_norm_s=0.1),
        time=TimeGrid(epoch=DEFAULT_EPOCH, step_s=60.0, steps=31),
    )


def reduce_scenario(
    s: Scenario,
    *,
    n_users: int,
    planes: int,
    sats_per_plane: int,
    n_gateways: int,
    steps: int,
) -> Scenario:
    """Shrink a scenario for desk-scale runs.

    Keeps the first ``n_gateways`` sites, interleaves users from the front and
    back halves of the traffic list (so both clusters of the built-in scenario
    stay represented), renumbers ids densely, and re-assigns destinations
    round-robin over the kept gateways.
    """
    _require(n_gateways <= s.n_gateways, "reduce: n_gateways exceeds scenario")
    _require(n_users <= s.n_users, "reduce: n_users exceeds scenario")
    constellation = ConstellationSpec(
        planes=planes,
        sats_per_plane=sats_per_plane,
        altitude_km=s.constellation.altitude_km,
        inclination_deg=s.constellation.inclination_deg,
        eccentricity=s.constellation.eccentricity,
        raan_first_plane_deg=s.constellation.raan_first_plane_deg,
    )
    gateways = tuple(s.gateways[:n_gateways])
    half = s.n_users // 2
    order: list[int] = []
    for k in range(s.n_users):
        cand = half + k // 2 if k % 2 else k // 2
        if cand < s.n_users:
            order.append(cand)
    picked = order[:n_users]
    traffic = tuple(
        TrafficDemand(
            id=j,
            user_latitude_deg=s.traffic[u].user_latitude_deg,
            user_longitude_deg=s.traffic[u].user_longitude_deg,
            flow_mbps=s.traffic[u].flow_mbps,
            destination_gateway=j % n_gateways,
            min_elevation_deg=s.traffic[u].min_elevation_deg,
        )
        for j, u in enumerate(picked)
    )
    return Scenario(
        constellation=constellation,
        gateways=gateways,
        traffic=traffic,
        capacities=s.capacities,
        weights=s.weights,
        time=TimeGrid(epoch=s.time.epoch, step_s=s.time.step_s, steps=steps),
        big_m_mbps=s.big_m_mbps,
        isl_grazing_altitude_km=s.isl_grazing_altitude_km,
        solver_options=s.solver_options,
    )
