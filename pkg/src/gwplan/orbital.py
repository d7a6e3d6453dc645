"""Circular-orbit propagation and spherical-Earth geodesy primitives.

All positions are Earth-centered Earth-fixed (ECEF) in kilometers on a
spherical Earth of radius 6378.137 km.  Two-body circular propagation in an
inertial frame is rotated into ECEF by the Earth rotation angle; the epoch is
aligned with Greenwich (rotation angle zero at t = 0).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from gwplan.scenario import ConstellationSpec, TimeGrid

EARTH_RADIUS_KM = 6378.137
EARTH_MU_KM3_S2 = 398600.4418
EARTH_ROTATION_RAD_S = 7.2921159e-5


@dataclass(frozen=True)
class Ephemeris:
    """Satellite ECEF positions per time step.

    positions has shape (steps, n_sats, 3); satellite j sits in plane
    ``plane[j]`` at in-plane slot ``slot[j]`` and j == plane * K + slot.
    """

    positions: np.ndarray
    plane: np.ndarray
    slot: np.ndarray
    elapsed_s: np.ndarray

    @property
    def steps(self) -> int:
        return self.positions.shape[0]

    @property
    def n_sats(self) -> int:
        return self.positions.shape[1]

    def at(self, t: int) -> np.ndarray:
        """Positions (n_sats, 3) at step t in 1..steps."""
        return self.positions[t - 1]


def propagate(spec: ConstellationSpec, grid: TimeGrid) -> Ephemeris:
    """Propagate the constellation over the time grid.

    Satellites are equally spaced within each plane; per-plane phasing and
    RAAN spacing follow the spec fields.  Mean motion is the circular
    two-body rate at the constellation altitude.
    """
    P, K = spec.planes, spec.sats_per_plane
    n = P * K
    a = EARTH_RADIUS_KM + spec.altitude_km
    mean_motion = np.sqrt(EARTH_MU_KM3_S2 / a**3)
    inc = np.radians(spec.inclination_deg)

    plane = np.repeat(np.arange(P), K)
    slot = np.tile(np.arange(K), P)
    raan = np.radians(spec.raan_first_plane_deg + plane * spec.raan_spacing_deg)
    arg0 = 2.0 * np.pi * slot / K + np.radians(spec.phasing_offset_deg) * plane

    elapsed = np.arange(grid.steps) * grid.step_s
    positions = np.empty((grid.steps, n, 3))
    cos_i, sin_i = np.cos(inc), np.sin(inc)
    for idx, te in enumerate(elapsed):
        u = arg0 + mean_motion * te
        cu, su = np.cos(u), np.sin(u)
        cO, sO = np.cos(raan), np.sin(raan)
        x = a * (cO * cu - sO * su * cos_i)
        y = a * (sO * cu + cO * su * cos_i)
        z = a * (su * sin_i)
        theta = EARTH_ROTATION_RAD_S * te
        ct, st = np.cos(theta), np.sin(theta)
        positions[idx, :, 0] = ct * x + st * y
        positions[idx, :, 1] = -st * x + ct * y
        positions[idx, :, 2] = z
    return Ephemeris(positions=positions, plane=plane, slot=slot, elapsed_s=elapsed)


def ground_ecef(lat_deg: float, lon_deg: float) -> np.ndarray:
    """ECEF point on the spherical Earth surface."""
    lat, lon = np.radians(lat_deg), np.radians(lon_deg)
    return EARTH_RADIUS_KM * np.array(
        [np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)]
    )


def elevation_angle(site: np.ndarray, sat: np.ndarray) -> float:
    """Elevation of ``sat`` above the local horizontal at ``site``, degrees.

    Negative below the horizon.
    """
    d = np.asarray(sat, dtype=float) - np.asarray(site, dtype=float)
    dn = np.linalg.norm(d)
    sn = np.linalg.norm(site)
    if dn == 0.0 or sn == 0.0:
        raise ValueError("degenerate geometry for elevation angle")
    s = np.dot(site, d) / (sn * dn)
    return float(np.degrees(np.arcsin(np.clip(s, -1.0, 1.0))))


def elevation_angles(site: np.ndarray, sats: np.ndarray) -> np.ndarray:
    """Vectorized elevation of many satellites (n, 3) from one site, degrees."""
    d = sats - site[None, :]
    dn = np.linalg.norm(d, axis=1)
    sn = np.linalg.norm(site)
    s = (d @ site) / np.maximum(dn * sn, 1e-300)
    return np.degrees(np.arcsin(np.clip(s, -1.0, 1.0)))


def line_of_sight(a: np.ndarray, b: np.ndarray, grazing_altitude_km: float) -> bool:
    """True iff segment a-b clears the sphere of radius R_E + grazing altitude."""
    a = np.asarray(a, dtype=float)
    seg = np.asarray(b, dtype=float) - a
    denom = float(seg @ seg)
    t = 0.0 if denom == 0.0 else float(np.clip(-(a @ seg) / denom, 0.0, 1.0))
    closest = a + t * seg
    return float(np.linalg.norm(closest)) >= EARTH_RADIUS_KM + grazing_altitude_km


def haversine_km(
    lat1_deg: float, lon1_deg: float, lat2_deg: float, lon2_deg: float
) -> float:
    """Great-circle distance on the spherical Earth, kilometers."""
    la1, lo1, la2, lo2 = np.radians([lat1_deg, lon1_deg, lat2_deg, lon2_deg])
    h = np.sin((la2 - la1) / 2) ** 2 + np.cos(la1) * np.cos(la2) * np.sin(
        (lo2 - lo1) / 2
    ) ** 2
    return float(2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0))))


def write_ephemeris_csv(eph: Ephemeris, path: str) -> None:
    """Dump positions as (t, sat_id, plane, slot, x_km, y_km, z_km) rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "sat_id", "plane", "slot", "x_km", "y_km", "z_km"])
        for idx in range(eph.steps):
            for j in range(eph.n_sats):
                x, y, z = eph.positions[idx, j]
                w.writerow(
                    [
                        idx + 1,
                        j,
                        int(eph.plane[j]),
                        int(eph.slot[j]),
                        f"{x:.6f}",
                        f"{y:.6f}",
                        f"{z:.6f}",
                    ]
                )
