"""Great-circle geometry helpers for station and zone proximity."""

from __future__ import annotations

import math

EARTH_RADIUS_KM = 6371.0088


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in kilometres between two WGS84 points."""
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dphi = phi2 - phi1
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


def nearest(
    lat: float, lon: float, points: dict[str, tuple[float, float]]
) -> tuple[str, float]:
    """Nearest point id and its distance in km; ties go to the smallest id."""
    if not points:
        raise ValueError("nearest() requires at least one candidate point")
    best_id = ""
    best_km = math.inf
    for pid in sorted(points):
        plat, plon = points[pid]
        d = haversine_km(lat, lon, plat, plon)
        if d < best_km:
            best_id, best_km = pid, d
    return best_id, best_km
