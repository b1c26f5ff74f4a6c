"""Demand ingestion and event (tourist) demand generation.

Baseline origin-destination matrices are loaded from files. Event demand is
derived from session schedules: attendance is spread over pre-start departure
hours, apportioned to residences by capacity, mode-split against transit
station proximity, and the taxi share becomes additional vehicle demand.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import DomainError, LoadError
from .geo import nearest
from .tables import parse_float, parse_int, read_rows, write_rows


@dataclass(frozen=True)
class Zone:
    zone_id: str
    lat: float
    lon: float
    attach_node: str


@dataclass(frozen=True)
class OdRecord:
    hour: int
    origin: str
    dest: str
    vehicle_flow: float
    person_flow: float
    commuter_persons: float

    def __post_init__(self) -> None:
        if not 0 <= self.hour <= 23:
            raise DomainError(f"od {self.origin}->{self.dest}: hour {self.hour} outside 0-23")
        for name, value in (
            ("vehicle_flow", self.vehicle_flow),
            ("person_flow", self.person_flow),
            ("commuter_persons", self.commuter_persons),
        ):
            if not math.isfinite(value) or value < 0.0:
                raise DomainError(
                    f"od {self.origin}->{self.dest}: {name} must be finite and >= 0"
                )
        if self.commuter_persons > self.person_flow + 1e-9:
            raise DomainError(
                f"od {self.origin}->{self.dest}: commuter_persons exceeds person_flow"
            )


@dataclass(frozen=True)
class DemandMatrix:
    """All OD records for a single hour, with the weekday scale already applied."""

    hour: int
    records: tuple[OdRecord, ...]
    day_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.day_scale <= 0.0:
            raise DomainError("day_scale must be > 0")
        seen: set[tuple[str, str]] = set()
        for rec in self.records:
            if rec.hour != self.hour:
                raise DomainError(
                    f"record {rec.origin}->{rec.dest} has hour {rec.hour}, matrix hour {self.hour}"
                )
            key = (rec.origin, rec.dest)
            if key in seen:
                raise DomainError(f"duplicate OD record {rec.origin}->{rec.dest}")
            seen.add(key)

    def by_od(self) -> dict[tuple[str, str], OdRecord]:
        return {(r.origin, r.dest): r for r in self.records}

    def total_vehicles(self) -> float:
        return sum(r.vehicle_flow for r in self.records)


@dataclass(frozen=True)
class Venue:
    venue_id: str
    lat: float
    lon: float
    capacity: float

    def __post_init__(self) -> None:
        if self.capacity <= 0.0:
            raise DomainError(f"venue {self.venue_id}: capacity must be > 0")


@dataclass(frozen=True)
class EventSession:
    venue_id: str
    date: str
    start_hour: int
    expected_attendance: float

    def __post_init__(self) -> None:
        if not 0 <= self.start_hour <= 23:
            raise DomainError(f"session at {self.venue_id}: start_hour outside 0-23")
        if self.expected_attendance < 0.0:
            raise DomainError(f"session at {self.venue_id}: attendance must be >= 0")


@dataclass(frozen=True)
class Residence:
    residence_id: str
    lat: float
    lon: float
    accommodates: float
    kind: str

    def __post_init__(self) -> None:
        if self.accommodates <= 0.0:
            raise DomainError(f"residence {self.residence_id}: accommodates must be > 0")
        if self.kind not in ("airbnb", "hotel"):
            raise DomainError(f"residence {self.residence_id}: kind must be airbnb or hotel")


class TravelMode(str, enum.Enum):
    WALK_TRANSIT = "walk_transit"
    BIKE_TRANSIT = "bike_transit"
    BUS = "bus"
    TAXI = "taxi"


@dataclass(frozen=True)
class ModeSplitConfig:
    walk_km: float = 1.0
    bike_km: float = 2.0
    taxi_occupancy: float = 2.0
    bus_enabled: bool = False
    bus_time_ratio: float = 1.5

    def __post_init__(self) -> None:
        if not 0.0 < self.walk_km < self.bike_km:
            raise DomainError("mode split requires 0 < walk_km < bike_km")
        if self.taxi_occupancy < 1.0:
            raise DomainError("taxi_occupancy must be >= 1")


@dataclass(frozen=True)
class DepartureSplit:
    """Fractions of attendance departing N hours before the session start."""

    shares: tuple[tuple[int, float], ...] = ((1, 0.30), (2, 0.40), (3, 0.30))

    def __post_init__(self) -> None:
        total = 0.0
        for hours_ahead, fraction in self.shares:
            if hours_ahead < 1:
                raise DomainError("departure offsets must be positive hours")
            if not 0.0 <= fraction <= 1.0:
                raise DomainError("departure fractions must lie in [0, 1]")
            total += fraction
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"departure fractions sum to {total}, expected 1")


@dataclass(frozen=True)
class TouristDemand:
    """Per-hour tourist flows split into taxi vehicles and transit persons."""

    taxi_records: tuple[OdRecord, ...]
    transit_persons: dict[tuple[str, str], float]
    warnings: int = 0


def load_demand(path: str | Path, day_scale: float, hour: int | None = None) -> DemandMatrix:
    """Load one hour of OD demand, scaling all flows by day_scale once."""
    if day_scale <= 0.0:
        raise DomainError("day_scale must be > 0")
    header = ["hour", "origin_zone", "dest_zone", "vehicle_flow", "person_flow", "commuter_persons"]
    records: list[OdRecord] = []
    seen: set[tuple[int, str, str]] = set()
    hours_present: set[int] = set()
    for lineno, row in read_rows(path, header):
        row_hour = parse_int(str(path), lineno, "hour", row["hour"])
        if hour is not None and row_hour != hour:
            continue
        key = (row_hour, row["origin_zone"], row["dest_zone"])
        if key in seen:
            raise LoadError(str(path), lineno, f"duplicate OD row {key}")
        seen.add(key)
        hours_present.add(row_hour)
        try:
            records.append(
                OdRecord(
                    hour=row_hour,
                    origin=row["origin_zone"],
                    dest=row["dest_zone"],
                    vehicle_flow=parse_float(str(path), lineno, "vehicle_flow", row["vehicle_flow"])
                    * day_scale,
                    person_flow=parse_float(str(path), lineno, "person_flow", row["person_flow"])
                    * day_scale,
                    commuter_persons=parse_float(
                        str(path), lineno, "commuter_persons", row["commuter_persons"]
                    )
                    * day_scale,
                )
            )
        except DomainError as exc:
            raise LoadError(str(path), lineno, str(exc)) from exc
    if hour is None:
        if len(hours_present) > 1:
            raise LoadError(
                str(path), None, f"file covers hours {sorted(hours_present)}; pass hour explicitly"
            )
        hour = next(iter(hours_present)) if hours_present else 0
    return DemandMatrix(hour=hour, records=tuple(records), day_scale=day_scale)


def spectators_per_hour(
    sessions: list[EventSession], split: DepartureSplit
) -> tuple[dict[tuple[int, str], float], int]:
    """Departures per (hour, venue); attendance is conserved across bins.

    Departure hours that would fall before the start of the day clamp into
    hour 0; the second return value counts such clamps.
    """
    departures: dict[tuple[int, str], float] = {}
    clamped = 0
    for session in sessions:
        for hours_ahead, fraction in split.shares:
            hour = session.start_hour - hours_ahead
            if hour < 0:
                hour = 0
                clamped += 1
            key = (hour, session.venue_id)
            departures[key] = departures.get(key, 0.0) + fraction * session.expected_attendance
    return departures, clamped


def assign_origins(
    departures: float, residences: list[Residence]
) -> dict[str, float]:
    """Apportion departures across residences proportionally to capacity."""
    if not residences:
        raise DomainError("assign_origins requires at least one residence")
    total = sum(r.accommodates for r in residences)
    return {r.residence_id: departures * r.accommodates / total for r in residences}


def mode_split(
    origin: tuple[float, float],
    dest: tuple[float, float],
    stations: dict[str, tuple[float, float]],
    config: ModeSplitConfig,
    bus_predicate=None,
) -> TravelMode:
    """Pick the tourist travel mode from endpoint-to-station distances.

    Both endpoints within walking range of a station go to transit on foot;
    within biking range, transit by bike. The optional bus predicate only
    applies when buses are enabled; everything else falls through to taxi.
    """
    if not stations:
        raise DomainError("mode_split requires at least one station")
    _, origin_km = nearest(origin[0], origin[1], stations)
    _, dest_km = nearest(dest[0], dest[1], stations)
    if origin_km <= config.walk_km and dest_km <= config.walk_km:
        return TravelMode.WALK_TRANSIT
    if origin_km <= config.bike_km and dest_km <= config.bike_km:
        return TravelMode.BIKE_TRANSIT
    if config.bus_enabled and bus_predicate is not None and bus_predicate(origin, dest):
        return TravelMode.BUS
    return TravelMode.TAXI


def nearest_zone(
    lat: float, lon: float, zones: dict[str, Zone], max_km: float | None = None
) -> tuple[str, bool]:
    """Zone whose centroid is closest; flags matches beyond max_km."""
    if not zones:
        raise DomainError("no zones to map against")
    zone_id, dist = nearest(lat, lon, {z.zone_id: (z.lat, z.lon) for z in zones.values()})
    return zone_id, bool(max_km is not None and dist > max_km)


def tourist_vehicle_demand(
    hour: int,
    venue: Venue,
    departures_by_residence: dict[str, float],
    modes: dict[str, TravelMode],
    residences: dict[str, Residence],
    zones: dict[str, Zone],
    config: ModeSplitConfig,
    max_zone_km: float | None = None,
) -> TouristDemand:
    """Turn taxi-mode departures into vehicle OD flows between zones.

    Taxi persons divide by occupancy into (fractional) vehicles; other modes
    are reported as transit person flows on the same zone pairs.
    """
    dest_zone, dest_warn = nearest_zone(venue.lat, venue.lon, zones, max_zone_km)
    warnings = 1 if dest_warn else 0
    taxi_vehicles: dict[str, float] = {}
    transit: dict[tuple[str, str], float] = {}
    for residence_id in sorted(departures_by_residence):
        persons = departures_by_residence[residence_id]
        if persons <= 0.0:
            continue
        residence = residences[residence_id]
        origin_zone, origin_warn = nearest_zone(
            residence.lat, residence.lon, zones, max_zone_km
        )
        warnings += 1 if origin_warn else 0
        if modes[residence_id] is TravelMode.TAXI:
            taxi_vehicles[origin_zone] = taxi_vehicles.get(origin_zone, 0.0) + persons
        else:
            key = (origin_zone, dest_zone)
            transit[key] = transit.get(key, 0.0) + persons
    records = tuple(
        OdRecord(
            hour=hour,
            origin=origin_zone,
            dest=dest_zone,
            vehicle_flow=persons / config.taxi_occupancy,
            person_flow=persons,
            commuter_persons=0.0,
        )
        for origin_zone, persons in sorted(taxi_vehicles.items())
    )
    return TouristDemand(taxi_records=records, transit_persons=transit, warnings=warnings)


def combine(base: DemandMatrix, additions: tuple[OdRecord, ...]) -> DemandMatrix:
    """Base demand plus event additions; commuter counts stay from base."""
    merged = {(r.origin, r.dest): r for r in base.records}
    for add in additions:
        if add.hour != base.hour:
            raise DomainError(
                f"addition {add.origin}->{add.dest} has hour {add.hour}, base hour {base.hour}"
            )
        key = (add.origin, add.dest)
        if key in merged:
            old = merged[key]
            merged[key] = OdRecord(
                hour=base.hour,
                origin=old.origin,
                dest=old.dest,
                vehicle_flow=old.vehicle_flow + add.vehicle_flow,
                person_flow=old.person_flow + add.person_flow,
                commuter_persons=old.commuter_persons,
            )
        else:
            merged[key] = add
    records = tuple(merged[k] for k in sorted(merged))
    return DemandMatrix(hour=base.hour, records=records, day_scale=base.day_scale)


def load_zones(path: str | Path) -> dict[str, Zone]:
    zones: dict[str, Zone] = {}
    for lineno, row in read_rows(path, ["zone_id", "lat", "lon", "attach_node"]):
        zone_id = row["zone_id"]
        if zone_id in zones:
            raise LoadError(str(path), lineno, f"duplicate zone_id {zone_id}")
        zones[zone_id] = Zone(
            zone_id=zone_id,
            lat=parse_float(str(path), lineno, "lat", row["lat"]),
            lon=parse_float(str(path), lineno, "lon", row["lon"]),
            attach_node=row["attach_node"],
        )
    return zones


def load_venues(path: str | Path) -> dict[str, Venue]:
    venues: dict[str, Venue] = {}
    for lineno, row in read_rows(path, ["venue_id", "lat", "lon", "capacity"]):
        venue_id = row["venue_id"]
        if venue_id in venues:
            raise LoadError(str(path), lineno, f"duplicate venue_id {venue_id}")
        try:
            venues[venue_id] = Venue(
                venue_id=venue_id,
                lat=parse_float(str(path), lineno, "lat", row["lat"]),
                lon=parse_float(str(path), lineno, "lon", row["lon"]),
                capacity=parse_float(str(path), lineno, "capacity", row["capacity"]),
            )
        except DomainError as exc:
            raise LoadError(str(path), lineno, str(exc)) from exc
    return venues


def load_sessions(path: str | Path, venues: dict[str, Venue]) -> list[EventSession]:
    sessions: list[EventSession] = []
    for lineno, row in read_rows(path, ["venue_id", "date", "start_hour", "expected_attendance"]):
        venue_id = row["venue_id"]
        if venue_id not in venues:
            raise LoadError(str(path), lineno, f"unknown venue {venue_id}")
        attendance = parse_float(str(path), lineno, "expected_attendance", row["expected_attendance"])
        if attendance > venues[venue_id].capacity:
            raise LoadError(
                str(path),
                lineno,
                f"attendance {attendance} exceeds venue {venue_id} capacity "
                f"{venues[venue_id].capacity}",
            )
        try:
            sessions.append(
                EventSession(
                    venue_id=venue_id,
                    date=row["date"],
                    start_hour=parse_int(str(path), lineno, "start_hour", row["start_hour"]),
                    expected_attendance=attendance,
                )
            )
        except DomainError as exc:
            raise LoadError(str(path), lineno, str(exc)) from exc
    return sessions


def load_residences(path: str | Path) -> dict[str, Residence]:
    residences: dict[str, Residence] = {}
    for lineno, row in read_rows(path, ["residence_id", "lat", "lon", "accommodates", "kind"]):
        residence_id = row["residence_id"]
        if residence_id in residences:
            raise LoadError(str(path), lineno, f"duplicate residence_id {residence_id}")
        try:
            residences[residence_id] = Residence(
                residence_id=residence_id,
                lat=parse_float(str(path), lineno, "lat", row["lat"]),
                lon=parse_float(str(path), lineno, "lon", row["lon"]),
                accommodates=parse_float(str(path), lineno, "accommodates", row["accommodates"]),
                kind=row["kind"],
            )
        except DomainError as exc:
            raise LoadError(str(path), lineno, str(exc)) from exc
    return residences


def write_demand(path: str | Path, matrix: DemandMatrix) -> None:
    write_rows(
        path,
        ["hour", "origin_zone", "dest_zone", "vehicle_flow", "person_flow", "commuter_persons"],
        (
            [r.hour, r.origin, r.dest, r.vehicle_flow, r.person_flow, r.commuter_persons]
            for r in sorted(matrix.records, key=lambda r: (r.origin, r.dest))
        ),
    )


def write_zones(path: str | Path, zones: dict[str, Zone]) -> None:
    write_rows(
        path,
        ["zone_id", "lat", "lon", "attach_node"],
        ([z.zone_id, z.lat, z.lon, z.attach_node] for z in (zones[k] for k in sorted(zones))),
    )


def write_venues(path: str | Path, venues: dict[str, Venue]) -> None:
    write_rows(
        path,
        ["venue_id", "lat", "lon", "capacity"],
        ([v.venue_id, v.lat, v.lon, v.capacity] for v in (venues[k] for k in sorted(venues))),
    )


def write_sessions(path: str | Path, sessions: list[EventSession]) -> None:
    write_rows(
        path,
        ["venue_id", "date", "start_hour", "expected_attendance"],
        (
            [s.venue_id, s.date, s.start_hour, s.expected_attendance]
            for s in sorted(sessions, key=lambda s: (s.date, s.start_hour, s.venue_id))
        ),
    )


def write_residences(path: str | Path, residences: dict[str, Residence]) -> None:
    write_rows(
        path,
        ["residence_id", "lat", "lon", "accommodates", "kind"],
        (
            [r.residence_id, r.lat, r.lon, r.accommodates, r.kind]
            for r in (residences[k] for k in sorted(residences))
        ),
    )
