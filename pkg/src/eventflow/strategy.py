"""Informed mode-change demand management.

Each OD trip is scored by the marginal cost of its current path: the total
travel time the system saves per vehicle removed. Among ODs whose endpoints
both sit near transit stations, the top-ranked trips shed a fixed fraction
of their vehicle flow; the remaining demand is reassigned and the saving is
compared against a proportional-uniform benchmark removing the same total.
Removed travelers are routed over the transit network to size per-segment
ridership gains against line capacity.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path

from .assign import AssignmentResult, OdKey, SolverConfig, solve_ue
from .demand import DemandMatrix, OdRecord, Zone
from .errors import DomainError, LoadError
from .geo import haversine_km
from .metrics import average_speed, collective_time
from .netgraph import RoadNetwork, marginal_edge_cost
from .tables import parse_float, parse_int, read_rows, write_rows

DEFAULT_SEGMENT_CAPACITY = 30000.0

Segment = tuple[str, str, str]  # (line_id, from_station, to_station)


@dataclass(frozen=True)
class TransitLine:
    line_id: str
    kind: str
    stations: tuple[tuple[str, float, float], ...]
    segment_capacity: float = DEFAULT_SEGMENT_CAPACITY

    def __post_init__(self) -> None:
        if self.kind not in ("metro", "brt"):
            raise DomainError(f"line {self.line_id}: kind must be metro or brt")
        if len(self.stations) < 2:
            raise DomainError(f"line {self.line_id}: needs at least 2 stations")
        for a, b in zip(self.stations, self.stations[1:]):
            if a[0] == b[0]:
                raise DomainError(f"line {self.line_id}: consecutive duplicate station {a[0]}")
        if self.segment_capacity <= 0.0:
            raise DomainError(f"line {self.line_id}: segment capacity must be > 0")


@dataclass(frozen=True)
class EligibleOd:
    origin: str
    dest: str
    origin_station: str
    dest_station: str
    marginal_path_cost: float
    vehicle_flow: float


@dataclass(frozen=True)
class SavingsSummary:
    t_before: float
    t_after: float
    savings_pct: float
    removed_vph: float
    removed_share_pct: float
    speed_before_kmh: float
    speed_after_kmh: float
    converged: bool

    def as_dict(self) -> dict:
        return {
            "t_before_veh_min": self.t_before,
            "t_after_veh_min": self.t_after,
            "savings_pct": self.savings_pct,
            "removed_vph": self.removed_vph,
            "removed_share_pct": self.removed_share_pct,
            "speed_before_kmh": self.speed_before_kmh,
            "speed_after_kmh": self.speed_after_kmh,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class StrategyPlan:
    radius_km: float
    top_k: int
    reduction_fraction: float
    mode: str
    selected: tuple[EligibleOd, ...]
    reductions: dict[OdKey, float]
    reassignment: AssignmentResult | None = None
    savings: SavingsSummary | None = None
    ridership: dict[Segment, float] | None = None
    over_capacity: tuple[Segment, ...] = ()

    def total_reduction(self) -> float:
        return sum(self.reductions.values())


def station_coords(lines: list[TransitLine]) -> dict[str, tuple[float, float]]:
    coords: dict[str, tuple[float, float]] = {}
    for line in sorted(lines, key=lambda l: l.line_id):
        for station_id, lat, lon in line.stations:
            coords.setdefault(station_id, (lat, lon))
    return coords


def min_time_used_path(result: AssignmentResult, od: OdKey) -> tuple[str, ...]:
    """The lowest-time path carrying flow for an OD; ties go to the smaller edge sequence."""
    candidates = [pf.path for pf in result.path_flows if (pf.origin, pf.dest) == od]
    if not candidates:
        raise DomainError(f"OD {od[0]}->{od[1]} has no used path in result")
    return min(candidates, key=lambda p: (sum(result.link_times[e] for e in p), p))


def marginal_path_cost(result: AssignmentResult, od: OdKey, network: RoadNetwork) -> float:
    """Sum of marginal edge costs along the OD's minimum-time used path."""
    path = min_time_used_path(result, od)
    return sum(
        marginal_edge_cost(network.links[e], result.link_volumes.get(e, 0.0), network.params)
        for e in path
    )


def eligible_ods(
    zones: dict[str, Zone],
    lines: list[TransitLine],
    result: AssignmentResult,
    radius_km: float,
    network: RoadNetwork,
) -> list[EligibleOd]:
    """ODs whose zone centroids both lie within radius_km of some station.

    The radius check is a closed ball; each eligible OD is annotated with its
    nearest stations and the marginal cost of its current path.
    """
    if not lines:
        raise DomainError("eligible_ods requires at least one transit line")
    stations = station_coords(lines)
    near: dict[str, tuple[str, float] | None] = {}
    for zone_id in sorted(zones):
        zone = zones[zone_id]
        best: tuple[str, float] | None = None
        for station_id in sorted(stations):
            lat, lon = stations[station_id]
            d = haversine_km(zone.lat, zone.lon, lat, lon)
            if best is None or d < best[1]:
                best = (station_id, d)
        near[zone_id] = best
    flows: dict[OdKey, float] = {}
    for pf in result.path_flows:
        key = (pf.origin, pf.dest)
        flows[key] = flows.get(key, 0.0) + pf.flow
    out: list[EligibleOd] = []
    for od in sorted(flows):
        if flows[od] <= 0.0:
            continue
        origin_near = near.get(od[0])
        dest_near = near.get(od[1])
        if origin_near is None or dest_near is None:
            continue
        if origin_near[1] <= radius_km and dest_near[1] <= radius_km:
            out.append(
                EligibleOd(
                    origin=od[0],
                    dest=od[1],
                    origin_station=origin_near[0],
                    dest_station=dest_near[0],
                    marginal_path_cost=marginal_path_cost(result, od, network),
                    vehicle_flow=flows[od],
                )
            )
    return out


def plan_marginal(
    result: AssignmentResult,
    eligible: list[EligibleOd],
    top_k: int,
    reduction_fraction: float = 0.60,
    radius_km: float = 0.0,
) -> StrategyPlan:
    """Reduce a fraction of flow from the top-k ODs ranked by marginal path cost."""
    if top_k < 1:
        raise DomainError("top_k must be >= 1")
    if not 0.0 < reduction_fraction <= 1.0:
        raise DomainError("reduction_fraction must lie in (0, 1]")
    ranked = sorted(eligible, key=lambda e: (-e.marginal_path_cost, (e.origin, e.dest)))
    selected = tuple(ranked[: min(top_k, len(ranked))])
    reductions = {
        (e.origin, e.dest): reduction_fraction * e.vehicle_flow for e in selected
    }
    return StrategyPlan(
        radius_km=radius_km,
        top_k=top_k,
        reduction_fraction=reduction_fraction,
        mode="marginal",
        selected=selected,
        reductions=reductions,
    )


def plan_uniform(
    result: AssignmentResult,
    eligible: list[EligibleOd],
    total_reduction: float,
    radius_km: float = 0.0,
) -> StrategyPlan:
    """Benchmark: spread the same removed total proportionally over all eligible ODs."""
    total_flow = sum(e.vehicle_flow for e in eligible)
    if total_reduction < 0.0 or total_reduction > total_flow + 1e-9:
        raise DomainError(
            f"total reduction {total_reduction} infeasible against eligible flow {total_flow}"
        )
    share = total_reduction / total_flow if total_flow > 0.0 else 0.0
    selected = tuple(sorted(eligible, key=lambda e: (e.origin, e.dest)))
    reductions = {
        (e.origin, e.dest): share * e.vehicle_flow for e in selected if share > 0.0
    }
    return StrategyPlan(
        radius_km=radius_km,
        top_k=len(selected),
        reduction_fraction=share,
        mode="uniform",
        selected=selected,
        reductions=reductions,
    )


def reduced_demand(demand: DemandMatrix, reductions: dict[OdKey, float]) -> DemandMatrix:
    by_od = demand.by_od()
    for od, removed in sorted(reductions.items()):
        record = by_od.get(od)
        if record is None:
            raise DomainError(f"reduction on unknown OD {od[0]}->{od[1]}")
        if removed > record.vehicle_flow + 1e-9:
            raise DomainError(
                f"reduction {removed} exceeds OD {od[0]}->{od[1]} flow {record.vehicle_flow}"
            )
        by_od[od] = OdRecord(
            hour=record.hour,
            origin=record.origin,
            dest=record.dest,
            vehicle_flow=max(0.0, record.vehicle_flow - removed),
            person_flow=max(0.0, record.person_flow - removed),
            commuter_persons=min(record.commuter_persons, max(0.0, record.person_flow - removed)),
        )
    return DemandMatrix(
        hour=demand.hour,
        records=tuple(by_od[k] for k in sorted(by_od)),
        day_scale=demand.day_scale,
    )


def apply_and_evaluate(
    network_event: RoadNetwork,
    demand: DemandMatrix,
    plan: StrategyPlan,
    config: SolverConfig | None = None,
    zones: dict[str, Zone] | None = None,
    before: AssignmentResult | None = None,
    workers: int = 1,
) -> StrategyPlan:
    """Reassign the reduced demand and measure collective-time savings."""
    if zones is None:
        raise DomainError("apply_and_evaluate requires the zone map")
    config = config or SolverConfig()
    if before is None:
        before = solve_ue(network_event, demand, zones, config, workers=workers)
    t_before = collective_time(before)
    if not plan.reductions:
        savings = SavingsSummary(
            t_before=t_before,
            t_after=t_before,
            savings_pct=0.0,
            removed_vph=0.0,
            removed_share_pct=0.0,
            speed_before_kmh=average_speed(before, network_event),
            speed_after_kmh=average_speed(before, network_event),
            converged=before.converged,
        )
        return replace(plan, reassignment=before, savings=savings)
    demand_after = reduced_demand(demand, plan.reductions)
    after = solve_ue(network_event, demand_after, zones, config, workers=workers)
    t_after = collective_time(after)
    removed = plan.total_reduction()
    total_demand = demand.total_vehicles()
    savings = SavingsSummary(
        t_before=t_before,
        t_after=t_after,
        savings_pct=(t_before - t_after) / t_before * 100.0 if t_before > 0.0 else 0.0,
        removed_vph=removed,
        removed_share_pct=removed / total_demand * 100.0 if total_demand > 0.0 else 0.0,
        speed_before_kmh=average_speed(before, network_event),
        speed_after_kmh=average_speed(after, network_event),
        converged=before.converged and after.converged,
    )
    return replace(plan, reassignment=after, savings=savings)


def _segment_owner(lines: list[TransitLine]) -> dict[tuple[str, str], str]:
    """Directed station hop -> owning line; shared hops go to the smallest line_id."""
    owner: dict[tuple[str, str], str] = {}
    for line in sorted(lines, key=lambda l: l.line_id):
        for a, b in zip(line.stations, line.stations[1:]):
            for hop in ((a[0], b[0]), (b[0], a[0])):
                owner.setdefault(hop, line.line_id)
    return owner


def _station_graph(lines: list[TransitLine]) -> dict[str, tuple[str, ...]]:
    adjacency: dict[str, set[str]] = {}
    for line in lines:
        for a, b in zip(line.stations, line.stations[1:]):
            adjacency.setdefault(a[0], set()).add(b[0])
            adjacency.setdefault(b[0], set()).add(a[0])
    return {s: tuple(sorted(nbrs)) for s, nbrs in adjacency.items()}


def transit_route(
    lines: list[TransitLine], origin_station: str, dest_station: str
) -> tuple[tuple[str, str], ...]:
    """Minimum-hop directed station sequence; transfers happen at shared stations."""
    graph = _station_graph(lines)
    if origin_station not in graph or dest_station not in graph:
        raise DomainError(
            f"transit stations disconnected: {origin_station}->{dest_station} not on any line"
        )
    if origin_station == dest_station:
        return ()
    parents: dict[str, str] = {origin_station: origin_station}
    queue = deque([origin_station])
    while queue:
        current = queue.popleft()
        if current == dest_station:
            break
        for nxt in graph[current]:
            if nxt not in parents:
                parents[nxt] = current
                queue.append(nxt)
    if dest_station not in parents:
        raise DomainError(f"transit stations disconnected: {origin_station}->{dest_station}")
    hops: list[tuple[str, str]] = []
    node = dest_station
    while node != origin_station:
        hops.append((parents[node], node))
        node = parents[node]
    return tuple(reversed(hops))


def ridership_deltas(
    plan: StrategyPlan,
    zones: dict[str, Zone],
    lines: list[TransitLine],
    persons_per_vehicle: float = 1.0,
) -> tuple[dict[Segment, float], tuple[Segment, ...]]:
    """Added transit riders per directed segment, with over-capacity flags."""
    owner = _segment_owner(lines)
    capacities = {line.line_id: line.segment_capacity for line in lines}
    deltas: dict[Segment, float] = {}
    for entry in sorted(plan.selected, key=lambda e: (e.origin, e.dest)):
        removed = plan.reductions.get((entry.origin, entry.dest), 0.0)
        if removed <= 0.0:
            continue
        persons = removed * persons_per_vehicle
        for hop in transit_route(lines, entry.origin_station, entry.dest_station):
            segment = (owner[hop], hop[0], hop[1])
            deltas[segment] = deltas.get(segment, 0.0) + persons
    flagged = tuple(
        seg for seg in sorted(deltas) if deltas[seg] > capacities[seg[0]]
    )
    return deltas, flagged


def load_lines(path: str | Path) -> list[TransitLine]:
    required = ["line_id", "kind", "seq", "station_id", "lat", "lon"]
    rows_by_line: dict[str, list[tuple[int, str, float, float]]] = {}
    kinds: dict[str, str] = {}
    capacities: dict[str, float] = {}
    for lineno, row in read_rows(path, required, ["segment_capacity"]):
        line_id = row["line_id"]
        seq = parse_int(str(path), lineno, "seq", row["seq"])
        kinds.setdefault(line_id, row["kind"])
        if row["kind"] != kinds[line_id]:
            raise LoadError(str(path), lineno, f"line {line_id}: inconsistent kind")
        if row.get("segment_capacity"):
            capacities[line_id] = parse_float(
                str(path), lineno, "segment_capacity", row["segment_capacity"]
            )
        rows_by_line.setdefault(line_id, []).append(
            (
                seq,
                row["station_id"],
                parse_float(str(path), lineno, "lat", row["lat"]),
                parse_float(str(path), lineno, "lon", row["lon"]),
            )
        )
    lines: list[TransitLine] = []
    for line_id in sorted(rows_by_line):
        ordered = sorted(rows_by_line[line_id])
        try:
            lines.append(
                TransitLine(
                    line_id=line_id,
                    kind=kinds[line_id],
                    stations=tuple((s, lat, lon) for _, s, lat, lon in ordered),
                    segment_capacity=capacities.get(line_id, DEFAULT_SEGMENT_CAPACITY),
                )
            )
        except DomainError as exc:
            raise LoadError(str(path), None, str(exc)) from exc
    return lines


def write_lines(path: str | Path, lines: list[TransitLine]) -> None:
    rows = []
    for line in sorted(lines, key=lambda l: l.line_id):
        for seq, (station_id, lat, lon) in enumerate(line.stations):
            rows.append(
                [line.line_id, line.kind, seq, station_id, lat, lon, line.segment_capacity]
            )
    write_rows(
        path,
        ["line_id", "kind", "seq", "station_id", "lat", "lon", "segment_capacity"],
        rows,
    )


def write_plan_tables(
    reductions_path: str | Path,
    segments_path: str | Path,
    plan: StrategyPlan,
    deltas: dict[Segment, float] | None = None,
    flagged: tuple[Segment, ...] = (),
) -> None:
    mc_by_od = {(e.origin, e.dest): e.marginal_path_cost for e in plan.selected}
    write_rows(
        reductions_path,
        ["origin", "dest", "removed_vph", "mc_p_min"],
        (
            [od[0], od[1], plan.reductions[od], mc_by_od.get(od, 0.0)]
            for od in sorted(plan.reductions)
        ),
    )
    deltas = deltas if deltas is not None else (plan.ridership or {})
    over = set(flagged or plan.over_capacity)
    write_rows(
        segments_path,
        ["line_id", "from_station", "to_station", "direction", "delta_persons", "over_capacity"],
        (
            [seg[0], seg[1], seg[2], f"{seg[1]}->{seg[2]}", deltas[seg], seg in over]
            for seg in sorted(deltas)
        ),
    )
