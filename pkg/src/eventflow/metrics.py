"""Impact metrics: collective time, commuter increments, speeds, distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assign import AssignmentResult, OdKey
from .demand import DemandMatrix
from .errors import DomainError
from .netgraph import RoadNetwork


@dataclass(frozen=True)
class DistributionSummary:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    mean: float
    bins: tuple[tuple[float, float, int, float], ...]

    def as_dict(self) -> dict:
        return {
            "min": self.minimum,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "max": self.maximum,
            "mean": self.mean,
            "bins": [list(b) for b in self.bins],
        }


@dataclass(frozen=True)
class ImpactReport:
    scenario: str
    collective_time: float
    avg_speed_kmh: float
    commuter_increment_pct: float
    per_od_increments: dict[OdKey, float]
    per_origin_zone_increments: dict[str, float]
    per_dest_zone_increments: dict[str, float]
    tourist_time_stats: DistributionSummary | None

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "collective_time_veh_min": self.collective_time,
            "avg_speed_kmh": self.avg_speed_kmh,
            "commuter_increment_pct": self.commuter_increment_pct,
            "per_od_increments_pct": {
                f"{o}->{d}": v for (o, d), v in sorted(self.per_od_increments.items())
            },
            "per_origin_zone_increments_pct": dict(sorted(self.per_origin_zone_increments.items())),
            "per_dest_zone_increments_pct": dict(sorted(self.per_dest_zone_increments.items())),
            "tourist_time_stats": (
                self.tourist_time_stats.as_dict() if self.tourist_time_stats else None
            ),
        }


def commuter_increment(
    before: AssignmentResult, during: AssignmentResult, demand: DemandMatrix
) -> tuple[float, dict[OdKey, float]]:
    """Commuter-weighted percentage increment of travel time, plus per-OD values.

    Negative values are permitted: rerouting can beat the pre-event time.
    """
    numerator = 0.0
    denominator = 0.0
    per_od: dict[OdKey, float] = {}
    for record in sorted(demand.records, key=lambda r: (r.origin, r.dest)):
        if record.commuter_persons <= 0.0:
            continue
        od = (record.origin, record.dest)
        t_before = before.od_times.get(od)
        t_during = during.od_times.get(od)
        if t_before is None:
            raise DomainError(f"pre-event result missing commuter OD {od[0]}->{od[1]}")
        if t_during is None:
            raise DomainError(f"event result missing commuter OD {od[0]}->{od[1]}")
        numerator += (t_during - t_before) * record.commuter_persons
        denominator += t_before * record.commuter_persons
        per_od[od] = (t_during - t_before) / t_before * 100.0 if t_before > 0.0 else 0.0
    if denominator <= 0.0:
        raise DomainError("no commuter flow in demand; increment undefined")
    return numerator / denominator * 100.0, per_od


def per_zone_increments(
    per_od: dict[OdKey, float], demand: DemandMatrix
) -> tuple[dict[str, float], dict[str, float]]:
    """Commuter-flow-weighted mean increment by origin zone and by destination zone."""
    weights = {
        (r.origin, r.dest): r.commuter_persons
        for r in demand.records
        if r.commuter_persons > 0.0
    }
    origin_num: dict[str, float] = {}
    origin_den: dict[str, float] = {}
    dest_num: dict[str, float] = {}
    dest_den: dict[str, float] = {}
    for od in sorted(per_od):
        w = weights.get(od, 0.0)
        if w <= 0.0:
            continue
        origin_num[od[0]] = origin_num.get(od[0], 0.0) + per_od[od] * w
        origin_den[od[0]] = origin_den.get(od[0], 0.0) + w
        dest_num[od[1]] = dest_num.get(od[1], 0.0) + per_od[od] * w
        dest_den[od[1]] = dest_den.get(od[1], 0.0) + w
    by_origin = {z: origin_num[z] / origin_den[z] for z in sorted(origin_num)}
    by_dest = {z: dest_num[z] / dest_den[z] for z in sorted(dest_num)}
    return by_origin, by_dest


def collective_time(result: AssignmentResult) -> float:
    """Total vehicle-minutes over all links."""
    return sum(
        volume * result.link_times[e]
        for e, volume in sorted(result.link_volumes.items())
        if volume > 0.0
    )


def path_collective_time(result: AssignmentResult) -> float:
    """Total vehicle-minutes summed over used paths; cross-check of the link sum."""
    return sum(
        pf.flow * sum(result.link_times[e] for e in pf.path) for pf in result.path_flows
    )


def average_speed(result: AssignmentResult, network: RoadNetwork) -> float:
    """Vehicle-distance over vehicle-time, in km/h."""
    distance_m = 0.0
    time_min = 0.0
    for e, volume in sorted(result.link_volumes.items()):
        if volume <= 0.0:
            continue
        distance_m += volume * network.links[e].length_m
        time_min += volume * result.link_times[e]
    if time_min <= 0.0:
        raise DomainError("zero total vehicle-time; average speed undefined")
    return (distance_m / 1000.0) / (time_min / 60.0)


def distribution(
    values: list[float], bin_width: float | None = None, log_counts: bool = False
) -> DistributionSummary:
    """Quartiles, mean, and a histogram; counts optionally log10-scaled.

    Quantiles use linear interpolation between order statistics so box plots
    reproduce exactly across runs.
    """
    if not values:
        raise DomainError("distribution requires at least one value")
    arr = np.asarray(values, dtype=float)
    q1, median, q3 = np.quantile(arr, [0.25, 0.5, 0.75], method="linear")
    lo = float(arr.min())
    hi = float(arr.max())
    if bin_width is None:
        bin_width = (hi - lo) / 10.0 if hi > lo else 1.0
    edges = [lo]
    while edges[-1] < hi:
        edges.append(edges[-1] + bin_width)
    if len(edges) == 1:
        edges.append(lo + bin_width)
    counts, edges_arr = np.histogram(arr, bins=np.asarray(edges))
    bins = tuple(
        (
            float(edges_arr[i]),
            float(edges_arr[i + 1]),
            int(counts[i]),
            math.log10(counts[i]) if log_counts and counts[i] > 0 else float(counts[i]),
        )
        for i in range(len(counts))
    )
    return DistributionSummary(
        minimum=lo,
        q1=float(q1),
        median=float(median),
        q3=float(q3),
        maximum=hi,
        mean=float(arr.mean()),
        bins=bins,
    )


def impact_report(
    scenario: str,
    result: AssignmentResult,
    network: RoadNetwork,
    before: AssignmentResult,
    demand: DemandMatrix,
    tourist_ods: set[OdKey] | None = None,
) -> ImpactReport:
    """Assemble the per-scenario impact bundle consumed by exports and the service."""
    increment_pct, per_od = commuter_increment(before, result, demand)
    by_origin, by_dest = per_zone_increments(per_od, demand)
    tourist_stats = None
    if tourist_ods:
        times = [result.od_times[od] for od in sorted(tourist_ods) if od in result.od_times]
        if times:
            tourist_stats = distribution(times)
    return ImpactReport(
        scenario=scenario,
        collective_time=collective_time(result),
        avg_speed_kmh=average_speed(result, network),
        commuter_increment_pct=increment_pct,
        per_od_increments=per_od,
        per_origin_zone_increments=by_origin,
        per_dest_zone_increments=by_dest,
        tourist_time_stats=tourist_stats,
    )
