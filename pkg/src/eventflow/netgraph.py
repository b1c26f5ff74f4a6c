"""Road-network graph, volume-delay cost functions, and capacity overlays.

Link travel time follows the calibrated volume-delay curve

    t(v) = f_s * (1 + alpha * (v / C) ** beta) * t_free

with the marginal cost of one extra vehicle on a link

    mc(v) = t(v) + f_s * alpha * beta * (v / C) ** beta * t_free

which is the exact derivative of v * t(v). ``bpr_integral`` is the
antiderivative of t used as the equilibrium line-search objective.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

from .errors import DomainError, LoadError, NoPathError
from .tables import parse_float, read_rows, write_rows

DEFAULT_LANE_MULTIPLIER = 0.5


@dataclass(frozen=True)
class Node:
    node_id: str
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise DomainError(f"node {self.node_id}: lat {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise DomainError(f"node {self.node_id}: lon {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class Link:
    edge_id: str
    from_node: str
    to_node: str
    length_m: float
    capacity_vph: float
    freeflow_time_min: float
    olympic_lane: bool = False

    def __post_init__(self) -> None:
        if self.length_m <= 0.0:
            raise DomainError(f"link {self.edge_id}: length must be > 0")
        if self.capacity_vph <= 0.0:
            raise DomainError(f"link {self.edge_id}: capacity must be > 0")
        if self.freeflow_time_min <= 0.0:
            raise DomainError(f"link {self.edge_id}: free-flow time must be > 0")


@dataclass(frozen=True)
class BprParams:
    """Volume-delay coefficients; defaults are field-calibrated values."""

    f_s: float = 1.15
    alpha: float = 0.18
    beta: float = 5.0

    def __post_init__(self) -> None:
        for name, value in (("f_s", self.f_s), ("alpha", self.alpha), ("beta", self.beta)):
            if not math.isfinite(value):
                raise DomainError(f"bpr {name} must be finite")
        if self.f_s < 1.0:
            raise DomainError("bpr f_s must be >= 1")
        if self.alpha < 0.0:
            raise DomainError("bpr alpha must be >= 0")
        if self.beta < 1.0:
            raise DomainError("bpr beta must be >= 1")


@dataclass(frozen=True)
class CapacityOverlay:
    """Per-edge capacity multipliers in (0, 1], e.g. reserved-lane reductions."""

    entries: dict[str, float]

    def __post_init__(self) -> None:
        for edge_id, mult in self.entries.items():
            if not (0.0 < mult <= 1.0):
                raise DomainError(
                    f"overlay {edge_id}: multiplier {mult} outside (0, 1]"
                )

    def merged(self, other: "CapacityOverlay") -> "CapacityOverlay":
        """Union of two overlays; shared edges multiply."""
        entries = dict(self.entries)
        for edge_id, mult in other.entries.items():
            entries[edge_id] = entries.get(edge_id, 1.0) * mult
        return CapacityOverlay(entries)


@dataclass(frozen=True)
class RoadNetwork:
    """Immutable directed road graph; safe for concurrent read."""

    nodes: dict[str, Node]
    links: dict[str, Link]
    params: BprParams

    def __post_init__(self) -> None:
        if not self.links:
            raise DomainError("network must have at least one link")
        for link in self.links.values():
            if link.from_node not in self.nodes:
                raise DomainError(f"link {link.edge_id}: unknown from node {link.from_node}")
            if link.to_node not in self.nodes:
                raise DomainError(f"link {link.edge_id}: unknown to node {link.to_node}")

    @cached_property
    def outgoing(self) -> dict[str, tuple[Link, ...]]:
        """Adjacency keyed by node; edges sorted by edge_id for determinism."""
        adj: dict[str, list[Link]] = {node_id: [] for node_id in self.nodes}
        for edge_id in sorted(self.links):
            link = self.links[edge_id]
            adj[link.from_node].append(link)
        return {node_id: tuple(edges) for node_id, edges in adj.items()}

    def olympic_lane_edges(self) -> tuple[str, ...]:
        return tuple(sorted(e for e, link in self.links.items() if link.olympic_lane))


def bpr_time(link: Link, volume: float, params: BprParams) -> float:
    """Average travel time in minutes on a link at the given hourly volume."""
    _check_volume(link, volume)
    ratio = volume / link.capacity_vph
    return params.f_s * (1.0 + params.alpha * ratio**params.beta) * link.freeflow_time_min


def bpr_integral(link: Link, volume: float, params: BprParams) -> float:
    """Antiderivative of bpr_time at the given volume, in vehicle-minutes."""
    _check_volume(link, volume)
    ratio = volume / link.capacity_vph
    return (
        params.f_s
        * link.freeflow_time_min
        * (volume + params.alpha * volume * ratio**params.beta / (params.beta + 1.0))
    )


def marginal_edge_cost(link: Link, volume: float, params: BprParams) -> float:
    """d(v * t(v))/dv: travel time plus the delay imposed on other vehicles."""
    _check_volume(link, volume)
    ratio = volume / link.capacity_vph
    return bpr_time(link, volume, params) + (
        params.f_s * params.alpha * params.beta * ratio**params.beta * link.freeflow_time_min
    )


def _check_volume(link: Link, volume: float) -> None:
    if not math.isfinite(volume) or volume < 0.0:
        raise DomainError(f"link {link.edge_id}: volume must be finite and >= 0, got {volume}")


def apply_overlay(network: RoadNetwork, overlay: CapacityOverlay) -> RoadNetwork:
    """New network with listed capacities scaled; the input is untouched."""
    unknown = sorted(e for e in overlay.entries if e not in network.links)
    if unknown:
        raise DomainError(f"overlay references unknown edge(s): {', '.join(unknown)}")
    if not overlay.entries:
        return network
    links = dict(network.links)
    for edge_id, mult in overlay.entries.items():
        link = links[edge_id]
        links[edge_id] = replace(link, capacity_vph=link.capacity_vph * mult)
    return RoadNetwork(nodes=network.nodes, links=links, params=network.params)


def default_lane_overlay(
    network: RoadNetwork, multiplier: float = DEFAULT_LANE_MULTIPLIER
) -> CapacityOverlay:
    """Overlay for every link flagged as carrying a reserved event lane."""
    return CapacityOverlay({e: multiplier for e in network.olympic_lane_edges()})


def _validate_costs(network: RoadNetwork, costs: dict[str, float]) -> None:
    for edge_id in network.links:
        cost = costs.get(edge_id)
        if cost is None:
            raise DomainError(f"cost map missing edge {edge_id}")
        if not math.isfinite(cost) or cost <= 0.0:
            raise DomainError(f"cost for edge {edge_id} must be positive and finite")


def single_source_paths(
    network: RoadNetwork,
    costs: dict[str, float],
    origin: str,
    dests: set[str],
    *,
    validate: bool = True,
) -> dict[str, tuple[tuple[str, ...], float]]:
    """Least-cost paths from one origin to many destinations.

    Ties between equal-cost paths resolve to the lexicographically smallest
    edge-id sequence, which makes assignment deterministic across runs and
    worker counts. Unreached destinations are absent from the result.
    """
    if origin not in network.nodes:
        raise DomainError(f"unknown origin node {origin}")
    if validate:
        _validate_costs(network, costs)
    settled: dict[str, tuple[tuple[str, ...], float]] = {}
    remaining = set(dests)
    heap: list[tuple[float, tuple[str, ...], str]] = [(0.0, (), origin)]
    while heap and remaining:
        cost, seq, node = heapq.heappop(heap)
        if node in settled:
            continue
        settled[node] = (seq, cost)
        remaining.discard(node)
        for link in network.outgoing[node]:
            if link.to_node in settled:
                continue
            heapq.heappush(
                heap, (cost + costs[link.edge_id], seq + (link.edge_id,), link.to_node)
            )
    return {d: settled[d] for d in dests if d in settled}


def shortest_path(
    network: RoadNetwork, costs: dict[str, float], origin: str, dest: str
) -> tuple[tuple[str, ...], float]:
    """Minimal-cost edge sequence and total cost from origin to dest."""
    if dest not in network.nodes:
        raise DomainError(f"unknown destination node {dest}")
    found = single_source_paths(network, costs, origin, {dest})
    if dest not in found:
        raise NoPathError([(origin, dest)])
    return found[dest]


def load_network(
    nodes_path: str | Path, links_path: str | Path, params: BprParams | None = None
) -> RoadNetwork:
    nodes = load_nodes(nodes_path)
    links = load_links(links_path)
    return RoadNetwork(nodes=nodes, links=links, params=params or BprParams())


def load_nodes(path: str | Path) -> dict[str, Node]:
    nodes: dict[str, Node] = {}
    for lineno, row in read_rows(path, ["node_id", "lat", "lon"]):
        node_id = row["node_id"]
        if node_id in nodes:
            raise LoadError(str(path), lineno, f"duplicate node_id {node_id}")
        try:
            nodes[node_id] = Node(
                node_id=node_id,
                lat=parse_float(str(path), lineno, "lat", row["lat"]),
                lon=parse_float(str(path), lineno, "lon", row["lon"]),
            )
        except DomainError as exc:
            raise LoadError(str(path), lineno, str(exc)) from exc
    return nodes


def load_links(path: str | Path) -> dict[str, Link]:
    links: dict[str, Link] = {}
    required = ["edge_id", "from", "to", "length_m", "capacity_vph"]
    optional = ["freeflow_time_min", "freeflow_speed_kmh", "olympic_lane"]
    for lineno, row in read_rows(path, required, optional):
        edge_id = row["edge_id"]
        if edge_id in links:
            raise LoadError(str(path), lineno, f"duplicate edge_id {edge_id}")
        length_m = parse_float(str(path), lineno, "length_m", row["length_m"])
        time_text = row.get("freeflow_time_min", "")
        speed_text = row.get("freeflow_speed_kmh", "")
        if bool(time_text) == bool(speed_text):
            raise LoadError(
                str(path),
                lineno,
                "exactly one of freeflow_time_min / freeflow_speed_kmh required",
            )
        if time_text:
            freeflow_min = parse_float(str(path), lineno, "freeflow_time_min", time_text)
        else:
            speed = parse_float(str(path), lineno, "freeflow_speed_kmh", speed_text)
            if speed <= 0.0:
                raise LoadError(str(path), lineno, "freeflow_speed_kmh must be > 0")
            freeflow_min = (length_m / 1000.0) / speed * 60.0
        try:
            links[edge_id] = Link(
                edge_id=edge_id,
                from_node=row["from"],
                to_node=row["to"],
                length_m=length_m,
                capacity_vph=parse_float(str(path), lineno, "capacity_vph", row["capacity_vph"]),
                freeflow_time_min=freeflow_min,
                olympic_lane=row.get("olympic_lane", "") in ("1", "true", "True", "yes"),
            )
        except DomainError as exc:
            raise LoadError(str(path), lineno, str(exc)) from exc
    return links


def load_overlay(path: str | Path, network: RoadNetwork | None = None) -> CapacityOverlay:
    entries: dict[str, float] = {}
    bad: list[str] = []
    for lineno, row in read_rows(path, ["edge_id", "multiplier"]):
        edge_id = row["edge_id"]
        if edge_id in entries:
            raise LoadError(str(path), lineno, f"duplicate overlay edge {edge_id}")
        if network is not None and edge_id not in network.links:
            bad.append(edge_id)
            continue
        mult = parse_float(str(path), lineno, "multiplier", row["multiplier"])
        if not (0.0 < mult <= 1.0):
            raise LoadError(str(path), lineno, f"multiplier {mult} outside (0, 1]")
        entries[edge_id] = mult
    if bad:
        raise LoadError(str(path), None, f"unknown edge_id(s): {', '.join(sorted(bad))}")
    return CapacityOverlay(entries)


def write_nodes(path: str | Path, nodes: dict[str, Node]) -> None:
    write_rows(
        path,
        ["node_id", "lat", "lon"],
        ([n.node_id, n.lat, n.lon] for n in (nodes[k] for k in sorted(nodes))),
    )


def write_links(path: str | Path, links: dict[str, Link]) -> None:
    write_rows(
        path,
        ["edge_id", "from", "to", "length_m", "capacity_vph", "freeflow_time_min", "olympic_lane"],
        (
            [
                l.edge_id,
                l.from_node,
                l.to_node,
                l.length_m,
                l.capacity_vph,
                l.freeflow_time_min,
                l.olympic_lane,
            ]
            for l in (links[k] for k in sorted(links))
        ),
    )


def write_overlay(path: str | Path, overlay: CapacityOverlay) -> None:
    write_rows(
        path,
        ["edge_id", "multiplier"],
        ([e, overlay.entries[e]] for e in sorted(overlay.entries)),
    )
