"""Static traffic assignment under the behavioral scenarios.

The equilibrium solver is link-based Frank-Wolfe: repeat all-or-nothing
subproblems under current costs, move along the convex combination found by
an exact bisection line search, and stop once the relative gap

    (sum_e v_e c_e - sum_od demand_od * shortest_cost_od) / sum_e v_e c_e

drops below tolerance. Selfish user equilibrium descends on the integral of
link time; system optimum runs the same iteration on marginal edge costs,
which descends on total vehicle-minutes.

The habit scenario performs no equilibration: pre-event route flows are
frozen, event trips are routed at pre-event times, and link times are
recomputed once at the summed volumes. The mixed scenario holds the
(1 - lambda) share of habit volumes as a fixed preload and equilibrates the
lambda share on top of it.
"""

from __future__ import annotations

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .demand import DemandMatrix, Zone
from .errors import DomainError, NoPathError
from .netgraph import RoadNetwork, bpr_integral, bpr_time, marginal_edge_cost, single_source_paths
from .tables import parse_float, read_rows, write_rows

OdKey = tuple[str, str]
PathKey = tuple[str, ...]
ProgressFn = Callable[[int, float, float], None]

_PRUNE_REL = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 200
    relative_gap_tol: float = 1e-4
    line_search_tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.max_iterations <= 0 or self.relative_gap_tol <= 0 or self.line_search_tol <= 0:
            raise DomainError("solver settings must be positive")


@dataclass(frozen=True)
class PathFlow:
    origin: str
    dest: str
    path: PathKey
    flow: float


@dataclass(frozen=True)
class AssignmentResult:
    scenario: str
    link_volumes: dict[str, float]
    link_times: dict[str, float]
    path_flows: tuple[PathFlow, ...]
    od_times: dict[OdKey, float]
    relative_gap: float | None
    iterations: int
    converged: bool
    lam: float | None = None


def demand_pairs(demand: DemandMatrix) -> dict[OdKey, float]:
    """Vehicle flow per OD pair, skipping zero-flow records."""
    return {
        (r.origin, r.dest): r.vehicle_flow for r in demand.records if r.vehicle_flow > 0.0
    }


def _attach(zones: dict[str, Zone], zone_id: str) -> str:
    zone = zones.get(zone_id)
    if zone is None:
        raise DomainError(f"unknown zone {zone_id}")
    return zone.attach_node


def _aon_paths(
    network: RoadNetwork,
    costs: dict[str, float],
    od_demands: dict[OdKey, float],
    zones: dict[str, Zone],
    workers: int,
) -> tuple[dict[OdKey, PathKey], dict[OdKey, float]]:
    """Shortest path and its cost for every demanded OD under fixed costs."""
    by_origin: dict[str, set[str]] = {}
    for origin, dest in od_demands:
        by_origin.setdefault(_attach(zones, origin), set()).add(_attach(zones, dest))
    origins = sorted(by_origin)

    def solve_origin(origin_node: str) -> dict[str, tuple[PathKey, float]]:
        return single_source_paths(
            network, costs, origin_node, by_origin[origin_node], validate=False
        )

    if workers > 1 and len(origins) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            solved = dict(zip(origins, pool.map(solve_origin, origins)))
    else:
        solved = {o: solve_origin(o) for o in origins}

    paths: dict[OdKey, PathKey] = {}
    sp_costs: dict[OdKey, float] = {}
    missing: list[OdKey] = []
    for od in sorted(od_demands):
        origin_node = _attach(zones, od[0])
        dest_node = _attach(zones, od[1])
        hit = solved[origin_node].get(dest_node)
        if hit is None:
            missing.append(od)
            continue
        paths[od], sp_costs[od] = hit
    if missing:
        raise NoPathError(missing)
    return paths, sp_costs


def _aggregate(path_flows: dict[OdKey, dict[PathKey, float]]) -> dict[str, float]:
    """Link volumes as the incidence sum of path flows, in deterministic order."""
    volumes: dict[str, float] = {}
    for od in sorted(path_flows):
        for path in sorted(path_flows[od]):
            flow = path_flows[od][path]
            for edge_id in path:
                volumes[edge_id] = volumes.get(edge_id, 0.0) + flow
    return volumes


def _flatten(path_flows: dict[OdKey, dict[PathKey, float]]) -> tuple[PathFlow, ...]:
    out = []
    for od in sorted(path_flows):
        for path in sorted(path_flows[od]):
            flow = path_flows[od][path]
            if flow > 0.0:
                out.append(PathFlow(origin=od[0], dest=od[1], path=path, flow=flow))
    return tuple(out)


def _link_times(network: RoadNetwork, volumes: dict[str, float]) -> dict[str, float]:
    return {
        edge_id: bpr_time(link, volumes.get(edge_id, 0.0), network.params)
        for edge_id, link in sorted(network.links.items())
    }


def _weighted_od_times(
    path_flows: dict[OdKey, dict[PathKey, float]], times: dict[str, float]
) -> dict[OdKey, float]:
    """Flow-weighted mean path time per OD at the given link times."""
    out: dict[OdKey, float] = {}
    for od in sorted(path_flows):
        total_flow = 0.0
        total_time = 0.0
        for path, flow in sorted(path_flows[od].items()):
            if flow <= 0.0:
                continue
            total_flow += flow
            total_time += flow * sum(times[e] for e in path)
        out[od] = total_time / total_flow if total_flow > 0.0 else 0.0
    return out


def all_or_nothing(
    network: RoadNetwork,
    costs: dict[str, float],
    demand: DemandMatrix,
    zones: dict[str, Zone],
    workers: int = 1,
) -> AssignmentResult:
    """Each OD's entire flow on its shortest path under the given fixed costs.

    od_times report the path costs under the provided cost map; link_times
    are re-evaluated from the resulting volumes.
    """
    od_demands = demand_pairs(demand)
    paths, sp_costs = _aon_paths(network, costs, od_demands, zones, 1 if workers < 1 else workers)
    flows = {od: {paths[od]: od_demands[od]} for od in sorted(od_demands)}
    volumes = _aggregate(flows)
    return AssignmentResult(
        scenario="aon",
        link_volumes=volumes,
        link_times=_link_times(network, volumes),
        path_flows=_flatten(flows),
        od_times=dict(sorted(sp_costs.items())),
        relative_gap=None,
        iterations=0,
        converged=True,
    )


def _line_search(
    network: RoadNetwork,
    cost_of: Callable[..., float],
    x: dict[str, float],
    y: dict[str, float],
    tol: float,
) -> float:
    """Bisection for the step that zeroes the directional objective derivative."""
    edges = sorted(set(x) | set(y))
    direction = {e: y.get(e, 0.0) - x.get(e, 0.0) for e in edges}

    def derivative(theta: float) -> float:
        total = 0.0
        for e in edges:
            d = direction[e]
            if d == 0.0:
                continue
            volume = (1.0 - theta) * x.get(e, 0.0) + theta * y.get(e, 0.0)
            total += d * cost_of(network.links[e], volume, network.params)
        return total

    if derivative(0.0) >= 0.0:
        return 0.0
    if derivative(1.0) <= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if derivative(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _frank_wolfe(
    network: RoadNetwork,
    od_demands: dict[OdKey, float],
    zones: dict[str, Zone],
    config: SolverConfig,
    *,
    marginal: bool,
    preload: dict[str, float] | None,
    workers: int,
    progress: ProgressFn | None,
) -> tuple[dict[OdKey, dict[PathKey, float]], dict[OdKey, float], float, int, bool]:
    """Core convex-combination loop shared by the equilibrium solvers.

    Returns (path flows, shortest OD times at final volumes, relative gap,
    iterations, converged). ``preload`` holds fixed background volumes that
    shift the cost evaluation but carry no flow of their own.
    """
    if not od_demands:
        raise DomainError("equilibrium solve requires non-empty demand")
    cost_of = marginal_edge_cost if marginal else bpr_time
    base = preload or {}

    def edge_cost(edge_id: str, flow: float) -> float:
        return cost_of(network.links[edge_id], base.get(edge_id, 0.0) + flow, network.params)

    def cost_map(volumes: dict[str, float]) -> dict[str, float]:
        return {e: edge_cost(e, volumes.get(e, 0.0)) for e in sorted(network.links)}

    def objective(volumes: dict[str, float]) -> float:
        if marginal:
            return sum(
                v * bpr_time(network.links[e], v, network.params)
                for e, v in sorted(volumes.items())
            )
        return sum(
            bpr_integral(network.links[e], base.get(e, 0.0) + volumes.get(e, 0.0), network.params)
            for e in sorted(network.links)
        )

    def shifted_cost(link, volume: float, params) -> float:
        return cost_of(link, base.get(link.edge_id, 0.0) + volume, params)

    paths0, _ = _aon_paths(network, cost_map({}), od_demands, zones, workers)
    path_flows: dict[OdKey, dict[PathKey, float]] = {
        od: {paths0[od]: od_demands[od]} for od in sorted(od_demands)
    }
    x = _aggregate(path_flows)

    gap = float("inf")
    sp_costs: dict[OdKey, float] = {}
    converged = False
    iterations = 0
    for iteration in range(config.max_iterations + 1):
        costs = cost_map(x)
        aon_paths, sp_costs = _aon_paths(network, costs, od_demands, zones, workers)
        total = sum(x.get(e, 0.0) * costs[e] for e in sorted(costs))
        best = sum(od_demands[od] * sp_costs[od] for od in sorted(od_demands))
        gap = (total - best) / total if total > 0.0 else 0.0
        iterations = iteration
        if progress is not None:
            progress(iteration, gap, objective(x))
        if gap <= config.relative_gap_tol:
            converged = True
            break
        if iteration == config.max_iterations:
            break
        y = _aggregate({od: {aon_paths[od]: od_demands[od]} for od in sorted(od_demands)})
        theta = _line_search(network, shifted_cost, x, y, config.line_search_tol)
        if theta <= 0.0:
            converged = gap <= config.relative_gap_tol
            break
        for od in sorted(od_demands):
            flows = path_flows[od]
            for path in list(flows):
                flows[path] *= 1.0 - theta
            new_path = aon_paths[od]
            flows[new_path] = flows.get(new_path, 0.0) + theta * od_demands[od]
            floor = _PRUNE_REL * od_demands[od]
            for path in [p for p, f in flows.items() if f < floor]:
                del flows[path]
        x = {
            e: (1.0 - theta) * x.get(e, 0.0) + theta * y.get(e, 0.0)
            for e in sorted(set(x) | set(y))
        }
    return path_flows, sp_costs, gap, iterations, converged


def solve_ue(
    network: RoadNetwork,
    demand: DemandMatrix,
    zones: dict[str, Zone],
    config: SolverConfig | None = None,
    workers: int = 1,
    progress: ProgressFn | None = None,
    *,
    scenario: str = "selfish",
    preload: dict[str, float] | None = None,
) -> AssignmentResult:
    """Selfish user equilibrium: no driver can improve by switching routes."""
    config = config or SolverConfig()
    path_flows, sp_costs, gap, iterations, converged = _frank_wolfe(
        network,
        demand_pairs(demand),
        zones,
        config,
        marginal=False,
        preload=preload,
        workers=workers,
        progress=progress,
    )
    volumes = _aggregate(path_flows)
    if preload:
        for e in sorted(preload):
            volumes[e] = volumes.get(e, 0.0) + preload[e]
    return AssignmentResult(
        scenario=scenario,
        link_volumes=volumes,
        link_times=_link_times(network, volumes),
        path_flows=_flatten(path_flows),
        od_times=dict(sorted(sp_costs.items())),
        relative_gap=gap,
        iterations=iterations,
        converged=converged,
    )


def solve_so(
    network: RoadNetwork,
    demand: DemandMatrix,
    zones: dict[str, Zone],
    config: SolverConfig | None = None,
    workers: int = 1,
    progress: ProgressFn | None = None,
) -> AssignmentResult:
    """System optimum: equilibrium of marginal costs, minimizing total time.

    od_times are flow-weighted means over used paths, since drivers at the
    optimum do not share a common travel time per OD.
    """
    config = config or SolverConfig()
    path_flows, _, gap, iterations, converged = _frank_wolfe(
        network,
        demand_pairs(demand),
        zones,
        config,
        marginal=True,
        preload=None,
        workers=workers,
        progress=progress,
    )
    volumes = _aggregate(path_flows)
    times = _link_times(network, volumes)
    return AssignmentResult(
        scenario="altruism",
        link_volumes=volumes,
        link_times=times,
        path_flows=_flatten(path_flows),
        od_times=_weighted_od_times(path_flows, times),
        relative_gap=gap,
        iterations=iterations,
        converged=converged,
    )


def solve_habit(
    network_event: RoadNetwork,
    baseline: AssignmentResult,
    delta: DemandMatrix,
    baseline_costs: dict[str, float],
    zones: dict[str, Zone],
    workers: int = 1,
) -> AssignmentResult:
    """Frozen pre-event routes with volumes and times updated once.

    Event trips are routed on shortest paths at pre-event travel times;
    everyone else keeps their route. Link times are re-evaluated at the
    summed volumes under the event network's capacities.
    """
    path_flows: dict[OdKey, dict[PathKey, float]] = {}
    for pf in baseline.path_flows:
        path_flows.setdefault((pf.origin, pf.dest), {})[pf.path] = pf.flow
    delta_pairs = demand_pairs(delta)
    if delta_pairs:
        routed, _ = _aon_paths(network_event, baseline_costs, delta_pairs, zones, workers)
        for od in sorted(delta_pairs):
            flows = path_flows.setdefault(od, {})
            flows[routed[od]] = flows.get(routed[od], 0.0) + delta_pairs[od]
    volumes = _aggregate(path_flows)
    times = _link_times(network_event, volumes)
    return AssignmentResult(
        scenario="habit",
        link_volumes=volumes,
        link_times=times,
        path_flows=_flatten(path_flows),
        od_times=_weighted_od_times(path_flows, times),
        relative_gap=None,
        iterations=0,
        converged=True,
    )


def solve_mixed(
    network_event: RoadNetwork,
    habit: AssignmentResult,
    demand: DemandMatrix,
    lam: float,
    zones: dict[str, Zone],
    config: SolverConfig | None = None,
    workers: int = 1,
    progress: ProgressFn | None = None,
) -> AssignmentResult:
    """A lambda share of every OD re-equilibrates over the habit background.

    Per-link volume is habit volume scaled by (1 - lambda) plus the selfish
    share's equilibrium flow; each OD's time composes the habit and selfish
    parts with the same weights.
    """
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda {lam} outside [0, 1]")
    config = config or SolverConfig()
    if lam == 0.0:
        return AssignmentResult(
            scenario="mixed",
            link_volumes=habit.link_volumes,
            link_times=habit.link_times,
            path_flows=habit.path_flows,
            od_times=habit.od_times,
            relative_gap=None,
            iterations=0,
            converged=True,
            lam=0.0,
        )
    preload = {e: v * (1.0 - lam) for e, v in sorted(habit.link_volumes.items())}
    selfish_demand = {od: lam * d for od, d in demand_pairs(demand).items() if lam * d > 0.0}
    selfish_flows, sp_costs, gap, iterations, converged = _frank_wolfe(
        network_event,
        selfish_demand,
        zones,
        config,
        marginal=False,
        preload=preload,
        workers=workers,
        progress=progress,
    )
    path_flows: dict[OdKey, dict[PathKey, float]] = {}
    for pf in habit.path_flows:
        scaled = pf.flow * (1.0 - lam)
        if scaled > 0.0:
            path_flows.setdefault((pf.origin, pf.dest), {})[pf.path] = scaled
    for od in sorted(selfish_flows):
        flows = path_flows.setdefault(od, {})
        for path, flow in sorted(selfish_flows[od].items()):
            if flow > 0.0:
                flows[path] = flows.get(path, 0.0) + flow
    volumes = _aggregate(path_flows)
    od_times: dict[OdKey, float] = {}
    for od in sorted(sp_costs):
        habit_time = habit.od_times.get(od)
        if habit_time is None:
            raise DomainError(f"habit result missing OD {od[0]}->{od[1]}")
        od_times[od] = (1.0 - lam) * habit_time + lam * sp_costs[od]
    return AssignmentResult(
        scenario="mixed",
        link_volumes=volumes,
        link_times=_link_times(network_event, volumes),
        path_flows=_flatten(path_flows),
        od_times=od_times,
        relative_gap=gap,
        iterations=iterations,
        converged=converged,
        lam=lam,
    )


def write_link_table(path: str | Path, result: AssignmentResult, network: RoadNetwork) -> None:
    write_rows(
        path,
        ["edge_id", "volume", "time_min", "voc"],
        (
            [
                e,
                result.link_volumes.get(e, 0.0),
                result.link_times[e],
                result.link_volumes.get(e, 0.0) / network.links[e].capacity_vph,
            ]
            for e in sorted(network.links)
        ),
    )


def write_od_table(path: str | Path, result: AssignmentResult) -> None:
    flows: dict[OdKey, float] = {}
    for pf in result.path_flows:
        key = (pf.origin, pf.dest)
        flows[key] = flows.get(key, 0.0) + pf.flow
    write_rows(
        path,
        ["origin", "dest", "time_min", "flow"],
        (
            [od[0], od[1], result.od_times[od], flows.get(od, 0.0)]
            for od in sorted(result.od_times)
        ),
    )


def read_od_table(path: str | Path) -> dict[OdKey, tuple[float, float]]:
    """OD table rows as (time_min, flow) keyed by (origin, dest)."""
    out: dict[OdKey, tuple[float, float]] = {}
    for lineno, row in read_rows(path, ["origin", "dest", "time_min", "flow"]):
        out[(row["origin"], row["dest"])] = (
            parse_float(str(path), lineno, "time_min", row["time_min"]),
            parse_float(str(path), lineno, "flow", row["flow"]),
        )
    return out


def read_link_table(path: str | Path) -> dict[str, tuple[float, float, float]]:
    """Link table rows as (volume, time_min, voc) keyed by edge_id."""
    out: dict[str, tuple[float, float, float]] = {}
    for lineno, row in read_rows(path, ["edge_id", "volume", "time_min", "voc"]):
        out[row["edge_id"]] = (
            parse_float(str(path), lineno, "volume", row["volume"]),
            parse_float(str(path), lineno, "time_min", row["time_min"]),
            parse_float(str(path), lineno, "voc", row["voc"]),
        )
    return out
