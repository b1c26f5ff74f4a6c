"""Independent oracles the solver tests check against.

Everything here deliberately avoids the library's assignment code paths:
simple-path enumeration, scalar root finding, and brute-force grid search
over path-flow simplices.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from eventflow.netgraph import RoadNetwork


def enumerate_simple_paths(network: RoadNetwork, origin: str, dest: str):
    """All simple paths origin -> dest as edge-id tuples, by DFS."""
    out: list[tuple[str, ...]] = []

    def walk(node: str, visited: set[str], edges: tuple[str, ...]):
        if node == dest:
            out.append(edges)
            return
        for link in network.outgoing[node]:
            if link.to_node in visited:
                continue
            walk(link.to_node, visited | {link.to_node}, edges + (link.edge_id,))

    walk(origin, {origin}, ())
    return out


def brute_force_shortest(network: RoadNetwork, costs: dict[str, float], origin: str, dest: str):
    """Minimal-cost simple path by exhaustive enumeration; lexicographic ties."""
    paths = enumerate_simple_paths(network, origin, dest)
    if not paths:
        return None
    return min(paths, key=lambda p: (sum(costs[e] for e in p), p))


def bpr(t_free: float, capacity: float, v, f_s=1.15, alpha=0.18, beta=5.0):
    return f_s * (1.0 + alpha * (v / capacity) ** beta) * t_free


def two_link_ue_split(
    demand: float, t1: float, c1: float, t2: float, c2: float
) -> tuple[float, float]:
    """Equilibrium volumes on two parallel links by scalar root finding."""

    def diff(v1: float) -> float:
        return bpr(t1, c1, v1) - bpr(t2, c2, demand - v1)

    if diff(demand) <= 0.0:  # link 1 still faster with all flow
        return demand, 0.0
    if diff(0.0) >= 0.0:
        return 0.0, demand
    v1 = brentq(diff, 0.0, demand, xtol=1e-12)
    return v1, demand - v1


def braess_grid_search(network: RoadNetwork, paths: dict[str, tuple[str, ...]],
                       demand: float, objective: str, step: float = 0.1):
    """Brute-force minimum over the 3-path flow simplex at a fixed grid step.

    objective: "beckmann" (user-equilibrium potential) or "total" (vehicle-
    minutes). Returns ({path_name: flow}, objective_value).
    """
    names = sorted(paths)
    assert len(names) == 3
    p = network.params

    def link_terms(volumes: dict[str, np.ndarray]) -> np.ndarray:
        total = 0.0
        for edge_id, v in volumes.items():
            link = network.links[edge_id]
            ratio = v / link.capacity_vph
            if objective == "beckmann":
                total = total + p.f_s * link.freeflow_time_min * (
                    v + p.alpha * v * ratio**p.beta / (p.beta + 1.0)
                )
            else:
                total = total + v * (
                    p.f_s * (1.0 + p.alpha * ratio**p.beta) * link.freeflow_time_min
                )
        return total

    n = int(round(demand / step))
    axis = np.arange(0, n + 1) * step
    f_a, f_b = np.meshgrid(axis, axis, indexing="ij")
    feasible = f_a + f_b <= demand + 1e-9
    f_c = np.where(feasible, demand - f_a - f_b, 0.0)
    volumes: dict[str, np.ndarray] = {}
    for name, flow in zip(names, (f_a, f_b, f_c)):
        for edge_id in paths[name]:
            volumes[edge_id] = volumes.get(edge_id, 0.0) + flow
    values = np.where(feasible, link_terms(volumes), np.inf)
    idx = np.unravel_index(np.argmin(values), values.shape)
    flows = {names[0]: float(f_a[idx]), names[1]: float(f_b[idx]), names[2]: float(f_c[idx])}
    return flows, float(values[idx])


def central_difference(fn, x: float, h: float) -> float:
    return (fn(x + h) - fn(x - h)) / (2.0 * h)
