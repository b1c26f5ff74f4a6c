"""Shared fixtures: three reference networks and a file-bundle builder.

F1: four-node diamond with two OD pairs, an event venue, taxi tourists, and
    a reserved-lane overlay on the top route. Used for equilibrium
    certificates, scenario ordering, and pipeline determinism.
F2: the classic four-node paradox diamond: a cheap crossing link attracts
    all selfish flow while the optimum spreads across the outer routes.
F3: five independent congested approaches into one destination zone, all
    near transit; used for strategy ranking and savings dominance.
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from eventflow.demand import DemandMatrix, OdRecord, Residence, Venue, Zone
from eventflow.netgraph import BprParams, Link, Node, RoadNetwork
from eventflow.strategy import TransitLine


def build_network(nodes, links, params=None) -> RoadNetwork:
    return RoadNetwork(
        nodes={n.node_id: n for n in nodes},
        links={l.edge_id: l for l in links},
        params=params or BprParams(),
    )


# --- F1: diamond with an event -------------------------------------------

F1_NODES = [
    Node("n1", -22.90, -43.30),
    Node("n2", -22.88, -43.20),
    Node("n3", -22.92, -43.20),
    Node("n4", -22.90, -43.10),
]

F1_LINKS = [
    Link("a12", "n1", "n2", 9000.0, 120.0, 6.0),
    Link("a24", "n2", "n4", 9000.0, 240.0, 6.0, olympic_lane=True),
    Link("a13", "n1", "n3", 10000.0, 100.0, 7.0),
    Link("a34", "n3", "n4", 10000.0, 100.0, 7.0),
]

F1_ZONES = {
    "z1": Zone("z1", -22.90, -43.30, "n1"),
    "z2": Zone("z2", -22.88, -43.20, "n2"),
    "z3": Zone("z3", -22.92, -43.20, "n3"),
    "z4": Zone("z4", -22.90, -43.10, "n4"),
}

F1_DEMAND = DemandMatrix(
    hour=8,
    records=(
        OdRecord(8, "z1", "z4", 150.0, 180.0, 120.0),
        OdRecord(8, "z2", "z4", 40.0, 50.0, 30.0),
    ),
)

F1_VENUE = Venue("v1", -22.90, -43.10, 50000.0)

F1_RESIDENCES = {
    "r1": Residence("r1", -22.88, -43.33, 70.0, "airbnb"),
    "r2": Residence("r2", -22.88, -43.32, 30.0, "hotel"),
}

F1_LINES = [
    TransitLine(
        "m1",
        "metro",
        (
            ("st1", -22.906, -43.30),
            ("stm", -22.906, -43.20),
            ("st2", -22.906, -43.10),
        ),
    ),
    TransitLine("b2", "brt", (("st3", -22.885, -43.20), ("st2", -22.906, -43.10))),
]

# Tourist taxi flow arriving in hour 8 from z1 to the venue zone z4:
# 400 attendees, 30% departing 3 hours before an 11:00 session.
F1_ATTENDANCE = 400.0
F1_TOURIST_VEHICLES = 0.30 * F1_ATTENDANCE / 2.0  # 90 taxis


@pytest.fixture
def f1_network() -> RoadNetwork:
    return build_network(F1_NODES, F1_LINKS)


@pytest.fixture
def f1_zones() -> dict[str, Zone]:
    return dict(F1_ZONES)


@pytest.fixture
def f1_demand() -> DemandMatrix:
    return F1_DEMAND


# --- F2: paradox diamond ---------------------------------------------------

F2_NODES = [
    Node("s", -22.90, -43.40),
    Node("a", -22.88, -43.30),
    Node("b", -22.92, -43.30),
    Node("e", -22.90, -43.20),
]

F2_LINKS = [
    Link("sa", "s", "a", 2000.0, 40.0, 2.0),
    Link("ae", "a", "e", 40000.0, 10000.0, 40.0),
    Link("sb", "s", "b", 40000.0, 10000.0, 40.0),
    Link("be", "b", "e", 2000.0, 40.0, 2.0),
    Link("ab", "a", "b", 500.0, 200.0, 0.5),
]

F2_ZONES = {
    "zs": Zone("zs", -22.90, -43.40, "s"),
    "ze": Zone("ze", -22.90, -43.20, "e"),
}

F2_DEMAND = DemandMatrix(
    hour=8, records=(OdRecord(8, "zs", "ze", 100.0, 100.0, 80.0),)
)

F2_PATHS = {
    "upper": ("sa", "ae"),
    "lower": ("sb", "be"),
    "cross": ("sa", "ab", "be"),
}


@pytest.fixture
def f2_network() -> RoadNetwork:
    return build_network(F2_NODES, F2_LINKS)


@pytest.fixture
def f2_zones() -> dict[str, Zone]:
    return dict(F2_ZONES)


@pytest.fixture
def f2_demand() -> DemandMatrix:
    return F2_DEMAND


# --- F3: bottleneck star ----------------------------------------------------

F3_ORIGIN_SPECS = [
    # (zone, node, link, flow, capacity, freeflow_min)
    ("o1", "m1", "l1", 800.0, 400.0, 4.0),
    ("o2", "m2", "l2", 500.0, 400.0, 5.0),
    ("o3", "m3", "l3", 300.0, 400.0, 6.0),
    ("o4", "m4", "l4", 200.0, 400.0, 7.0),
    ("o5", "m5", "l5", 100.0, 400.0, 8.0),
]

F3_NODES = [
    Node("m1", -22.80, -43.40),
    Node("m2", -22.84, -43.40),
    Node("m3", -22.88, -43.40),
    Node("m4", -22.92, -43.40),
    Node("m5", -22.96, -43.40),
    Node("md", -22.88, -43.20),
]

F3_LINKS = [
    Link(link_id, node, "md", 12000.0, cap, ff)
    for (_, node, link_id, _, cap, ff) in F3_ORIGIN_SPECS
]

F3_ZONES = {
    zone: Zone(zone, lat, -43.40, node)
    for (zone, node, *_), lat in zip(
        F3_ORIGIN_SPECS, (-22.80, -22.84, -22.88, -22.92, -22.96)
    )
}
F3_ZONES["d"] = Zone("d", -22.88, -43.20, "md")

F3_DEMAND = DemandMatrix(
    hour=18,
    records=tuple(
        OdRecord(18, zone, "d", flow, flow * 1.2, flow)
        for (zone, _, _, flow, _, _) in F3_ORIGIN_SPECS
    ),
)

F3_LINES = [
    TransitLine(
        "b1",
        "brt",
        (
            ("s1", -22.80, -43.405),
            ("s2", -22.84, -43.405),
            ("s3", -22.88, -43.405),
            ("s4", -22.92, -43.405),
            ("s5", -22.96, -43.405),
            ("sd", -22.88, -43.205),
        ),
    )
]


@pytest.fixture
def f3_network() -> RoadNetwork:
    return build_network(F3_NODES, F3_LINKS)


@pytest.fixture
def f3_zones() -> dict[str, Zone]:
    return dict(F3_ZONES)


@pytest.fixture
def f3_demand() -> DemandMatrix:
    return F3_DEMAND


@pytest.fixture
def f3_lines() -> list[TransitLine]:
    return list(F3_LINES)


# --- file bundle -------------------------------------------------------------


def write_f1_bundle(root: Path, **config_overrides) -> Path:
    """Write the F1 fixture as a loadable dataset bundle plus config.json."""
    from eventflow.demand import (
        write_demand,
        write_residences,
        write_sessions,
        write_venues,
        write_zones,
    )
    from eventflow.demand import EventSession
    from eventflow.netgraph import write_links, write_nodes
    from eventflow.strategy import write_lines

    root.mkdir(parents=True, exist_ok=True)
    write_nodes(root / "nodes.csv", {n.node_id: n for n in F1_NODES})
    write_links(root / "links.csv", {l.edge_id: l for l in F1_LINKS})
    write_zones(root / "zones.csv", F1_ZONES)
    write_demand(root / "demand.csv", F1_DEMAND)
    write_venues(root / "venues.csv", {F1_VENUE.venue_id: F1_VENUE})
    write_sessions(
        root / "sessions.csv",
        [EventSession("v1", "2016-08-08", 11, F1_ATTENDANCE)],
    )
    write_residences(root / "residences.csv", F1_RESIDENCES)
    write_lines(root / "lines.csv", F1_LINES)
    config = {
        "nodes_path": "nodes.csv",
        "links_path": "links.csv",
        "zones_path": "zones.csv",
        "demand_path": "demand.csv",
        "venues_path": "venues.csv",
        "sessions_path": "sessions.csv",
        "residences_path": "residences.csv",
        "lines_path": "lines.csv",
        "event_date": "2016-08-08",
        "hour": 8,
        "scenario": "selfish",
        "out_dir": "runs",
    }
    config.update(config_overrides)
    (root / "config.json").write_text(json.dumps(config, indent=1), encoding="utf-8")
    return root / "config.json"


@pytest.fixture
def f1_bundle(tmp_path) -> Path:
    return write_f1_bundle(tmp_path / "f1")
