"""load(export(x)) == x for every table format."""

import pytest

from eventflow.assign import read_link_table, read_od_table, solve_ue, write_link_table, write_od_table
from eventflow.demand import (
    EventSession,
    load_demand,
    load_residences,
    load_sessions,
    load_venues,
    load_zones,
    write_demand,
    write_residences,
    write_sessions,
    write_venues,
    write_zones,
)
from eventflow.netgraph import (
    CapacityOverlay,
    load_links,
    load_nodes,
    load_overlay,
    write_links,
    write_nodes,
    write_overlay,
)
from eventflow.strategy import load_lines, write_lines
from conftest import (
    F1_DEMAND,
    F1_LINES,
    F1_LINKS,
    F1_NODES,
    F1_RESIDENCES,
    F1_VENUE,
    F1_ZONES,
    build_network,
)


def test_nodes_roundtrip(tmp_path):
    nodes = {n.node_id: n for n in F1_NODES}
    write_nodes(tmp_path / "nodes.csv", nodes)
    assert load_nodes(tmp_path / "nodes.csv") == nodes


def test_links_roundtrip(tmp_path):
    links = {l.edge_id: l for l in F1_LINKS}
    write_links(tmp_path / "links.csv", links)
    assert load_links(tmp_path / "links.csv") == links


def test_links_speed_encoding(tmp_path):
    header = "edge_id,from,to,length_m,capacity_vph,freeflow_speed_kmh\n"
    (tmp_path / "links.csv").write_text(header + "e1,a,b,9000,100,60\n", encoding="utf-8")
    links = load_links(tmp_path / "links.csv")
    assert links["e1"].freeflow_time_min == pytest.approx(9.0)


def test_zones_roundtrip(tmp_path):
    write_zones(tmp_path / "zones.csv", F1_ZONES)
    assert load_zones(tmp_path / "zones.csv") == F1_ZONES


def test_demand_roundtrip(tmp_path):
    write_demand(tmp_path / "demand.csv", F1_DEMAND)
    again = load_demand(tmp_path / "demand.csv", 1.0, hour=8)
    assert again.records == F1_DEMAND.records


def test_venues_roundtrip(tmp_path):
    venues = {"v1": F1_VENUE}
    write_venues(tmp_path / "venues.csv", venues)
    assert load_venues(tmp_path / "venues.csv") == venues


def test_sessions_roundtrip(tmp_path):
    sessions = [EventSession("v1", "2016-08-08", 11, 400.0)]
    write_sessions(tmp_path / "sessions.csv", sessions)
    assert load_sessions(tmp_path / "sessions.csv", {"v1": F1_VENUE}) == sessions


def test_residences_roundtrip(tmp_path):
    write_residences(tmp_path / "residences.csv", F1_RESIDENCES)
    assert load_residences(tmp_path / "residences.csv") == F1_RESIDENCES


def test_lines_roundtrip(tmp_path):
    write_lines(tmp_path / "lines.csv", F1_LINES)
    loaded = load_lines(tmp_path / "lines.csv")
    assert loaded == sorted(F1_LINES, key=lambda l: l.line_id)


def test_overlay_roundtrip(tmp_path):
    net = build_network(F1_NODES, F1_LINKS)
    overlay = CapacityOverlay({"a24": 0.5, "a12": 0.75})
    write_overlay(tmp_path / "overlay.csv", overlay)
    assert load_overlay(tmp_path / "overlay.csv", net) == overlay


def test_result_tables_roundtrip(tmp_path):
    net = build_network(F1_NODES, F1_LINKS)
    zones = dict(F1_ZONES)
    result = solve_ue(net, F1_DEMAND, zones)
    write_link_table(tmp_path / "links.csv", result, net)
    write_od_table(tmp_path / "od.csv", result)
    links = read_link_table(tmp_path / "links.csv")
    for e, (volume, time_min, voc) in links.items():
        assert volume == result.link_volumes.get(e, 0.0)
        assert time_min == result.link_times[e]
        assert voc == result.link_volumes.get(e, 0.0) / net.links[e].capacity_vph
    ods = read_od_table(tmp_path / "od.csv")
    for od, (time_min, flow) in ods.items():
        assert time_min == result.od_times[od]


def test_exports_are_byte_stable(tmp_path):
    net = build_network(F1_NODES, F1_LINKS)
    result = solve_ue(net, F1_DEMAND, dict(F1_ZONES))
    write_link_table(tmp_path / "a.csv", result, net)
    write_link_table(tmp_path / "b.csv", result, net)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
