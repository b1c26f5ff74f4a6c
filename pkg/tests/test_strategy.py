"""Mode-change strategy: ranking, benchmarks, reassignment, transit loads."""

import pytest

from eventflow.assign import solve_ue
from eventflow.demand import DemandMatrix, OdRecord, Zone
from eventflow.errors import DomainError
from eventflow.metrics import collective_time
from eventflow.netgraph import Link, Node, bpr_time, marginal_edge_cost
from eventflow.strategy import (
    EligibleOd,
    StrategyPlan,
    TransitLine,
    apply_and_evaluate,
    eligible_ods,
    marginal_path_cost,
    min_time_used_path,
    plan_marginal,
    plan_uniform,
    reduced_demand,
    ridership_deltas,
    transit_route,
)
from conftest import F3_DEMAND, F3_LINES, build_network


@pytest.fixture
def f3_base(f3_network, f3_zones):
    return solve_ue(f3_network, F3_DEMAND, f3_zones)


class TestMarginalPathCost:
    def test_single_empty_link(self, f3_network, f3_zones):
        demand = DemandMatrix(hour=18, records=(OdRecord(18, "o5", "d", 0.001, 0.001, 0.0),))
        res = solve_ue(f3_network, demand, f3_zones)
        # near-zero volume: essentially f_s * t_free = 1.15 * 8
        assert marginal_path_cost(res, ("o5", "d"), f3_network) == pytest.approx(
            9.2, rel=1e-6
        )

    def test_two_links_at_capacity(self):
        net = build_network(
            [Node("a", 0, 0), Node("b", 0, 0.1), Node("c", 0, 0.2)],
            [
                Link("e1", "a", "b", 1000.0, 100.0, 10.0),
                Link("e2", "b", "c", 1000.0, 100.0, 10.0),
            ],
        )
        zones = {"za": Zone("za", 0, 0, "a"), "zc": Zone("zc", 0, 0.2, "c")}
        demand = DemandMatrix(hour=8, records=(OdRecord(8, "za", "zc", 100.0, 100.0, 0.0),))
        res = solve_ue(net, demand, zones)
        # 2 * (13.57 + 1.15*0.18*5*10)
        assert marginal_path_cost(res, ("za", "zc"), net) == pytest.approx(47.84, rel=1e-9)

    def test_additivity_over_path_edges(self, f3_network, f3_zones, f3_base):
        for od in (("o1", "d"), ("o3", "d")):
            path = min_time_used_path(f3_base, od)
            total = sum(
                marginal_edge_cost(
                    f3_network.links[e], f3_base.link_volumes.get(e, 0.0), f3_network.params
                )
                for e in path
            )
            assert marginal_path_cost(f3_base, od, f3_network) == total

    @pytest.mark.parametrize("od", [("o1", "d"), ("o2", "d"), ("o4", "d")])
    def test_matches_one_vehicle_removal(self, f3_network, f3_base, od):
        mc = marginal_path_cost(f3_base, od, f3_network)
        volumes = dict(f3_base.link_volumes)
        for e in min_time_used_path(f3_base, od):
            volumes[e] -= 1.0
        t_after = sum(
            v * bpr_time(f3_network.links[e], v, f3_network.params)
            for e, v in volumes.items()
        )
        delta = collective_time(f3_base) - t_after
        assert mc == pytest.approx(delta, rel=0.02)

    def test_absent_od_rejected(self, f3_base, f3_network):
        with pytest.raises(DomainError):
            marginal_path_cost(f3_base, ("nope", "d"), f3_network)


class TestEligibleOds:
    def test_radius_zero_excludes_everything(self, f3_network, f3_zones, f3_base):
        assert eligible_ods(f3_zones, F3_LINES, f3_base, 0.0, f3_network) == []

    def test_boundary_is_closed(self, f3_network, f3_zones, f3_base):
        # station s1 sits 0.005 deg of longitude from zone o1's centroid
        from eventflow.geo import haversine_km

        d = haversine_km(-22.80, -43.40, -22.80, -43.405)
        eligible = eligible_ods(f3_zones, F3_LINES, f3_base, d, f3_network)
        assert ("o1", "d") in [(e.origin, e.dest) for e in eligible]

    def test_partial_coverage(self, f3_network, f3_zones, f3_base):
        # shrink coverage: keep only stations s1, s2, sd so o3..o5 fall out
        lines = [
            TransitLine(
                "b1",
                "brt",
                (("s1", -22.80, -43.405), ("s2", -22.84, -43.405), ("sd", -22.88, -43.205)),
            )
        ]
        eligible = eligible_ods(f3_zones, lines, f3_base, 2.0, f3_network)
        assert [(e.origin, e.dest) for e in eligible] == [("o1", "d"), ("o2", "d")]

    def test_annotations(self, f3_network, f3_zones, f3_base):
        eligible = eligible_ods(f3_zones, F3_LINES, f3_base, 2.0, f3_network)
        by_od = {(e.origin, e.dest): e for e in eligible}
        assert by_od[("o1", "d")].origin_station == "s1"
        assert by_od[("o1", "d")].dest_station == "sd"
        assert by_od[("o1", "d")].vehicle_flow == pytest.approx(800.0)
        assert by_od[("o1", "d")].marginal_path_cost == pytest.approx(
            marginal_path_cost(f3_base, ("o1", "d"), f3_network)
        )

    def test_requires_lines(self, f3_zones, f3_base, f3_network):
        with pytest.raises(DomainError):
            eligible_ods(f3_zones, [], f3_base, 1.0, f3_network)


class TestPlans:
    def eligible(self, f3_network, f3_zones, f3_base):
        return eligible_ods(f3_zones, F3_LINES, f3_base, 2.0, f3_network)

    def test_topk_clamped_to_eligible(self, f3_network, f3_zones, f3_base):
        eligible = self.eligible(f3_network, f3_zones, f3_base)
        plan = plan_marginal(f3_base, eligible, 99, 0.60)
        assert len(plan.reductions) == len(eligible)

    def test_direct_ranking(self, f3_base):
        eligible = [
            EligibleOd("a", "x", "s1", "s2", 50.0, 100.0),
            EligibleOd("b", "x", "s1", "s2", 20.0, 100.0),
        ]
        plan = plan_marginal(f3_base, eligible, 1, 0.6)
        assert plan.reductions == {("a", "x"): pytest.approx(60.0)}

    def test_tie_breaks_by_od_key(self, f3_base):
        eligible = [
            EligibleOd("b", "x", "s1", "s2", 50.0, 100.0),
            EligibleOd("a", "x", "s1", "s2", 50.0, 100.0),
        ]
        plan = plan_marginal(f3_base, eligible, 1, 0.6)
        assert list(plan.reductions) == [("a", "x")]

    def test_uniform_zero_total(self, f3_base):
        eligible = [EligibleOd("a", "x", "s1", "s2", 50.0, 100.0)]
        plan = plan_uniform(f3_base, eligible, 0.0)
        assert plan.reductions == {}

    def test_uniform_proportional(self, f3_base):
        eligible = [
            EligibleOd("a", "x", "s1", "s2", 50.0, 100.0),
            EligibleOd("b", "x", "s1", "s2", 20.0, 300.0),
        ]
        plan = plan_uniform(f3_base, eligible, 40.0)
        assert plan.reductions[("a", "x")] == pytest.approx(10.0)
        assert plan.reductions[("b", "x")] == pytest.approx(30.0)

    def test_uniform_total_boundary(self, f3_base):
        eligible = [EligibleOd("a", "x", "s1", "s2", 50.0, 100.0)]
        plan = plan_uniform(f3_base, eligible, 100.0)
        assert plan.reductions[("a", "x")] == pytest.approx(100.0)

    def test_uniform_infeasible_total(self, f3_base):
        eligible = [EligibleOd("a", "x", "s1", "s2", 50.0, 100.0)]
        with pytest.raises(DomainError):
            plan_uniform(f3_base, eligible, 150.0)

    def test_mass_balance_between_plans(self, f3_network, f3_zones, f3_base):
        eligible = self.eligible(f3_network, f3_zones, f3_base)
        for top_k in (1, 2, 3):
            marginal = plan_marginal(f3_base, eligible, top_k, 0.60)
            uniform = plan_uniform(f3_base, eligible, marginal.total_reduction())
            assert uniform.total_reduction() == pytest.approx(
                marginal.total_reduction(), rel=1e-9
            )


class TestApplyAndEvaluate:
    def test_empty_reductions_zero_savings(self, f3_network, f3_zones, f3_base):
        plan = StrategyPlan(
            radius_km=2.0, top_k=1, reduction_fraction=0.6, mode="marginal",
            selected=(), reductions={},
        )
        done = apply_and_evaluate(
            f3_network, F3_DEMAND, plan, None, f3_zones, before=f3_base
        )
        assert done.savings.savings_pct == 0.0
        assert done.savings.t_after == done.savings.t_before

    def test_marginal_beats_uniform_on_bottleneck(self, f3_network, f3_zones, f3_base):
        eligible = eligible_ods(f3_zones, F3_LINES, f3_base, 2.0, f3_network)
        for top_k in (1, 2, 3):
            marginal = plan_marginal(f3_base, eligible, top_k, 0.60)
            marginal = apply_and_evaluate(
                f3_network, F3_DEMAND, marginal, None, f3_zones, before=f3_base
            )
            uniform = plan_uniform(f3_base, eligible, marginal.total_reduction())
            uniform = apply_and_evaluate(
                f3_network, F3_DEMAND, uniform, None, f3_zones, before=f3_base
            )
            assert marginal.savings.savings_pct > uniform.savings.savings_pct

    def test_savings_monotone_in_topk(self, f3_network, f3_zones, f3_base):
        eligible = eligible_ods(f3_zones, F3_LINES, f3_base, 2.0, f3_network)
        previous = -1.0
        for top_k in (1, 2, 3, 4, 5):
            plan = plan_marginal(f3_base, eligible, top_k, 0.60)
            plan = apply_and_evaluate(
                f3_network, F3_DEMAND, plan, None, f3_zones, before=f3_base
            )
            assert plan.savings.savings_pct >= previous - 1e-9
            previous = plan.savings.savings_pct

    def test_speeds_reported(self, f3_network, f3_zones, f3_base):
        eligible = eligible_ods(f3_zones, F3_LINES, f3_base, 2.0, f3_network)
        plan = plan_marginal(f3_base, eligible, 1, 0.60)
        plan = apply_and_evaluate(f3_network, F3_DEMAND, plan, None, f3_zones, before=f3_base)
        assert plan.savings.speed_after_kmh > plan.savings.speed_before_kmh
        assert plan.savings.removed_share_pct == pytest.approx(
            plan.total_reduction() / F3_DEMAND.total_vehicles() * 100.0
        )

    def test_reduction_exceeding_flow_rejected(self, f3_network, f3_zones, f3_base):
        with pytest.raises(DomainError):
            reduced_demand(F3_DEMAND, {("o1", "d"): 10000.0})


LINE_ABC = TransitLine(
    "l1", "metro", (("A", 0.0, 0.0), ("B", 0.0, 0.1), ("C", 0.0, 0.2))
)


def plan_with(selected, reductions):
    return StrategyPlan(
        radius_km=2.0, top_k=len(selected), reduction_fraction=0.6,
        mode="marginal", selected=tuple(selected), reductions=reductions,
    )


class TestRidershipDeltas:
    def test_single_line_forward(self):
        plan = plan_with(
            [EligibleOd("za", "zc", "A", "C", 10.0, 200.0)], {("za", "zc"): 100.0}
        )
        deltas, flagged = ridership_deltas(plan, {}, [LINE_ABC], 1.0)
        assert deltas == {
            ("l1", "A", "B"): pytest.approx(100.0),
            ("l1", "B", "C"): pytest.approx(100.0),
        }
        assert flagged == ()

    def test_reverse_od_uses_reverse_segments(self):
        plan = plan_with(
            [EligibleOd("zc", "za", "C", "A", 10.0, 200.0)], {("zc", "za"): 100.0}
        )
        deltas, _ = ridership_deltas(plan, {}, [LINE_ABC], 1.0)
        assert set(deltas) == {("l1", "C", "B"), ("l1", "B", "A")}

    def test_over_capacity_flagged(self):
        plan = plan_with(
            [EligibleOd("za", "zc", "A", "C", 10.0, 60000.0)], {("za", "zc"): 31000.0}
        )
        deltas, flagged = ridership_deltas(plan, {}, [LINE_ABC], 1.0)
        assert ("l1", "A", "B") in flagged
        assert deltas[("l1", "A", "B")] == pytest.approx(31000.0)

    def test_occupancy_multiplier(self):
        plan = plan_with(
            [EligibleOd("za", "zc", "A", "C", 10.0, 200.0)], {("za", "zc"): 100.0}
        )
        deltas, _ = ridership_deltas(plan, {}, [LINE_ABC], 2.0)
        assert deltas[("l1", "A", "B")] == pytest.approx(200.0)

    def test_disconnected_stations_rejected(self):
        other = TransitLine("l2", "brt", (("X", 1.0, 1.0), ("Y", 1.0, 1.1)))
        plan = plan_with(
            [EligibleOd("za", "zx", "A", "X", 10.0, 200.0)], {("za", "zx"): 10.0}
        )
        with pytest.raises(DomainError, match="A->X"):
            ridership_deltas(plan, {}, [LINE_ABC, other], 1.0)

    def test_transfer_at_shared_station(self):
        other = TransitLine("l2", "brt", (("B", 0.0, 0.1), ("X", 0.1, 0.1)))
        route = transit_route([LINE_ABC, other], "A", "X")
        assert route == (("A", "B"), ("B", "X"))

    def test_conservation_of_person_hops(self, f3_zones):
        plan = plan_with(
            [
                EligibleOd("o1", "d", "s1", "sd", 10.0, 200.0),
                EligibleOd("o3", "d", "s3", "sd", 10.0, 200.0),
            ],
            {("o1", "d"): 50.0, ("o3", "d"): 20.0},
        )
        deltas, _ = ridership_deltas(plan, f3_zones, F3_LINES, 1.0)
        hops_o1 = len(transit_route(F3_LINES, "s1", "sd"))
        hops_o3 = len(transit_route(F3_LINES, "s3", "sd"))
        assert sum(deltas.values()) == pytest.approx(50.0 * hops_o1 + 20.0 * hops_o3)
