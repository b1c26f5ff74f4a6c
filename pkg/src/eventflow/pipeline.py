"""End-to-end scenario runs: load, assign, measure, plan, persist, export.

A run directory is keyed by the config content hash, so re-running the same
configuration reuses persisted stage artifacts unless forced. Every artifact
is written deterministically (sorted keys, repr floats, no timestamps):
identical configs produce byte-identical exports regardless of worker count.
"""

from __future__ import annotations

import json
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .assign import (
    AssignmentResult,
    PathFlow,
    SolverConfig,
    solve_habit,
    solve_mixed,
    solve_so,
    solve_ue,
    write_link_table,
    write_od_table,
)
from .config import ScenarioConfig, validate
from .demand import (
    DemandMatrix,
    OdRecord,
    TravelMode,
    assign_origins,
    combine,
    load_demand,
    load_residences,
    load_sessions,
    load_venues,
    load_zones,
    mode_split,
    spectators_per_hour,
    tourist_vehicle_demand,
    write_demand,
)
from .errors import EventflowError, ValidationFailure
from .metrics import impact_report
from .netgraph import (
    BprParams,
    CapacityOverlay,
    apply_overlay,
    load_network,
    load_overlay,
)
from .strategy import (
    apply_and_evaluate,
    eligible_ods,
    load_lines,
    plan_marginal,
    plan_uniform,
    ridership_deltas,
    station_coords,
    write_plan_tables,
)
from .tables import write_rows

ProgressFn = Callable[[str, int], None]

STAGES = ("validate", "baseline", "event_demand", "assign", "metrics", "sweep", "strategy")


class PipelineError(EventflowError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


@dataclass
class RunContext:
    config: ScenarioConfig
    run_dir: Path
    network: "object" = None
    network_event: "object" = None
    zones: dict = None
    base_demand: DemandMatrix = None
    event_demand: DemandMatrix = None
    event_additions: DemandMatrix = None
    tourist_ods: set = None
    lines: list = None
    results: dict[str, AssignmentResult] = None


def result_to_dict(result: AssignmentResult) -> dict:
    return {
        "scenario": result.scenario,
        "lam": result.lam,
        "relative_gap": result.relative_gap,
        "iterations": result.iterations,
        "converged": result.converged,
        "link_volumes": dict(sorted(result.link_volumes.items())),
        "link_times": dict(sorted(result.link_times.items())),
        "od_times": {f"{o}|{d}": t for (o, d), t in sorted(result.od_times.items())},
        "path_flows": [
            {"origin": pf.origin, "dest": pf.dest, "path": list(pf.path), "flow": pf.flow}
            for pf in result.path_flows
        ],
    }


def result_from_dict(raw: dict) -> AssignmentResult:
    od_times = {}
    for key, value in raw["od_times"].items():
        origin, dest = key.split("|", 1)
        od_times[(origin, dest)] = value
    return AssignmentResult(
        scenario=raw["scenario"],
        lam=raw.get("lam"),
        relative_gap=raw.get("relative_gap"),
        iterations=raw["iterations"],
        converged=raw["converged"],
        link_volumes=dict(raw["link_volumes"]),
        link_times=dict(raw["link_times"]),
        od_times=od_times,
        path_flows=tuple(
            PathFlow(
                origin=p["origin"], dest=p["dest"], path=tuple(p["path"]), flow=p["flow"]
            )
            for p in raw["path_flows"]
        ),
    )


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(payload, sort_keys=True, indent=1, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def _read_json(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


def save_result(run_dir: Path, label: str, result: AssignmentResult) -> None:
    _write_json(run_dir / "results" / f"{label}.json", result_to_dict(result))


def load_result(run_dir: Path, label: str) -> AssignmentResult:
    return result_from_dict(_read_json(run_dir / "results" / f"{label}.json"))


def has_result(run_dir: Path, label: str) -> bool:
    return (run_dir / "results" / f"{label}.json").exists()


def _scenario_network(ctx: RunContext):
    if ctx.network_event is not None:
        return ctx.network_event
    overlay_entries: dict[str, float] = {
        e: 0.5 for e in ctx.network.olympic_lane_edges()
    }
    if ctx.config.overlay_path is not None:
        file_overlay = load_overlay(ctx.config.overlay_path, ctx.network)
        overlay_entries.update(file_overlay.entries)
    ctx.network_event = apply_overlay(ctx.network, CapacityOverlay(overlay_entries))
    return ctx.network_event


def _load_stage(ctx: RunContext) -> None:
    cfg = ctx.config
    ctx.network = load_network(cfg.nodes_path, cfg.links_path, cfg.bpr)
    ctx.zones = load_zones(cfg.zones_path)
    ctx.base_demand = load_demand(cfg.demand_path, cfg.day_scale, cfg.hour)
    ctx.lines = load_lines(cfg.lines_path) if cfg.lines_path else []
    ctx.results = {}


def _baseline_stage(ctx: RunContext, force: bool, progress: ProgressFn | None) -> None:
    if not force and has_result(ctx.run_dir, "baseline"):
        ctx.results["baseline"] = load_result(ctx.run_dir, "baseline")
        return
    callback = None
    if progress is not None:
        callback = lambda it, gap, obj: progress("baseline", it)
    result = solve_ue(
        ctx.network,
        ctx.base_demand,
        ctx.zones,
        ctx.config.solver,
        workers=ctx.config.workers,
        progress=callback,
        scenario="baseline",
    )
    ctx.results["baseline"] = result
    save_result(ctx.run_dir, "baseline", result)


def _event_demand_stage(ctx: RunContext, force: bool) -> None:
    cfg = ctx.config
    additions_path = ctx.run_dir / "demand" / "event_additions.csv"
    combined_path = ctx.run_dir / "demand" / "combined.csv"
    meta_path = ctx.run_dir / "demand" / "event_meta.json"
    if not force and combined_path.exists() and additions_path.exists() and meta_path.exists():
        ctx.event_demand = load_demand(combined_path, 1.0, cfg.hour)
        ctx.event_additions = load_demand(additions_path, 1.0, cfg.hour)
        meta = _read_json(meta_path)
        ctx.tourist_ods = {tuple(od.split("|", 1)) for od in meta["tourist_ods"]}
        return
    if not (cfg.venues_path and cfg.sessions_path and cfg.residences_path):
        ctx.event_demand = ctx.base_demand
        ctx.event_additions = DemandMatrix(hour=cfg.hour, records=())
        ctx.tourist_ods = set()
        write_demand(combined_path, ctx.event_demand)
        write_demand(additions_path, ctx.event_additions)
        _write_json(
            meta_path,
            {"tourist_ods": [], "transit_persons": {}, "clamped_departures": 0, "warnings": 0},
        )
        return
    venues = load_venues(cfg.venues_path)
    residences = load_residences(cfg.residences_path)
    sessions = load_sessions(cfg.sessions_path, venues)
    if cfg.event_date is not None:
        sessions = [s for s in sessions if s.date == cfg.event_date]
    departures, clamped = spectators_per_hour(sessions, cfg.departure_split)
    stations = station_coords(ctx.lines) if ctx.lines else {}
    residence_list = [residences[k] for k in sorted(residences)]
    additions: list[OdRecord] = []
    transit_persons: dict[tuple[str, str], float] = {}
    warnings = 0
    for hour, venue_id in sorted(departures):
        if hour != cfg.hour:
            continue
        persons = departures[(hour, venue_id)]
        if persons <= 0.0:
            continue
        venue = venues[venue_id]
        by_residence = assign_origins(persons, residence_list)
        modes = {}
        for residence_id in sorted(by_residence):
            res = residences[residence_id]
            if stations:
                modes[residence_id] = mode_split(
                    (res.lat, res.lon), (venue.lat, venue.lon), stations, cfg.mode_split
                )
            else:
                modes[residence_id] = TravelMode.TAXI
        tourist = tourist_vehicle_demand(
            cfg.hour, venue, by_residence, modes, residences, ctx.zones, cfg.mode_split
        )
        additions.extend(tourist.taxi_records)
        warnings += tourist.warnings
        for od, flow in tourist.transit_persons.items():
            transit_persons[od] = transit_persons.get(od, 0.0) + flow
    merged: dict[tuple[str, str], OdRecord] = {}
    for rec in additions:
        key = (rec.origin, rec.dest)
        if key in merged:
            old = merged[key]
            merged[key] = OdRecord(
                hour=rec.hour,
                origin=rec.origin,
                dest=rec.dest,
                vehicle_flow=old.vehicle_flow + rec.vehicle_flow,
                person_flow=old.person_flow + rec.person_flow,
                commuter_persons=0.0,
            )
        else:
            merged[key] = rec
    addition_records = tuple(merged[k] for k in sorted(merged))
    ctx.event_demand = combine(ctx.base_demand, addition_records)
    ctx.event_additions = DemandMatrix(hour=cfg.hour, records=addition_records, day_scale=1.0)
    ctx.tourist_ods = {(r.origin, r.dest) for r in addition_records}
    write_demand(additions_path, ctx.event_additions)
    write_demand(combined_path, ctx.event_demand)
    _write_json(
        meta_path,
        {
            "tourist_ods": sorted(f"{o}|{d}" for o, d in ctx.tourist_ods),
            "transit_persons": {f"{o}|{d}": v for (o, d), v in sorted(transit_persons.items())},
            "clamped_departures": clamped,
            "warnings": warnings,
        },
    )


def _solve_scenario(
    ctx: RunContext, scenario: str, lam: float | None, progress: ProgressFn | None
) -> AssignmentResult:
    cfg = ctx.config
    network_event = _scenario_network(ctx)
    callback = None
    if progress is not None:
        callback = lambda it, gap, obj: progress(scenario, it)
    if scenario == "baseline":
        return ctx.results["baseline"]
    if scenario == "selfish":
        return solve_ue(
            network_event, ctx.event_demand, ctx.zones, cfg.solver,
            workers=cfg.workers, progress=callback,
        )
    if scenario == "altruism":
        return solve_so(
            network_event, ctx.event_demand, ctx.zones, cfg.solver,
            workers=cfg.workers, progress=callback,
        )
    if scenario == "habit":
        return _habit_result(ctx)
    if scenario == "mixed":
        habit = _habit_result(ctx)
        return solve_mixed(
            network_event, habit, ctx.event_demand, lam, ctx.zones, cfg.solver,
            workers=cfg.workers, progress=callback,
        )
    raise EventflowError(f"unknown scenario {scenario}")


def _habit_result(ctx: RunContext) -> AssignmentResult:
    if "habit" in ctx.results:
        return ctx.results["habit"]
    if has_result(ctx.run_dir, "habit"):
        ctx.results["habit"] = load_result(ctx.run_dir, "habit")
        return ctx.results["habit"]
    baseline = ctx.results["baseline"]
    result = solve_habit(
        _scenario_network(ctx),
        baseline,
        ctx.event_additions,
        baseline.link_times,
        ctx.zones,
        workers=ctx.config.workers,
    )
    ctx.results["habit"] = result
    save_result(ctx.run_dir, "habit", result)
    return result


def _assign_stage(ctx: RunContext, force: bool, progress: ProgressFn | None) -> None:
    cfg = ctx.config
    if not force and has_result(ctx.run_dir, "scenario"):
        ctx.results["scenario"] = load_result(ctx.run_dir, "scenario")
        return
    result = _solve_scenario(ctx, cfg.scenario, cfg.lam, progress)
    ctx.results["scenario"] = result
    save_result(ctx.run_dir, "scenario", result)


def _metrics_stage(ctx: RunContext, force: bool) -> None:
    path = ctx.run_dir / "metrics" / "scenario.json"
    if not force and path.exists():
        return
    report = impact_report(
        ctx.config.scenario,
        ctx.results["scenario"],
        _scenario_network(ctx) if ctx.config.scenario != "baseline" else ctx.network,
        ctx.results["baseline"],
        ctx.base_demand,
        ctx.tourist_ods,
    )
    _write_json(path, report.as_dict())


def _sweep_stage(ctx: RunContext, force: bool, progress: ProgressFn | None) -> None:
    cfg = ctx.config
    if cfg.lambda_sweep:
        curve_path = ctx.run_dir / "sweep" / "lambda_curve.csv"
        if force or not curve_path.exists():
            rows = []
            for lam in cfg.lambda_sweep:
                label = f"mixed_{lam:g}"
                if not force and has_result(ctx.run_dir, label):
                    result = load_result(ctx.run_dir, label)
                else:
                    result = _solve_scenario(ctx, "mixed", lam, progress)
                    save_result(ctx.run_dir, label, result)
                report = impact_report(
                    label,
                    result,
                    _scenario_network(ctx),
                    ctx.results["baseline"],
                    ctx.base_demand,
                    ctx.tourist_ods,
                )
                rows.append(
                    [lam, report.commuter_increment_pct, report.collective_time]
                )
            write_rows(
                curve_path, ["lambda", "commuter_increment_pct", "collective_time_veh_min"], rows
            )
    if cfg.topk_sweep and cfg.strategy is not None:
        table_path = ctx.run_dir / "sweep" / "topk_savings.csv"
        if force or not table_path.exists():
            base_result = _strategy_base(ctx, progress)
            eligible = eligible_ods(
                ctx.zones, ctx.lines, base_result, cfg.strategy.radius_km, _scenario_network(ctx)
            )
            rows = []
            for top_k in cfg.topk_sweep:
                marginal = plan_marginal(
                    base_result, eligible, top_k, cfg.strategy.reduction_fraction,
                    cfg.strategy.radius_km,
                )
                marginal = apply_and_evaluate(
                    _scenario_network(ctx), ctx.event_demand, marginal, cfg.solver,
                    ctx.zones, before=base_result, workers=cfg.workers,
                )
                uniform = plan_uniform(
                    base_result, eligible, marginal.total_reduction(), cfg.strategy.radius_km
                )
                uniform = apply_and_evaluate(
                    _scenario_network(ctx), ctx.event_demand, uniform, cfg.solver,
                    ctx.zones, before=base_result, workers=cfg.workers,
                )
                rows.append(
                    [
                        top_k,
                        marginal.savings.savings_pct,
                        uniform.savings.savings_pct,
                        marginal.total_reduction(),
                    ]
                )
            write_rows(
                table_path,
                ["top_k", "marginal_savings_pct", "uniform_savings_pct", "removed_vph"],
                rows,
            )


def _strategy_base(ctx: RunContext, progress: ProgressFn | None) -> AssignmentResult:
    """The selfish event assignment that strategy ranking runs against."""
    if ctx.config.scenario == "selfish":
        return ctx.results["scenario"]
    if has_result(ctx.run_dir, "selfish_base"):
        return load_result(ctx.run_dir, "selfish_base")
    result = _solve_scenario(ctx, "selfish", None, progress)
    save_result(ctx.run_dir, "selfish_base", result)
    return result


def _strategy_stage(ctx: RunContext, force: bool, progress: ProgressFn | None) -> None:
    cfg = ctx.config
    if cfg.strategy is None:
        return
    savings_path = ctx.run_dir / "strategy" / "savings.json"
    if not force and savings_path.exists():
        return
    base_result = _strategy_base(ctx, progress)
    network_event = _scenario_network(ctx)
    eligible = eligible_ods(ctx.zones, ctx.lines, base_result, cfg.strategy.radius_km, network_event)
    marginal = plan_marginal(
        base_result, eligible, cfg.strategy.top_k, cfg.strategy.reduction_fraction,
        cfg.strategy.radius_km,
    )
    if cfg.strategy.mode == "uniform":
        plan = plan_uniform(
            base_result, eligible, marginal.total_reduction(), cfg.strategy.radius_km
        )
    else:
        plan = marginal
    plan = apply_and_evaluate(
        network_event, ctx.event_demand, plan, cfg.solver, ctx.zones,
        before=base_result, workers=cfg.workers,
    )
    deltas, flagged = ridership_deltas(
        plan, ctx.zones, ctx.lines, cfg.strategy.persons_per_vehicle
    )
    write_plan_tables(
        ctx.run_dir / "strategy" / "reductions.csv",
        ctx.run_dir / "strategy" / "segments.csv",
        plan,
        deltas,
        flagged,
    )
    save_result(ctx.run_dir, "strategy_reassignment", plan.reassignment)
    _write_json(
        savings_path,
        {
            "mode": plan.mode,
            "radius_km": plan.radius_km,
            "top_k": plan.top_k,
            "reduction_fraction": plan.reduction_fraction,
            **plan.savings.as_dict(),
            "over_capacity_segments": [list(s) for s in flagged],
        },
    )


def run_pipeline(
    config: ScenarioConfig,
    force: bool = False,
    until: str | None = None,
    progress: ProgressFn | None = None,
) -> Path:
    """Execute the configured stages, persisting artifacts under the run directory."""
    run_dir = Path(config.out_dir) / f"run-{config.content_hash()[:16]}"
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = run_dir / "manifest.json"
    wanted = STAGES if until is None else STAGES[: STAGES.index(until) + 1]
    manifest = {
        "config": config.semantic_dict(),
        "config_hash": config.content_hash(),
        "engine_version": __version__,
        "stages": {},
        "results": {},
        "status": "running",
    }
    ctx = RunContext(config=config, run_dir=run_dir)
    stage = "validate"
    try:
        report = validate(config)
        if not report.ok:
            raise ValidationFailure(report.violations)
        manifest["stages"]["validate"] = "done"
        _load_stage(ctx)
        for stage in wanted[1:]:
            if stage == "baseline":
                _baseline_stage(ctx, force, progress)
            elif stage == "event_demand":
                _event_demand_stage(ctx, force)
            elif stage == "assign":
                _assign_stage(ctx, force, progress)
            elif stage == "metrics":
                _metrics_stage(ctx, force)
            elif stage == "sweep":
                _sweep_stage(ctx, force, progress)
            elif stage == "strategy":
                _strategy_stage(ctx, force, progress)
            manifest["stages"][stage] = "done"
        for label, result in sorted(ctx.results.items()):
            manifest["results"][label] = {
                "scenario": result.scenario,
                "lam": result.lam,
                "relative_gap": result.relative_gap,
                "iterations": result.iterations,
                "converged": result.converged,
            }
        manifest["status"] = "complete"
        _write_json(manifest_path, manifest)
    except Exception as exc:
        manifest["status"] = "failed"
        manifest["failed_stage"] = stage
        manifest["error"] = str(exc)
        _write_json(manifest_path, manifest)
        if isinstance(exc, (EventflowError, OSError)):
            raise PipelineError(stage, exc) from exc
        raise
    return run_dir


def export_run(run_dir: str | Path) -> Path:
    """Materialize the persisted run as delimited tables plus a JSON summary."""
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise EventflowError(f"unknown run: no manifest under {run_dir}")
    manifest = _read_json(manifest_path)
    export_dir = run_dir / "export"
    export_dir.mkdir(parents=True, exist_ok=True)
    config = manifest["config"]
    network = load_network(
        config["nodes_path"],
        config["links_path"],
        BprParams(**config["bpr"]),
    )
    results_dir = run_dir / "results"
    labels = sorted(p.stem for p in results_dir.glob("*.json")) if results_dir.exists() else []
    for label in labels:
        result = load_result(run_dir, label)
        scenario_net = network
        if label not in ("baseline",):
            overlay_entries = {e: 0.5 for e in network.olympic_lane_edges()}
            if config.get("overlay_path"):
                overlay_entries.update(load_overlay(config["overlay_path"], network).entries)
            scenario_net = apply_overlay(network, CapacityOverlay(overlay_entries))
        write_link_table(export_dir / f"links_{label}.csv", result, scenario_net)
        write_od_table(export_dir / f"od_{label}.csv", result)
    summary = {"config_hash": manifest["config_hash"], "results": manifest.get("results", {})}
    metrics_path = run_dir / "metrics" / "scenario.json"
    if metrics_path.exists():
        summary["metrics"] = _read_json(metrics_path)
    savings_path = run_dir / "strategy" / "savings.json"
    if savings_path.exists():
        summary["strategy"] = _read_json(savings_path)
    _write_json(export_dir / "summary.json", summary)
    for name in ("strategy/reductions.csv", "strategy/segments.csv",
                 "sweep/lambda_curve.csv", "sweep/topk_savings.csv"):
        src = run_dir / name
        if src.exists():
            dst = export_dir / src.name
            dst.write_bytes(src.read_bytes())
    return export_dir
