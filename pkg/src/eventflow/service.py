"""Scenario service: queued solver jobs, cached results, what-if queries.

Jobs are keyed by config content hash, so resubmitting the same fragment
returns the existing job, and every response for a finished job is derived
from its persisted run directory (the service can restart without losing
completed work). Solver jobs run on a bounded FIFO worker pool.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .config import ScenarioConfig, StrategySettings, load_config
from .demand import load_demand, load_zones
from .errors import EventflowError
from .netgraph import CapacityOverlay, apply_overlay, load_network, load_overlay
from .pipeline import has_result, load_result, run_pipeline, save_result
from .strategy import (
    apply_and_evaluate,
    eligible_ods,
    load_lines,
    plan_marginal,
    plan_uniform,
    ridership_deltas,
)

API_VERSION = 1


class JobRequest(BaseModel):
    scenario: str = "selfish"
    lam: float | None = Field(default=None, ge=0.0, le=1.0)
    lambda_sweep: list[float] = Field(default_factory=list)
    hour: int | None = Field(default=None, ge=0, le=23)
    force: bool = False


class WhatIfRequest(BaseModel):
    radius_km: float = Field(default=2.0, ge=0.0)
    top_k: int = Field(default=5, ge=1)
    fraction: float = Field(default=0.60, gt=0.0, le=1.0)
    mode: str = "marginal"


@dataclass
class RunJob:
    job_id: str
    config: ScenarioConfig
    state: str = "queued"
    progress: int = 0
    error: str | None = None
    stage: str | None = None
    run_dir: Path | None = None

    def view(self) -> dict:
        payload = {
            "version": API_VERSION,
            "job_id": self.job_id,
            "state": self.state,
            "progress": self.progress,
            "scenario": self.config.scenario,
            "lam": self.config.lam,
            "hour": self.config.hour,
        }
        if self.error is not None:
            payload["error"] = self.error
            payload["stage"] = self.stage
        if self.state == "done" and self.run_dir is not None:
            manifest = json.loads(
                (self.run_dir / "manifest.json").read_text(encoding="utf-8")
            )
            payload["results"] = manifest.get("results", {})
            metrics_path = self.run_dir / "metrics" / "scenario.json"
            if metrics_path.exists():
                payload["metrics"] = json.loads(metrics_path.read_text(encoding="utf-8"))
        return payload


class ServiceState:
    def __init__(self, data_dir: Path, workers: int):
        self.base_config = load_config(Path(data_dir) / "config.json")
        self.store = Path(self.base_config.out_dir)
        self.executor = ThreadPoolExecutor(max_workers=max(1, workers))
        self.lock = threading.Lock()
        self.jobs: dict[str, RunJob] = {}
        self.whatif_cache: dict[tuple, dict] = {}

    def effective_config(self, request: JobRequest) -> ScenarioConfig:
        overrides: dict = {"scenario": request.scenario}
        overrides["lam"] = request.lam
        overrides["lambda_sweep"] = tuple(request.lambda_sweep)
        if request.hour is not None:
            overrides["hour"] = request.hour
        return self.base_config.with_overrides(**overrides)

    def submit(self, request: JobRequest) -> RunJob:
        config = self.effective_config(request)
        job_id = config.content_hash()[:16]
        with self.lock:
            existing = self.jobs.get(job_id)
            if existing is not None and not request.force:
                return existing
            job = RunJob(job_id=job_id, config=config)
            run_dir = self.store / f"run-{job_id}"
            manifest = run_dir / "manifest.json"
            if manifest.exists() and not request.force:
                status = json.loads(manifest.read_text(encoding="utf-8")).get("status")
                if status == "complete":
                    job.state = "done"
                    job.run_dir = run_dir
                    self.jobs[job_id] = job
                    return job
            self.jobs[job_id] = job
        self.executor.submit(self._run, job, request.force)
        return job

    def _run(self, job: RunJob, force: bool) -> None:
        with self.lock:
            job.state = "running"

        def progress(stage: str, iteration: int) -> None:
            with self.lock:
                job.stage = stage
                job.progress = iteration

        try:
            until = "sweep" if job.config.lambda_sweep else "metrics"
            run_dir = run_pipeline(job.config, force=force, until=until, progress=progress)
            with self.lock:
                job.run_dir = run_dir
                job.state = "done"
        except Exception as exc:
            with self.lock:
                job.state = "failed"
                job.error = str(exc)

    def get(self, job_id: str) -> RunJob:
        with self.lock:
            job = self.jobs.get(job_id)
        if job is not None:
            return job
        # Restart-safe: a completed run directory is enough to serve reads.
        run_dir = self.store / f"run-{job_id}"
        manifest = run_dir / "manifest.json"
        if manifest.exists():
            payload = json.loads(manifest.read_text(encoding="utf-8"))
            if payload.get("status") == "complete":
                job = RunJob(job_id=job_id, config=self.base_config, state="done", run_dir=run_dir)
                with self.lock:
                    self.jobs.setdefault(job_id, job)
                return job
        raise HTTPException(status_code=404, detail=f"unknown job {job_id}")

    def zone_times(self, job_id: str, origin_zone: str) -> dict:
        job = self.get(job_id)
        if job.state != "done":
            raise HTTPException(status_code=409, detail=f"job {job_id} is {job.state}")
        zones = load_zones(job.config.zones_path)
        if origin_zone not in zones:
            raise HTTPException(status_code=404, detail=f"unknown zone {origin_zone}")
        scenario = load_result(job.run_dir, "scenario")
        baseline = load_result(job.run_dir, "baseline")
        dests: dict[str, dict] = {}
        for (origin, dest), minutes in sorted(scenario.od_times.items()):
            if origin != origin_zone:
                continue
            base_minutes = baseline.od_times.get((origin, dest))
            increment = (
                (minutes - base_minutes) / base_minutes * 100.0
                if base_minutes is not None and base_minutes > 0.0
                else None
            )
            dests[dest] = {
                "minutes": minutes,
                "baseline_minutes": base_minutes,
                "increment_pct": increment,
            }
        return {
            "version": API_VERSION,
            "job_id": job_id,
            "origin": origin_zone,
            "destinations": dests,
        }

    def whatif(self, job_id: str, request: WhatIfRequest) -> dict:
        if request.mode not in ("marginal", "uniform"):
            raise HTTPException(status_code=422, detail="mode must be marginal or uniform")
        job = self.get(job_id)
        if job.state != "done":
            raise HTTPException(status_code=409, detail=f"job {job_id} is {job.state}")
        key = (job_id, request.radius_km, request.top_k, request.fraction, request.mode)
        with self.lock:
            cached = self.whatif_cache.get(key)
        if cached is not None:
            return cached
        config = job.config
        if config.lines_path is None:
            raise HTTPException(status_code=409, detail="job has no transit lines configured")
        network = load_network(config.nodes_path, config.links_path, config.bpr)
        overlay_entries = {e: 0.5 for e in network.olympic_lane_edges()}
        if config.overlay_path:
            overlay_entries.update(load_overlay(config.overlay_path, network).entries)
        network_event = apply_overlay(network, CapacityOverlay(overlay_entries))
        zones = load_zones(config.zones_path)
        lines = load_lines(config.lines_path)
        event_demand = load_demand(job.run_dir / "demand" / "combined.csv", 1.0, config.hour)
        if config.scenario == "selfish" and has_result(job.run_dir, "scenario"):
            base_result = load_result(job.run_dir, "scenario")
        elif has_result(job.run_dir, "selfish_base"):
            base_result = load_result(job.run_dir, "selfish_base")
        else:
            from .assign import solve_ue

            base_result = solve_ue(network_event, event_demand, zones, config.solver)
            save_result(job.run_dir, "selfish_base", base_result)
        eligible = eligible_ods(zones, lines, base_result, request.radius_km, network_event)
        marginal = plan_marginal(
            base_result, eligible, request.top_k, request.fraction, request.radius_km
        )
        if request.mode == "uniform":
            plan = plan_uniform(
                base_result, eligible, marginal.total_reduction(), request.radius_km
            )
        else:
            plan = marginal
        plan = apply_and_evaluate(
            network_event, event_demand, plan, config.solver, zones, before=base_result
        )
        strategy_conf = config.strategy or StrategySettings()
        deltas, flagged = ridership_deltas(plan, zones, lines, strategy_conf.persons_per_vehicle)
        payload = {
            "version": API_VERSION,
            "job_id": job_id,
            "params": {
                "radius_km": request.radius_km,
                "top_k": request.top_k,
                "fraction": request.fraction,
                "mode": request.mode,
            },
            "savings": plan.savings.as_dict(),
            "converged": plan.savings.converged,
            "reductions": [
                {
                    "origin": od[0],
                    "dest": od[1],
                    "removed_vph": plan.reductions[od],
                    "mc_p_min": next(
                        (
                            e.marginal_path_cost
                            for e in plan.selected
                            if (e.origin, e.dest) == od
                        ),
                        0.0,
                    ),
                }
                for od in sorted(plan.reductions)
            ],
            "segments": [
                {
                    "line_id": seg[0],
                    "from_station": seg[1],
                    "to_station": seg[2],
                    "delta_persons": deltas[seg],
                    "over_capacity": seg in set(flagged),
                }
                for seg in sorted(deltas)
            ],
        }
        with self.lock:
            self.whatif_cache[key] = payload
        return payload


def create_app(
    data_dir: str | Path, workers: int = 1, ui_dir: str | Path | None = None
) -> FastAPI:
    state = ServiceState(Path(data_dir), workers)
    app = FastAPI(title="eventflow scenario service", version=str(API_VERSION))
    app.state.service = state

    @app.get("/api/v1/health")
    def health() -> dict:
        return {"version": API_VERSION, "status": "ok"}

    @app.get("/api/v1/zones")
    def zones_meta() -> dict:
        zones = load_zones(state.base_config.zones_path)
        return {
            "version": API_VERSION,
            "zones": [
                {"zone_id": z.zone_id, "lat": z.lat, "lon": z.lon}
                for z in (zones[k] for k in sorted(zones))
            ],
        }

    @app.post("/api/v1/jobs")
    def submit(request: JobRequest) -> dict:
        if request.scenario not in ("baseline", "habit", "selfish", "altruism", "mixed"):
            raise HTTPException(status_code=422, detail=f"unknown scenario {request.scenario}")
        if request.scenario == "mixed" and request.lam is None and not request.lambda_sweep:
            raise HTTPException(status_code=422, detail="mixed scenario requires lam")
        try:
            job = state.submit(request)
        except EventflowError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return job.view()

    @app.get("/api/v1/jobs")
    def list_jobs() -> dict:
        with state.lock:
            jobs = sorted(state.jobs.values(), key=lambda j: j.job_id)
        return {"version": API_VERSION, "jobs": [j.view() for j in jobs]}

    @app.get("/api/v1/jobs/{job_id}")
    def job_status(job_id: str) -> dict:
        return state.get(job_id).view()

    @app.get("/api/v1/jobs/{job_id}/zones/{zone}")
    def zone_times(job_id: str, zone: str) -> dict:
        return state.zone_times(job_id, zone)

    @app.get("/api/v1/jobs/{job_id}/sweep")
    def sweep_curve(job_id: str) -> dict:
        job = state.get(job_id)
        if job.state != "done":
            raise HTTPException(status_code=409, detail=f"job {job_id} is {job.state}")
        curve_path = job.run_dir / "sweep" / "lambda_curve.csv"
        points = []
        if curve_path.exists():
            from .tables import read_rows

            for _, row in read_rows(
                curve_path, ["lambda", "commuter_increment_pct", "collective_time_veh_min"]
            ):
                points.append(
                    {
                        "lam": float(row["lambda"]),
                        "commuter_increment_pct": float(row["commuter_increment_pct"]),
                        "collective_time_veh_min": float(row["collective_time_veh_min"]),
                    }
                )
        return {"version": API_VERSION, "job_id": job_id, "points": points}

    @app.post("/api/v1/jobs/{job_id}/whatif")
    def whatif(job_id: str, request: WhatIfRequest) -> dict:
        return state.whatif(job_id, request)

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
