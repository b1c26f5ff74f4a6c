"""Scenario configuration: parsing, cross-file validation, content hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import demand as demand_mod
from . import netgraph, strategy
from .assign import SolverConfig
from .demand import DepartureSplit, ModeSplitConfig
from .errors import DomainError, EventflowError, LoadError
from .netgraph import BprParams

SCENARIOS = ("baseline", "habit", "selfish", "altruism", "mixed")


@dataclass(frozen=True)
class StrategySettings:
    radius_km: float = 2.0
    top_k: int = 5
    reduction_fraction: float = 0.60
    mode: str = "marginal"
    persons_per_vehicle: float = 1.0

    def __post_init__(self) -> None:
        if self.radius_km < 0.0:
            raise DomainError("strategy radius_km must be >= 0")
        if self.top_k < 1:
            raise DomainError("strategy top_k must be >= 1")
        if not 0.0 < self.reduction_fraction <= 1.0:
            raise DomainError("strategy reduction_fraction must lie in (0, 1]")
        if self.mode not in ("marginal", "uniform"):
            raise DomainError("strategy mode must be marginal or uniform")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one run needs: dataset paths, hour, parameters, scenario."""

    nodes_path: str
    links_path: str
    zones_path: str
    demand_path: str
    hour: int
    venues_path: str | None = None
    sessions_path: str | None = None
    residences_path: str | None = None
    lines_path: str | None = None
    overlay_path: str | None = None
    event_date: str | None = None
    day_scale: float = 1.0
    bpr: BprParams = field(default_factory=BprParams)
    mode_split: ModeSplitConfig = field(default_factory=ModeSplitConfig)
    departure_split: DepartureSplit = field(default_factory=DepartureSplit)
    solver: SolverConfig = field(default_factory=SolverConfig)
    scenario: str = "selfish"
    lam: float | None = None
    lambda_sweep: tuple[float, ...] = ()
    topk_sweep: tuple[int, ...] = ()
    strategy: StrategySettings | None = None
    # Execution details; excluded from the content hash.
    workers: int = 1
    out_dir: str = "runs"

    def __post_init__(self) -> None:
        if not 0 <= self.hour <= 23:
            raise DomainError(f"hour {self.hour} outside 0-23")
        if self.scenario not in SCENARIOS:
            raise DomainError(f"unknown scenario {self.scenario!r}")
        if self.scenario == "mixed" and self.lam is None and not self.lambda_sweep:
            raise DomainError("mixed scenario requires lam or lambda_sweep")
        if self.lam is not None and not 0.0 <= self.lam <= 1.0:
            raise DomainError(f"lambda {self.lam} outside [0, 1]")
        for lam in self.lambda_sweep:
            if not 0.0 <= lam <= 1.0:
                raise DomainError(f"lambda sweep value {lam} outside [0, 1]")
        if self.workers < 1:
            raise DomainError("workers must be >= 1")

    def semantic_dict(self) -> dict:
        """The content that defines the run; hashed for caching and job identity."""
        return {
            "nodes_path": self.nodes_path,
            "links_path": self.links_path,
            "zones_path": self.zones_path,
            "demand_path": self.demand_path,
            "venues_path": self.venues_path,
            "sessions_path": self.sessions_path,
            "residences_path": self.residences_path,
            "lines_path": self.lines_path,
            "overlay_path": self.overlay_path,
            "event_date": self.event_date,
            "hour": self.hour,
            "day_scale": self.day_scale,
            "bpr": {"f_s": self.bpr.f_s, "alpha": self.bpr.alpha, "beta": self.bpr.beta},
            "mode_split": {
                "walk_km": self.mode_split.walk_km,
                "bike_km": self.mode_split.bike_km,
                "taxi_occupancy": self.mode_split.taxi_occupancy,
                "bus_enabled": self.mode_split.bus_enabled,
                "bus_time_ratio": self.mode_split.bus_time_ratio,
            },
            "departure_split": [list(s) for s in self.departure_split.shares],
            "solver": {
                "max_iterations": self.solver.max_iterations,
                "relative_gap_tol": self.solver.relative_gap_tol,
                "line_search_tol": self.solver.line_search_tol,
            },
            "scenario": self.scenario,
            "lam": self.lam,
            "lambda_sweep": list(self.lambda_sweep),
            "topk_sweep": list(self.topk_sweep),
            "strategy": (
                None
                if self.strategy is None
                else {
                    "radius_km": self.strategy.radius_km,
                    "top_k": self.strategy.top_k,
                    "reduction_fraction": self.strategy.reduction_fraction,
                    "mode": self.strategy.mode,
                    "persons_per_vehicle": self.strategy.persons_per_vehicle,
                }
            ),
        }

    def content_hash(self) -> str:
        canonical = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_overrides(self, **kwargs) -> "ScenarioConfig":
        from dataclasses import replace

        return replace(self, **kwargs)


def config_from_dict(raw: dict, base_dir: str | Path | None = None) -> ScenarioConfig:
    """Build a config from parsed JSON, resolving relative paths if asked."""

    def resolve(p: str | None) -> str | None:
        if p is None:
            return None
        path = Path(p)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return str(path)

    bpr_raw = raw.get("bpr", {})
    mode_raw = raw.get("mode_split", {})
    solver_raw = raw.get("solver", {})
    split_raw = raw.get("departure_split")
    strategy_raw = raw.get("strategy")
    return ScenarioConfig(
        nodes_path=resolve(raw["nodes_path"]),
        links_path=resolve(raw["links_path"]),
        zones_path=resolve(raw["zones_path"]),
        demand_path=resolve(raw["demand_path"]),
        venues_path=resolve(raw.get("venues_path")),
        sessions_path=resolve(raw.get("sessions_path")),
        residences_path=resolve(raw.get("residences_path")),
        lines_path=resolve(raw.get("lines_path")),
        overlay_path=resolve(raw.get("overlay_path")),
        event_date=raw.get("event_date"),
        hour=int(raw["hour"]),
        day_scale=float(raw.get("day_scale", 1.0)),
        bpr=BprParams(
            f_s=float(bpr_raw.get("f_s", 1.15)),
            alpha=float(bpr_raw.get("alpha", 0.18)),
            beta=float(bpr_raw.get("beta", 5.0)),
        ),
        mode_split=ModeSplitConfig(
            walk_km=float(mode_raw.get("walk_km", 1.0)),
            bike_km=float(mode_raw.get("bike_km", 2.0)),
            taxi_occupancy=float(mode_raw.get("taxi_occupancy", 2.0)),
            bus_enabled=bool(mode_raw.get("bus_enabled", False)),
            bus_time_ratio=float(mode_raw.get("bus_time_ratio", 1.5)),
        ),
        departure_split=(
            DepartureSplit(tuple((int(h), float(f)) for h, f in split_raw))
            if split_raw
            else DepartureSplit()
        ),
        solver=SolverConfig(
            max_iterations=int(solver_raw.get("max_iterations", 200)),
            relative_gap_tol=float(solver_raw.get("relative_gap_tol", 1e-4)),
            line_search_tol=float(solver_raw.get("line_search_tol", 1e-8)),
        ),
        scenario=raw.get("scenario", "selfish"),
        lam=None if raw.get("lam") is None else float(raw["lam"]),
        lambda_sweep=tuple(float(v) for v in raw.get("lambda_sweep", [])),
        topk_sweep=tuple(int(v) for v in raw.get("topk_sweep", [])),
        strategy=(
            None
            if strategy_raw is None
            else StrategySettings(
                radius_km=float(strategy_raw.get("radius_km", 2.0)),
                top_k=int(strategy_raw.get("top_k", 5)),
                reduction_fraction=float(strategy_raw.get("reduction_fraction", 0.60)),
                mode=strategy_raw.get("mode", "marginal"),
                persons_per_vehicle=float(strategy_raw.get("persons_per_vehicle", 1.0)),
            )
        ),
        workers=int(raw.get("workers", 1)),
        out_dir=resolve(raw.get("out_dir", "runs")),
    )


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise LoadError(str(path), None, f"cannot open: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise LoadError(str(path), exc.lineno, f"invalid JSON: {exc.msg}") from exc
    try:
        return config_from_dict(raw, base_dir=path.parent)
    except KeyError as exc:
        raise LoadError(str(path), None, f"missing config key {exc}") from exc
    except (DomainError, TypeError, ValueError) as exc:
        raise LoadError(str(path), None, str(exc)) from exc


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str) -> None:
        self.violations.append(message)


def validate(config: ScenarioConfig) -> ValidationReport:
    """Check every cross-file reference; the report lists all violations found."""
    report = ValidationReport()

    def try_load(label: str, loader, *args):
        try:
            return loader(*args)
        except (LoadError, EventflowError, OSError) as exc:
            report.add(f"{label}: {exc}")
            return None

    network = None
    nodes = try_load("nodes", netgraph.load_nodes, config.nodes_path)
    links = try_load("links", netgraph.load_links, config.links_path)
    if nodes is not None and links is not None:
        try:
            network = netgraph.RoadNetwork(nodes=nodes, links=links, params=config.bpr)
        except DomainError as exc:
            report.add(f"network: {exc}")

    zones = try_load("zones", demand_mod.load_zones, config.zones_path)
    if zones is not None and nodes is not None:
        for zone_id in sorted(zones):
            if zones[zone_id].attach_node not in nodes:
                report.add(
                    f"zones: zone {zone_id} attaches to unknown node "
                    f"{zones[zone_id].attach_node}"
                )

    matrix = try_load(
        "demand", demand_mod.load_demand, config.demand_path, config.day_scale, config.hour
    )
    if matrix is not None and zones is not None:
        for record in matrix.records:
            for zone_id in (record.origin, record.dest):
                if zone_id not in zones:
                    report.add(f"demand: row references unknown zone {zone_id}")

    if config.overlay_path is not None and network is not None:
        try_load("overlay", netgraph.load_overlay, config.overlay_path, network)

    venues = None
    if config.venues_path is not None:
        venues = try_load("venues", demand_mod.load_venues, config.venues_path)
    if config.sessions_path is not None:
        if venues is None:
            report.add("sessions: provided without a venues file")
        else:
            try_load("sessions", demand_mod.load_sessions, config.sessions_path, venues)
    if config.residences_path is not None:
        try_load("residences", demand_mod.load_residences, config.residences_path)
    if config.lines_path is not None:
        try_load("lines", strategy.load_lines, config.lines_path)

    event_inputs = (config.venues_path, config.sessions_path, config.residences_path)
    if config.scenario != "baseline" and any(event_inputs) and not all(event_inputs):
        report.add(
            "event demand requires venues, sessions, and residences files together"
        )
    if config.strategy is not None and config.lines_path is None:
        report.add("strategy block requires a transit lines file")
    return report
