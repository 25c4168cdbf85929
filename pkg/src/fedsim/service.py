"""Typed request/response layer shared by the HTTP API and the CLI.

Every entry point takes a raw config dict plus an optional seed override,
validates it, and returns a plain pydantic model.  Nothing here touches the
filesystem except dataset loading for training runs; persistence belongs to
the caller.
"""
from __future__ import annotations

from typing import Any

from pydantic import BaseModel, Field

from . import __version__
from .config import (
    ConfigError,
    channel_from_config,
    config_hash,
    devices_from_config,
    energy_budgets_from_config,
    validate_config,
)
from .optimize import (
    TraceRow,
    WorkerPlan,
    solve_energy_single,
    solve_perf,
)
from .properties import run_property_checks
from .sim import prepare_data, run_experiment

__all__ = [
    "SolveRequest",
    "PlanModel",
    "TraceRowModel",
    "EnergySolveResponse",
    "PerfSolveResponse",
    "TrainResponse",
    "PropertyCheck",
    "AnalyzeResponse",
    "effective_config",
    "solve_energy_service",
    "solve_perf_service",
    "train_service",
    "analyze_service",
]


class SolveRequest(BaseModel):
    """Raw (possibly partial) config plus an optional seed override."""

    config: dict[str, Any] = Field(default_factory=dict)
    seed: int | None = None


class PlanModel(BaseModel):
    frequency: float
    rate: float
    power: float
    outage: float
    compute_time: float
    comm_time: float
    compute_energy: float
    comm_energy: float
    round_time: float
    round_energy: float


class TraceRowModel(BaseModel):
    iteration: int
    iterate: float
    objective: float
    step: float


class EnergySolveResponse(BaseModel):
    config: dict[str, Any]
    config_hash: str
    version: str
    latency: float
    targets: list[float]
    feasible: bool
    worker_feasible: list[bool]
    fallback_used: bool
    plans: list[PlanModel]
    round_energy: float
    round_time: float
    traces: list[list[TraceRowModel]]


class PerfSolveResponse(BaseModel):
    config: dict[str, Any]
    config_hash: str
    version: str
    latency: float
    objective: float
    rounds: int
    iterations: int
    converged: bool
    plans: list[PlanModel]
    trace: list[TraceRowModel]


class TrainResponse(BaseModel):
    config: dict[str, Any]
    config_hash: str
    version: str
    summary: dict[str, Any]
    rounds: list[dict[str, Any]]


class PropertyCheck(BaseModel):
    name: str
    passed: bool
    detail: str


class AnalyzeResponse(BaseModel):
    config: dict[str, Any]
    config_hash: str
    version: str
    checks: list[PropertyCheck]
    passed: bool


def effective_config(raw: dict, seed: int | None) -> dict:
    """Validate a raw config and fold in the seed override, so that the same
    effective config always hashes to the same run identity."""
    cfg = validate_config(raw)
    if seed is not None:
        cfg["seed"] = int(seed)
    return cfg


def _plan_model(plan: WorkerPlan) -> PlanModel:
    return PlanModel(**plan.to_dict())


def _trace_models(trace: tuple[TraceRow, ...]) -> list[TraceRowModel]:
    return [TraceRowModel(**row.to_dict()) for row in trace]


def _fixed_targets(cfg: dict) -> list[float]:
    target = cfg["train.p_out_target"]
    if target == "from_b":
        raise ConfigError(
            "train.p_out_target",
            "'from_b' resolves per round from gradients; the standalone "
            "solver needs numeric targets",
        )
    m = cfg["train.num_workers"]
    if isinstance(target, list):
        if len(target) != m:
            raise ConfigError(
                "train.p_out_target", f"list length {len(target)} != {m} workers"
            )
        targets = [float(t) for t in target]
    else:
        targets = [float(target)] * m
    for t in targets:
        if not 0.0 < t < 1.0:
            raise ConfigError("train.p_out_target", f"target {t} outside (0, 1)")
    return targets


def _fixed_latency(cfg: dict) -> float:
    latency = cfg["train.T_l"]
    if latency == "optimize":
        raise ConfigError(
            "train.T_l",
            "the energy solver needs a numeric latency; run solve-perf to "
            "choose one",
        )
    return float(latency)


def solve_energy_service(req: SolveRequest) -> EnergySolveResponse:
    """Minimize per-round energy for every worker at a fixed latency and
    outage target, falling back to full power where the target is
    unreachable."""
    cfg = effective_config(req.config, req.seed)
    latency = _fixed_latency(cfg)
    targets = _fixed_targets(cfg)
    devices = devices_from_config(cfg)
    ch = channel_from_config(cfg)
    plans, flags, traces = [], [], []
    for dev, target in zip(devices, targets):
        plan, ok, trace = solve_energy_single(dev, ch, latency, target, record_trace=True)
        if not ok and not cfg["train.allow_fallback"]:
            raise ConfigError(
                "train.p_out_target",
                f"target {target} infeasible at latency {latency} and "
                "fallback is disabled",
            )
        plans.append(plan)
        flags.append(ok)
        traces.append(trace)
    return EnergySolveResponse(
        config=cfg,
        config_hash=config_hash(cfg),
        version=__version__,
        latency=latency,
        targets=targets,
        feasible=all(flags),
        worker_feasible=flags,
        fallback_used=not all(flags),
        plans=[_plan_model(p) for p in plans],
        round_energy=float(sum(p.round_energy for p in plans)),
        round_time=float(max(p.round_time for p in plans)),
        traces=[_trace_models(t) for t in traces],
    )


def solve_perf_service(req: SolveRequest) -> PerfSolveResponse:
    """Choose the round latency maximizing vote quality per unit sqrt-time
    under per-worker energy budgets."""
    cfg = effective_config(req.config, req.seed)
    devices = devices_from_config(cfg)
    ch = channel_from_config(cfg)
    result = solve_perf(
        devices,
        ch,
        cfg["train.T_total"],
        energy_budgets_from_config(cfg),
        record_trace=True,
    )
    return PerfSolveResponse(
        config=cfg,
        config_hash=config_hash(cfg),
        version=__version__,
        latency=result.latency,
        objective=result.objective,
        rounds=result.rounds,
        iterations=result.iterations,
        converged=result.converged,
        plans=[_plan_model(p) for p in result.plans],
        trace=_trace_models(result.trace),
    )


def train_service(req: SolveRequest) -> TrainResponse:
    """Run a full federated training experiment and return the round ledger
    plus the summary."""
    cfg = effective_config(req.config, req.seed)
    train_data, test_data = prepare_data(cfg)
    result = run_experiment(cfg, train_data, test_data)
    return TrainResponse(
        config=cfg,
        config_hash=config_hash(cfg),
        version=__version__,
        summary=result.summary,
        rounds=[r.to_row() for r in result.records],
    )


def analyze_service(req: SolveRequest) -> AnalyzeResponse:
    """Run the seeded property-check suite."""
    cfg = effective_config(req.config, req.seed)
    rows = run_property_checks(
        cfg["seed"], cfg["analyze.trials"], cfg["analyze.instances"]
    )
    checks = [PropertyCheck(**row) for row in rows]
    return AnalyzeResponse(
        config=cfg,
        config_hash=config_hash(cfg),
        version=__version__,
        checks=checks,
        passed=all(c.passed for c in checks),
    )
