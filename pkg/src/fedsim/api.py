"""HTTP facade over the service layer.

Endpoints are stateless and deterministic: identical requests produce
identical responses.  Config problems surface as 400s with the offending key;
solver domain errors as 422s.
"""
from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__
from .config import ConfigError
from .service import (
    AnalyzeResponse,
    EnergySolveResponse,
    PerfSolveResponse,
    SolveRequest,
    TrainResponse,
    analyze_service,
    solve_energy_service,
    solve_perf_service,
    train_service,
)

app = FastAPI(title="fedsim", version=__version__)


def _guard(fn, req):
    try:
        return fn(req)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except (ValueError, FileNotFoundError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/solve/energy", response_model=EnergySolveResponse)
def solve_energy_endpoint(req: SolveRequest) -> EnergySolveResponse:
    return _guard(solve_energy_service, req)


@app.post("/solve/perf", response_model=PerfSolveResponse)
def solve_perf_endpoint(req: SolveRequest) -> PerfSolveResponse:
    return _guard(solve_perf_service, req)


@app.post("/train", response_model=TrainResponse)
def train_endpoint(req: SolveRequest) -> TrainResponse:
    return _guard(train_service, req)


@app.post("/analyze", response_model=AnalyzeResponse)
def analyze_endpoint(req: SolveRequest) -> AnalyzeResponse:
    return _guard(analyze_service, req)
