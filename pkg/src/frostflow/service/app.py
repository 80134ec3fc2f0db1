"""HTTP facade over scenario validation, runs, and convergence studies.

Outputs are written to directories on the service's filesystem; with the
default in-process transport used by the CLI that is the caller's own
filesystem.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..outputs import SCHEMA_VERSION, converge_report, run_to_directory, \
    write_summary
from ..scenario import Scenario, ScenarioError
from .schemas import (
    ConvergeRequest,
    ConvergeResponse,
    HealthResponse,
    RunRequest,
    RunResponse,
    ValidateRequest,
    ValidateResponse,
)

app = FastAPI(title="frostflow", version=__version__)


def _scenario(config: dict) -> Scenario:
    try:
        return Scenario.from_dict(config)
    except ScenarioError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__,
                          schema_version=SCHEMA_VERSION)


@app.post("/validate", response_model=ValidateResponse)
def validate(request: ValidateRequest) -> ValidateResponse:
    scenario = _scenario(request.config)
    try:
        report = scenario.validate(seed=request.seed)
    except ScenarioError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    data = report.to_dict()
    return ValidateResponse(passed=data["passed"], clauses=data["clauses"])


@app.post("/run", response_model=RunResponse)
def run(request: RunRequest) -> RunResponse:
    scenario = _scenario(request.config)
    try:
        summary = run_to_directory(scenario, request.out_dir,
                                   seed=request.seed, force=request.force)
    except ScenarioError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return RunResponse(status=summary["status"], out_dir=request.out_dir,
                       summary=summary)


@app.post("/converge", response_model=ConvergeResponse)
def converge(request: ConvergeRequest) -> ConvergeResponse:
    scenario = _scenario(request.config)
    try:
        report = converge_report(scenario, request.levels, seed=request.seed)
    except (ScenarioError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    if request.out_dir:
        out = Path(request.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_summary(out / "convergence.json", report)
    return ConvergeResponse(report=report)
