"""Request/response models of the simulation service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class ClauseModel(BaseModel):
    name: str
    passed: bool
    detail: str = ""
    witness: str = ""


class ValidateRequest(BaseModel):
    config: dict
    seed: int = 0


class ValidateResponse(BaseModel):
    passed: bool
    clauses: list[ClauseModel]


class RunRequest(BaseModel):
    config: dict
    out_dir: str = Field(description="directory the service writes into")
    seed: int = 0
    force: bool = False


class RunResponse(BaseModel):
    status: str
    out_dir: str
    summary: dict


class ConvergeRequest(BaseModel):
    config: dict
    levels: int = 3
    seed: int = 0
    out_dir: Optional[str] = None


class ConvergeResponse(BaseModel):
    report: dict


class HealthResponse(BaseModel):
    status: str
    version: str
    schema_version: str
