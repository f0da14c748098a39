"""HTTP facade over the experiment runners.

One POST endpoint per experiment; every response carries the same
report shape. Contract violations from the library surface as 400s,
malformed requests as FastAPI's usual 422s.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import experiments
from .errors import ToolkitError

app = FastAPI(title="ttlab", version="1.0")


class Report(BaseModel):
    command: str
    params: dict
    summary: dict
    rows: list[dict]


class GenerateRequest(BaseModel):
    seed: int = 0
    trials: int = Field(1, ge=1)
    window: int = Field(100, ge=0)


class MarkersRequest(BaseModel):
    seed: int = 0
    steps: int = Field(1_000_000, ge=0)
    chunk: int | None = Field(None, ge=64)


class ReconstructRequest(BaseModel):
    seed: int = 0
    trials: int = Field(1, ge=1)
    window: int = Field(100, ge=0)


class RewriteRequest(BaseModel):
    seed: int = 0
    trials: int = Field(1, ge=1)
    window: int = Field(2500, ge=48)
    m_bound: int = Field(40, ge=12)
    workers: int = Field(1, ge=1, le=16)


class CoupleRequest(BaseModel):
    seed: int = 0
    trials: int = Field(1, ge=1)
    n: int = Field(1, ge=1)
    horizon: int = Field(2000, ge=2)
    workers: int = Field(1, ge=1, le=16)


class MarginalRequest(BaseModel):
    seed: int = 0
    trials: int = Field(1000, ge=1)
    n: int = Field(1, ge=1)
    depth: int = Field(2, ge=0, le=4)


class SplitRequest(BaseModel):
    seed: int = 0
    trials: int = Field(1, ge=1)
    horizon: int = Field(1_000_000, ge=12)
    workers: int = Field(1, ge=1, le=16)


class SplitAuditRequest(BaseModel):
    seed: int = 0
    trials: int = Field(100, ge=2)
    horizon: int = Field(300_000, ge=12)


class CfiberRequest(BaseModel):
    seed: int = 0
    trials: int = Field(1, ge=1)
    cells: int = Field(200, ge=8)
    k_range: int = Field(32, ge=4)


@app.exception_handler(ToolkitError)
async def _toolkit_error(request: Request, exc: ToolkitError):
    return JSONResponse(status_code=400, content={"detail": f"{type(exc).__name__}: {exc}"})


@app.exception_handler(ValueError)
async def _value_error(request: Request, exc: ValueError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/generate", response_model=Report)
def generate(req: GenerateRequest):
    return experiments.run_generate(req.seed, req.trials, req.window)


@app.post("/markers", response_model=Report)
def markers(req: MarkersRequest):
    return experiments.run_markers(req.seed, req.steps, chunk=req.chunk)


@app.post("/reconstruct", response_model=Report)
def reconstruct(req: ReconstructRequest):
    return experiments.run_reconstruct(req.seed, req.trials, req.window)


@app.post("/rewrite", response_model=Report)
def rewrite(req: RewriteRequest):
    return experiments.run_rewrite(
        req.seed, req.trials, window=req.window, m_bound=req.m_bound, workers=req.workers
    )


@app.post("/couple", response_model=Report)
def couple(req: CoupleRequest):
    return experiments.run_couple(req.seed, req.trials, req.n, req.horizon, workers=req.workers)


@app.post("/marginal", response_model=Report)
def marginal(req: MarginalRequest):
    return experiments.run_marginal(req.seed, req.trials, req.n, req.depth)


@app.post("/split", response_model=Report)
def split(req: SplitRequest):
    return experiments.run_split(req.seed, req.trials, horizon=req.horizon, workers=req.workers)


@app.post("/split-audit", response_model=Report)
def split_audit(req: SplitAuditRequest):
    return experiments.run_split_audit(req.seed, req.trials, horizon=req.horizon)


@app.post("/cfiber", response_model=Report)
def cfiber(req: CfiberRequest):
    return experiments.run_cfiber(req.seed, req.trials, cells=req.cells, k_range=req.k_range)
