"""HTTP service wrapping the experiment runner and reference numerics.

The CLI is a thin client over the same handlers; running them in-process or
over HTTP produces identical artifacts because seeds are the only entropy.
"""

from typing import List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict

from . import __version__, airy, fs
from .estimators import tail_coefficient_ck
from .experiments import (ConfigError, ExperimentConfig, parse_config_text,
                          report, run_experiment)


class HealthResponse(BaseModel):
    status: str
    version: str


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: Optional[ExperimentConfig] = None
    config_text: Optional[str] = None
    out_dir: Optional[str] = None
    seed: Optional[int] = None
    threads: int = 1


class RunResponse(BaseModel):
    exit_code: int
    out_dir: str
    results_csv: Optional[str]
    rows: int
    summary: dict


class ReportRequest(BaseModel):
    out_dir: str


class ReportResponse(BaseModel):
    passed: bool
    exit_code: int
    lines: List[str]


class AiryResponse(BaseModel):
    x: float
    ai: float
    ai_prime: float
    accuracy_guaranteed: bool


class FSDensityResponse(BaseModel):
    x: float
    pdf: float
    cdf: float


class TailCoefficientResponse(BaseModel):
    k: Optional[int]
    lam: float
    c_k: float


def _resolve_request(req: RunRequest) -> ExperimentConfig:
    if (req.config is None) == (req.config_text is None):
        raise ConfigError("provide exactly one of config, config_text")
    config = req.config if req.config is not None else parse_config_text(req.config_text)
    if req.seed is not None:
        config = config.model_copy(update={"seed": req.seed})
    return config


def execute_run(req: RunRequest) -> RunResponse:
    config = _resolve_request(req)
    out_dir = req.out_dir or config.out_dir
    if not out_dir:
        raise ConfigError("an output directory is required")
    res = run_experiment(config, out_dir, threads=req.threads)
    return RunResponse(**res)


def execute_report(req: ReportRequest) -> ReportResponse:
    res = report(req.out_dir)
    return ReportResponse(**res)


def create_app() -> FastAPI:
    app = FastAPI(title="tiltedlines", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/experiments/run", response_model=RunResponse)
    def run(req: RunRequest):
        try:
            return execute_run(req)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/experiments/report", response_model=ReportResponse)
    def rep(req: ReportRequest):
        return execute_report(req)

    @app.get("/reference/airy", response_model=AiryResponse)
    def airy_point(x: float):
        return AiryResponse(x=x, ai=float(airy.airy_ai(x)),
                            ai_prime=float(airy.airy_ai_prime(x)),
                            accuracy_guaranteed=airy.accuracy_guaranteed(x))

    @app.get("/reference/fs-density", response_model=FSDensityResponse)
    def fs_density_point(x: float):
        return FSDensityResponse(x=x, pdf=float(fs.fs_density(x)),
                                 cdf=float(fs.fs_cdf(x)))

    @app.get("/reference/tail-coefficient", response_model=TailCoefficientResponse)
    def tail_coefficient(lam: float, k: Optional[int] = None):
        try:
            return TailCoefficientResponse(k=k, lam=lam,
                                           c_k=tail_coefficient_ck(k, lam))
        except Exception as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    return app


app = create_app()
