from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field
from typing import Dict, List, Optional
import logging
from contextlib import asynccontextmanager

from .config import Config
from .core import Configuration, ObjectiveSample, enumerate_configurations
from .energymodel import FitReport, PmcRecord, fit_report, nnls_fit
from .errors import BiobjTuneError, InvalidInputError
from .pareto import ParetoFront, TradeoffSummary, front_build, tradeoff_summary

# Configure logging
logging.basicConfig(
    level=Config.log_level(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Validate configuration on startup"""
    try:
        logger.info("Starting bi-objective tuning API...")
        Config.validate()
        logger.info(f"Default core count l={Config.CORES}, energy source {Config.ENERGY_SOURCE}")
        yield
    except Exception as e:
        logger.error(f"Failed to initialize application: {e}")
        raise
    finally:
        logger.info("Application shutdown complete")


app = FastAPI(
    title="Bi-objective Tuning API",
    description="Pareto fronts over (time, dynamic energy) and dTLB energy-model fits",
    version="1.0.0",
    lifespan=lifespan
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# Pydantic models
class ConfigsResponse(BaseModel):
    cores: int
    configs: List[Configuration]


class ParetoRequest(BaseModel):
    samples: List[ObjectiveSample] = Field(min_length=1)


class ParetoResponse(BaseModel):
    front: ParetoFront
    tradeoffs: TradeoffSummary
    samples_count: int


class FitRequest(BaseModel):
    records: List[PmcRecord]


def _raise_http(action: str, e: Exception):
    logger.error(f"Error {action}: {e}")
    if isinstance(e, InvalidInputError):
        raise HTTPException(status_code=400, detail=str(e))
    raise HTTPException(status_code=500, detail=f"Failed {action}: {str(e)}")


# API Endpoints
@app.get("/", response_model=Dict[str, str])
async def root():
    """Health check endpoint"""
    return {"message": "Bi-objective tuning API is running"}


@app.get("/configs", response_model=ConfigsResponse)
async def list_configs(cores: Optional[int] = Query(default=None)):
    """All (g, t) configurations with g*t <= cores"""
    cores = Config.CORES if cores is None else cores
    try:
        return ConfigsResponse(cores=cores, configs=enumerate_configurations(cores))
    except BiobjTuneError as e:
        _raise_http("enumerating configurations", e)


@app.post("/pareto", response_model=ParetoResponse)
async def pareto(request: ParetoRequest):
    """Pareto front of measured (time, dynamic energy) samples"""
    try:
        front = front_build(request.samples)
        logger.info(f"Built front of {len(front)} entries from {len(request.samples)} samples")
        return ParetoResponse(
            front=front,
            tradeoffs=tradeoff_summary(front, request.samples),
            samples_count=len(request.samples),
        )
    except BiobjTuneError as e:
        _raise_http("building the front", e)


@app.post("/fit-energy", response_model=FitReport)
async def fit_energy(request: FitRequest):
    """Fit the dTLB dynamic-energy model by non-negative least squares"""
    try:
        model = nnls_fit(request.records)
        return fit_report(request.records, model)
    except BiobjTuneError as e:
        _raise_http("fitting the energy model", e)


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
