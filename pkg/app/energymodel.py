"""Dynamic-energy model on dTLB page-walk counters.

    E_dynamic = beta1 * T + beta2 * L + beta3 * S

T is execution time, L and S the load- and store-miss page-walk durations.
Coefficients are fitted by non-negative least squares, one model per
workload size.  beta1 is documented as "average CPU utilization" but is
fitted here as a free non-negative coefficient like the other two.
"""

import re
import math
import logging
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import stats
from sklearn.linear_model import LinearRegression
from sklearn.metrics import r2_score

from .core import Configuration
from .errors import InsufficientDataError, InvalidInputError, PmcParseError

logger = logging.getLogger(__name__)

PMC_COLUMNS = [
    "g",
    "t",
    "dynamic_energy_j",
    "time_s",
    "dtlb_load_walk_cycles",
    "dtlb_store_walk_cycles",
]

MIN_RECORDS = 3


class PmcRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    config: Configuration
    dynamic_energy_j: float
    time_s: float = Field(gt=0)
    dtlb_load_walk_cycles: float = Field(ge=0)
    dtlb_store_walk_cycles: float = Field(ge=0)

    @model_validator(mode="after")
    def _check_finite(self):
        values = (
            self.dynamic_energy_j,
            self.time_s,
            self.dtlb_load_walk_cycles,
            self.dtlb_store_walk_cycles,
        )
        if not all(math.isfinite(v) for v in values):
            raise ValueError("PMC record fields must be finite")
        return self

    def features(self) -> List[float]:
        return [self.time_s, self.dtlb_load_walk_cycles, self.dtlb_store_walk_cycles]


class EnergyModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    beta1: float = Field(ge=0)
    beta2: float = Field(ge=0)
    beta3: float = Field(ge=0)
    residual_norm: float = 0.0

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.beta1, self.beta2, self.beta3])


# Published reference coefficients per workload size (not reproduction targets)
REFERENCE_MODELS: Dict[int, EnergyModel] = {
    16384: EnergyModel(beta1=253.680, beta2=39.536, beta3=13.647),
    17408: EnergyModel(beta1=137.953, beta2=12.564, beta3=3.835),
}


class KktStatus(BaseModel):
    coefficient: str
    value: float
    gradient: float
    satisfied: bool


class FitRow(BaseModel):
    config: Configuration
    measured_j: float
    predicted_j: float


class FitReport(BaseModel):
    model: EnergyModel
    rows: List[FitRow]
    spearman_rho: float
    r2: float
    kkt: List[KktStatus]


def load_pmc_csv(path) -> List[PmcRecord]:
    """Parse a PMC table; errors name the offending line (header is line 1)"""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise PmcParseError("file is empty, expected a header", line=1)
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise PmcParseError(str(e), line=int(match.group(1)) if match else 0)

    header = [str(c).strip() for c in frame.columns]
    if header != PMC_COLUMNS:
        raise PmcParseError(
            f"header must be {','.join(PMC_COLUMNS)}, got {','.join(header)}", line=1
        )

    records = []
    for index, row in enumerate(frame.itertuples(index=False), start=2):
        try:
            g, t, energy, time_s, load, store = (str(v).strip() for v in row)
            records.append(
                PmcRecord(
                    config=Configuration.of(int(g), int(t)),
                    dynamic_energy_j=float(energy),
                    time_s=float(time_s),
                    dtlb_load_walk_cycles=float(load),
                    dtlb_store_walk_cycles=float(store),
                )
            )
        except ValueError as e:
            raise PmcParseError(f"malformed row {','.join(map(str, row))!r}: {e}", line=index)

    logger.info(f"Loaded {len(records)} PMC records from {Path(path).name}")
    return records


def _design(records: Sequence[PmcRecord]):
    X = np.array([r.features() for r in records], dtype=np.float64)
    y = np.array([r.dynamic_energy_j for r in records], dtype=np.float64)
    return X, y


def nnls_fit(records: Sequence[PmcRecord]) -> EnergyModel:
    """Least squares over beta >= 0 (active-set NNLS)"""
    if len(records) < MIN_RECORDS:
        raise InsufficientDataError(
            f"need at least {MIN_RECORDS} records to fit the model, got {len(records)}"
        )
    X, y = _design(records)
    if not np.any(X):
        raise InvalidInputError("design matrix columns (T, L, S) are all zero")

    regression = LinearRegression(positive=True, fit_intercept=False)
    regression.fit(X, y)
    beta = np.maximum(regression.coef_, 0.0)
    residual = float(np.linalg.norm(y - X @ beta))

    model = EnergyModel(beta1=beta[0], beta2=beta[1], beta3=beta[2], residual_norm=residual)
    logger.info(
        f"Fitted energy model on {len(records)} records: "
        f"beta=({model.beta1:.6g}, {model.beta2:.6g}, {model.beta3:.6g}), residual={residual:.6g}"
    )
    return model


def predict(model: EnergyModel, record: PmcRecord) -> float:
    return (
        model.beta1 * record.time_s
        + model.beta2 * record.dtlb_load_walk_cycles
        + model.beta3 * record.dtlb_store_walk_cycles
    )


def residual_norm(records: Sequence[PmcRecord], model: EnergyModel) -> float:
    X, y = _design(records)
    return float(np.linalg.norm(y - X @ model.coefficients))


def check_kkt(records: Sequence[PmcRecord], model: EnergyModel, tol: float = 1e-6) -> List[KktStatus]:
    """Optimality of 0.5*||X beta - y||^2 under beta >= 0, per coefficient"""
    X, y = _design(records)
    gradient = X.T @ (X @ model.coefficients - y)
    statuses = []
    for name, value, grad in zip(("beta1", "beta2", "beta3"), model.coefficients, gradient):
        satisfied = abs(grad) <= tol if value > 0 else grad >= -tol
        statuses.append(
            KktStatus(coefficient=name, value=float(value), gradient=float(grad), satisfied=bool(satisfied))
        )
    return statuses


def fit_report(records: Sequence[PmcRecord], model: EnergyModel, kkt_tol: float = 1e-6) -> FitReport:
    measured = [r.dynamic_energy_j for r in records]
    predicted = [predict(model, r) for r in records]
    rho = stats.spearmanr(measured, predicted).correlation
    X, y = _design(records)
    # KKT tolerance relative to the problem scale
    scale = max(1.0, float(np.abs(X.T @ y).max()))
    return FitReport(
        model=model,
        rows=[
            FitRow(config=r.config, measured_j=m, predicted_j=p)
            for r, m, p in zip(records, measured, predicted)
        ],
        spearman_rho=float(rho) if np.isfinite(rho) else 0.0,
        r2=float(r2_score(measured, predicted)),
        kkt=check_kkt(records, model, tol=kkt_tol * scale),
    )
