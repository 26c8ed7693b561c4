from typing import Dict, List, Optional

from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from config import BENCH_ORACLE_SAMPLE
from engines import bench
from engines.common import FastError, OracleMismatch
from engines.fast_index import IndexConfig
from engines.workload import WorkloadSpec

router = APIRouter()


class BenchRequest(BaseModel):
    index: str = "fast"
    workload: WorkloadSpec = Field(default_factory=lambda: WorkloadSpec(n_queries=1000, n_objects=200))
    config: IndexConfig = Field(default_factory=IndexConfig)
    sweeps: Optional[Dict[str, List[float]]] = None
    oracle_sample: float = Field(BENCH_ORACLE_SAMPLE, ge=0.0, le=1.0)


class BenchResponse(BaseModel):
    rows: List[Dict]


@router.post("/bench", response_model=BenchResponse)
def run_bench(payload: BenchRequest):
    if payload.index not in bench.INDEX_KINDS:
        raise HTTPException(status_code=400, detail=f"index must be one of {bench.INDEX_KINDS}")
    sweeps = None
    if payload.sweeps:
        # integer-valued knobs arrive as floats from JSON
        sweeps = {k: [int(v) if float(v).is_integer() else v for v in vals] for k, vals in payload.sweeps.items()}
    try:
        rows = bench.run_bench(
            payload.workload,
            index_kind=payload.index,
            sweeps=sweeps,
            base=payload.config,
            oracle_sample=payload.oracle_sample,
        )
    except OracleMismatch as exc:
        raise HTTPException(status_code=500, detail=str(exc))
    except (FastError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return BenchResponse(rows=rows)
