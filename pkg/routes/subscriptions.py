from dataclasses import asdict
from typing import List, Optional

from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from engines import matching_service
from engines.common import FastError, make_dnf, make_object, make_query
from engines.fast_index import IndexConfig

router = APIRouter()


class QueryIn(BaseModel):
    qid: str
    mbr: List[float] = Field(..., min_length=4, max_length=4)
    keywords: List[str]
    t_exp: int


class DnfQueryIn(BaseModel):
    qid: str
    mbr: List[float] = Field(..., min_length=4, max_length=4)
    clauses: List[List[str]]
    t_exp: int


class ObjectIn(BaseModel):
    oid: str = "o"
    loc: List[float] = Field(..., min_length=2, max_length=2)
    keywords: List[str]
    rect: Optional[List[float]] = None


class MatchOut(BaseModel):
    oid: str
    clock: int
    qids: List[str]


class ClockAdvance(BaseModel):
    delta: int = Field(1, ge=0)


class CleanRequest(BaseModel):
    steps: int = Field(1, ge=1, le=100_000)


@router.post("/queries")
def add_query(payload: QueryIn):
    try:
        q = make_query(payload.qid, payload.mbr, payload.keywords, payload.t_exp)
        matching_service.subscribe(q)
    except FastError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return {"qid": q.qid, "text": q.text, "t_exp": q.t_exp}


@router.post("/queries/dnf")
def add_dnf_query(payload: DnfQueryIn):
    try:
        d = make_dnf(payload.qid, payload.mbr, payload.clauses, payload.t_exp)
        subs = matching_service.subscribe_dnf(d)
    except FastError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return {"qid": d.qid, "clauses": d.clauses, "sub_queries": [s.qid for s in subs]}


@router.delete("/queries/{qid}")
def delete_query(qid: str):
    if not matching_service.unsubscribe(qid):
        raise HTTPException(status_code=404, detail=f"query {qid} not found")
    return {"qid": qid, "removed": True}


@router.post("/match", response_model=MatchOut)
def match_object(payload: ObjectIn):
    try:
        o = make_object(payload.oid, tuple(payload.loc), payload.keywords, rect=payload.rect)
        result, clock = matching_service.publish(o)
    except FastError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return MatchOut(oid=o.oid, clock=clock, qids=sorted(result.qids))


@router.post("/clock/advance")
def advance_clock(payload: ClockAdvance):
    return {"clock": matching_service.advance_clock(payload.delta)}


@router.post("/clean")
def clean(payload: CleanRequest):
    reports = matching_service.clean_now(payload.steps)
    return {"steps": [asdict(r) for r in reports]}


@router.get("/stats")
def stats():
    return matching_service.get_stats()


@router.post("/index/reset")
def reset_index(payload: Optional[IndexConfig] = None):
    return matching_service.reset_index(payload)
