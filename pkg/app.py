# app.py
import logging

from fastapi import FastAPI

import config
from engines import matching_service
from routes import benchmark as bench_routes
from routes import subscriptions as subscription_routes

logging.basicConfig(level=config.LOG_LEVEL)

# =========================
# FastAPI application
# =========================

app = FastAPI(title="FAST spatio-textual matching")

app.include_router(subscription_routes.router)
app.include_router(bench_routes.router)


# =========================
# Vacuum cleaner thread
# =========================


@app.on_event("startup")
def start_threads():
    matching_service.start_cleaner()


@app.on_event("shutdown")
def stop_threads():
    matching_service.stop_cleaner()


@app.get("/health")
def health():
    return {"status": "ok", "live_queries": matching_service.live_count()}
