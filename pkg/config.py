# config.py
import os

from dotenv import load_dotenv

load_dotenv()

# =========================
# ENV / CONFIG
# =========================

# --- Index defaults ---
FAST_THETA = int(os.getenv("FAST_THETA", "5"))
FAST_GRAN_MAX = int(os.getenv("FAST_GRAN_MAX", "512"))
FAST_CLEAN_INTERVAL = int(os.getenv("FAST_CLEAN_INTERVAL", "1000"))
FAST_DESCENT_FACTOR = int(os.getenv("FAST_DESCENT_FACTOR", "4"))

if FAST_THETA < 1:
    raise RuntimeError("FAST_THETA must be >= 1")
if FAST_GRAN_MAX < 2 or FAST_GRAN_MAX & (FAST_GRAN_MAX - 1):
    raise RuntimeError("FAST_GRAN_MAX must be a power of two >= 2")

# --- Benchmark ---
BENCH_SEED = int(os.getenv("BENCH_SEED", "42"))
# share of streamed objects re-checked against the brute-force matcher
BENCH_ORACLE_SAMPLE = float(os.getenv("BENCH_ORACLE_SAMPLE", "0.01"))
if not 0.0 <= BENCH_ORACLE_SAMPLE <= 1.0:
    raise RuntimeError("BENCH_ORACLE_SAMPLE must be within [0, 1]")

# --- Service ---
CLEANER_TICK_SECONDS = float(os.getenv("CLEANER_TICK_SECONDS", "1.0"))
CLEANER_DISABLE_THREAD = os.getenv("CLEANER_DISABLE_THREAD", "0") == "1"

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()
