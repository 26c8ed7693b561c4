"""Long-running index shared by the HTTP routes, plus the vacuum-cleaner thread."""

import logging
import threading
from typing import Dict, List, Optional, Tuple

import config
from engines.common import ContinuousQuery, DnfQuery, MatchResult, SpatioTextualObject
from engines.fast_index import CleanReport, FastIndex, IndexConfig

logger = logging.getLogger(__name__)


def default_config() -> IndexConfig:
    return IndexConfig(
        theta=config.FAST_THETA,
        gran_max=config.FAST_GRAN_MAX,
        clean_interval=config.FAST_CLEAN_INTERVAL,
        descent_factor=config.FAST_DESCENT_FACTOR,
    )


index_lock = threading.Lock()
index = FastIndex(default_config())
cleaner_thread: Optional[threading.Thread] = None
stop_event = threading.Event()


def reset_index(index_config: Optional[IndexConfig] = None) -> Dict:
    global index
    with index_lock:
        index = FastIndex(index_config or default_config())
        return index.stats()


def subscribe(q: ContinuousQuery) -> None:
    with index_lock:
        index.insert(q)


def subscribe_dnf(d: DnfQuery) -> List[ContinuousQuery]:
    with index_lock:
        return index.insert_dnf(d)


def unsubscribe(qid: str) -> bool:
    with index_lock:
        return index.remove(qid)


def publish(o: SpatioTextualObject) -> Tuple[MatchResult, int]:
    """Match one object; each published object is one logical time unit.

    Returns the result with the clock it was computed at.
    """
    with index_lock:
        index.clock += 1
        return index.match(o), index.clock


def live_count() -> int:
    with index_lock:
        return len(index)


def advance_clock(delta: int) -> int:
    with index_lock:
        index.clock += delta
        return index.clock


def run_cleaner_once() -> List[CleanReport]:
    """Run the clean steps owed since the last pass (one per clean interval)."""
    with index_lock:
        return index.advance(0)


def clean_now(steps: int = 1) -> List[CleanReport]:
    with index_lock:
        return [index.clean_step() for _ in range(steps)]


def get_stats() -> Dict:
    with index_lock:
        return index.stats()


def start_cleaner() -> None:
    global cleaner_thread
    if config.CLEANER_DISABLE_THREAD:
        logger.info("Vacuum cleaner disabled via env")
        return
    if cleaner_thread:
        return

    def _loop():
        while not stop_event.wait(config.CLEANER_TICK_SECONDS):
            try:
                reports = run_cleaner_once()
                if reports:
                    removed = sum(r.removed for r in reports)
                    logger.debug("Cleaner ran %d steps, removed %d queries", len(reports), removed)
            except Exception as exc:  # pragma: no cover - logged
                logger.exception("Vacuum cleaner failed: %s", exc)

    stop_event.clear()
    cleaner_thread = threading.Thread(target=_loop, name="fast-cleaner", daemon=True)
    cleaner_thread.start()
    logger.info("Vacuum cleaner started (tick=%ss)", config.CLEANER_TICK_SECONDS)


def stop_cleaner() -> None:
    global cleaner_thread
    stop_event.set()
    if cleaner_thread and cleaner_thread.is_alive():
        cleaner_thread.join(timeout=2)
    cleaner_thread = None
