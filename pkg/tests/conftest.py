import os
import sys
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

# Make sure the repo root is on PYTHONPATH so `import app` etc. works in CI
ROOT_DIR = Path(__file__).resolve().parents[1]
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))

FIXTURES = Path(__file__).resolve().parent / "fixtures"

# -----------------------------------------------------------------------------
# Environment for tests
# -----------------------------------------------------------------------------

# No background cleaner in tests; cleaning is driven explicitly
os.environ.setdefault("CLEANER_DISABLE_THREAD", "1")
os.environ.setdefault("FAST_GRAN_MAX", "64")
os.environ.setdefault("FAST_CLEAN_INTERVAL", "10")
os.environ.setdefault("LOG_LEVEL", "WARNING")

import app  # noqa: E402
from engines import matching_service  # noqa: E402
from engines.workload import load_tsv  # noqa: E402


@pytest.fixture(autouse=True)
def _reset_service_index():
    """Every test starts from an empty service index."""
    matching_service.reset_index()
    try:
        yield
    finally:
        matching_service.reset_index()


@pytest.fixture
def client():
    yield TestClient(app.app)


@pytest.fixture
def example_queries():
    """The nine-query running example, in insertion order."""
    return load_tsv(FIXTURES / "example1_queries.tsv", "queries")


@pytest.fixture
def example_object():
    return load_tsv(FIXTURES / "example1_objects.tsv", "objects")[0]
