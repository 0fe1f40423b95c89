import sys
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from modelservice.app import create_app

SERVICE_DIR = Path(__file__).resolve().parents[1]
REPO = SERVICE_DIR.parent
FIXTURES = REPO / "tests" / "fixtures"


@pytest.fixture(scope="session")
def client() -> TestClient:
    return TestClient(create_app())


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
