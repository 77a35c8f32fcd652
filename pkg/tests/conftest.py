"""
Shared fixtures
"""
from pathlib import Path

import pytest

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture
def benchmark_plant_path() -> str:
    return str(DATA_DIR / "benchmark_plant.json")


@pytest.fixture
def benchmark_experiment_path() -> str:
    return str(DATA_DIR / "benchmark_experiment.json")
