from pathlib import Path

import pytest

from qexit import generate_synthetic_dataset, generate_synthetic_ensemble

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def small_ensemble():
    return generate_synthetic_ensemble(num_trees=40, max_depth=3, num_features=6, seed=7)


@pytest.fixture(scope="session")
def small_data(small_ensemble):
    return generate_synthetic_dataset(small_ensemble, num_queries=12, seed=11,
                                      docs_per_query=(5, 15))
