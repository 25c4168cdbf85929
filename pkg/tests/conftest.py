import numpy as np
import pytest

from fedsim.datasets import generate_synthetic


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory):
    """Session-wide synthetic corpus in the real file layout."""
    target = tmp_path_factory.mktemp("corpus")
    generate_synthetic(target)
    return target


@pytest.fixture(scope="session")
def small_data_dir(tmp_path_factory):
    """Tiny corpus for fast end-to-end runs."""
    target = tmp_path_factory.mktemp("corpus-small")
    generate_synthetic(target, train_count=4000, test_count=1000)
    return target


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
