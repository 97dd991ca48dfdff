import logging

import pytest

from ..params import AntennaConfig, IcConfig
from ..random_matrices import TRIAL_STREAM, ComplexGaussianGenerator


def pytest_configure(config):
    """Silence library logging during tests"""
    logging.getLogger().setLevel(logging.ERROR)
    logging.getLogger("blindalign").setLevel(logging.ERROR)


@pytest.fixture
def two_user_config() -> AntennaConfig:
    """The worked two-user example: M=3, (N, L) = (3, 1) and (3, 2)"""
    return AntennaConfig.from_pairs(3, [(3, 1), (3, 2)])


@pytest.fixture
def symmetric_ic_config() -> IcConfig:
    return IcConfig.from_triples([(3, 3, 1)] * 3)


@pytest.fixture
def trial_gen() -> ComplexGaussianGenerator:
    return ComplexGaussianGenerator(7, stream=TRIAL_STREAM)


@pytest.fixture
def output_dir(tmp_path):
    """Temporary directory for CLI output files"""
    path = tmp_path / "out"
    path.mkdir()
    yield path
