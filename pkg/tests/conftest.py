from pathlib import Path

import pytest

from pointdata import read_campaign

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def nyu_campaign():
    return read_campaign(DATA_DIR / "nyu_142ghz_umi.pointdata.csv")


@pytest.fixture(scope="session")
def usc_campaign():
    return read_campaign(DATA_DIR / "usc_145ghz_umi.pointdata.csv")
