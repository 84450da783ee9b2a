from importlib.resources import files

import pytest

from maxsr import load_panel


@pytest.fixture(scope="session")
def fixture_path() -> str:
    return str(files("maxsr").joinpath("data/industry5_monthly.csv"))


@pytest.fixture(scope="session")
def industry_panel(fixture_path):
    return load_panel(fixture_path)
