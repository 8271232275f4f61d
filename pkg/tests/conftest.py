import pytest

from ttubs.fixtures import adas_scenario, table3_schedule, table6_schedule, table8_schedule


@pytest.fixture(scope="session")
def adas():
    return adas_scenario()


@pytest.fixture(scope="session")
def table3(adas):
    return table3_schedule(adas)


@pytest.fixture(scope="session")
def table6(adas):
    return table6_schedule(adas)


@pytest.fixture(scope="session")
def table8(adas):
    return table8_schedule(adas)
