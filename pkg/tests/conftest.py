import numpy as np
import pytest

from agrivolt.config import bundled_path
from agrivolt.synthetic import SAMPLE_SITE
from agrivolt.weather import WeatherSeries, load_horizon, load_weather


@pytest.fixture(scope="session")
def sample_weather():
    return load_weather(bundled_path("sample_year.csv"), SAMPLE_SITE)


@pytest.fixture(scope="session")
def sample_horizon():
    return load_horizon(bundled_path("horizon.csv"))


@pytest.fixture(scope="session")
def simulator(sample_weather, sample_horizon):
    from agrivolt.model import Simulator
    return Simulator(sample_weather, sample_horizon)


def make_series(values: dict, start="2019-06-01T01:00:00", n=None, offset=60, site=SAMPLE_SITE):
    """Hourly series; ``start`` is the first interval end in UTC."""
    n = n or len(next(iter(values.values())))
    t = np.datetime64(start, "s") + np.arange(n) * np.timedelta64(3600, "s")
    cols = {k: np.asarray(values.get(k, np.zeros(n)), dtype=float)
            for k in ("ghi", "dhi", "par", "t_air", "precip")}
    return WeatherSeries(t, np.full(n, offset, dtype=np.int64), site=site, **cols)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
