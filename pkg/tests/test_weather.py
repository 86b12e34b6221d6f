import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agrivolt.synthetic import SAMPLE_SITE, generate_year
from agrivolt.weather import (HorizonProfile, WeatherParseError, WeatherStructureError,
                              WeatherValidationError, daily_aggregates, fill_par, load_horizon,
                              load_weather, write_weather)

from conftest import make_series

HEADER = "time,ghi,dhi,par,t_air,precip\n"


def _rows(n, start="2019-01-01T01:00:00+01:00"):
    t0 = np.datetime64(start[:19])
    out = []
    for k in range(n):
        ts = str(t0 + np.timedelta64(k, "h")) + start[19:]
        out.append(f"{ts},100.0,50.0,48.0,5.0,0.0\n")
    return out


def _write(tmp_path, lines, name="w.csv"):
    p = tmp_path / name
    p.write_text("".join(lines))
    return p


def test_full_year_length(sample_weather):
    assert len(sample_weather) == 8760


def test_leap_year_length(tmp_path):
    p = _write(tmp_path, [HEADER] + _rows(8784, "2020-01-01T01:00:00+01:00"))
    assert len(load_weather(p, SAMPLE_SITE)) == 8784
    assert len(daily_aggregates(load_weather(p, SAMPLE_SITE))) == 366


def test_dhi_above_ghi_names_timestamp(tmp_path):
    rows = _rows(5)
    rows[3] = rows[3].replace("100.0,50.0", "400.0,500.0")
    p = _write(tmp_path, [HEADER] + rows)
    with pytest.raises(WeatherValidationError) as exc:
        load_weather(p, SAMPLE_SITE)
    assert exc.value.timestamps == ["2019-01-01T04:00:00+01:00"]
    assert "2019-01-01T04:00:00+01:00" in str(exc.value)


def test_parse_error_carries_line_number(tmp_path):
    rows = _rows(4)
    rows[2] = rows[2].replace("5.0", "warm")
    p = _write(tmp_path, ["# comment\n", HEADER] + rows)
    with pytest.raises(WeatherParseError) as exc:
        load_weather(p, SAMPLE_SITE)
    assert exc.value.line == 5


def test_gap_is_structural_error(tmp_path):
    rows = _rows(6)
    del rows[2]
    with pytest.raises(WeatherStructureError):
        load_weather(_write(tmp_path, [HEADER] + rows), SAMPLE_SITE)


def test_missing_required_column(tmp_path):
    with pytest.raises(WeatherStructureError):
        load_weather(_write(tmp_path, ["time,ghi\n", "2019-01-01T01:00:00+01:00,0\n"]), SAMPLE_SITE)


def test_optional_columns_absent(tmp_path):
    p = _write(tmp_path, ["time\tghi\tt_air\n",
                          "2019-06-01T12:00:00+01:00\t600\t15\n",
                          "2019-06-01T13:00:00+01:00\t0\t14\n"])
    s = load_weather(p, SAMPLE_SITE)
    assert {"dhi", "par"} <= s.missing
    assert np.all(s.precip == 0)
    filled = fill_par(s)
    assert filled.par[0] == pytest.approx(288.0)
    assert filled.par[1] == 0.0


def test_fill_par_keeps_present_values():
    s = make_series({"ghi": [600.0, 600.0], "par": [250.0, np.nan]})
    out = fill_par(s, 0.48)
    assert out.par[0] == 250.0 and out.par[1] == pytest.approx(288.0)
    with pytest.raises(ValueError):
        fill_par(s, 0.0)


def test_roundtrip_bit_exact(tmp_path):
    s = generate_year()
    p = tmp_path / "rt.csv"
    write_weather(s, p, ["synthetic"])
    r = load_weather(p, SAMPLE_SITE)
    for f in ("ghi", "dhi", "par", "t_air", "precip"):
        assert np.array_equal(getattr(s, f), getattr(r, f))
    assert np.array_equal(s.time, r.time)
    assert r.timestamps() == s.timestamps()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 1200, allow_nan=False), min_size=1, max_size=50),
       st.floats(-40, 40))
def test_roundtrip_property(tmp_path_factory, ghi, t):
    n = len(ghi)
    s = make_series({"ghi": ghi, "dhi": np.array(ghi) / 3, "par": np.array(ghi) * 0.47,
                     "t_air": np.full(n, t), "precip": np.zeros(n)})
    p = tmp_path_factory.mktemp("rt") / "w.csv"
    write_weather(s, p)
    r = load_weather(p, SAMPLE_SITE)
    for f in ("ghi", "dhi", "par", "t_air"):
        assert np.array_equal(getattr(s, f), getattr(r, f))


def test_daily_aggregate_examples():
    # hour-ending labels: 01:00 .. 24:00 local belong to one civil day
    s = make_series({"par": np.full(24, 100.0), "t_air": np.arange(-2, 22) % 13 - 2},
                    start="2019-06-01T00:00:00")
    (day,) = daily_aggregates(s)
    assert day.par_daily == pytest.approx(8.64, rel=1e-12)
    assert day.t_min == -2 and day.t_max == 10

    z = make_series({"t_air": np.full(24, 3.0)}, start="2019-06-01T00:00:00")
    (d0,) = daily_aggregates(z)
    assert d0.par_daily == 0 and d0.t_max == d0.t_min == d0.t_mean == 3.0


def test_daily_aggregates_conserve_par(sample_weather):
    aggs = daily_aggregates(sample_weather)
    assert len(aggs) == 365
    total = sample_weather.par.sum() * 3600 / 1e6
    assert sum(a.par_daily for a in aggs) == pytest.approx(total, rel=1e-9)


def test_daily_aggregates_reject_missing_par():
    with pytest.raises(WeatherValidationError):
        daily_aggregates(make_series({"par": [np.nan, 1.0]}))


def test_horizon_profile(tmp_path, sample_horizon):
    assert len(sample_horizon.azimuth) == 36
    # South in package convention = 180 from North
    k = int(np.flatnonzero(sample_horizon.azimuth == 180)[0])
    assert sample_horizon.elevation_at(0.0) == pytest.approx(sample_horizon.elevation[k])
    # wrap between 350 and 0 North
    mid = sample_horizon.elevation_at(175.0)
    a, b = sample_horizon.elevation[-1], sample_horizon.elevation[0]
    assert mid == pytest.approx((a + b) / 2)
    bad = tmp_path / "h.csv"
    bad.write_text("az,el\n0,1\n")
    with pytest.raises(WeatherStructureError):
        load_horizon(bad)
    with pytest.raises(ValueError):
        HorizonProfile(np.array([0.0, 0.0]), np.array([1.0, 1.0]))


def test_sample_year_invariants(sample_weather):
    s = sample_weather
    assert np.all(s.dhi <= s.ghi) and np.all(s.dhi >= 0)
    assert np.all(np.diff(s.time).astype(int) == 3600)
    assert 400 < s.precip.sum() < 800
