import math

import numpy as np
import pvlib
import pytest
from hypothesis import given, settings, strategies as st

from agrivolt.irradiance import PlaneIrradiance
from agrivolt.pv import (DiodeFitError, ModuleDatasheet, PowerSeries, array_power,
                         cell_temperature, current_at, effective_irradiance, fit_diode_params,
                         module_power, open_circuit_voltage, power_std, translate, _mpp)
from agrivolt.shading import SceneConfig, ShadeSample
from agrivolt.solar import solar_position

from conftest import make_series

SHEET = ModuleDatasheet()


@pytest.fixture(scope="module")
def params():
    return fit_diode_params(SHEET)


def test_datasheet_closure(params):
    assert current_at(params, 0.0) == pytest.approx(9.93, rel=0.005)
    assert abs(current_at(params, 49.5)) <= 0.005 * 9.93
    v = np.linspace(0, 49.5, 2000)
    p = v * current_at(params, v)
    assert p.max() == pytest.approx(380.0, rel=0.01)
    assert module_power(params, 1000.0, 25.0) == pytest.approx(380.0, rel=0.01)


def test_mpp_matches_pvlib_singlediode(params):
    for g, t in ((1000, 25), (500, 25), (200, 10), (800, 55)):
        il, i0, rs, rsh, a = translate(params, g, t)
        ref = pvlib.pvsystem.singlediode(float(il), float(i0), rs, float(rsh), float(a),
                                         method="newton")
        ours, _, _ = _mpp(il, i0, rs, rsh, a)
        assert float(ours) == pytest.approx(float(ref["p_mp"]), rel=1e-6)
        assert float(open_circuit_voltage(il, i0, rsh, a)) == pytest.approx(
            float(ref["v_oc"]), rel=1e-8)


def test_power_examples(params):
    assert module_power(params, 0.0, 25.0) == 0.0
    assert module_power(params, 500.0, 25.0) == pytest.approx(190.0, rel=0.04)
    with pytest.raises(ValueError):
        module_power(params, -1.0, 25.0)


def test_iv_strictly_decreasing(params):
    v = np.linspace(0, 49.5, 300)
    assert np.all(np.diff(current_at(params, v)) < 0)


@settings(max_examples=60, deadline=None)
@given(g1=st.floats(0, 1400), g2=st.floats(0, 1400), t=st.floats(-20, 70))
def test_power_monotone_in_irradiance(params, g1, g2, t):
    lo, hi = sorted((g1, g2))
    assert module_power(params, lo, t) <= module_power(params, hi, t) + 1e-9


def test_voc_temperature_coefficient(params):
    il, i0, rs, rsh, a = translate(params, 1000.0, 35.0)
    v_hot = float(open_circuit_voltage(il, i0, rsh, a))
    assert v_hot == pytest.approx(49.5 * (1 - 0.0028 * 10), rel=1e-3)


def test_datasheet_validation_and_fit_error():
    with pytest.raises(ValueError):
        ModuleDatasheet(v_mp=50.0)
    with pytest.raises(DiodeFitError) as exc:
        fit_diode_params(SHEET, max_nfev=2)
    assert exc.value.trajectory


def test_effective_irradiance_examples():
    none = ShadeSample(0.0, 0.0, 0.0)
    full = ShadeSample(1.0, 1.0, 1.0)
    f = PlaneIrradiance(800.0, 0.0, 0.0)
    r = PlaneIrradiance(100.0, 0.0, 0.0)
    assert effective_irradiance(f, r, none, none, 0.8) == pytest.approx(880.0)
    assert effective_irradiance(f, r, full, full, 0.8) == 0.0
    assert effective_irradiance(PlaneIrradiance(0, 0, 0), PlaneIrradiance(200.0, 0, 0),
                                none, none, 0.8) == pytest.approx(160.0)


def test_cell_temperature_noct():
    assert cell_temperature(20.0, 800.0) == pytest.approx(45.0)


def test_power_std_examples():
    assert power_std(np.array([0.0, 2.0])) == pytest.approx(math.sqrt(2))
    assert power_std(np.full(10, 3.3)) == 0.0
    with pytest.raises(ValueError):
        power_std(np.array([1.0]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=2, max_size=60), st.floats(-10, 10))
def test_power_std_homogeneous(xs, c):
    x = np.array(xs)
    assert power_std(c * x) == pytest.approx(abs(c) * power_std(x), rel=1e-9, abs=1e-9)


def test_array_power_linear_in_module_count(params):
    g = np.array([0.0, 150.0, 600.0, 950.0])
    t = np.array([5.0, 10.0, 20.0, 25.0])
    one = array_power(params, g, t, 30)
    two = array_power(params, g, t, 60)
    assert np.allclose(two, 2 * one, rtol=1e-15)
    assert one[0] == 0.0


def test_power_series_energy_is_plain_sum():
    p = PowerSeries(np.arange(3).astype("datetime64[h]"), np.array([1.5, 2.0, 0.25]))
    assert p.annual_energy_kwh == 3.75
    with pytest.raises(ValueError):
        PowerSeries(np.arange(1).astype("datetime64[h]"), np.array([-1.0]))


def _clear_day():
    """Cloudless 21 June at the sample site, Haurwitz clear-sky GHI."""
    from agrivolt.synthetic import SAMPLE_SITE
    start = np.datetime64("2019-06-20T00:00:00")
    t = start + np.arange(1, 25 * 3 + 1) * np.timedelta64(3600, "s")
    pos = solar_position(t - np.timedelta64(1800, "s"), SAMPLE_SITE)
    sa = np.sin(np.radians(np.clip(pos.altitude, 0, 90)))
    ghi = np.where(sa > 0, 1098 * sa * np.exp(-0.057 / np.maximum(sa, 1e-3)), 0.0)
    return make_series({"ghi": ghi, "dhi": 0.15 * ghi, "par": 0.46 * ghi,
                        "t_air": np.full(len(t), 18.0)}, start=str(t[0]))


def test_east_west_twin_peak():
    from agrivolt.model import simulate_power
    series = _clear_day()
    power = simulate_power(SceneConfig(panel_azimuth=-90.0), series).power_kw
    day = power[24:48]  # the middle day, UTC hours
    noon = 10  # interval ending 11:00 UTC contains solar noon (~10:53 UTC)
    morning = day[:noon].max()
    afternoon = day[noon + 1:].max()
    assert day[noon] < morning and day[noon] < afternoon


def test_dark_year_gives_zero_power():
    from agrivolt.model import simulate_power
    n = 48
    series = make_series({"t_air": np.full(n, 10.0)}, n=n)
    assert not simulate_power(SceneConfig(), series).power_kw.any()
