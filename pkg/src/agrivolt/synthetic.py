"""Synthetic hourly weather year for a high-latitude site.

Not observed data: clear-sky irradiance (Haurwitz) attenuated by a
stochastic cloud field, Erbs diffuse split, a seasonal/diurnal temperature
model and a two-state Markov precipitation chain.  A fixed seed makes the
bundled file reproducible.
"""
from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np

from .irradiance import erbs_fraction
from .solar import Site, extraterrestrial_normal, solar_position
from .weather import WeatherSeries

SAMPLE_SITE = Site(59.5549, 16.7585, 30.0)
SAMPLE_SEED = 20190101
UTC_OFFSET_MIN = 60


def _ar1(rng, n, phi, sigma):
    x = np.empty(n)
    x[0] = rng.normal(0.0, sigma / np.sqrt(1 - phi * phi))
    e = rng.normal(0.0, sigma, n)
    for k in range(1, n):
        x[k] = phi * x[k - 1] + e[k]
    return x


def generate_year(year: int = 2019, site: Site = SAMPLE_SITE, seed: int = SAMPLE_SEED) -> WeatherSeries:
    rng = np.random.default_rng(seed)
    tz = timezone(timedelta(minutes=UTC_OFFSET_MIN))
    start = datetime(year, 1, 1, 1, tzinfo=tz)
    n_days = (datetime(year + 1, 1, 1) - datetime(year, 1, 1)).days
    n = 24 * n_days
    t_utc = np.datetime64(start.astimezone(timezone.utc).replace(tzinfo=None), "s") \
        + np.arange(n) * np.timedelta64(3600, "s")
    mid = t_utc - np.timedelta64(1800, "s")
    pos = solar_position(mid, site)
    day = np.repeat(np.arange(n_days), 24)
    doy = day + 1
    local_hour = np.tile(np.arange(24) + 0.5, n_days)

    # precipitation: wet/dry Markov chain, gamma amounts
    wet = np.zeros(n_days, dtype=bool)
    for k in range(1, n_days):
        p = 0.58 if wet[k - 1] else 0.28
        wet[k] = rng.random() < p
    amount = np.where(wet, rng.gamma(0.9, 4.2, n_days), 0.0)
    start_h = rng.integers(0, 18, n_days)
    precip = np.zeros(n)
    for k in np.flatnonzero(wet):
        hrs = 24 * k + start_h[k] + np.arange(6)
        precip[hrs] = amount[k] / 6.0

    # cloudiness latent: seasonal bias, daily and hourly persistence
    season = np.cos(2 * np.pi * (np.arange(n_days) - 15) / n_days)  # +1 mid-winter
    z_day = _ar1(rng, n_days, 0.55, 0.8) - 0.9 * wet + 0.55 - 0.55 * season
    z = np.repeat(z_day, 24) + _ar1(rng, n, 0.85, 0.35)
    kc = 0.12 + 0.88 / (1.0 + np.exp(-1.6 * (z - 0.1)))

    sin_a = np.sin(np.radians(np.clip(pos.altitude, 0.0, 90.0)))
    clear = np.where(sin_a > 0, 1098.0 * sin_a * np.exp(-0.057 / np.maximum(sin_a, 1e-3)), 0.0)
    ghi = clear * kc
    kt = np.clip(ghi / (extraterrestrial_normal(doy) * np.maximum(sin_a, 0.065)), 0.0, 1.0)
    frac = erbs_fraction(kt)
    dhi = np.where(ghi > 0, frac * ghi, 0.0)
    par = ghi * (0.45 + 0.05 * frac)

    # temperature: seasonal mean, persistent anomalies, clear days widen the range
    t_mean = 7.25 - 10.25 * season + _ar1(rng, n_days, 0.75, 1.6)
    k_day = np.array([kc[24 * k + 8:24 * k + 16].mean() for k in range(n_days)])
    rng_amp = (3.0 + 7.0 * k_day) * (0.55 + 0.45 * (1 - season) / 2)
    t_air = (np.repeat(t_mean, 24)
             + np.repeat(rng_amp, 24) / 2 * np.sin(2 * np.pi * (local_hour - 9.0) / 24.0)
             + rng.normal(0.0, 0.3, n))

    r = lambda a: np.round(a, 2)  # noqa: E731
    return WeatherSeries(t_utc, np.full(n, UTC_OFFSET_MIN, dtype=np.int64), r(ghi), r(dhi),
                         r(par), r(t_air), r(precip), site, frozenset())


def sample_horizon():
    """Gently rolling terrain horizon, 1-2.5 deg (azimuth from North)."""
    az = np.arange(0.0, 360.0, 10.0)
    el = 1.75 + 0.5 * np.sin(np.radians(2 * az + 30)) + 0.25 * np.cos(np.radians(3 * az))
    return az, np.round(el, 2)
