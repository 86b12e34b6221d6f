"""Solar position, solar vector and daily extraterrestrial radiation.

Azimuth convention used for every user-facing angle in the package:
0 deg = South, East negative, West positive, range (-180, 180].  The solar
vector is expressed on (South, East, Zenith) axes, so its East component is
``-cos(alt) * sin(azimuth)`` in that convention.

The ephemeris follows the Meeus low-precision solar coordinates (the
formulation used by the NOAA solar calculator), accurate to roughly 0.01 deg
between 1950 and 2050.
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import date

import numpy as np

SOLAR_CONSTANT = 1367.0  # W/m2
GSC_MJ_MIN = 0.0820  # MJ/m2/min, FAO-56 solar constant

DEFAULT_DELTA_T = 69.0  # s, TT - UT around 2019


@dataclass(frozen=True)
class Site:
    latitude: float
    longitude: float
    elevation: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude out of range: {self.latitude}")
        if not -180.0 <= self.longitude <= 360.0:
            raise ValueError(f"longitude out of range: {self.longitude}")


@dataclass(frozen=True)
class SolarPosition:
    """Apparent solar altitude and azimuth (degrees).

    Fields may be scalars or equally shaped arrays.
    """
    altitude: np.ndarray | float
    azimuth: np.ndarray | float
    above_horizon: np.ndarray | bool = True


@dataclass(frozen=True)
class SolarVector:
    s_south: np.ndarray | float
    s_east: np.ndarray | float
    s_zenith: np.ndarray | float

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.s_south, self.s_east, self.s_zenith), axis=-1)


def _julian_day(time) -> np.ndarray:
    t = np.asarray(time, dtype="datetime64[ns]")
    unix_s = (t - np.datetime64("1970-01-01T00:00:00", "ns")) / np.timedelta64(1, "s")
    return unix_s / 86400.0 + 2440587.5


def refraction(true_altitude):
    """Atmospheric refraction correction in degrees (standard atmosphere).

    Piecewise model from the NOAA solar calculator; applied to the geometric
    altitude to obtain the apparent altitude.
    """
    e = np.asarray(true_altitude, dtype=float)
    out = np.zeros_like(e)
    te = np.tan(np.radians(np.where(np.abs(e) < 1e-6, 1e-6, e)))
    hi = (e > 5.0) & (e <= 85.0)
    out[hi] = 58.1 / te[hi] - 0.07 / te[hi] ** 3 + 0.000086 / te[hi] ** 5
    mid = (e > -0.575) & (e <= 5.0)
    em = e[mid]
    out[mid] = 1735.0 + em * (-518.2 + em * (103.4 + em * (-12.79 + em * 0.711)))
    lo = e <= -0.575
    out[lo] = -20.774 / te[lo]
    return out / 3600.0


def _sun_coordinates(jd, delta_t):
    """Declination (rad), equation of time (min) and orbit terms for JD (UT)."""
    jde = jd + delta_t / 86400.0
    T = (jde - 2451545.0) / 36525.0
    L0 = np.mod(280.46646 + T * (36000.76983 + 0.0003032 * T), 360.0)
    M = 357.52911 + T * (35999.05029 - 0.0001537 * T)
    e = 0.016708634 - T * (0.000042037 + 0.0000001267 * T)
    Mr = np.radians(M)
    C = (np.sin(Mr) * (1.914602 - T * (0.004817 + 0.000014 * T))
         + np.sin(2 * Mr) * (0.019993 - 0.000101 * T)
         + np.sin(3 * Mr) * 0.000289)
    omega = np.radians(125.04 - 1934.136 * T)
    lam = np.radians(L0 + C - 0.00569 - 0.00478 * np.sin(omega))
    eps0 = 23.0 + (26.0 + (21.448 - T * (46.815 + T * (0.00059 - T * 0.001813))) / 60.0) / 60.0
    eps = np.radians(eps0 + 0.00256 * np.cos(omega))
    decl = np.arcsin(np.sin(eps) * np.sin(lam))
    y = np.tan(eps / 2) ** 2
    L0r = np.radians(L0)
    eot = 4.0 * np.degrees(
        y * np.sin(2 * L0r) - 2 * e * np.sin(Mr) + 4 * e * y * np.sin(Mr) * np.cos(2 * L0r)
        - 0.5 * y * y * np.sin(4 * L0r) - 1.25 * e * e * np.sin(2 * Mr))
    return decl, eot


def solar_position(time, site: Site, delta_t: float = DEFAULT_DELTA_T,
                   apply_refraction: bool = True, horizon=None) -> SolarPosition:
    """Solar altitude and azimuth for UTC instants.

    Parameters
    ----------
    time : datetime64 array-like (UTC) or a single instant
    site : Site
    delta_t : float
        TT - UT offset in seconds.
    apply_refraction : bool
        Return apparent (refracted) altitude.
    horizon : HorizonProfile, optional
        When given, ``above_horizon`` also accounts for terrain elevation.
    """
    scalar = np.ndim(time) == 0
    jd = np.atleast_1d(_julian_day(time))
    decl, eot = _sun_coordinates(jd, delta_t)
    ut_minutes = np.mod(jd - 0.5, 1.0) * 1440.0
    tst = ut_minutes + eot + 4.0 * site.longitude
    ha = np.radians(tst / 4.0 - 180.0)
    lat = np.radians(site.latitude)
    cosz = np.sin(lat) * np.sin(decl) + np.cos(lat) * np.cos(decl) * np.cos(ha)
    alt = np.degrees(np.arcsin(np.clip(cosz, -1.0, 1.0)))
    # azimuth measured westward from South
    az = np.degrees(np.arctan2(np.sin(ha), np.cos(ha) * np.sin(lat) - np.tan(decl) * np.cos(lat)))
    if apply_refraction:
        alt = alt + refraction(alt)
    above = alt > 0.0
    if horizon is not None:
        above &= alt > horizon.elevation_at(az)
    if scalar:
        return SolarPosition(float(alt[0]), float(az[0]), bool(above[0]))
    return SolarPosition(alt, az, above)


def solar_vector(pos: SolarPosition) -> SolarVector:
    """Unit vector toward the sun on (South, East, Zenith) axes."""
    a = np.radians(pos.altitude)
    g = np.radians(pos.azimuth)
    ca = np.cos(a)
    return SolarVector(ca * np.cos(g), -ca * np.sin(g), np.sin(a))


def surface_normal(tilt, azimuth) -> np.ndarray:
    """Unit normal (South, East, Zenith) of a surface with given tilt/azimuth (deg)."""
    t = np.radians(tilt)
    g = np.radians(azimuth)
    st = np.sin(t)
    return np.stack(np.broadcast_arrays(st * np.cos(g), -st * np.sin(g), np.cos(t)), axis=-1)


def incidence_angle(vec: SolarVector, tilt, azimuth):
    """Angle (deg) between the solar vector and a surface normal, in [0, 180]."""
    if np.any(np.asarray(tilt) < 0) or np.any(np.asarray(tilt) > 90):
        raise ValueError("tilt must lie in [0, 90] degrees")
    n = surface_normal(tilt, azimuth)
    cos_t = vec.s_south * n[..., 0] + vec.s_east * n[..., 1] + vec.s_zenith * n[..., 2]
    return np.degrees(np.arccos(np.clip(cos_t, -1.0, 1.0)))


def day_of_year(d) -> int:
    return d.timetuple().tm_yday


def earth_sun_factor(doy):
    """FAO-56 inverse relative Earth-Sun distance dr."""
    return 1.0 + 0.033 * np.cos(2 * np.pi * np.asarray(doy, dtype=float) / 365.0)


def eccentricity_factor(doy):
    """Spencer (1971) eccentricity correction (r0/r)^2."""
    b = 2 * np.pi * (np.asarray(doy, dtype=float) - 1) / 365.0
    return (1.000110 + 0.034221 * np.cos(b) + 0.001280 * np.sin(b)
            + 0.000719 * np.cos(2 * b) + 0.000077 * np.sin(2 * b))


def extraterrestrial_normal(doy):
    """Extraterrestrial normal irradiance (W/m2) for day of year."""
    return SOLAR_CONSTANT * eccentricity_factor(doy)


def _ra_from_doy(doy, latitude):
    doy = np.asarray(doy, dtype=float)
    phi = np.radians(latitude)
    dr = earth_sun_factor(doy)
    decl = 0.409 * np.sin(2 * np.pi * doy / 365.0 - 1.39)
    ws = np.arccos(np.clip(-np.tan(phi) * np.tan(decl), -1.0, 1.0))
    ra = (24.0 * 60.0 / np.pi) * GSC_MJ_MIN * dr * (
        ws * np.sin(phi) * np.sin(decl) + np.cos(phi) * np.cos(decl) * np.sin(ws))
    return np.maximum(ra, 0.0)


def extraterrestrial_daily(day, latitude: float):
    """Daily extraterrestrial radiation Ra (MJ/m2/day), FAO-56 formulation.

    ``day`` is a ``datetime.date`` or an integer day of year (array allowed).
    """
    if isinstance(day, date):
        day = day_of_year(day)
    return _ra_from_doy(day, latitude)
