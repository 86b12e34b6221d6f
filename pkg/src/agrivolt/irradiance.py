"""Beam/diffuse splitting, tilted-plane transposition and sky radiance.

* PAR diffuse fraction: Gu et al. (1999) correlation between the broadband
  diffuse transmittance ratio and the PAR diffuse fraction.
* GHI decomposition (only when DHI is absent): Erbs et al. (1982) hourly
  clearness-index regression.
* Transposition: Perez et al. (1990) anisotropic diffuse model with the
  "allsitescomposite1990" coefficient set.
* Sky radiance: Perez et al. (1993) all-weather model sampled on a 1 deg dome.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .solar import SolarPosition, extraterrestrial_normal, solar_vector

DEFAULT_ALBEDO = 0.2

# dome mesh: axis 0 = azimuth bins (-180..180, South = 0), axis 1 = altitude bins
N_AZ = 360
N_ALT = 90
AZ_CENTERS = np.arange(N_AZ) - 179.5
ALT_CENTERS = np.arange(N_ALT) + 0.5


def _cell_solid_angle():
    lo = np.radians(np.arange(N_ALT))
    hi = np.radians(np.arange(1, N_ALT + 1))
    band = (np.sin(hi) - np.sin(lo)) * np.radians(1.0)
    return np.broadcast_to(band, (N_AZ, N_ALT)).copy()


CELL_SOLID_ANGLE = _cell_solid_angle()  # sr, sums to 2*pi


def dome_directions() -> np.ndarray:
    """Unit vectors (South, East, Zenith) of every dome cell center, shape (360, 90, 3)."""
    az = np.radians(AZ_CENTERS)[:, None]
    alt = np.radians(ALT_CENTERS)[None, :]
    ca = np.cos(alt)
    return np.stack(np.broadcast_arrays(ca * np.cos(az), -ca * np.sin(az), np.sin(alt)), axis=-1)


@dataclass(frozen=True)
class PlaneIrradiance:
    i_beam: float | np.ndarray
    i_diffuse: float | np.ndarray
    i_reflected: float | np.ndarray
    face: str = "front"

    @property
    def total(self):
        return self.i_beam + self.i_diffuse + self.i_reflected


@dataclass(frozen=True)
class PARSplit:
    par_beam: float | np.ndarray
    par_diffuse: float | np.ndarray


@dataclass(frozen=True, eq=False)
class SkyRadianceField:
    radiance: np.ndarray  # (360, 90) W/m2/sr
    solid_angle: np.ndarray = CELL_SOLID_ANGLE

    def horizontal_integral(self) -> float:
        return float(np.sum(self.radiance * np.sin(np.radians(ALT_CENTERS))[None, :]
                            * self.solid_angle))


class IrradianceInconsistency(ValueError):
    pass


# ---------------------------------------------------------------------------
# decomposition

def gu_diffuse_fraction(q, altitude):
    """PAR diffuse fraction from the broadband ratio ``q = dhi/ghi``."""
    q = np.clip(np.asarray(q, dtype=float), 0.0, 1.0)
    b = np.radians(np.clip(altitude, 0.0, 90.0))
    one_q2 = 1.0 - q * q
    f = (1.0 + 0.3 * one_q2) * q / (1.0 + one_q2 * np.sin(b) ** 2 * np.cos(b) ** 3)
    return np.clip(f, 0.0, 1.0)


def diffuse_fraction_par(par, ghi, dhi, sun: SolarPosition) -> PARSplit:
    par = np.asarray(par, dtype=float)
    ghi = np.asarray(ghi, dtype=float)
    dhi = np.asarray(dhi, dtype=float)
    if np.any((ghi <= 0) & (par > 0)):
        raise IrradianceInconsistency("par > 0 while ghi = 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(ghi > 0, dhi / np.where(ghi > 0, ghi, 1.0), 1.0)
    f = gu_diffuse_fraction(q, sun.altitude)
    diffuse = np.where(par > 0, f * par, 0.0)
    beam = np.where(par > 0, par - diffuse, 0.0)
    if beam.ndim == 0:
        return PARSplit(float(beam), float(diffuse))
    return PARSplit(beam, diffuse)


def erbs_fraction(kt):
    """Hourly diffuse fraction as a function of clearness index."""
    kt = np.asarray(kt, dtype=float)
    mid = 0.9511 + kt * (-0.1604 + kt * (4.388 + kt * (-16.638 + kt * 12.336)))
    d = np.where(kt <= 0.22, 1.0 - 0.09 * kt, np.where(kt <= 0.8, mid, 0.165))
    return np.clip(d, 0.0, 1.0)


def clearness_index(ghi, sun: SolarPosition, doy, min_sin_alt=0.065):
    """kt = ghi / (I0n * sin(alt)); the altitude floor avoids blow-up near sunrise."""
    s = np.maximum(np.sin(np.radians(sun.altitude)), min_sin_alt)
    kt = np.asarray(ghi, dtype=float) / (extraterrestrial_normal(doy) * s)
    return np.clip(kt, 0.0, 1.0)


def diffuse_fraction_ghi(ghi, sun: SolarPosition, doy=172):
    ghi = np.asarray(ghi, dtype=float)
    kt = clearness_index(ghi, sun, doy)
    dhi = np.where((ghi > 0) & (np.asarray(sun.altitude) > 0), erbs_fraction(kt) * ghi, ghi)
    return float(dhi) if dhi.ndim == 0 else dhi


def direct_normal(ghi, dhi, sun: SolarPosition, doy):
    """DNI from the horizontal beam, capped at the extraterrestrial value.

    Returns (dni, dhi_adjusted): beam that would exceed the cap is returned
    to the diffuse component so that ``dni*sin(alt) + dhi = ghi`` holds.
    """
    ghi = np.asarray(ghi, dtype=float)
    dhi = np.asarray(dhi, dtype=float)
    alt = np.asarray(sun.altitude, dtype=float)
    sin_a = np.sin(np.radians(alt))
    up = alt > 0
    bh = np.where(up, np.maximum(ghi - dhi, 0.0), 0.0)
    cap = extraterrestrial_normal(doy)
    with np.errstate(divide="ignore", invalid="ignore"):
        dni = np.where(up, bh / np.where(up, sin_a, 1.0), 0.0)
    dni = np.minimum(dni, cap)
    dhi_adj = np.where(up, ghi - dni * sin_a, ghi)
    return dni, dhi_adj


# ---------------------------------------------------------------------------
# Perez 1990 transposition

_EPS_EDGES = np.array([1.065, 1.23, 1.5, 1.95, 2.8, 4.5, 6.2])
_F1 = np.array([
    [-0.008, 0.588, -0.062], [0.130, 0.683, -0.151], [0.330, 0.487, -0.221],
    [0.568, 0.187, -0.295], [0.873, -0.392, -0.362], [1.132, -1.237, -0.412],
    [1.060, -1.600, -0.359], [0.678, -0.327, -0.250]])
_F2 = np.array([
    [-0.060, 0.072, -0.022], [-0.019, 0.066, -0.029], [0.055, -0.064, -0.026],
    [0.109, -0.152, -0.014], [0.226, -0.462, 0.001], [0.288, -0.823, 0.056],
    [0.264, -1.127, 0.131], [0.156, -1.377, 0.251]])
_KAPPA = 1.041


def relative_airmass(altitude):
    """Kasten-Young (1989) relative optical air mass; NaN below the horizon."""
    z = 90.0 - np.asarray(altitude, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        am = 1.0 / (np.cos(np.radians(z)) + 0.50572 * (96.07995 - z) ** -1.6364)
    return np.where(z < 90.0, am, np.nan)


def sky_clearness(dhi, dni, altitude):
    """Perez sky clearness epsilon (NaN where dhi == 0)."""
    z = np.radians(90.0 - np.asarray(altitude, dtype=float))
    dhi = np.asarray(dhi, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        eps = ((dhi + dni) / dhi + _KAPPA * z ** 3) / (1.0 + _KAPPA * z ** 3)
    return np.where(dhi > 0, eps, np.nan)


def sky_brightness(dhi, altitude, doy):
    am = relative_airmass(altitude)
    return np.nan_to_num(np.asarray(dhi, dtype=float) * am / extraterrestrial_normal(doy))


def perez_coefficients(eps, delta, altitude):
    """Circumsolar (F1) and horizon (F2) brightening coefficients."""
    eps = np.nan_to_num(np.asarray(eps, dtype=float), nan=1.0)
    k = np.digitize(eps, _EPS_EDGES)
    z = np.radians(90.0 - np.asarray(altitude, dtype=float))
    f1c, f2c = _F1[k], _F2[k]
    f1 = np.maximum(0.0, f1c[..., 0] + f1c[..., 1] * delta + f1c[..., 2] * z)
    f2 = f2c[..., 0] + f2c[..., 1] * delta + f2c[..., 2] * z
    return f1, f2


def transpose(ghi, dhi, sun: SolarPosition, tilt, azimuth, albedo=DEFAULT_ALBEDO,
              doy=172, isotropic=False, face="front") -> PlaneIrradiance:
    """Irradiance components on a tilted plane.

    ``isotropic=True`` forces both anisotropy coefficients to zero.
    Below the horizon beam and circumsolar terms vanish and the diffuse
    part is isotropic.
    """
    if np.any(np.asarray(tilt) < 0) or np.any(np.asarray(tilt) > 90):
        raise ValueError("tilt must lie in [0, 90] degrees")
    if not 0.0 <= albedo <= 1.0:
        raise ValueError("albedo must lie in [0, 1]")
    ghi = np.asarray(ghi, dtype=float)
    alt = np.asarray(sun.altitude, dtype=float)
    up = alt > 0
    dni, dhi = direct_normal(ghi, dhi, sun, doy)
    t = np.radians(tilt)
    vec = solar_vector(sun)
    n_s = np.sin(t) * np.cos(np.radians(azimuth))
    n_e = -np.sin(t) * np.sin(np.radians(azimuth))
    cos_aoi = vec.s_south * n_s + vec.s_east * n_e + vec.s_zenith * np.cos(t)
    a = np.maximum(0.0, cos_aoi)
    beam = np.where(up, dni * a, 0.0)

    if isotropic:
        f1 = f2 = np.zeros_like(ghi)
    else:
        eps = sky_clearness(dhi, dni, alt)
        delta = sky_brightness(dhi, alt, doy)
        f1, f2 = perez_coefficients(eps, delta, alt)
        f1 = np.where(up, f1, 0.0)
        f2 = np.where(up, f2, 0.0)
    b = np.maximum(np.cos(np.radians(85.0)), np.sin(np.radians(alt)))
    sky = dhi * ((1.0 - f1) * (1.0 + np.cos(t)) / 2.0 + f1 * a / b + f2 * np.sin(t))
    sky = np.maximum(sky, 0.0)
    reflected = albedo * ghi * (1.0 - np.cos(t)) / 2.0
    out = [beam, sky, np.broadcast_to(reflected, np.shape(beam))]
    if np.ndim(beam) == 0:
        out = [float(x) for x in out]
    return PlaneIrradiance(*out, face=face)


def bifacial_plane_irradiance(ghi, dhi, sun: SolarPosition, panel_azimuth,
                              albedo=DEFAULT_ALBEDO, doy=172, isotropic=False):
    front = transpose(ghi, dhi, sun, 90.0, panel_azimuth, albedo, doy, isotropic, "front")
    rear = transpose(ghi, dhi, sun, 90.0, panel_azimuth + 180.0, albedo, doy, isotropic, "rear")
    return front, rear


# ---------------------------------------------------------------------------
# Perez 1993 all-weather sky radiance

# per clearness bin: rows a..e, columns x1..x4
_PEREZ93 = np.array([
    1.3525, -0.2576, -0.2690, -1.4366, -0.7670, 0.0007, 1.2734, -0.1233,
    2.8000, 0.6004, 1.2375, 1.0000, 1.8734, 0.6297, 0.9738, 0.2809,
    0.0356, -0.1246, -0.5718, 0.9938,
    -1.2219, -0.7730, 1.4148, 1.1016, -0.2054, 0.0367, -3.9128, 0.9156,
    6.9750, 0.1774, 6.4477, -0.1239, -1.5798, -0.5081, -1.7812, 0.1080,
    0.2624, 0.0672, -0.2190, -0.4285,
    -1.1000, -0.2515, 0.8952, 0.0156, 0.2782, -0.1812, -4.5000, 1.1766,
    24.7219, -13.0812, -37.7000, 34.8438, -5.0000, 1.5218, 3.9229, -2.6204,
    -0.0156, 0.1597, 0.4199, -0.5562,
    -0.5484, -0.6654, -0.2672, 0.7117, 0.7234, -0.6219, -5.6812, 2.6297,
    33.3389, -18.3000, -62.2500, 52.0781, -3.5000, 0.0016, 1.1477, 0.1062,
    0.4659, -0.3296, -0.0876, -0.0329,
    -0.6000, -0.3566, -2.5000, 2.3250, 0.2937, 0.0496, -5.6812, 1.8415,
    21.0000, -4.7656, -21.5906, 7.2492, -3.5000, -0.1554, 1.4062, 0.3988,
    0.0032, 0.0766, -0.0656, -0.1294,
    -1.0156, -0.3670, 1.0078, 1.4051, 0.2875, -0.5328, -3.8500, 3.3750,
    14.0000, -0.9999, -7.1406, 7.5469, -3.4000, -0.1078, -1.0750, 1.5702,
    -0.0672, 0.4016, 0.3017, -0.4844,
    -1.0000, 0.0211, 0.5025, -0.5119, -0.3000, 0.1922, 0.7023, -1.6317,
    19.0000, -5.0000, 1.2438, -1.9094, -4.0000, 0.0250, 0.3844, 0.2656,
    1.0468, -0.3788, -2.4517, 1.4656,
    -1.0500, 0.0289, 0.4260, 0.3590, -0.3250, 0.1156, 0.7781, 0.0025,
    31.0625, -14.5000, -46.1148, 55.3750, -7.2312, 0.4050, 13.3500, 0.6234,
    1.5000, -0.6426, 1.8564, 0.5636,
]).reshape(8, 5, 4)

_SIN_ALT = np.sin(np.radians(ALT_CENTERS))
_COS_ZETA = _SIN_ALT  # zenith-angle cosine of each altitude band
_DIRS = dome_directions()


def all_weather_params(eps, delta, sun_zenith_rad):
    """Gradation (a, b) and indicatrix (c, d, e) parameters.

    Inputs are clamped to the model's domain of validity.
    """
    eps = float(np.clip(eps, 1.0, 12.01 - 1e-9))
    delta = float(np.clip(delta, 0.01, 0.6))
    if 1.065 < eps < 2.8:
        delta = max(delta, 0.2)
    k = int(np.digitize(eps, _EPS_EDGES))
    c = _PEREZ93[k]
    z = float(sun_zenith_rad)
    a, b, cc, d, e = (c[i, 0] + c[i, 1] * z + delta * (c[i, 2] + c[i, 3] * z) for i in range(5))
    if k == 0:
        cc = np.exp((delta * (c[2, 0] + c[2, 1] * z)) ** c[2, 2]) - c[2, 3]
        d = -np.exp(delta * (c[3, 0] + c[3, 1] * z)) + c[3, 2] + delta * c[3, 3]
    return a, b, cc, d, e


def relative_luminance(params, sun_vec: np.ndarray, dirs=_DIRS, cos_zeta=None):
    a, b, c, d, e = params
    if cos_zeta is None:
        cos_zeta = dirs[..., 2]
    cos_g = np.clip(dirs @ sun_vec, -1.0, 1.0)
    gamma = np.arccos(cos_g)
    grad = 1.0 + a * np.exp(b / np.maximum(cos_zeta, 1e-6))
    ind = 1.0 + c * np.exp(d * gamma) + e * cos_g ** 2
    return grad * ind


def _positive(lv):
    top = float(np.max(lv))
    floor = 1e-4 * top if top > 0 else 1e-4
    return np.maximum(lv, floor)


def sky_radiance(ghi, dhi, sun: SolarPosition, doy=172) -> SkyRadianceField:
    """Relative all-weather radiance normalized to the horizontal diffuse.

    With the sun below the horizon and dhi > 0 an isotropic field is used.
    """
    dhi = float(dhi)
    if dhi <= 0:
        return SkyRadianceField(np.zeros((N_AZ, N_ALT)))
    alt = float(sun.altitude)
    if alt <= 0:
        lv = np.ones((N_AZ, N_ALT))
    else:
        dni, dhi_adj = direct_normal(ghi, dhi, sun, doy)
        eps = float(sky_clearness(dhi_adj, dni, alt))
        delta = float(sky_brightness(dhi_adj, alt, doy))
        v = solar_vector(sun)
        params = all_weather_params(eps, delta, np.radians(90.0 - alt))
        lv = _positive(relative_luminance(params, np.array([v.s_south, v.s_east, v.s_zenith])))
    scale = dhi / np.sum(lv * _SIN_ALT[None, :] * CELL_SOLID_ANGLE)
    return SkyRadianceField(lv * scale)
