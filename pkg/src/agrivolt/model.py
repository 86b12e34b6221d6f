"""End-to-end hourly pipeline: weather -> shading -> PV power and crop yield.

:class:`SkyContext` precomputes everything that depends only on the weather
(sun positions, PAR split, sky radiance weights) so that evaluating a new
array layout costs a few matrix products instead of one sky integral per
hour.
"""
from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

from . import crop as cropmod
from .irradiance import (ALT_CENTERS, AZ_CENTERS, CELL_SOLID_ANGLE, DEFAULT_ALBEDO, N_ALT, N_AZ,
                         _PEREZ93, _EPS_EDGES,
                         diffuse_fraction_ghi, diffuse_fraction_par, direct_normal, dome_directions,
                         sky_brightness, sky_clearness, transpose)
from .kpi import compute_kpis
from .pv import ModuleDatasheet, PowerSeries, array_power, fit_diode_params
from .shading import (SceneConfig, build_shading_matrix, canonical_matrices, cell_index,
                      horizon_mask, rotate_matrix)
from .solar import solar_position, solar_vector
from .weather import WeatherSeries, apply_horizon, daily_aggregates, fill_par

_DIRS = dome_directions().reshape(-1, 3)
_SIN_ALT = np.sin(np.radians(ALT_CENTERS))
_COS_ALT = np.cos(np.radians(ALT_CENTERS))


def weather_hash(series: WeatherSeries) -> str:
    h = hashlib.sha256()
    for a in (series.time, series.ghi, series.dhi, series.par, series.t_air, series.precip):
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def prepare_weather(series: WeatherSeries, horizon=None, par_ratio: float = 0.48):
    """Fill absent DHI/PAR, locate the sun and mask hours behind the terrain.

    Returns (series, solar position at interval midpoints, day-of-year per hour).
    """
    pos = solar_position(series.midpoints, series.site, horizon=horizon)
    doy = np.array([d.timetuple().tm_yday for d in series.local_dates.astype(object)])
    if np.isnan(series.dhi).any():
        est = diffuse_fraction_ghi(series.ghi, pos, doy)
        series = series.with_values(dhi=np.where(np.isnan(series.dhi), est, series.dhi),
                                    missing=series.missing - {"dhi"})
    if np.isnan(series.par).any():
        series = fill_par(series, par_ratio)
    series = apply_horizon(series, pos.above_horizon)
    return series, pos, doy


def _batched_params(eps, delta, zenith):
    """Vectorized all-weather gradation/indicatrix parameters (n, 5)."""
    eps = np.clip(eps, 1.0, 12.01 - 1e-9)
    delta = np.clip(delta, 0.01, 0.6)
    delta = np.where((eps > 1.065) & (eps < 2.8), np.maximum(delta, 0.2), delta)
    k = np.digitize(eps, _EPS_EDGES)
    c = _PEREZ93[k]  # (n, 5, 4)
    z = zenith[:, None]
    d = delta[:, None]
    p = c[..., 0] + c[..., 1] * z + d * (c[..., 2] + c[..., 3] * z)
    first = k == 0
    if first.any():
        c0 = c[first]
        zf, df = zenith[first], delta[first]
        p[first, 2] = np.exp((df * (c0[:, 2, 0] + c0[:, 2, 1] * zf)) ** c0[:, 2, 2]) - c0[:, 2, 3]
        p[first, 3] = -np.exp(df * (c0[:, 3, 0] + c0[:, 3, 1] * zf)) + c0[:, 3, 2] + df * c0[:, 3, 3]
    return p


def _luminance_batch(params, sun_vecs):
    a, b, c, d, e = (params[:, i:i + 1] for i in range(5))
    cos_z = _DIRS[:, 2][None, :]
    cos_g = np.clip(sun_vecs @ _DIRS.T, -1.0, 1.0)
    gamma = np.arccos(cos_g)
    lv = (1.0 + a * np.exp(b / cos_z)) * (1.0 + c * np.exp(d * gamma) + e * cos_g ** 2)
    top = lv.max(axis=1, keepdims=True)
    return np.maximum(lv, 1e-4 * np.where(top > 0, top, 1.0))


class SkyContext:
    """Weather-dependent quantities shared by every layout evaluation.

    Parameters
    ----------
    weather : WeatherSeries
    horizon : HorizonProfile, optional
    band_deg : int
        Altitude band (deg) holding every nonzero panel-face shading value.
        The default covers row distances down to 5 m for a 2 m high stack;
        evaluation raises if a scene needs a wider band.
    """

    def __init__(self, weather: WeatherSeries, horizon=None, albedo: float = DEFAULT_ALBEDO,
                 par_ratio: float = 0.48, band_deg: int = 30, chunk: int = 256):
        self.horizon = horizon
        self.albedo = albedo
        self.weather, self.pos, self.doy = prepare_weather(weather, horizon, par_ratio)
        w = self.weather
        self.n_hours = len(w)
        self.dates, self.day_of_hour = np.unique(w.local_dates, return_inverse=True)
        self.n_days = len(self.dates)
        split = diffuse_fraction_par(w.par, w.ghi, w.dhi, self.pos)
        self.par_beam = np.asarray(split.par_beam, dtype=float)
        self.par_diffuse = np.asarray(split.par_diffuse, dtype=float)
        self.sun_cell = cell_index(self.pos.altitude, self.pos.azimuth)
        self.mask = horizon_mask(horizon)
        self.band = int(band_deg)
        self._build_sky(chunk)
        self.aggregates = daily_aggregates(w)
        self.weather_hash = weather_hash(weather)

    def _build_sky(self, chunk):
        w = self.weather
        day = w.dhi > 0
        self.day_hours = np.flatnonzero(day)
        n = len(self.day_hours)
        vis = ~self.mask.reshape(-1)
        dom = CELL_SOLID_ANGLE.reshape(-1)
        sin_alt = np.broadcast_to(_SIN_ALT, (N_AZ, N_ALT)).reshape(-1)
        cos_alt = np.broadcast_to(_COS_ALT, (N_AZ, N_ALT)).reshape(-1)
        ground_w = sin_alt * dom * vis
        face_w = cos_alt * dom * vis
        band_cells = (np.arange(N_AZ)[:, None] * N_ALT + np.arange(self.band)[None, :]).reshape(-1)

        self.ground_diffuse = np.zeros((self.n_days, N_AZ * N_ALT))
        self.face_band = np.zeros((n, N_AZ * self.band), dtype=np.float32)
        self.face_azimuthal = np.zeros((n, N_AZ))

        hrs = self.day_hours
        alt = np.asarray(self.pos.altitude)[hrs]
        vec = solar_vector(replace(self.pos, altitude=alt, azimuth=np.asarray(self.pos.azimuth)[hrs]))
        sun = np.stack([vec.s_south, vec.s_east, vec.s_zenith], axis=-1)
        dni, dhi_adj = direct_normal(w.ghi[hrs], w.dhi[hrs], replace(self.pos, altitude=alt),
                                     self.doy[hrs])
        eps = np.nan_to_num(sky_clearness(dhi_adj, dni, alt), nan=1.0)
        delta = sky_brightness(dhi_adj, alt, self.doy[hrs])
        params = _batched_params(eps, delta, np.radians(90.0 - alt))
        below = alt <= 0
        for s in range(0, n, chunk):
            sl = slice(s, min(n, s + chunk))
            lv = _luminance_batch(params[sl], sun[sl])
            lv[below[sl]] = 1.0  # isotropic when the sun is down
            g = lv * ground_w
            g /= g.sum(axis=1, keepdims=True)
            g *= self.par_diffuse[hrs[sl]][:, None]
            days, inv = np.unique(self.day_of_hour[hrs[sl]], return_inverse=True)
            pick = sparse.csr_matrix((np.ones(len(inv)), (inv, np.arange(len(inv)))),
                                     shape=(len(days), len(inv)))
            self.ground_diffuse[days] += pick @ g
            f = lv * face_w
            self.face_band[sl] = f[:, band_cells]
            self.face_azimuthal[sl] = f.reshape(-1, N_AZ, N_ALT).sum(axis=2)

    # -- per-layout pieces -------------------------------------------------

    def ground_par_daily(self, ground: np.ndarray) -> np.ndarray:
        """Crop-available PAR per civil day (MJ/m2) under a ground beam matrix."""
        m = np.nan_to_num(ground, nan=0.0)
        sb = m[self.sun_cell]
        beam = self.par_beam * (1.0 - sb)
        hourly = np.bincount(self.day_of_hour, weights=beam, minlength=self.n_days)
        open_diffuse = np.bincount(self.day_of_hour, weights=self.par_diffuse, minlength=self.n_days)
        shaded_diffuse = self.ground_diffuse @ m.reshape(-1)
        return (hourly + open_diffuse - shaded_diffuse) * 3600.0 / 1e6

    def open_par_daily(self) -> np.ndarray:
        return np.bincount(self.day_of_hour, weights=self.par_beam + self.par_diffuse,
                           minlength=self.n_days) * 3600.0 / 1e6

    def face_diffuse_shading(self, matrix: np.ndarray, face_azimuth: float) -> np.ndarray:
        """Hourly diffuse shading factor of a vertical face (0 outside daytime)."""
        m = np.nan_to_num(matrix, nan=0.0)
        if np.any(m[:, self.band:] > 0):
            raise ValueError("face shading extends above the precomputed altitude band")
        cos_rel = np.maximum(0.0, np.cos(np.radians(AZ_CENTERS - face_azimuth)))
        den = self.face_azimuthal @ cos_rel
        num = self.face_band @ (m[:, :self.band] * cos_rel[:, None]).reshape(-1).astype(np.float32)
        out = np.zeros(self.n_hours)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[self.day_hours] = np.where(den > 0, num / den, 0.0)
        return np.clip(out, 0.0, 1.0)

    def face_irradiance(self, face_azimuth: float):
        w = self.weather
        return transpose(w.ghi, w.dhi, self.pos, 90.0, face_azimuth, self.albedo, self.doy)


@dataclass
class Evaluation:
    scene: SceneConfig
    power: PowerSeries
    crop_par: np.ndarray
    crops: dict
    kpis: dict
    trace: dict = field(default_factory=dict)


class Simulator:
    """Evaluates array layouts against one weather year.

    Shading matrices are cached per (distance bucket, geometry); a layout at
    another integer azimuth reuses them by rotation.
    """

    def __init__(self, weather: WeatherSeries, horizon=None, scene: SceneConfig | None = None,
                 module: ModuleDatasheet | None = None, crops=None, soil=None,
                 albedo: float = DEFAULT_ALBEDO, derate: float = 0.96, par_ratio: float = 0.48,
                 per_capacity: bool = False, distance_bucket: float = 0.1,
                 azimuth_bucket: float = 1.0, context: SkyContext | None = None):
        self.base_scene = scene or SceneConfig()
        self.module = module or ModuleDatasheet()
        self.params = fit_diode_params(self.module)
        self.crops = dict(cropmod.PRESETS if crops is None else crops)
        self.soil = soil or cropmod.SoilParams()
        self.derate = derate
        self.per_capacity = per_capacity
        self.distance_bucket = distance_bucket
        self.azimuth_bucket = azimuth_bucket
        self.ctx = context or SkyContext(weather, horizon, albedo, par_ratio)
        self.latitude = weather.site.latitude
        self._cache: dict = {}
        self._lock = threading.Lock()
        dates = [a.date for a in self.ctx.aggregates]
        self._dates = dates
        self._ra = np.array([float(cropmod.extraterrestrial_daily(d, self.latitude)) for d in dates])
        self._slices = {name: cropmod.season_slice(dates, p) for name, p in self.crops.items()}
        open_par = self.ctx.open_par_daily()
        self.reference = {name: self._run_crop(name, open_par) for name in self.crops}

    @property
    def capacity_kwp(self) -> float:
        return self.base_scene.n_modules * self.module.p_mp / 1000.0

    # -- matrices ------------------------------------------------------------

    def _canonical(self, scene: SceneConfig):
        key = (replace(scene, panel_azimuth=0.0).geometry_hash(),)
        hit = self._cache.get(key)
        if hit is None:
            hit = canonical_matrices(scene)
            with self._lock:
                hit = self._cache.setdefault(key, hit)
        return hit

    def matrices(self, scene: SceneConfig, bucketed: bool = True) -> dict:
        """Masked ground/front/rear beam matrices for a scene."""
        if not bucketed:
            return {t: build_shading_matrix(scene, t, self.ctx.horizon).values
                    for t in ("ground", "front", "rear")}
        az = round(scene.panel_azimuth / self.azimuth_bucket) * self.azimuth_bucket
        d = round(scene.row_distance / self.distance_bucket) * self.distance_bucket
        snapped = scene.with_decision(0.0, round(d, 6))
        canon = self._canonical(snapped)
        out = {}
        for t, v in canon.items():
            if float(az).is_integer():
                m = rotate_matrix(v, int(az))
            else:
                m = build_shading_matrix(scene.with_decision(az, d), t).values
            m = m.copy()
            m[self.ctx.mask] = np.nan
            out[t] = m
        return out

    # -- pieces --------------------------------------------------------------

    def power(self, scene: SceneConfig, mats: dict) -> tuple[PowerSeries, dict]:
        ctx = self.ctx
        phi = scene.panel_azimuth
        g = np.zeros(ctx.n_hours)
        parts = {}
        for face, az, weight in (("front", phi, 1.0), ("rear", phi + 180.0, self.module.bifaciality)):
            plane = ctx.face_irradiance(az)
            sb = np.nan_to_num(mats[face][ctx.sun_cell], nan=0.0)
            sd = ctx.face_diffuse_shading(mats[face], az)
            gf = plane.i_beam * (1.0 - sb) + plane.i_diffuse * (1.0 - sd) + plane.i_reflected
            parts[face] = gf
            g += weight * gf
        kw = array_power(self.params, g, ctx.weather.t_air, scene.n_modules, self.derate,
                         self.module.noct)
        return PowerSeries(ctx.weather.time, kw, {"scene_hash": scene.geometry_hash()}), parts

    def _run_crop(self, name: str, par_daily: np.ndarray) -> cropmod.CropResult:
        sl = self._slices[name]
        days = self.ctx.aggregates[sl]
        return cropmod.simulate_season(days, par_daily[sl], self.crops[name], self.latitude,
                                       self.soil, ra=self._ra[sl])

    def crop_yields(self, par_daily: np.ndarray) -> dict:
        return {name: self._run_crop(name, par_daily) for name in self.crops}

    def evaluate(self, scene: SceneConfig, bucketed: bool = True) -> Evaluation:
        mats = self.matrices(scene, bucketed)
        power, parts = self.power(scene, mats)
        par_daily = self.ctx.ground_par_daily(mats["ground"])
        crops = self.crop_yields(par_daily)
        kpis = {}
        for name, res in crops.items():
            kpis[name] = compute_kpis(
                power.power_kw, scene, res.yield_t_ha, self.reference[name].yield_t_ha,
                self.capacity_kwp, self.per_capacity, scene_hash=scene.geometry_hash(),
                weather_hash=self.ctx.weather_hash, crop=name)
        return Evaluation(scene, power, par_daily, crops, kpis, {"g_front": parts["front"],
                                                                 "g_rear": parts["rear"]})


def simulate_power(scene: SceneConfig, weather: WeatherSeries, matrices=None, params=None,
                   horizon=None, module: ModuleDatasheet | None = None, derate: float = 0.96):
    """Hourly system power for one layout (convenience wrapper)."""
    sim = Simulator(weather, horizon, scene, module, crops={}, derate=derate)
    if params is not None:
        sim.params = params
    mats = matrices or sim.matrices(scene, bucketed=False)
    return sim.power(scene, mats)[0]


def simulate_yield(weather: WeatherSeries, ground_matrix, params: cropmod.CropParams,
                   horizon=None, soil=None) -> cropmod.CropResult:
    """Seasonal yield under a ground beam-shading matrix (360 x 90)."""
    ctx = SkyContext(weather, horizon)
    par = ctx.ground_par_daily(np.asarray(getattr(ground_matrix, "values", ground_matrix)))
    dates = [a.date for a in ctx.aggregates]
    sl = cropmod.season_slice(dates, params)
    return cropmod.simulate_season(ctx.aggregates[sl], par[sl], params,
                                   weather.site.latitude, soil)


def reference_yield(weather: WeatherSeries, params: cropmod.CropParams, horizon=None, soil=None):
    return simulate_yield(weather, np.zeros((N_AZ, N_ALT)), params, horizon, soil)
