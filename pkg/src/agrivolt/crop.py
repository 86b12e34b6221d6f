"""EPIC-style daily crop growth driven by crop-available PAR.

Yield over a season of N days::

    Y = HIA * sum_i BE * 0.001 * PAR_i * (1 - exp(-0.65 * LAI_i)) * REG_i

with REG_i the smallest of the water, temperature, aeration and nutrient
stress factors.  Water stress comes from an FAO-56 root-zone bucket fed by
precipitation and drained by Hargreaves-Samani reference evapotranspiration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from datetime import date
from typing import Callable, Sequence

import numpy as np

from .solar import extraterrestrial_daily
from .weather import DailyAggregate

MJ_TO_MM = 0.408  # latent-heat conversion of radiation to evaporation equivalent


class CropConfigError(ValueError):
    pass


class SeasonError(ValueError):
    pass


def decode_curve_point(encoded: float) -> tuple[float, float]:
    """Split an EPIC ``percent.fraction`` code, e.g. 15.01 -> (0.15, 0.01)."""
    whole = math.floor(encoded + 1e-9)
    frac = round(encoded - whole, 6)
    return whole / 100.0, frac


@dataclass(frozen=True)
class CropParams:
    name: str
    harvest_index: float
    biomass_energy_ratio: float
    t_base: float
    t_opt: float
    lai_max: float
    water_stress_yield_factor: float
    lai_decline_exponent: float
    decline_start_fraction: float
    lai_curve_point_1: float
    lai_curve_point_2: float
    sowing: tuple[int, int]   # (month, day)
    harvest: tuple[int, int]
    potential_heat_units: float

    def __post_init__(self):
        if not 0 < self.harvest_index <= 1:
            raise CropConfigError("harvest_index must lie in (0, 1]")
        if self.t_base >= self.t_opt:
            raise CropConfigError("t_base must be below t_opt")
        if not 0 < self.decline_start_fraction < 1:
            raise CropConfigError("decline_start_fraction must lie in (0, 1)")
        if self.potential_heat_units <= 0:
            raise CropConfigError("potential_heat_units must be > 0")
        if self.lai_max <= 0 or self.biomass_energy_ratio <= 0:
            raise CropConfigError("lai_max and biomass_energy_ratio must be > 0")
        if tuple(self.sowing) >= tuple(self.harvest):
            raise CropConfigError("sowing must precede harvest")
        self.curve_shape()  # validates the encoded points

    def curve_shape(self) -> tuple[float, float]:
        """(l1, l2) of HUF = f / (f + exp(l1 - l2 f)) through both decoded points."""
        (x1, y1), (x2, y2) = (decode_curve_point(self.lai_curve_point_1),
                              decode_curve_point(self.lai_curve_point_2))
        if not (0 < x1 < x2 < 1 and 0 < y1 < y2 < 1):
            raise CropConfigError("LAI curve points must decode to increasing pairs in (0, 1)")
        g1 = math.log(x1 / y1 - x1)
        g2 = math.log(x2 / y2 - x2)
        l2 = (g1 - g2) / (x2 - x1)
        if l2 <= 0:
            raise CropConfigError("LAI curve points admit no increasing logistic curve")
        return g1 + l2 * x1, l2

    def season(self, year: int) -> tuple[date, date]:
        return date(year, *self.sowing), date(year, *self.harvest)

    @classmethod
    def from_mapping(cls, data: dict, base: "CropParams | None" = None) -> "CropParams":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise CropConfigError(f"unknown crop parameters: {sorted(unknown)}")
        conv = {k: tuple(v) if k in ("sowing", "harvest") else v for k, v in data.items()}
        if base is None:
            return cls(**conv)
        return replace(base, **conv)


# Harvest dates are fixed; PHU is the mean heat-unit sum between sowing and
# harvest on the bundled sample year so that HUI approaches 1 at harvest.
OAT = CropParams(
    name="oat", harvest_index=0.42, biomass_energy_ratio=35.0, t_base=0.0, t_opt=15.0,
    lai_max=5.0, water_stress_yield_factor=0.21, lai_decline_exponent=1.0,
    decline_start_fraction=0.8, lai_curve_point_1=15.01, lai_curve_point_2=50.95,
    sowing=(4, 15), harvest=(8, 20), potential_heat_units=1910.0)

POTATO = CropParams(
    name="potato", harvest_index=0.95, biomass_energy_ratio=30.0, t_base=7.0, t_opt=20.0,
    lai_max=5.0, water_stress_yield_factor=0.95, lai_decline_exponent=2.0,
    decline_start_fraction=0.6, lai_curve_point_1=15.01, lai_curve_point_2=50.95,
    sowing=(5, 5), harvest=(9, 15), potential_heat_units=1140.0)

PRESETS = {"oat": OAT, "potato": POTATO}


@dataclass(frozen=True)
class SoilBucket:
    """Root-zone water store (mm)."""
    field_capacity: float
    wilting_point: float
    current_storage: float
    rooting_depth: float = 0.6
    depletion_fraction: float = 0.5

    def __post_init__(self):
        if not self.wilting_point <= self.current_storage <= self.field_capacity + 1e-9:
            raise ValueError("storage must lie between wilting point and field capacity")
        if self.field_capacity <= self.wilting_point:
            raise ValueError("field capacity must exceed wilting point")

    @classmethod
    def from_soil(cls, rooting_depth=0.6, available_water_capacity=150.0,
                  wilting_point=60.0, depletion_fraction=0.5, initial_fraction=1.0):
        taw = available_water_capacity * rooting_depth
        fc = wilting_point + taw
        return cls(fc, wilting_point, wilting_point + initial_fraction * taw,
                   rooting_depth, depletion_fraction)

    @property
    def taw(self) -> float:
        return self.field_capacity - self.wilting_point

    @property
    def depletion(self) -> float:
        return self.field_capacity - self.current_storage

    def stress(self) -> float:
        """FAO-56 Ks: 1 above the readily available threshold, linear to 0 at wilting."""
        raw = self.depletion_fraction * self.taw
        dr = self.depletion
        if dr <= raw:
            return 1.0
        return max(0.0, (self.taw - dr) / ((1.0 - self.depletion_fraction) * self.taw))


@dataclass(frozen=True)
class SoilParams:
    rooting_depth: float = 0.6
    available_water_capacity: float = 150.0  # mm/m
    wilting_point: float = 60.0              # mm in the root zone
    depletion_fraction: float = 0.5
    initial_fraction: float = 1.0

    def bucket(self) -> SoilBucket:
        return SoilBucket.from_soil(self.rooting_depth, self.available_water_capacity,
                                    self.wilting_point, self.depletion_fraction,
                                    self.initial_fraction)


@dataclass(frozen=True)
class DailyCropState:
    date: date
    hui: float
    lai: float
    water_stress: float
    temperature_stress: float
    aeration_stress: float
    nutrient_stress: float
    regulating_factor: float
    par_tot: float
    biomass_increment: float  # t/ha before harvest index
    et0: float
    soil_storage: float


@dataclass(frozen=True)
class CropResult:
    crop: str
    yield_t_ha: float
    harvest_index: float
    states: tuple = field(default_factory=tuple)

    @property
    def biomass_t_ha(self) -> float:
        return float(sum(s.biomass_increment for s in self.states))


def heat_units(t_max, t_min, t_base):
    return np.maximum(0.0, (np.asarray(t_max) + np.asarray(t_min)) / 2.0 - t_base)


def heat_unit_index(t_max: Sequence[float], t_min: Sequence[float], params: CropParams):
    """Cumulative HUI per day, clamped to [0, 1]."""
    if params.potential_heat_units <= 0:
        raise CropConfigError("potential_heat_units must be > 0")
    hu = heat_units(t_max, t_min, params.t_base)
    return np.clip(np.cumsum(hu) / params.potential_heat_units, 0.0, 1.0)


def lai_curve(hui, params: CropParams):
    """Potential LAI as a function of the heat unit index."""
    l1, l2 = params.curve_shape()
    f = np.clip(np.asarray(hui, dtype=float), 0.0, 1.0)

    def huf(x):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, x / (x + np.exp(l1 - l2 * x)), 0.0)

    dl = params.decline_start_fraction
    peak = params.lai_max * huf(np.float64(dl))
    rising = params.lai_max * huf(f)
    ratio = np.clip((1.0 - f) / (1.0 - dl), 0.0, None)
    declining = peak * ratio ** params.lai_decline_exponent
    out = np.where(f <= dl, rising, declining)
    return float(out) if out.ndim == 0 else out


def et0_hargreaves(agg: DailyAggregate, ra: float) -> float:
    """Reference evapotranspiration (mm/day); ``ra`` in MJ/m2/day."""
    if agg.t_max < agg.t_min:
        raise ValueError("t_max must be >= t_min")
    et0 = 0.0023 * MJ_TO_MM * ra * (agg.t_mean + 17.8) * math.sqrt(agg.t_max - agg.t_min)
    return max(0.0, et0)


def crop_coefficient(lai: float) -> float:
    """Kc rising from a bare-soil value with canopy cover."""
    return 0.3 + 0.85 * min(1.0, lai / 3.0)


def water_stress(bucket: SoilBucket, et0: float, precip: float, kc: float):
    """Advance the bucket one day and return (stress, new bucket).

    Rain enters first (excess above field capacity drains); stress is the
    FAO-56 Ks of the wetted store and actual ET = Ks * Kc * ET0.
    """
    storage = min(bucket.field_capacity, bucket.current_storage + max(0.0, precip))
    wetted = replace(bucket, current_storage=storage)
    ks = wetted.stress()
    eta = ks * kc * max(0.0, et0)
    storage = max(bucket.wilting_point, storage - eta)
    return ks, replace(bucket, current_storage=storage)


def temperature_stress(t_mean: float, params: CropParams) -> float:
    """Sine response rising from t_base to 1 at t_opt, mirrored above t_opt."""
    tb, to = params.t_base, params.t_opt
    if t_mean <= tb:
        return 0.0
    x = (t_mean - tb) / (to - tb)
    if x > 1.0:
        x = 2.0 - x
    return float(np.clip(math.sin(math.pi / 2.0 * x), 0.0, 1.0)) if x > 0 else 0.0


def adjusted_harvest_index(params: CropParams, water: Sequence[float], hui: Sequence[float]) -> float:
    """Harvest index reduced by mean water stress after leaf decline begins.

    When the season never reaches the decline point the whole-season mean is used.
    """
    water = np.asarray(water, dtype=float)
    hui = np.asarray(hui, dtype=float)
    if water.size == 0:
        return params.harvest_index
    late = hui > params.decline_start_fraction
    ws = water[late].mean() if late.any() else water.mean()
    return params.harvest_index * (1.0 - params.water_stress_yield_factor * (1.0 - ws))


def biomass_increment(par_tot: float, lai: float, reg: float, be: float) -> float:
    """Daily biomass (t/ha) from intercepted PAR."""
    return be * 0.001 * par_tot * (1.0 - math.exp(-0.65 * lai)) * reg


def crop_par(par_beam, par_diffuse, s_beam, s_diffuse) -> float:
    """Crop-available PAR (MJ/m2) summed over the given hours."""
    pb = np.asarray(par_beam, dtype=float)
    pdf = np.asarray(par_diffuse, dtype=float)
    w = pb * (1.0 - np.asarray(s_beam)) + pdf * (1.0 - np.asarray(s_diffuse))
    return float(np.sum(w) * 3600.0 / 1e6)


def _one(_agg):
    return 1.0


def simulate_season(days: Sequence[DailyAggregate], par_tot: Sequence[float],
                    params: CropParams, latitude: float, soil: SoilParams | None = None,
                    aeration: Callable[[DailyAggregate], float] = _one,
                    nutrient: Callable[[DailyAggregate], float] = _one,
                    ra: Sequence[float] | None = None) -> CropResult:
    """Run the daily loop over the season days.

    ``days`` and ``par_tot`` cover sowing to harvest.  The loop stops after
    the day on which HUI reaches 1.
    """
    if len(days) != len(par_tot):
        raise SeasonError("par_tot must have one value per season day")
    soil = soil or SoilParams()
    bucket = soil.bucket()
    hui = heat_unit_index([d.t_max for d in days], [d.t_min for d in days], params)
    if ra is None:
        ra = [float(extraterrestrial_daily(d.date, latitude)) for d in days]
    states = []
    prev_hui = 0.0
    for k, agg in enumerate(days):
        if prev_hui >= 1.0:
            break
        lai = float(lai_curve(hui[k], params))
        et0 = et0_hargreaves(agg, ra[k])
        ws, bucket = water_stress(bucket, et0, agg.precipitation, crop_coefficient(lai))
        ts = temperature_stress(agg.t_mean, params)
        aer = float(aeration(agg))
        nut = float(nutrient(agg))
        reg = min(ws, ts, aer, nut)
        states.append(DailyCropState(
            agg.date, float(hui[k]), lai, ws, ts, aer, nut, reg, float(par_tot[k]),
            biomass_increment(float(par_tot[k]), lai, reg, params.biomass_energy_ratio),
            et0, bucket.current_storage))
        prev_hui = hui[k]
    hia = adjusted_harvest_index(params, [s.water_stress for s in states], [s.hui for s in states])
    y = hia * sum(s.biomass_increment for s in states)
    return CropResult(params.name, float(y), float(hia), tuple(states))


def season_slice(dates: Sequence[date], params: CropParams) -> slice:
    """Indices of the season days within a list of consecutive civil dates."""
    if not dates:
        raise SeasonError("no days available")
    sow, harv = params.season(dates[0].year)
    if sow < dates[0] or harv > dates[-1]:
        raise SeasonError(f"season {sow}..{harv} lies outside the weather data")
    i0 = (sow - dates[0]).days
    i1 = (harv - dates[0]).days + 1
    return slice(i0, i1)
