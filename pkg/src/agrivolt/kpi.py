"""Land equivalent ratio, grid-power fluctuation and energy density."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .pv import power_std

REFERENCE_SPECIFIC_YIELD = 1000.0  # kWh/kWp/year, ground-mounted reference
REFERENCE_ENERGY_DENSITY = 58.0    # kWh/m2/year, ground-mounted reference


@dataclass(frozen=True)
class KpiResult:
    ler: float
    ler_crop_term: float
    ler_pv_term: float
    std_kw: float
    annual_energy: float    # kWh/year
    energy_density: float  # kWh/m2/year
    yield_t_ha: float = float("nan")
    reference_yield_t_ha: float = float("nan")
    scene_hash: str = ""
    weather_hash: str = ""
    crop: str = ""

    def as_row(self) -> dict:
        return asdict(self)


def land_equivalent_ratio(y_agri: float, y_ref: float, e_agri: float, e_ref: float):
    """Return (ler, crop term, pv term)."""
    if y_ref <= 0 or e_ref <= 0:
        raise ValueError("reference yield and reference energy must be > 0")
    crop = y_agri / y_ref
    pv = e_agri / e_ref
    return crop + pv, crop, pv


def agrivoltaic_energy_density(annual_energy_kwh: float, scene) -> float:
    """Annual energy per occupied land area (rows x distance x row length)."""
    area = scene.land_area
    if area <= 0:
        raise ValueError("scene occupies no land")
    return annual_energy_kwh / area


def reference_pv_energy(capacity_kwp: float) -> tuple[float, float]:
    """Reference annual energy (kWh/year) and area density (kWh/m2/year)."""
    if capacity_kwp <= 0:
        raise ValueError("capacity must be > 0")
    return REFERENCE_SPECIFIC_YIELD * capacity_kwp, REFERENCE_ENERGY_DENSITY


def compute_kpis(power_kw: np.ndarray, scene, y_agri: float, y_ref: float,
                 capacity_kwp: float, per_capacity: bool = False, **provenance) -> KpiResult:
    """Assemble the objective values for one configuration.

    ``per_capacity`` switches the energy ratio from area densities to
    specific yields (kWh/kWp).  A scene without rows contributes no energy term.
    """
    energy = float(np.sum(power_kw))
    std = power_std(power_kw)
    if scene.n_rows == 0:
        density = 0.0
        e_ratio_num, e_ref = 0.0, REFERENCE_ENERGY_DENSITY
    elif per_capacity:
        density = agrivoltaic_energy_density(energy, scene)
        ref_energy, _ = reference_pv_energy(capacity_kwp)
        e_ratio_num, e_ref = energy, ref_energy
    else:
        density = agrivoltaic_energy_density(energy, scene)
        e_ratio_num, e_ref = density, REFERENCE_ENERGY_DENSITY
    ler, crop, pv = land_equivalent_ratio(y_agri, y_ref, e_ratio_num, e_ref)
    return KpiResult(ler, crop, pv, std, energy, density, y_agri, y_ref, **provenance)
