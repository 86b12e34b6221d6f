"""Simulation and design optimization of vertical bifacial agrivoltaic arrays."""

__version__ = "0.1.0"

from .crop import CropParams, CropResult, SoilParams  # noqa: E402
from .kpi import KpiResult, compute_kpis, land_equivalent_ratio  # noqa: E402
from .model import Simulator, SkyContext, simulate_power, simulate_yield  # noqa: E402
from .optimize import DecisionVector, OptimizerConfig, ParetoSolution, analyze, optimize  # noqa: E402
from .pv import ModuleDatasheet, fit_diode_params  # noqa: E402
from .shading import SceneConfig, ShadingMatrix, build_shading_matrix  # noqa: E402
from .solar import Site, solar_position  # noqa: E402
from .weather import WeatherSeries, load_horizon, load_weather  # noqa: E402

__all__ = [
    "CropParams", "CropResult", "DecisionVector", "KpiResult", "ModuleDatasheet",
    "OptimizerConfig", "ParetoSolution", "SceneConfig", "ShadingMatrix", "Simulator",
    "Site", "SkyContext", "SoilParams", "WeatherSeries", "analyze",
    "build_shading_matrix", "compute_kpis", "fit_diode_params", "land_equivalent_ratio",
    "load_horizon", "load_weather", "optimize", "simulate_power", "simulate_yield",
    "solar_position",
]
