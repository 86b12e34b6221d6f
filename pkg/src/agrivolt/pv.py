"""Five-parameter single-diode module model and array power accounting.

The module is described by the De Soto et al. (2006) parameter set
(I_L, I_0, R_s, R_sh, a) at standard test conditions, fitted to the
datasheet's three I-V points, the maximum-power condition and the
open-circuit voltage temperature coefficient.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, least_squares

K_EV = 8.617333262e-5  # Boltzmann constant, eV/K
T_REF = 298.15
G_REF = 1000.0
EG_REF = 1.121  # eV, crystalline silicon
DEG_DT = -0.0002677


@dataclass(frozen=True)
class ModuleDatasheet:
    p_mp: float = 380.0
    v_mp: float = 40.2
    i_mp: float = 9.44
    v_oc: float = 49.5
    i_sc: float = 9.93
    efficiency: float = 0.1941
    width: float = 1.974
    height: float = 0.992
    bifaciality: float = 0.8
    beta_voc: float = -0.28   # %/degC
    alpha_isc: float = 0.048  # %/degC
    cells_in_series: int = 72
    noct: float = 45.0

    def __post_init__(self):
        if not (0 < self.v_mp < self.v_oc and 0 < self.i_mp < self.i_sc):
            raise ValueError("datasheet requires 0 < v_mp < v_oc and 0 < i_mp < i_sc")
        if abs(self.v_mp * self.i_mp - self.p_mp) > 0.01 * self.p_mp:
            raise ValueError("p_mp differs from v_mp * i_mp by more than 1%")
        if not 0 < self.bifaciality <= 1:
            raise ValueError("bifaciality must lie in (0, 1]")


@dataclass(frozen=True)
class DiodeParams:
    i_l: float
    i_0: float
    r_s: float
    r_sh: float
    a: float
    alpha_isc: float = 0.0  # A/K

    def __post_init__(self):
        if min(self.i_l, self.i_0, self.r_s, self.r_sh, self.a) <= 0:
            raise ValueError("diode parameters must be strictly positive")


class DiodeFitError(RuntimeError):
    def __init__(self, message, trajectory):
        self.trajectory = list(trajectory)
        super().__init__(f"{message} (final residual {self.trajectory[-1]:.3g})"
                         if self.trajectory else message)


def current_at(params: DiodeParams, v, t_cell=25.0, g=G_REF):
    """Terminal current at voltage ``v`` (scalar or array), solved per point."""
    il, i0, rs, rsh, a = translate(params, g, t_cell)

    def f(i, vv):
        vd = vv + i * rs
        return il - i0 * np.expm1(vd / a) - vd / rsh - i

    v = np.atleast_1d(np.asarray(v, dtype=float))
    out = np.empty_like(v)
    for k, vv in enumerate(v):
        lo, hi = -2 * il - 1.0, 2 * il + 1.0
        out[k] = brentq(f, lo, hi, args=(vv,), xtol=1e-13)
    return out if out.size > 1 else float(out[0])


def translate(params: DiodeParams, g, t_cell):
    """Parameters at irradiance ``g`` (W/m2) and cell temperature (degC)."""
    g = np.asarray(g, dtype=float)
    t = np.asarray(t_cell, dtype=float) + 273.15
    eg = EG_REF * (1.0 + DEG_DT * (t - T_REF))
    a = params.a * t / T_REF
    i0 = params.i_0 * (t / T_REF) ** 3 * np.exp(EG_REF / (K_EV * T_REF) - eg / (K_EV * t))
    il = g / G_REF * (params.i_l + params.alpha_isc * (t - T_REF))
    with np.errstate(divide="ignore", over="ignore"):
        rsh = np.where(g > 0, params.r_sh * G_REF / np.where(g > 0, g, 1.0), np.inf)
    return il, i0, params.r_s, rsh, a


def _log_lambertw_exp(x):
    """W(exp(x)) for large x without overflow (Newton on w + ln w = x)."""
    x = np.asarray(x, dtype=float)
    w = np.where(x > 1.0, x - np.log(np.maximum(x, 1.0)), np.exp(np.minimum(x, 1.0)) * 0.5)
    w = np.maximum(w, 1e-12)
    for _ in range(60):
        step = (w + np.log(w) - x) / (1.0 + 1.0 / w)
        w = np.maximum(w - step, 1e-300)
        if np.all(np.abs(step) <= 1e-14 * np.maximum(1.0, w)):
            break
    return w


def open_circuit_voltage(il, i0, rsh, a):
    il, i0, rsh, a = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (il, i0, rsh, a)))
    out = np.zeros(il.shape)
    ok = il > 0
    finite = ok & np.isfinite(rsh)
    if finite.any():
        r, ii, i00, aa = rsh[finite], il[finite], i0[finite], a[finite]
        x = np.log(i00 * r / aa) + r * (ii + i00) / aa
        out[finite] = r * (ii + i00) - aa * _log_lambertw_exp(x)
    inf = ok & ~np.isfinite(rsh)
    out[inf] = a[inf] * np.log1p(il[inf] / i0[inf])
    return np.maximum(out, 0.0)


def _mpp(il, i0, rs, rsh, a, tol=1e-6):
    """Golden-section search on the diode voltage; returns (p, v, i)."""
    il, i0, rsh, a = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (il, i0, rsh, a)))
    voc = open_circuit_voltage(il, i0, rsh, a)

    def power(vd):
        with np.errstate(divide="ignore", invalid="ignore"):
            i = il - i0 * np.expm1(vd / a) - np.where(np.isfinite(rsh), vd / rsh, 0.0)
        v = vd - i * rs
        return v * i, v, i

    lo = np.zeros_like(voc)
    hi = voc.copy()
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    scale = np.maximum(voc, 1e-12)
    for _ in range(200):
        if np.all(hi - lo <= tol * scale):
            break
        c = hi - gr * (hi - lo)
        d = lo + gr * (hi - lo)
        left = power(c)[0] > power(d)[0]
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
    p, v, i = power(0.5 * (lo + hi))
    p = np.where(il > 0, np.maximum(p, 0.0), 0.0)
    return p, v, i


def module_power(params: DiodeParams, g_effective, t_cell):
    """Maximum-power-point power (W) at effective irradiance and cell temperature."""
    g = np.asarray(g_effective, dtype=float)
    if np.any(g < 0):
        raise ValueError("effective irradiance must be >= 0")
    il, i0, rs, rsh, a = translate(params, g, t_cell)
    p = _mpp(il, i0, rs, rsh, a)[0]
    p = np.where(g > 0, p, 0.0)
    return float(p) if p.ndim == 0 else p


def fit_diode_params(sheet: ModuleDatasheet, max_nfev: int = 2000) -> DiodeParams:
    """Fit the five parameters to the datasheet.

    Conditions: short circuit, open circuit, the maximum-power point, zero
    power slope at that point and the Voc temperature coefficient.
    """
    isc, voc, imp, vmp = sheet.i_sc, sheet.v_oc, sheet.i_mp, sheet.v_mp
    alpha = sheet.alpha_isc / 100.0 * isc
    d_t = 10.0
    voc_hot = voc * (1.0 + sheet.beta_voc / 100.0 * d_t)
    trajectory = []

    def unpack(x):
        return np.exp(x)

    def residuals(x):
        il, i0, rs, rsh, a = unpack(x)
        vd = isc * rs
        r1 = il - i0 * np.expm1(vd / a) - vd / rsh - isc
        r2 = il - i0 * np.expm1(voc / a) - voc / rsh
        vd = vmp + imp * rs
        e = i0 / a * np.exp(vd / a)
        r3 = il - i0 * np.expm1(vd / a) - vd / rsh - imp
        didv = -(e + 1.0 / rsh) / (1.0 + rs * (e + 1.0 / rsh))
        r4 = (didv + imp / vmp) * vmp / isc
        p = DiodeParams(il, i0, rs, rsh, a, alpha)
        t_il, t_i0, _, t_rsh, t_a = translate(p, G_REF, 25.0 + d_t)
        v_hot = float(open_circuit_voltage(t_il, t_i0, t_rsh, t_a))
        r5 = (v_hot - voc_hot) / voc
        res = np.array([r1 / isc, r2 / isc, r3 / isc, r4, r5])
        trajectory.append(float(np.linalg.norm(res)))
        return res

    vt = K_EV * T_REF
    a0 = 1.1 * sheet.cells_in_series * vt
    x0 = np.log([isc, isc * np.exp(-voc / a0), 0.3, 500.0, a0])
    sol = least_squares(residuals, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                        max_nfev=max_nfev, method="lm")
    il, i0, rs, rsh, a = unpack(sol.x)
    res = residuals(sol.x)
    if not np.all(np.isfinite(res)) or np.max(np.abs(res[:3])) > 5e-3:
        raise DiodeFitError("single-diode fit did not converge", trajectory)
    return DiodeParams(float(il), float(i0), float(rs), float(rsh), float(a), alpha)


def cell_temperature(t_air, g_effective, noct: float = 45.0):
    """NOCT cell-temperature model."""
    return np.asarray(t_air, dtype=float) + (noct - 20.0) / 800.0 * np.asarray(g_effective)


def effective_irradiance(front, rear, front_shade, rear_shade, phi: float):
    """Front-face irradiance plus ``phi`` times rear-face irradiance, after shading."""
    if not 0.0 < phi <= 1.0:
        raise ValueError("bifaciality must lie in (0, 1]")
    gf = front.i_beam + front.i_diffuse + front.i_reflected
    gr = rear.i_beam + rear.i_diffuse + rear.i_reflected
    return gf * (1.0 - front_shade.s_f_total) + phi * gr * (1.0 - rear_shade.s_f_total)


@dataclass(frozen=True, eq=False)
class PowerSeries:
    """Hourly grid-injected power in kW."""
    time: np.ndarray
    power_kw: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.asarray(self.power_kw) < 0):
            raise ValueError("power must be >= 0")

    @property
    def annual_energy_kwh(self) -> float:
        return float(np.sum(self.power_kw))  # 1-h steps

    def write(self, path, header_lines=()):
        with open(path, "w") as fh:
            for h in header_lines:
                fh.write(f"# {h}\n")
            fh.write("time,power_kw\n")
            for t, p in zip(self.time.astype(str), self.power_kw):
                fh.write(f"{t}Z,{p:.6f}\n")


def power_std(series) -> float:
    """Sample standard deviation (1/(N-1)) of hourly power."""
    p = np.asarray(series.power_kw if isinstance(series, PowerSeries) else series, dtype=float)
    if p.size < 2:
        raise ValueError("power_std needs at least two samples")
    return float(np.std(p, ddof=1))


def array_power(params: DiodeParams, g_effective, t_air, n_modules: int,
                derate: float = 0.96, noct: float = 45.0):
    """System power in kW from per-hour effective irradiance and air temperature."""
    g = np.asarray(g_effective, dtype=float)
    tc = cell_temperature(t_air, g, noct)
    return module_power(params, g, tc) * n_modules * derate / 1000.0
