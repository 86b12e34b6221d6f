"""Hourly weather and horizon-profile ingestion.

Weather files are delimited text (comma or tab) with a header naming the
columns ``time, ghi, dhi, par, t_air, precip``.  ``dhi``, ``par`` and
``precip`` are optional, either as whole columns or as empty cells.  ``time``
is ISO-8601 with a UTC offset and labels the *end* of a one-hour interval;
irradiance values are interval means.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta
from pathlib import Path

import numpy as np

from .solar import Site

REQUIRED_COLUMNS = ("time", "ghi", "t_air")
OPTIONAL_COLUMNS = ("dhi", "par", "precip")
DEFAULT_PAR_RATIO = 0.48


class WeatherError(Exception):
    """Base class for weather ingestion failures."""


class WeatherParseError(WeatherError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class WeatherStructureError(WeatherError):
    pass


class WeatherValidationError(WeatherError):
    def __init__(self, message, timestamps=()):
        self.timestamps = list(timestamps)
        shown = ", ".join(self.timestamps[:10])
        more = "" if len(self.timestamps) <= 10 else f" (+{len(self.timestamps) - 10} more)"
        super().__init__(f"{message}: {shown}{more}")


@dataclass(frozen=True, eq=False)
class WeatherSeries:
    """Validated hourly record for one site.

    ``time`` holds UTC interval-end instants (datetime64[s]); ``utc_offset``
    the per-record offset in minutes so the original labels can be written
    back verbatim.  Missing optional values are NaN and listed in
    ``missing``.
    """
    time: np.ndarray
    utc_offset: np.ndarray
    ghi: np.ndarray
    dhi: np.ndarray
    par: np.ndarray
    t_air: np.ndarray
    precip: np.ndarray
    site: Site
    missing: frozenset = field(default_factory=frozenset)

    def __len__(self):
        return len(self.time)

    @property
    def midpoints(self) -> np.ndarray:
        return self.time - np.timedelta64(1800, "s")

    @property
    def local_dates(self) -> np.ndarray:
        """Civil date (datetime64[D]) of each interval's midpoint."""
        local = self.midpoints + self.utc_offset.astype("timedelta64[m]")
        return local.astype("datetime64[D]")

    def timestamps(self) -> list[str]:
        return [_format_time(t, o) for t, o in zip(self.time, self.utc_offset)]

    def with_values(self, **kwargs) -> "WeatherSeries":
        for k, v in kwargs.items():
            if k in ("ghi", "dhi", "par", "t_air", "precip"):
                kwargs[k] = np.asarray(v, dtype=float)
        return replace(self, **kwargs)


@dataclass(frozen=True)
class DailyAggregate:
    date: date
    t_max: float
    t_min: float
    t_mean: float
    precipitation: float
    par_daily: float  # MJ/m2/day


@dataclass(frozen=True, eq=False)
class HorizonProfile:
    """Terrain horizon elevation versus azimuth (0 deg = North, clockwise)."""
    azimuth: np.ndarray
    elevation: np.ndarray

    def __post_init__(self):
        az = np.asarray(self.azimuth, dtype=float)
        el = np.asarray(self.elevation, dtype=float)
        if az.ndim != 1 or az.shape != el.shape or len(az) == 0:
            raise ValueError("horizon azimuth/elevation must be equal-length 1-D arrays")
        if np.any((az < 0) | (az >= 360)):
            raise ValueError("horizon azimuths must lie in [0, 360)")
        if np.any(np.diff(az) <= 0):
            raise ValueError("horizon azimuths must be strictly increasing")
        if np.any((el < 0) | (el >= 90)):
            raise ValueError("horizon elevations must lie in [0, 90)")
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "elevation", el)

    @classmethod
    def flat(cls) -> "HorizonProfile":
        return cls(np.array([0.0]), np.array([0.0]))

    def elevation_at(self, azimuth_south):
        """Horizon elevation for azimuths in the package convention (South = 0)."""
        north = np.mod(np.asarray(azimuth_south, dtype=float) + 180.0, 360.0)
        xp = np.concatenate([self.azimuth, [self.azimuth[0] + 360.0]])
        fp = np.concatenate([self.elevation, [self.elevation[0]]])
        # wrap-around: shift queries below the first sample by one turn
        q = np.where(north < self.azimuth[0], north + 360.0, north)
        return np.interp(q, xp, fp)


def _parse_time(text: str, line: int) -> tuple[np.datetime64, int]:
    try:
        ts = datetime.fromisoformat(text.strip())
    except ValueError as exc:
        raise WeatherParseError(f"bad timestamp {text!r}", line) from exc
    if ts.tzinfo is None or ts.utcoffset() is None:
        raise WeatherParseError(f"timestamp {text!r} lacks a UTC offset", line)
    off = ts.utcoffset()
    utc = ts.replace(tzinfo=None) - off
    return np.datetime64(utc, "s"), int(off.total_seconds() // 60)


def _format_time(t_utc: np.datetime64, offset_min: int) -> str:
    local = (t_utc + np.timedelta64(int(offset_min), "m")).astype(datetime)
    sign = "+" if offset_min >= 0 else "-"
    hh, mm = divmod(abs(int(offset_min)), 60)
    return f"{local.isoformat()}{sign}{hh:02d}:{mm:02d}"


def _parse_float(text: str, column: str, line: int, optional: bool) -> float:
    text = text.strip()
    if text == "" or text.lower() in ("nan", "na"):
        if optional:
            return math.nan
        raise WeatherParseError(f"missing required value in column {column!r}", line)
    try:
        return float(text)
    except ValueError as exc:
        raise WeatherParseError(f"non-numeric value {text!r} in column {column!r}", line) from exc


def _sniff_delimiter(header: str) -> str:
    if "\t" in header:
        return "\t"
    if "," in header:
        return ","
    if ";" in header:
        return ";"
    raise WeatherParseError("cannot detect delimiter (expected comma or tab)", 1)


def _read_rows(path):
    text = Path(path).read_text()
    lines = text.splitlines()
    # leading '#' lines are metadata
    start = 0
    while start < len(lines) and lines[start].lstrip().startswith("#"):
        start += 1
    if start >= len(lines):
        raise WeatherParseError("file has no header row", start + 1)
    delim = _sniff_delimiter(lines[start])
    reader = csv.reader(io.StringIO("\n".join(lines[start:])), delimiter=delim)
    rows = list(reader)
    return start, rows


def load_weather(path, site: Site) -> WeatherSeries:
    """Read, parse and validate an hourly weather file.

    Raises
    ------
    WeatherParseError
        Malformed row; the message carries the 1-based line number.
    WeatherStructureError
        Missing required column, non-uniform or non-increasing time step.
    WeatherValidationError
        ``dhi > ghi`` or negative irradiance; lists offending timestamps.
    """
    offset, rows = _read_rows(path)
    header = [h.strip().lower() for h in rows[0]]
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise WeatherStructureError(f"missing required column {col!r}")
    idx = {name: header.index(name) for name in header}
    n = len(rows) - 1
    if n == 0:
        raise WeatherStructureError("weather file has no data rows")
    time = np.empty(n, dtype="datetime64[s]")
    utc_off = np.empty(n, dtype=np.int64)
    values = {c: np.full(n, np.nan) for c in ("ghi", "dhi", "par", "t_air", "precip")}
    for k, row in enumerate(rows[1:]):
        line = offset + k + 2
        if len(row) != len(header):
            raise WeatherParseError(f"expected {len(header)} fields, found {len(row)}", line)
        time[k], utc_off[k] = _parse_time(row[idx["time"]], line)
        for c in values:
            if c in idx:
                values[c][k] = _parse_float(row[idx[c]], c, line, optional=c in OPTIONAL_COLUMNS)

    step = np.diff(time).astype(np.int64)
    if np.any(step != 3600):
        bad = int(np.flatnonzero(step != 3600)[0])
        raise WeatherStructureError(
            f"non-uniform time step at line {offset + bad + 3}: expected 1 h, "
            f"found {step[bad]} s")

    missing = {c for c in OPTIONAL_COLUMNS if c not in idx}
    missing |= {c for c in OPTIONAL_COLUMNS if c in idx and np.isnan(values[c]).any()}
    if "precip" not in idx:
        values["precip"][:] = 0.0
        missing.discard("precip")
    else:
        values["precip"] = np.nan_to_num(values["precip"], nan=0.0)
    series = WeatherSeries(time, utc_off, values["ghi"], values["dhi"], values["par"],
                           values["t_air"], values["precip"], site, frozenset(missing))
    validate(series)
    return series


def validate(series: WeatherSeries) -> None:
    stamps = series.timestamps
    neg = series.ghi < 0
    if neg.any():
        raise WeatherValidationError("negative ghi", [stamps()[i] for i in np.flatnonzero(neg)])
    bad = (series.dhi > series.ghi) | (series.dhi < 0)
    if bad.any():
        raise WeatherValidationError("dhi outside [0, ghi]",
                                     [stamps()[i] for i in np.flatnonzero(bad)])
    if np.any(series.par < 0):
        raise WeatherValidationError("negative par",
                                     [stamps()[i] for i in np.flatnonzero(series.par < 0)])


def write_weather(series: WeatherSeries, path, header_lines=()) -> None:
    """Write a series so that :func:`load_weather` reproduces it bit-exactly."""
    def fmt(v):
        return "" if math.isnan(v) else repr(float(v))

    with open(path, "w", newline="") as fh:
        for h in header_lines:
            fh.write(f"# {h}\n")
        fh.write("time,ghi,dhi,par,t_air,precip\n")
        for i, ts in enumerate(series.timestamps()):
            fh.write(",".join([ts, fmt(series.ghi[i]), fmt(series.dhi[i]), fmt(series.par[i]),
                               fmt(series.t_air[i]), fmt(series.precip[i])]) + "\n")


def load_horizon(path) -> HorizonProfile:
    """Two-column ``azimuth_deg, elevation_deg`` file (North = 0, clockwise)."""
    offset, rows = _read_rows(path)
    header = [h.strip().lower() for h in rows[0]]
    if header[:2] != ["azimuth_deg", "elevation_deg"]:
        raise WeatherStructureError("horizon header must be 'azimuth_deg, elevation_deg'")
    az, el = [], []
    for k, row in enumerate(rows[1:]):
        line = offset + k + 2
        if len(row) < 2:
            raise WeatherParseError("expected two fields", line)
        az.append(_parse_float(row[0], "azimuth_deg", line, False))
        el.append(_parse_float(row[1], "elevation_deg", line, False))
    return HorizonProfile(np.array(az), np.array(el))


def fill_par(series: WeatherSeries, ratio: float = DEFAULT_PAR_RATIO) -> WeatherSeries:
    """Replace missing PAR values by ``ratio * ghi``; present values are kept."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError("PAR/GHI ratio must lie in (0, 1]")
    par = np.where(np.isnan(series.par), ratio * series.ghi, series.par)
    return series.with_values(par=par, missing=series.missing - {"par"})


def daily_aggregates(series: WeatherSeries) -> list[DailyAggregate]:
    """One aggregate per civil day (interval midpoint in local time)."""
    if np.isnan(series.par).any():
        raise WeatherValidationError("par has missing values; call fill_par first",
                                     [series.timestamps()[i]
                                      for i in np.flatnonzero(np.isnan(series.par))])
    dates = series.local_dates
    uniq, start = np.unique(dates, return_index=True)
    bounds = list(start) + [len(dates)]
    out = []
    for k, d in enumerate(uniq):
        sl = slice(bounds[k], bounds[k + 1])
        t = series.t_air[sl]
        out.append(DailyAggregate(
            date=d.astype(date),
            t_max=float(t.max()),
            t_min=float(t.min()),
            t_mean=float(t.mean()),
            precipitation=float(series.precip[sl].sum()),
            par_daily=float(series.par[sl].sum() * 3600.0 / 1e6),
        ))
    return out


def day_index(series: WeatherSeries) -> tuple[np.ndarray, np.ndarray]:
    """Civil dates present in the series and, per hour, the index of its day."""
    dates = series.local_dates
    uniq, inverse = np.unique(dates, return_inverse=True)
    return uniq, inverse


def apply_horizon(series: WeatherSeries, visible: np.ndarray) -> WeatherSeries:
    """Zero irradiance and PAR for hours whose sun is below the local horizon."""
    hidden = ~np.asarray(visible, dtype=bool)
    return series.with_values(
        ghi=np.where(hidden, 0.0, series.ghi),
        dhi=np.where(hidden & ~np.isnan(series.dhi), 0.0, series.dhi),
        par=np.where(hidden & ~np.isnan(series.par), 0.0, series.par),
    )


def add_hours(t: np.datetime64, hours: int) -> np.datetime64:
    return t + np.timedelta64(hours * 3600, "s")


def utc_instant(local: datetime) -> np.datetime64:
    off = local.utcoffset() or timedelta(0)
    return np.datetime64(local.replace(tzinfo=None) - off, "s")
