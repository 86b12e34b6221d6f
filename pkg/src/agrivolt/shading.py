"""Beam and diffuse shading of the inter-row ground strip and the panel faces.

Scene frame: ``x`` runs along the rows, ``y`` along the front-face normal,
``z`` up.  Row ``i`` is a vertical rectangle at ``y = i*d`` spanning
``x in [0, L]`` and ``z in [gap, gap + H]``.  The crop reference strip lies
between two adjacent rows (axis to axis, width ``d``).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np
import shapely

from .irradiance import (ALT_CENTERS, AZ_CENTERS, N_ALT, N_AZ,
                         PlaneIrradiance, SkyRadianceField, dome_directions)
from .solar import SolarPosition, SolarVector

TARGETS = ("ground", "front", "rear")


@dataclass(frozen=True)
class SceneConfig:
    n_rows: int = 3
    modules_per_row: int = 20
    stack_count: int = 2
    module_width: float = 1.974   # long side
    module_height: float = 0.992  # short side
    stacking: str = "landscape"
    mounting_gap: float = 0.8
    panel_azimuth: float = -90.0
    row_distance: float = 10.0
    latitude: float = 59.5549
    longitude: float = 16.7585

    def __post_init__(self):
        if self.n_rows < 0 or self.modules_per_row < 1 or self.stack_count < 1:
            raise ValueError("row and module counts must be positive")
        if self.modules_per_row % self.stack_count:
            raise ValueError("modules_per_row must be a multiple of stack_count")
        for name in ("module_width", "module_height", "row_distance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.mounting_gap < 0:
            raise ValueError("mounting_gap must be >= 0")
        if self.stacking not in ("landscape", "portrait"):
            raise ValueError("stacking must be 'landscape' or 'portrait'")

    @property
    def n_modules(self) -> int:
        return self.n_rows * self.modules_per_row

    @property
    def _horizontal(self) -> float:
        return self.module_width if self.stacking == "landscape" else self.module_height

    @property
    def _vertical(self) -> float:
        return self.module_height if self.stacking == "landscape" else self.module_width

    @property
    def row_length(self) -> float:
        return self.modules_per_row // self.stack_count * self._horizontal

    @property
    def panel_height(self) -> float:
        return self.stack_count * self._vertical

    @property
    def top_edge(self) -> float:
        return self.mounting_gap + self.panel_height

    @property
    def land_area(self) -> float:
        return self.n_rows * self.row_distance * self.row_length

    @property
    def strip_index(self) -> int:
        """Index k of the reference strip ``y in [k*d, (k+1)*d]``."""
        return max(0, min(self.n_rows // 2, self.n_rows - 2))

    def geometry_hash(self) -> str:
        """Hash of everything that changes the shading matrices."""
        d = asdict(self)
        d.pop("latitude")
        d.pop("longitude")
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_decision(self, azimuth: float, distance: float) -> "SceneConfig":
        return replace(self, panel_azimuth=float(azimuth), row_distance=float(distance))


@dataclass(frozen=True)
class ShadeSample:
    s_f_beam: float
    s_f_diffuse: float
    s_f_total: float


@dataclass(frozen=True, eq=False)
class ShadingMatrix:
    """Beam shading factors on the 1 deg dome; NaN marks horizon-masked cells."""
    values: np.ndarray  # (360 azimuth bins, 90 altitude bins)
    target: str
    scene_hash: str = ""

    @property
    def masked(self) -> np.ndarray:
        return np.isnan(self.values)

    def save(self, path) -> None:
        np.savez_compressed(path, values=self.values, target=self.target,
                            scene_hash=self.scene_hash)

    @classmethod
    def load(cls, path, expected_hash: str | None = None) -> "ShadingMatrix":
        with np.load(path, allow_pickle=False) as z:
            m = cls(z["values"], str(z["target"]), str(z["scene_hash"]))
        if expected_hash is not None and m.scene_hash != expected_hash:
            raise ValueError("cached shading matrix belongs to a different scene")
        return m


# ---------------------------------------------------------------------------
# geometry

def _scene_axes(panel_azimuth):
    """Row direction x and front normal y on (South, East) axes."""
    g = math.radians(panel_azimuth)
    y = np.array([math.cos(g), -math.sin(g)])
    x = np.array([-math.sin(g), -math.cos(g)])
    return x, y


def to_scene_frame(scene: SceneConfig, vec) -> np.ndarray:
    """Solar vector(s) (..., 3) in the scene (x, y, z) frame."""
    v = vec.as_array() if isinstance(vec, SolarVector) else np.asarray(vec, dtype=float)
    x, y = _scene_axes(scene.panel_azimuth)
    return np.stack([v[..., 0] * x[0] + v[..., 1] * x[1],
                     v[..., 0] * y[0] + v[..., 1] * y[1],
                     v[..., 2]], axis=-1)


def _ground_fraction(scene: SceneConfig, s: np.ndarray) -> np.ndarray:
    """Shaded fraction of the reference strip for scene-frame vectors s (N, 3)."""
    s = np.atleast_2d(s)
    n = len(s)
    out = np.zeros(n)
    if scene.n_rows == 0:
        return out
    ok = s[:, 2] > 0
    if not ok.any():
        return out
    sx, sy, sz = (s[ok, k][:, None] for k in range(3))
    d, L = scene.row_distance, scene.row_length
    z0, z1 = scene.mounting_gap, scene.top_edge
    y_rows = np.arange(scene.n_rows)[None, :] * d
    # shadow corners: bottom edge (z0) then top edge (z1)
    ax0, ay0 = -sx * z0 / sz, y_rows - sy * z0 / sz
    ax1, ay1 = -sx * z1 / sz, y_rows - sy * z1 / sz
    m = ok.sum()
    coords = np.empty((m, scene.n_rows, 4, 2))
    coords[..., 0, 0] = np.broadcast_to(ax0, (m, scene.n_rows))
    coords[..., 0, 1] = ay0
    coords[..., 1, 0] = np.broadcast_to(ax0 + L, (m, scene.n_rows))
    coords[..., 1, 1] = ay0
    coords[..., 2, 0] = np.broadcast_to(ax1 + L, (m, scene.n_rows))
    coords[..., 2, 1] = ay1
    coords[..., 3, 0] = np.broadcast_to(ax1, (m, scene.n_rows))
    coords[..., 3, 1] = ay1
    polys = shapely.polygons(coords.reshape(-1, 4, 2)).reshape(m, scene.n_rows)
    k = scene.strip_index
    strip = shapely.box(0.0, k * d, L, (k + 1) * d)
    shadow = shapely.union_all(polys, axis=1)
    area = shapely.area(shapely.intersection(shadow, strip))
    out[ok] = np.clip(area / (d * L), 0.0, 1.0)
    return out


def beam_shading_ground(scene: SceneConfig, vec: SolarVector):
    """Shaded area fraction of the reference strip (shadow union, clipped)."""
    v = vec.as_array()
    if np.any(v[..., 2] <= 0):
        raise ValueError("sun at or below the horizon: ground shading undefined")
    s = to_scene_frame(scene, v)
    res = _ground_fraction(scene, s.reshape(-1, 3)).reshape(s.shape[:-1])
    return float(res) if res.ndim == 0 else res


def _face_overlap(scene: SceneConfig, s: np.ndarray) -> np.ndarray:
    """Fraction of a front face covered by the next row's shadow (sun in front)."""
    sx, sy, sz = s[..., 0], s[..., 1], s[..., 2]
    L, H, d = scene.row_length, scene.panel_height, scene.row_distance
    front = sy > 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = np.where(front, d * sx / np.where(front, sy, 1.0), np.inf)
        tz = np.where(front, d * sz / np.where(front, sy, 1.0), np.inf)
    frac = (np.clip(L - np.abs(tx), 0.0, None) * np.clip(H - np.abs(tz), 0.0, None)) / (L * H)
    return np.where(front & (sz > 0), frac, 0.0)


def beam_shading_panel(scene: SceneConfig, vec: SolarVector, face: str = "front"):
    """Array-mean shaded fraction of the front or rear faces by neighbouring rows.

    Only ``n_rows - 1`` faces of each kind have a neighbour in the sun's way;
    the exposed end face is unshaded.  Returns 0 when the sun is behind the face.
    """
    if face not in ("front", "rear"):
        raise ValueError("face must be 'front' or 'rear'")
    s = to_scene_frame(scene, vec.as_array())
    if face == "rear":
        s = s * np.array([-1.0, -1.0, 1.0])
    if scene.n_rows < 2:
        res = np.zeros(s.shape[:-1])
    else:
        res = _face_overlap(scene, s) * (scene.n_rows - 1) / scene.n_rows
    return float(res) if res.ndim == 0 else res


# ---------------------------------------------------------------------------
# matrices

_DIRS = dome_directions()


def horizon_mask(horizon) -> np.ndarray:
    """True for dome cells whose center lies below the terrain horizon."""
    if horizon is None:
        return np.zeros((N_AZ, N_ALT), dtype=bool)
    elev = horizon.elevation_at(AZ_CENTERS)
    return ALT_CENTERS[None, :] < elev[:, None]


def _evaluate_grid(scene: SceneConfig, target: str) -> np.ndarray:
    s = to_scene_frame(scene, _DIRS.reshape(-1, 3))
    if target == "ground":
        vals = _ground_fraction(scene, s)
    elif target in ("front", "rear"):
        if target == "rear":
            s = s * np.array([-1.0, -1.0, 1.0])
        vals = (np.zeros(len(s)) if scene.n_rows < 2
                else _face_overlap(scene, s) * (scene.n_rows - 1) / scene.n_rows)
    else:
        raise ValueError(f"unknown target {target!r}")
    return vals.reshape(N_AZ, N_ALT)


def build_shading_matrix(scene: SceneConfig, target: str, horizon=None) -> ShadingMatrix:
    """Beam shading at every 1 deg cell center; cells under the horizon are NaN."""
    vals = _evaluate_grid(scene, target)
    vals[horizon_mask(horizon)] = np.nan
    return ShadingMatrix(vals, target, scene.geometry_hash())


def cell_index(altitude, azimuth):
    """Dome cell indices (azimuth bin, altitude bin) containing a direction."""
    az = np.asarray(azimuth, dtype=float)
    alt = np.asarray(altitude, dtype=float)
    ia = np.mod(np.floor(az + 180.0).astype(int), N_AZ)
    ie = np.clip(np.floor(alt).astype(int), 0, N_ALT - 1)
    return ia, ie


def lookup_shading(matrix: ShadingMatrix, pos: SolarPosition):
    """Nearest cell-center value; NaN means the cell is horizon-masked."""
    ia, ie = cell_index(pos.altitude, pos.azimuth)
    v = matrix.values[ia, ie]
    return float(v) if np.ndim(v) == 0 else v


def diffuse_shading(matrix: ShadingMatrix, radiance: SkyRadianceField,
                    tilt: float = 0.0, azimuth: float = 0.0) -> float:
    """Radiance-weighted mean of the beam matrix over the sky visible to a surface.

    Masked cells and cells behind the surface do not contribute.
    """
    t, g = math.radians(tilt), math.radians(azimuth)
    normal = np.array([math.sin(t) * math.cos(g), -math.sin(t) * math.sin(g), math.cos(t)])
    cos_t = _DIRS @ normal
    vis = (cos_t > 0) & ~matrix.masked
    w = np.where(vis, radiance.radiance * cos_t * radiance.solid_angle, 0.0)
    den = w.sum()
    if den <= 0:
        raise ValueError("no visible sky: diffuse shading factor undefined")
    return float(np.sum(np.where(vis, matrix.values, 0.0) * w) / den)


def composite_shading(s_beam: float, s_diffuse: float, plane: PlaneIrradiance) -> ShadeSample:
    """Overall shaded share of plane irradiance; the reflected part is unshaded."""
    ib, idf, ir = plane.i_beam, plane.i_diffuse, plane.i_reflected
    if min(ib, idf, ir) < 0:
        raise ValueError("plane irradiance components must be >= 0")
    tot = ib + idf + ir
    s_tot = 0.0 if tot == 0 else (s_beam * ib + s_diffuse * idf) / tot
    return ShadeSample(float(s_beam), float(s_diffuse), float(s_tot))


def canonical_matrices(scene: SceneConfig) -> dict[str, np.ndarray]:
    """Unmasked matrices for panel azimuth 0; other integer azimuths are rolls."""
    base = replace(scene, panel_azimuth=0.0)
    front = _evaluate_grid(base, "front")
    return {"ground": _evaluate_grid(base, "ground"), "front": front,
            "rear": np.roll(front, 180, axis=0)}


def rotate_matrix(values: np.ndarray, azimuth_deg: int) -> np.ndarray:
    """Matrix for a scene turned by an integer azimuth from a canonical one."""
    return np.roll(values, int(azimuth_deg), axis=0)
