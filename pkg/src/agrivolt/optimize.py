"""NSGA-II search over (panel azimuth, row distance) and Pareto-set analysis.

The evolutionary loop is the usual elitist non-dominated sorting scheme with
simulated binary crossover and bounded polynomial mutation.  Alongside the
population an external archive keeps at most ``population`` mutually
non-dominated points; when it overflows, the member with the smallest
exclusive hypervolume contribution is dropped, so the archive hypervolume
never decreases.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

AZIMUTH_BOUNDS = (-180.0, 0.0)
DISTANCE_BOUNDS = (5.0, 20.0)


@dataclass(frozen=True)
class DecisionVector:
    azimuth: float
    row_distance: float

    def __post_init__(self):
        if not AZIMUTH_BOUNDS[0] <= self.azimuth <= AZIMUTH_BOUNDS[1]:
            raise ValueError(f"azimuth {self.azimuth} outside {AZIMUTH_BOUNDS}")
        if not DISTANCE_BOUNDS[0] <= self.row_distance <= DISTANCE_BOUNDS[1]:
            raise ValueError(f"row distance {self.row_distance} outside {DISTANCE_BOUNDS}")


@dataclass(frozen=True)
class OptimizerConfig:
    population: int = 48
    generations: int = 60
    crossover_prob: float = 0.9
    crossover_eta: float = 15.0
    mutation_prob: float | None = None  # default 1/n_variables
    mutation_eta: float = 20.0
    seed: int = 1
    workers: int = 1
    objective: str = "multi"  # or "energy"
    crop: str = "potato"

    def __post_init__(self):
        if self.population < 8 or self.population % 2:
            raise ValueError("population must be even and >= 8")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if not 0 <= self.crossover_prob <= 1:
            raise ValueError("crossover_prob must lie in [0, 1]")
        if self.mutation_prob is not None and not 0 <= self.mutation_prob <= 1:
            raise ValueError("mutation_prob must lie in [0, 1]")
        if self.objective not in ("multi", "energy"):
            raise ValueError("objective must be 'multi' or 'energy'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class ParetoSolution:
    decision: DecisionVector
    ler: float
    ler_crop: float
    ler_pv: float
    std_kw: float
    energy_kwh: float
    generation: int
    evaluation: int

    @property
    def objectives(self) -> tuple[float, float, float]:
        return self.ler, self.std_kw, self.energy_kwh


# ---------------------------------------------------------------------------
# dominance, sorting, hypervolume

def dominates(a: np.ndarray, b: np.ndarray) -> bool:
    """True if ``a`` Pareto-dominates ``b`` (minimization)."""
    return bool(np.all(a <= b) and np.any(a < b))


def non_dominated_sort(f: np.ndarray) -> list[np.ndarray]:
    """Fronts as index arrays, best first (minimization)."""
    n = len(f)
    le = np.all(f[:, None, :] <= f[None, :, :], axis=2)
    lt = np.any(f[:, None, :] < f[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    count = dom.sum(axis=0)
    fronts = []
    current = np.flatnonzero(count == 0)
    assigned = np.zeros(n, dtype=bool)
    while current.size:
        fronts.append(current)
        assigned[current] = True
        count = count - dom[current].sum(axis=0)
        current = np.flatnonzero((count == 0) & ~assigned)
    return fronts


def crowding_distance(f: np.ndarray) -> np.ndarray:
    n, m = f.shape
    d = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for k in range(m):
        order = np.argsort(f[:, k], kind="stable")
        span = f[order[-1], k] - f[order[0], k]
        d[order[0]] = d[order[-1]] = np.inf
        if span > 0:
            d[order[1:-1]] += (f[order[2:], k] - f[order[:-2], k]) / span
    return d


def _grid(points: np.ndarray, ref: np.ndarray):
    """Compressed grid: per axis sorted breakpoints and cell widths up to ``ref``."""
    axes = []
    for k in range(points.shape[1]):
        v = np.unique(np.concatenate([np.minimum(points[:, k], ref[k]), [ref[k]]]))
        axes.append(v)
    return axes


def hypervolume_contributions(points: np.ndarray, ref: np.ndarray):
    """(total hypervolume, exclusive contribution per point), minimization.

    Exact on the grid spanned by the point coordinates.
    """
    points = np.asarray(points, dtype=float)
    n, m = points.shape
    if n == 0:
        return 0.0, np.zeros(0)
    axes = _grid(points, ref)
    widths = [np.diff(a) for a in axes]
    # cover[p][k][i]: point p dominates the grid interval i along axis k
    cover = [(points[:, k][:, None] <= axes[k][None, :-1]) for k in range(m)]
    if m == 1:
        vol = widths[0]
        count = cover[0].sum(axis=0)
        total = float(np.sum(vol * (count > 0)))
        contrib = cover[0].astype(float) @ (vol * (count == 1))
        return total, contrib
    letters = "ijklmn"[:m]
    spec = ",".join(f"p{c}" for c in letters) + "->" + "".join(letters)
    count = np.einsum(spec, *[c.astype(np.int32) for c in cover])
    vol = widths[0]
    for w in widths[1:]:
        vol = np.multiply.outer(vol, w)
    total = float(np.sum(vol * (count > 0)))
    only = vol * (count == 1)
    spec_c = ",".join(f"p{c}" for c in letters) + "," + "".join(letters) + "->p"
    contrib = np.einsum(spec_c, *[c.astype(float) for c in cover], only)
    return total, contrib


class Archive:
    """Bounded non-dominated archive with hypervolume-based truncation."""

    def __init__(self, capacity: int, ideal: np.ndarray, nadir: np.ndarray):
        self.capacity = capacity
        self.ideal = np.asarray(ideal, dtype=float)
        span = np.asarray(nadir, dtype=float) - self.ideal
        self.span = np.where(span > 0, span, 1.0)
        self.ref = np.full(len(self.ideal), 1.1)
        self.f: list[np.ndarray] = []
        self.items: list = []

    def normalize(self, f) -> np.ndarray:
        return (np.asarray(f, dtype=float) - self.ideal) / self.span

    def insert(self, f: np.ndarray, item) -> bool:
        f = np.asarray(f, dtype=float)
        for g in self.f:
            if np.all(g <= f):
                return False  # dominated or duplicate
        keep = [k for k, g in enumerate(self.f) if not dominates(f, g)]
        self.f = [self.f[k] for k in keep] + [f]
        self.items = [self.items[k] for k in keep] + [item]
        if len(self.f) > self.capacity:
            _, contrib = hypervolume_contributions(self.normalize(np.array(self.f)), self.ref)
            # ties: drop the oldest entry among the smallest contributors
            drop = int(np.flatnonzero(contrib == contrib.min())[0])
            del self.f[drop]
            del self.items[drop]
        return True

    def hypervolume(self) -> float:
        if not self.f:
            return 0.0
        return hypervolume_contributions(self.normalize(np.array(self.f)), self.ref)[0]


# ---------------------------------------------------------------------------
# variation operators

def sbx(rng, p1, p2, lo, hi, eta, prob):
    """Simulated binary crossover with bounds (Deb and Agrawal)."""
    c1, c2 = p1.copy(), p2.copy()
    if rng.random() > prob:
        return c1, c2
    for k in range(len(p1)):
        if rng.random() > 0.5 or abs(p1[k] - p2[k]) < 1e-14:
            continue
        y1, y2 = min(p1[k], p2[k]), max(p1[k], p2[k])
        u = rng.random()
        span = y2 - y1

        def child(beta_edge):
            alpha = 2.0 - beta_edge ** -(eta + 1.0)
            if u <= 1.0 / alpha:
                bq = (u * alpha) ** (1.0 / (eta + 1.0))
            else:
                bq = (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0))
            return bq

        bq1 = child(1.0 + 2.0 * (y1 - lo[k]) / span)
        bq2 = child(1.0 + 2.0 * (hi[k] - y2) / span)
        a = 0.5 * ((y1 + y2) - bq1 * span)
        b = 0.5 * ((y1 + y2) + bq2 * span)
        a, b = np.clip(a, lo[k], hi[k]), np.clip(b, lo[k], hi[k])
        if rng.random() < 0.5:
            a, b = b, a
        c1[k], c2[k] = a, b
    return c1, c2


def polynomial_mutation(rng, x, lo, hi, eta, prob):
    y = x.copy()
    for k in range(len(x)):
        if rng.random() >= prob:
            continue
        span = hi[k] - lo[k]
        d1 = (y[k] - lo[k]) / span
        d2 = (hi[k] - y[k]) / span
        u = rng.random()
        p = 1.0 / (eta + 1.0)
        if u < 0.5:
            val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)
            dq = val ** p - 1.0
        else:
            val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)
            dq = 1.0 - val ** p
        y[k] = np.clip(y[k] + dq * span, lo[k], hi[k])
    return y


# ---------------------------------------------------------------------------
# generic loop

@dataclass
class RunLog:
    hypervolume: list = field(default_factory=list)
    evaluations: int = 0
    history: list = field(default_factory=list)  # (generation, x, f)


def nsga2(evaluate: Callable[[np.ndarray], np.ndarray], bounds: Sequence[tuple[float, float]],
          config: OptimizerConfig, log: RunLog | None = None):
    """Minimize a vector objective over a box.

    ``evaluate`` maps an (n, d) array of decisions to an (n, m) objective
    array, preserving row order.  Returns (archive, log).
    """
    rng = np.random.default_rng(config.seed)
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    nvar = len(lo)
    pm = config.mutation_prob if config.mutation_prob is not None else 1.0 / nvar
    log = log or RunLog()
    pop_n = config.population

    x = lo + rng.random((pop_n, nvar)) * (hi - lo)
    f = np.asarray(evaluate(x), dtype=float)
    log.evaluations += pop_n
    log.history.extend((0, xi, fi) for xi, fi in zip(x, f))
    archive = Archive(pop_n, f.min(axis=0), f.max(axis=0))
    for k in range(pop_n):
        archive.insert(f[k], (x[k].copy(), 0, k))
    log.hypervolume.append(archive.hypervolume())

    rank, crowd = _rank_crowding(f)
    for gen in range(1, config.generations + 1):
        children = []
        while len(children) < pop_n:
            a = _tournament(rng, rank, crowd)
            b = _tournament(rng, rank, crowd)
            c1, c2 = sbx(rng, x[a], x[b], lo, hi, config.crossover_eta, config.crossover_prob)
            children.append(polynomial_mutation(rng, c1, lo, hi, config.mutation_eta, pm))
            children.append(polynomial_mutation(rng, c2, lo, hi, config.mutation_eta, pm))
        xc = np.array(children[:pop_n])
        fc = np.asarray(evaluate(xc), dtype=float)
        base = log.evaluations
        log.evaluations += pop_n
        log.history.extend((gen, xi, fi) for xi, fi in zip(xc, fc))
        for k in range(pop_n):
            archive.insert(fc[k], (xc[k].copy(), gen, base + k))
        log.hypervolume.append(archive.hypervolume())
        x, f = _environmental_selection(np.vstack([x, xc]), np.vstack([f, fc]), pop_n)
        rank, crowd = _rank_crowding(f)
    return archive, log


def _rank_crowding(f):
    rank = np.empty(len(f), dtype=int)
    crowd = np.empty(len(f))
    for r, front in enumerate(non_dominated_sort(f)):
        rank[front] = r
        crowd[front] = crowding_distance(f[front])
    return rank, crowd


def _tournament(rng, rank, crowd):
    i, j = rng.integers(0, len(rank), 2)
    if rank[i] != rank[j]:
        return i if rank[i] < rank[j] else j
    if crowd[i] != crowd[j]:
        return i if crowd[i] > crowd[j] else j
    return min(i, j)


def _environmental_selection(x, f, n):
    chosen = []
    for front in non_dominated_sort(f):
        if len(chosen) + len(front) <= n:
            chosen.extend(front.tolist())
            continue
        cd = crowding_distance(f[front])
        # larger crowding first, stable index as the final tie-break
        order = sorted(range(len(front)), key=lambda k: (-cd[k], front[k]))
        chosen.extend(front[k] for k in order[: n - len(chosen)])
        break
    idx = np.array(chosen)
    return x[idx], f[idx]


# ---------------------------------------------------------------------------
# agrivoltaic problem

class Problem:
    """Decision -> objectives through a :class:`~agrivolt.model.Simulator`.

    Evaluations are memoized per exact decision and run on a thread pool;
    results are gathered by index, so the outcome does not depend on the
    number of workers.
    """

    def __init__(self, simulator, crop: str = "potato", objective: str = "multi",
                 workers: int = 1, bucketed: bool = True):
        if crop not in simulator.crops:
            raise ValueError(f"unknown crop {crop!r}")
        self.sim = simulator
        self.crop = crop
        self.objective = objective
        self.workers = workers
        self.bucketed = bucketed
        self._memo: dict = {}

    def kpi(self, decision: DecisionVector):
        key = (float(decision.azimuth), float(decision.row_distance))
        hit = self._memo.get(key)
        if hit is None:
            scene = self.sim.base_scene.with_decision(*key)
            hit = self.sim.evaluate(scene, self.bucketed).kpis[self.crop]
            self._memo[key] = hit
        return hit

    def evaluate(self, decision: DecisionVector) -> tuple[float, float, float]:
        k = self.kpi(decision)
        return k.ler, k.std_kw, k.annual_energy

    def batch(self, x: np.ndarray) -> np.ndarray:
        decisions = [DecisionVector(float(a), float(d)) for a, d in x]
        if self.workers > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                kpis = list(pool.map(self.kpi, decisions))
        else:
            kpis = [self.kpi(d) for d in decisions]
        if self.objective == "energy":
            return np.array([[-k.annual_energy] for k in kpis])
        return np.array([[-k.ler, k.std_kw, -k.annual_energy] for k in kpis])


def evaluate(decision: DecisionVector, simulator, crop: str = "potato"):
    """Objective triple (LER, STD kW, annual energy kWh) for one decision."""
    return Problem(simulator, crop).evaluate(decision)


def optimize(config: OptimizerConfig, simulator, log: RunLog | None = None) -> list[ParetoSolution]:
    """Run the search and return the final archive sorted by row distance."""
    problem = Problem(simulator, config.crop, config.objective, config.workers)
    archive, log = nsga2(problem.batch, [AZIMUTH_BOUNDS, DISTANCE_BOUNDS], config, log)
    out = []
    for (x, gen, ev) in archive.items:
        dv = DecisionVector(float(x[0]), float(x[1]))
        k = problem.kpi(dv)
        out.append(ParetoSolution(dv, k.ler, k.ler_crop_term, k.ler_pv_term, k.std_kw,
                                  k.annual_energy, gen, ev))
    out.sort(key=lambda s: (s.decision.row_distance, s.decision.azimuth))
    return out


# ---------------------------------------------------------------------------
# analysis

def pearson(xs, ys) -> float:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size != y.size or x.size < 3:
        raise ValueError("pearson needs at least three paired samples")
    sx, sy = x.std(), y.std()
    if sx == 0 or sy == 0:
        raise ValueError("zero variance: correlation undefined")
    r = float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))
    return max(-1.0, min(1.0, r))


DECISION_COLUMNS = ("azimuth_deg", "distance_m")
OBJECTIVE_COLUMNS = ("ler", "std_kw", "energy_kwh")
ARCHIVE_COLUMNS = ("azimuth_deg", "distance_m", "ler", "ler_crop", "ler_pv", "std_kw", "energy_kwh")


def archive_rows(archive: Sequence[ParetoSolution]) -> list[dict]:
    return [{"azimuth_deg": s.decision.azimuth, "distance_m": s.decision.row_distance,
             "ler": s.ler, "ler_crop": s.ler_crop, "ler_pv": s.ler_pv, "std_kw": s.std_kw,
             "energy_kwh": s.energy_kwh} for s in archive]


def analyze(archive: Sequence[ParetoSolution], azimuth_bin: float = 10.0,
            distance_bin: float = 1.0) -> dict:
    """Tables for the Pareto projections, correlations, LER split and densities."""
    if not archive:
        raise ValueError("empty archive")
    rows = archive_rows(archive)
    cols = {c: np.array([r[c] for r in rows]) for c in ARCHIVE_COLUMNS}
    corr = []
    for dname in DECISION_COLUMNS:
        for oname in OBJECTIVE_COLUMNS:
            try:
                r = pearson(cols[dname], cols[oname])
                ok = True
            except ValueError:
                r, ok = float("nan"), False
            corr.append({"decision": dname, "objective": oname, "pearson": r, "defined": ok})
    decomposition = [{"distance_m": r["distance_m"], "azimuth_deg": r["azimuth_deg"],
                      "ler_crop": r["ler_crop"], "ler_pv": r["ler_pv"], "ler": r["ler"]}
                     for r in rows]
    az_edges = np.arange(AZIMUTH_BOUNDS[0], AZIMUTH_BOUNDS[1] + azimuth_bin, azimuth_bin)
    d_edges = np.arange(DISTANCE_BOUNDS[0], DISTANCE_BOUNDS[1] + distance_bin, distance_bin)
    az_hist, _ = np.histogram(cols["azimuth_deg"], az_edges)
    d_hist, _ = np.histogram(cols["distance_m"], d_edges)
    density = {
        "azimuth": [{"bin_lo": float(a), "bin_hi": float(b), "count": int(c)}
                    for a, b, c in zip(az_edges[:-1], az_edges[1:], az_hist)],
        "distance": [{"bin_lo": float(a), "bin_hi": float(b), "count": int(c)}
                     for a, b, c in zip(d_edges[:-1], d_edges[1:], d_hist)],
    }
    return {"solutions": rows, "correlations": corr, "decomposition": decomposition,
            "density": density}


def epsilon_violations(archive_f: np.ndarray, grid_f: np.ndarray, eps: float = 0.01):
    """Pairs (grid, member) where a grid point beats a member by more than
    ``eps`` (relative to the member's magnitude) in every objective."""
    a = np.asarray(archive_f, dtype=float)
    g = np.asarray(grid_f, dtype=float)
    tol = eps * np.abs(a)
    better = g[:, None, :] < a[None, :, :] - tol[None, :, :]
    return np.argwhere(np.all(better, axis=2))


def crossover_distance(values, crop_term, pv_term) -> float:
    """Row distance where the crop and PV terms of LER are equal (linear interpolation)."""
    v = np.asarray(values, dtype=float)
    diff = np.asarray(crop_term, dtype=float) - np.asarray(pv_term, dtype=float)
    for k in range(len(v) - 1):
        if diff[k] == 0:
            return float(v[k])
        if diff[k] * diff[k + 1] < 0:
            return float(v[k] - diff[k] * (v[k + 1] - v[k]) / (diff[k + 1] - diff[k]))
    if diff[-1] == 0:
        return float(v[-1])
    return float("nan")
