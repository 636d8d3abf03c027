"""Reflected-path sampler with boundary local time.

Paths follow a projected Euler scheme: propose a Gaussian increment, project
any escaping proposal back onto the domain closure, and account the pushed
distance as boundary local time.  The timestep shrinks quadratically with
the clearance to the boundary and to the absorbing ball, with a hard floor
so the scheme never stalls at a tip.

Every increment is a pure function of (seed, path_index, step_index), so an
ensemble chunked over any number of workers is bit-identical to a serial
run; reductions always traverse paths in index order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng as _rng
from .blocks import Cut
from .geometry import (
    Disk,
    DomainSpec,
    SnowflakeCubes,
    clearance_many,
    contains,
    project_many,
    project_to_closure,
)
from .stats import BatchAccumulator

__all__ = [
    "CriterionOnlyFamilyError",
    "EstimateCI",
    "GreenCells",
    "GreenResult",
    "HarmonicResult",
    "PathOutcome",
    "PathStream",
    "SimConfig",
    "SimulationError",
    "estimate_green",
    "estimate_hitting_prob",
    "estimate_mean_exit",
    "estimate_u",
    "estimate_u_multi",
    "harmonic_measure",
    "local_time_profile",
    "run_ensemble",
    "run_path",
    "step",
    "worker_count",
]

# ensemble budget guard: max_time * n_paths must stay below this
_TIME_BUDGET = 1e9

LOWER_BOUND_ONLY = "LOWER_BOUND_ONLY"
TRUNCATION_BIAS = "TRUNCATION_BIAS"


class SimulationError(RuntimeError):
    """Numeric failure inside a path; carries the offending path index."""

    def __init__(self, message: str, path_index: int = -1) -> None:
        super().__init__(message)
        self.path_index = path_index


class CriterionOnlyFamilyError(ValueError):
    """Family supported by the series criteria but not by the sampler."""


@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    seed: int
    robin_c: float = 0.0
    dt_max: float = 1e-3
    dt_min: float = 1e-12
    kappa: float = 1.0
    max_time: float = 64.0
    max_steps: int = 1_000_000

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.robin_c < 0.0:
            raise ValueError("robin_c must be >= 0")
        if not (0.0 < self.dt_min <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_max")
        if self.kappa <= 0.0:
            raise ValueError("kappa must be > 0")
        if self.max_time <= 0.0:
            raise ValueError("max_time must be > 0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.max_time * self.n_paths > _TIME_BUDGET:
            raise ValueError("max_time * n_paths exceeds the ensemble budget")

    def to_payload(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "seed": self.seed,
            "robin_c": self.robin_c,
            "dt_max": self.dt_max,
            "dt_min": self.dt_min,
            "kappa": self.kappa,
            "max_time": self.max_time,
            "max_steps": self.max_steps,
        }


@dataclass(frozen=True)
class PathOutcome:
    T: float
    L: float
    absorbed: bool
    steps: int


@dataclass(frozen=True)
class EstimateCI:
    mean: float
    stderr: float
    n: int
    ci95: float
    truncated_fraction: float
    flags: tuple[str, ...] = ()

    def to_payload(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "n": self.n,
            "ci95": self.ci95,
            "truncated_fraction": self.truncated_fraction,
            "flags": list(self.flags),
        }


def worker_count() -> int:
    env = os.environ.get("ROBINSIM_THREADS", "")
    if env.strip():
        w = int(env)
        if w < 1:
            raise ValueError("ROBINSIM_THREADS must be >= 1")
        return w
    return os.cpu_count() or 1


class PathStream:
    """Single-path Gaussian stream keyed by (seed, path_index)."""

    def __init__(self, seed: int, path_index: int) -> None:
        self._key = _rng.path_keys(seed, np.array([path_index], dtype=np.int64))
        self.i = 0

    def normals(self, dim: int) -> np.ndarray:
        z = _rng.step_normals(self._key, self.i, dim)[0]
        self.i += 1
        return z


def _bstar_arrays(spec: DomainSpec) -> tuple[np.ndarray, float]:
    return np.asarray(spec.bstar.center_array, dtype=float), float(spec.bstar.radius)


def _check_family(spec: DomainSpec) -> None:
    if isinstance(spec, SnowflakeCubes):
        raise CriterionOnlyFamilyError(
            "snowflake cubes are a criterion-only family; no sampler support"
        )


def _check_start(spec: DomainSpec, x0: np.ndarray) -> None:
    center, radius = _bstar_arrays(spec)
    if float(np.linalg.norm(x0 - center)) <= radius:
        return
    _, corr, _ = project_to_closure(spec, x0)
    if corr > 0.0:
        raise ValueError("x0 lies outside the domain closure")


def step(
    spec: DomainSpec,
    state: tuple[np.ndarray, float, float],
    cfg: SimConfig,
    rng_stream: PathStream,
) -> tuple[np.ndarray, float, float]:
    """One projected-Euler move of a single path; returns (point, t, L)."""
    p, t, L = state
    p = np.asarray(p, dtype=float)
    center, radius = _bstar_arrays(spec)
    clear = float(clearance_many(spec, p[None, :])[0])
    near = min(clear, max(float(np.linalg.norm(p - center)) - radius, 0.0))
    dt = min(max(cfg.kappa * near * near, cfg.dt_min), cfg.dt_max)
    prop = p + math.sqrt(dt) * rng_stream.normals(spec.d)
    if not np.all(np.isfinite(prop)):
        raise SimulationError("non-finite proposal", path_index=-1)
    q, corr, _ = project_to_closure(spec, prop)
    return q, t + dt, L + corr


def _segment_sphere(
    p: np.ndarray, q: np.ndarray, center: np.ndarray, radius: float
) -> tuple[np.ndarray, np.ndarray]:
    """First intersection of segments p->q with the sphere.

    Returns (hit mask, fraction along the segment; 1.0 where no hit).
    """
    d = q - p
    f = p - center
    a = np.einsum("ij,ij->i", d, d)
    b = 2.0 * np.einsum("ij,ij->i", f, d)
    cc = np.einsum("ij,ij->i", f, f) - radius * radius
    disc = b * b - 4.0 * a * cc
    hit = (disc >= 0.0) & (a > 0.0)
    frac = np.ones_like(a)
    if np.any(hit):
        root = (-b[hit] - np.sqrt(disc[hit])) / (2.0 * a[hit])
        ok = (root >= 0.0) & (root <= 1.0)
        idx = np.flatnonzero(hit)
        hit[idx[~ok]] = False
        frac[idx[ok]] = root[ok]
    return hit, frac


# a step hook sees (global indices, old points, new points, effective dt,
# absorption fraction along the segment, 1.0 when none) and may return a
# mask of paths to retire early
StepHook = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray], Optional[np.ndarray]]


def _run_chunk(
    spec: DomainSpec,
    x0: np.ndarray,
    cfg: SimConfig,
    gidx: np.ndarray,
    out_T: np.ndarray,
    out_L: np.ndarray,
    out_absorbed: np.ndarray,
    out_steps: np.ndarray,
    hook: Optional[StepHook],
) -> None:
    """Advance one contiguous slice of the ensemble to completion.

    Retired lanes are parked with a zeroed timestep instead of being
    dropped each iteration; the arrays are compacted once enough lanes
    retire.  A lane's trajectory is a function of (seed, lane index, own
    step count) only, so neither parking nor compaction changes values.
    """
    d = spec.d
    center, radius = _bstar_arrays(spec)
    # fused navigation: one norm per step serves clearance, absorption
    # distance, membership, and projection
    fused = isinstance(spec, Disk) and not np.any(center)

    keys = _rng.path_keys(cfg.seed, gidx)
    P = np.tile(x0, (gidx.size, 1))
    n = gidx.size
    T = np.zeros(n)
    L = np.zeros(n)
    steps = np.zeros(n, dtype=np.int64)
    absorbed = np.zeros(n, dtype=bool)
    live = np.ones(n, dtype=bool)

    if float(np.linalg.norm(x0 - center)) <= radius:
        out_absorbed[gidx] = True
        return

    r = np.sqrt(np.einsum("ij,ij->i", P, P)) if fused else None
    horizon = cfg.max_time * (1.0 - 1e-12)
    s = 0
    while np.any(live) and s < cfg.max_steps:
        if fused:
            clear = spec.R - r
            db = r - radius
        else:
            clear = clearance_many(spec, P)
            db = np.sqrt(np.einsum("ij,ij->i", P - center, P - center)) - radius
        near = np.minimum(clear, np.maximum(db, 0.0))
        dt = np.clip(cfg.kappa * near * near, cfg.dt_min, cfg.dt_max)
        dt = np.minimum(dt, cfg.max_time - T)
        dt *= live
        z = _rng.step_normals(keys, s, d)
        prop = P + np.sqrt(dt)[:, None] * z
        if not np.all(np.isfinite(prop)):
            bad = ~np.all(np.isfinite(prop), axis=1)
            raise SimulationError(
                "non-finite proposal", path_index=int(gidx[np.flatnonzero(bad)[0]])
            )
        if fused:
            rprop = np.sqrt(np.einsum("ij,ij->i", prop, prop))
            outside = rprop > spec.R
            corr = np.where(outside, rprop - spec.R, 0.0)
            scale = np.where(outside, spec.R / np.maximum(rprop, 1e-300), 1.0)
            q = prop * scale[:, None]
            rq = np.minimum(rprop, spec.R)
            rmin = np.minimum(r, rq)
        else:
            q, corr, _ = project_many(spec, prop)
            rp = db + radius
            rq = np.sqrt(np.einsum("ij,ij->i", q - center, q - center))
            rmin = np.minimum(rp, rq)
        # quick reject: the segment cannot reach the sphere unless the
        # closer endpoint is within one segment length of it
        seg = q - P
        seg2 = np.einsum("ij,ij->i", seg, seg)
        margin = rmin - radius
        cand = live & ((margin < 0.0) | (margin * margin < seg2))
        hit = np.zeros(n, dtype=bool)
        frac = np.ones(n)
        if np.any(cand):
            ci = np.flatnonzero(cand)
            sub_hit, sub_frac = _segment_sphere(P[ci], q[ci], center, radius)
            hit[ci] = sub_hit
            frac[ci] = sub_frac
        dt_eff = np.where(hit, frac * dt, dt)
        T += dt_eff
        # an absorbing segment ends on the sphere before the wall push
        # lands; parked lanes must stay frozen exactly
        L += np.where(live & ~hit, corr, 0.0)
        steps += live
        stop = hit.copy()
        if hook is not None:
            idx = np.flatnonzero(live)
            extra = hook(gidx[idx], P[idx], q[idx], dt_eff[idx], frac[idx])
            if extra is not None:
                stop[idx] |= extra
        absorbed |= hit
        P = q
        if fused:
            r = rq
        live &= ~stop
        live &= T < horizon
        s += 1
        frac_live = float(np.count_nonzero(live)) / n
        if frac_live < 0.75 and n > 64:
            done = ~live
            gd = gidx[done]
            out_T[gd] = T[done]
            out_L[gd] = L[done]
            out_absorbed[gd] = absorbed[done]
            out_steps[gd] = steps[done]
            keep = live
            gidx, keys, P, T, L = gidx[keep], keys[keep], P[keep], T[keep], L[keep]
            steps, absorbed = steps[keep], absorbed[keep]
            if fused:
                r = r[keep]
            live = np.ones(gidx.size, dtype=bool)
            n = gidx.size
            if n == 0:
                return
    out_T[gidx] = T
    out_L[gidx] = L
    out_absorbed[gidx] = absorbed
    out_steps[gidx] = steps


def run_ensemble(
    spec: DomainSpec,
    x0: Sequence[float],
    cfg: SimConfig,
    hook_factory: Optional[Callable[[], StepHook]] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Run the full path ensemble; returns (T, L, absorbed, steps) arrays.

    Worker count comes from ROBINSIM_THREADS; chunking never changes any
    output because every path's stream is keyed by its global index and all
    per-path results land in preallocated index-ordered arrays.
    """
    _check_family(spec)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.d,):
        raise ValueError(f"x0 must have dimension {spec.d}")
    _check_start(spec, x0)
    n = cfg.n_paths
    T = np.zeros(n)
    L = np.zeros(n)
    absorbed = np.zeros(n, dtype=bool)
    steps = np.zeros(n, dtype=np.int64)
    workers = worker_count()
    bounds = np.linspace(0, n, min(workers, n) + 1).astype(int)
    chunks = [np.arange(lo, hi) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]
    hook = hook_factory() if hook_factory is not None else None

    def run(gidx: np.ndarray) -> None:
        _run_chunk(spec, x0, cfg, gidx, T, L, absorbed, steps, hook)

    if len(chunks) == 1:
        run(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            list(pool.map(run, chunks))
    return T, L, absorbed, steps


def run_path(
    spec: DomainSpec, x0: Sequence[float], cfg: SimConfig, path_index: int
) -> PathOutcome:
    """Replay one ensemble lane; identical to the lane's in-ensemble values."""
    if not 0 <= path_index < cfg.n_paths:
        raise ValueError("path_index outside the configured ensemble")
    _check_family(spec)
    x0 = np.asarray(x0, dtype=float)
    _check_start(spec, x0)
    T = np.zeros(cfg.n_paths)
    L = np.zeros(cfg.n_paths)
    absorbed = np.zeros(cfg.n_paths, dtype=bool)
    steps = np.zeros(cfg.n_paths, dtype=np.int64)
    _run_chunk(
        spec, x0, cfg, np.array([path_index]), T, L, absorbed, steps, None
    )
    i = path_index
    return PathOutcome(
        T=float(T[i]), L=float(L[i]), absorbed=bool(absorbed[i]), steps=int(steps[i])
    )


def _make_estimate(samples: np.ndarray, truncated_fraction: float, flags=()) -> EstimateCI:
    acc = BatchAccumulator.from_samples(samples)
    se = acc.stderr if acc.n >= 2 else 0.0
    if truncated_fraction > 0.01 and TRUNCATION_BIAS not in flags:
        flags = tuple(flags) + (TRUNCATION_BIAS,)
    return EstimateCI(
        mean=float(acc.mean),
        stderr=float(se),
        n=int(acc.n),
        ci95=1.96 * float(se),
        truncated_fraction=float(truncated_fraction),
        flags=tuple(flags),
    )


def estimate_u(spec: DomainSpec, x0: Sequence[float], cfg: SimConfig) -> EstimateCI:
    """Mean of exp(-robin_c * L) at absorption; the Robin solution at x0.

    Truncated paths contribute their partial L, biasing the mean upward;
    the result carries truncated_fraction and a bias flag past 1%.
    """
    T, L, absorbed, steps = run_ensemble(spec, x0, cfg)
    samples = np.exp(-cfg.robin_c * L)
    trunc = float(np.mean(~absorbed))
    return _make_estimate(samples, trunc)


def estimate_u_multi(
    spec: DomainSpec, x0: Sequence[float], cfg: SimConfig, robin_cs: Sequence[float]
) -> list[EstimateCI]:
    """estimate_u for several membrane constants on one shared ensemble.

    Sharing the ensemble makes the monotonicity in robin_c exact, not
    statistical: each path's exp(-c*L) is pointwise nonincreasing in c.
    """
    if any(c < 0 for c in robin_cs):
        raise ValueError("robin_c values must be >= 0")
    T, L, absorbed, steps = run_ensemble(spec, x0, cfg)
    trunc = float(np.mean(~absorbed))
    return [_make_estimate(np.exp(-c * L), trunc) for c in robin_cs]


def estimate_mean_exit(
    spec: DomainSpec, x0: Sequence[float], cfg: SimConfig
) -> EstimateCI:
    """Mean hitting time of the absorbing ball.

    Truncated paths contribute the time they actually ran (max_time when
    the horizon stopped them, less when the step cap did), so with any
    truncation the value is a lower bound and is flagged LOWER_BOUND_ONLY.
    """
    T, L, absorbed, steps = run_ensemble(spec, x0, cfg)
    trunc = float(np.mean(~absorbed))
    flags = (LOWER_BOUND_ONLY,) if trunc > 0.0 else ()
    return _make_estimate(T, trunc, flags)


def local_time_profile(
    spec: DomainSpec, probes: Sequence[Sequence[float]], cfg: SimConfig
) -> list[dict]:
    """Per-probe quartiles of accumulated local time at absorption."""
    out = []
    for probe in probes:
        T, L, absorbed, steps = run_ensemble(spec, probe, cfg)
        q25, q50, q75 = np.percentile(L, [25.0, 50.0, 75.0])
        out.append(
            {
                "probe": [float(v) for v in np.asarray(probe, dtype=float)],
                "q25": float(q25),
                "q50": float(q50),
                "q75": float(q75),
                "truncated_fraction": float(np.mean(~absorbed)),
            }
        )
    return out


@dataclass(frozen=True)
class GreenCells:
    """Slab binning along the first axis with caller-supplied cell volumes.

    Volumes should measure cell-intersect-domain (exact slab volumes are
    available from the block machinery for the narrowing families); box
    volumes are exact for the unit box.
    """

    edges: tuple[float, ...]
    volumes: tuple[float, ...]

    def __post_init__(self) -> None:
        e = np.asarray(self.edges)
        if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
            raise ValueError("edges must be strictly increasing, length >= 2")
        if len(self.volumes) != e.size - 1:
            raise ValueError("need one volume per cell")
        if any(v <= 0 for v in self.volumes):
            raise ValueError("cell volumes must be positive")

    @property
    def n_cells(self) -> int:
        return len(self.volumes)

    def index(self, points: np.ndarray) -> np.ndarray:
        """Cell index per point; -1 when outside the binned range.

        The top edge is closed so points projected exactly onto the far
        wall still land in the last cell.
        """
        e = np.asarray(self.edges)
        x = points[:, 0]
        i = np.searchsorted(e, x, side="right") - 1
        i[x == e[-1]] = len(self.volumes) - 1
        i[(x < e[0]) | (x > e[-1])] = -1
        return i


@dataclass(frozen=True)
class GreenResult:
    density: tuple[float, ...]
    occupation: tuple[float, ...]
    visits: tuple[int, ...]
    zero_visit: tuple[bool, ...]
    cells: GreenCells
    mean_exit: EstimateCI
    occupation_total: float

    def to_payload(self) -> dict:
        return {
            "density": list(self.density),
            "occupation": list(self.occupation),
            "visits": list(self.visits),
            "zero_visit": list(self.zero_visit),
            "edges": list(self.cells.edges),
            "volumes": list(self.cells.volumes),
            "mean_exit": self.mean_exit.to_payload(),
            "occupation_total": self.occupation_total,
        }


def estimate_green(
    spec: DomainSpec, x0: Sequence[float], cells: GreenCells, cfg: SimConfig
) -> GreenResult:
    """Occupation density per cell: mean time in cell over cell volume.

    Step time is attributed to the step's starting point.  When the cells
    cover the whole domain and no path hits the step cap, the sum of
    density * volume equals the mean elapsed time exactly (same ensemble).
    """
    occupancy = np.zeros((cfg.n_paths, cells.n_cells))
    visits = np.zeros((cfg.n_paths, cells.n_cells), dtype=np.int64)

    def factory() -> StepHook:
        def on_step(gidx, p_old, p_new, dt_eff, absorb_frac):
            bins = cells.index(p_old)
            ok = bins >= 0
            occupancy[gidx[ok], bins[ok]] += dt_eff[ok]
            visits[gidx[ok], bins[ok]] += 1
            return None

        return on_step

    T, L, absorbed, steps = run_ensemble(spec, x0, cfg, hook_factory=factory)
    mean_occ = occupancy.mean(axis=0)
    total_visits = visits.sum(axis=0)
    vols = np.asarray(cells.volumes)
    trunc = float(np.mean(~absorbed))
    flags = (LOWER_BOUND_ONLY,) if trunc > 0.0 else ()
    return GreenResult(
        density=tuple(float(v) for v in mean_occ / vols),
        occupation=tuple(float(v) for v in mean_occ),
        visits=tuple(int(v) for v in total_visits),
        zero_visit=tuple(bool(v == 0) for v in total_visits),
        cells=cells,
        mean_exit=_make_estimate(T, trunc, flags),
        occupation_total=float(mean_occ.sum()),
    )


def estimate_hitting_prob(
    spec: DomainSpec,
    x0: Sequence[float],
    surface_a: Cut,
    surface_b: Cut,
    cfg: SimConfig,
) -> EstimateCI:
    """Probability the reflected path crosses surface_a before surface_b.

    Crossings are read off sign changes of the cut's defining function
    along each step segment; when both flip in one step the earlier
    interpolated fraction wins (ties to surface_a).
    """
    x0 = np.asarray(x0, dtype=float)
    sa0 = float(surface_a.signed(x0))
    sb0 = float(surface_b.signed(x0))
    if sa0 == 0.0:
        return EstimateCI(1.0, 0.0, cfg.n_paths, 0.0, 0.0)
    if sb0 == 0.0:
        return EstimateCI(0.0, 0.0, cfg.n_paths, 0.0, 0.0)

    label = np.zeros(cfg.n_paths, dtype=np.int8)  # 0 undecided, 1 A, 2 B

    def factory() -> StepHook:
        def on_step(gidx, p_old, p_new, dt_eff, absorb_frac):
            sa_old = surface_a.signed(p_old)
            sa_new = surface_a.signed(p_new)
            sb_old = surface_b.signed(p_old)
            sb_new = surface_b.signed(p_new)
            fa = np.full(gidx.size, np.inf)
            fb = np.full(gidx.size, np.inf)
            ca = (sa_old > 0) != (sa_new > 0)
            cb = (sb_old > 0) != (sb_new > 0)
            with np.errstate(divide="ignore", invalid="ignore"):
                fa[ca] = sa_old[ca] / (sa_old[ca] - sa_new[ca])
                fb[cb] = sb_old[cb] / (sb_old[cb] - sb_new[cb])
            # a crossing past the absorption point never happened
            fa[fa > absorb_frac] = np.inf
            fb[fb > absorb_frac] = np.inf
            any_cross = np.isfinite(fa) | np.isfinite(fb)
            if not np.any(any_cross):
                return None
            label[gidx[any_cross]] = np.where(fa[any_cross] <= fb[any_cross], 1, 2)
            return any_cross

        return on_step

    T, L, absorbed, steps = run_ensemble(spec, x0, cfg, hook_factory=factory)
    decided = label > 0
    n_dec = int(decided.sum())
    trunc = float(np.mean(~decided))
    if n_dec == 0:
        return EstimateCI(math.nan, math.nan, 0, math.nan, 1.0, (LOWER_BOUND_ONLY,))
    samples = (label[decided] == 1).astype(float)
    return _make_estimate(samples, trunc)


@dataclass(frozen=True)
class HarmonicResult:
    probabilities: dict
    truncated_fraction: float

    def to_payload(self) -> dict:
        return {
            "probabilities": dict(self.probabilities),
            "truncated_fraction": self.truncated_fraction,
        }


def harmonic_measure(
    spec: DomainSpec,
    z: Sequence[float],
    parts: Sequence[tuple[str, Callable[[np.ndarray], bool]]],
    cfg: SimConfig,
) -> HarmonicResult:
    """First-hit distribution of plain (absorbed, unreflected) motion.

    Each part is (label, predicate on the exit point); the first matching
    label claims the path, unmatched exits count under "other".
    """
    _check_family(spec)
    z = np.asarray(z, dtype=float)
    if not contains(spec, z):
        raise ValueError("z must lie in the open domain")
    labels = [name for name, _ in parts] + ["other"]
    n = cfg.n_paths
    keys = _rng.path_keys(cfg.seed, np.arange(n))
    pos = np.tile(z, (n, 1))
    t = np.zeros(n)
    alive = np.arange(n)
    exit_label = np.full(n, -1, dtype=np.int64)
    s = 0
    while alive.size and s < cfg.max_steps:
        p = pos[alive]
        clear = clearance_many(spec, p)
        dt = np.clip(cfg.kappa * clear * clear, cfg.dt_min, cfg.dt_max)
        dt = np.minimum(dt, cfg.max_time - t[alive])
        zn = _rng.step_normals(keys[alive], s, spec.d)
        prop = p + np.sqrt(dt)[:, None] * zn
        if not np.all(np.isfinite(prop)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(prop), axis=1))[0])
            raise SimulationError("non-finite proposal", path_index=int(alive[bad]))
        q, corr, _ = project_many(spec, prop)
        t[alive] += dt
        hit = corr > 0.0
        for k in np.flatnonzero(hit):
            point = q[k]
            chosen = len(parts)
            for m, (_, pred) in enumerate(parts):
                if pred(point):
                    chosen = m
                    break
            exit_label[alive[k]] = chosen
        done_time = t[alive] >= cfg.max_time * (1.0 - 1e-12)
        keep = ~hit & ~done_time
        pos[alive] = q
        alive = alive[keep]
        s += 1
    trunc = float(np.mean(exit_label < 0))
    probs = {
        name: float(np.sum(exit_label == k)) / n for k, name in enumerate(labels)
    }
    return HarmonicResult(probabilities=probs, truncated_fraction=trunc)
