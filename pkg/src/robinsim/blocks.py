"""Cross-cut decompositions along each family's deepest boundary approach.

The supported domains all narrow toward a single designated boundary point
(cusp tip, end of the straight channel chain, end of the cube chain).  This
module slices the approach into nested blocks: `decompose` materializes the
cuts and per-block measures one block at a time, while `band_runs` returns
the same data aggregated per dyadic band in closed form so series criteria
stay cheap even when a band holds 2^60 blocks.

Cut positions follow the family construction rules exactly; block areas and
volumes are closed forms where the walls are flat or ruled, and quadrature
for the cusp profile wall.  Side branches hanging off the approach channel
are folded into the block containing their mouth, using idealized full-tree
recursions for the subtree totals.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from scipy.integrate import quad

from .geometry import (
    Cusp,
    DomainSpec,
    FractalChannels2D,
    FractalChannelsD,
    SnowflakeCubes,
    _ball_lens_volume,
    anchor_point,
    ball_volume,
    sphere_area,
)

__all__ = [
    "Block",
    "BlockDecomposition",
    "BlockRun",
    "Cut",
    "DecompositionError",
    "QuadratureError",
    "UnsupportedAnchorError",
    "band_runs",
    "block_measures",
    "decompose",
]


class DecompositionError(ValueError):
    """Raised when a decomposition request is malformed or unsupported."""


class UnsupportedAnchorError(DecompositionError):
    """Raised when (spec, anchor) has no designated block structure."""


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature misses the stated tolerance."""

    def __init__(self, message: str, achieved: float) -> None:
        super().__init__(f"{message} (achieved relative error {achieved:.3e})")
        self.achieved = achieved


# --------------------------------------------------------------------------
# data model
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Cut:
    """One separating cross-cut descriptor.

    kind "plane" is the surface {x1 = t} with `toward` = +1 when the source
    ball lies at larger x1.  kind "cap" is a sphere piece |p - center| = radius
    restricted to one side of a junction wall; side "A" faces the source,
    side "B" faces the anchor.
    """

    kind: str
    band: int
    t: float = math.nan
    toward: float = 1.0
    center: tuple[float, ...] | None = None
    radius: float = math.nan
    side: str = ""

    def signed(self, p: Any) -> Any:
        """Signed crossing function: positive on the source-ball side."""
        P = np.asarray(p, dtype=float)
        if self.kind == "plane":
            return self.toward * (P[..., 0] - self.t)
        rel = P - np.asarray(self.center)
        dist = np.sqrt(np.sum(rel * rel, axis=-1))
        if self.side == "B":
            return self.radius - dist
        return dist - self.radius


@dataclass(frozen=True)
class Block:
    n: int
    band: int
    r: float
    area: float
    vol: float


@dataclass(frozen=True)
class BlockRun:
    """A maximal run of consecutive blocks sharing one gap width r.

    count may be astronomically large; the index-weighted sums let series
    criteria resolve Sum_i (prefix + i) * measure_i without materializing
    the run.  For count == 1 the weighted sums equal the plain ones.
    """

    band: int
    count: float
    r: float
    area_sum: float
    area_isum: float
    vol_sum: float
    vol_isum: float


@dataclass(frozen=True)
class BlockDecomposition:
    anchor: tuple[float, ...]
    gammas: tuple[Cut, ...]
    blocks: tuple[Block, ...]
    ratio_bounds: tuple[float, float]
    truncated: bool

    def rs(self) -> np.ndarray:
        return np.array([b.r for b in self.blocks])

    def to_payload(self) -> dict[str, Any]:
        return {
            "anchor": [float(v) for v in self.anchor],
            "blocks": [
                {"n": b.n, "r": b.r, "area": b.area, "vol": b.vol}
                for b in self.blocks
            ],
            "ratio_bounds": [self.ratio_bounds[0], self.ratio_bounds[1]],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), sort_keys=True)


def _ratio_bounds(blocks: Sequence[Block]) -> tuple[float, float]:
    if len(blocks) < 2:
        return (1.0, 1.0)
    ratios = [blocks[i].r / blocks[i + 1].r for i in range(len(blocks) - 1)]
    return (min(ratios), max(ratios))


def _assemble(
    anchor: np.ndarray,
    cuts: Sequence[Cut],
    blocks: Sequence[Block],
    truncated: bool,
) -> BlockDecomposition:
    if not blocks:
        raise DecompositionError("no blocks at this depth; increase depth")
    return BlockDecomposition(
        anchor=tuple(float(v) for v in anchor),
        gammas=tuple(cuts[: len(blocks) + 1]),
        blocks=tuple(blocks),
        ratio_bounds=_ratio_bounds(blocks),
        truncated=truncated,
    )


# --------------------------------------------------------------------------
# cusp
# --------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)


def _gl_integrate(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    return float(half * np.dot(_GL_W, f(mid + half * _GL_X)))


def _cusp_wall_density(spec: Cusp) -> Callable[[np.ndarray], np.ndarray]:
    a, d = spec.alpha, spec.d
    lateral = sphere_area(d - 2) if d > 2 else 2.0

    def density(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return lateral * x ** (a * (d - 2)) * np.sqrt(1.0 + a * a * x ** (2.0 * a - 2.0))

    return density


def _cusp_volume_between(spec: Cusp, lo: float, hi: float) -> float:
    # profile x^alpha revolved: V(x) = nu_(d-1) x^(alpha(d-1)+1) / (alpha(d-1)+1)
    m = spec.alpha * (spec.d - 1) + 1.0
    return ball_volume(spec.d - 1) * (hi**m - lo**m) / m


def _cusp_band_cuts(spec: Cusp, k: int) -> np.ndarray:
    """Cut abscissas of band k in descending order (source side first)."""
    sp = 2.0 ** (-k * spec.alpha)
    count = int(math.floor(2.0 ** (k * (spec.alpha - 1.0)) - 1.0 + 1e-9)) + 1
    j = np.arange(count - 1, -1, -1, dtype=float)
    return 2.0 ** (-k) + j * sp


def _cusp_count(spec: Cusp, k: int) -> int:
    return int(math.floor(2.0 ** (k * (spec.alpha - 1.0)) - 1.0 + 1e-9)) + 1


def _cusp_decompose(spec: Cusp, n_max: int) -> BlockDecomposition:
    density = _cusp_wall_density(spec)
    cuts: list[Cut] = []
    blocks: list[Block] = []
    xs: list[float] = []
    k = 2
    while len(blocks) < n_max:
        for x in _cusp_band_cuts(spec, k):
            xs.append(float(x))
            cuts.append(Cut(kind="plane", band=k, t=float(x), toward=1.0))
            if len(xs) >= 2 and len(blocks) < n_max:
                hi, lo = xs[-2], xs[-1]
                blocks.append(
                    Block(
                        n=len(blocks) + 1,
                        band=k,
                        r=hi - lo,
                        area=_gl_integrate(density, lo, hi),
                        vol=_cusp_volume_between(spec, lo, hi),
                    )
                )
        k += 1
        if k > 4096:
            raise DecompositionError("cusp band index overflow")
    return _assemble(spec.anchor(), cuts, blocks, truncated=False)


def _cusp_band_runs(spec: Cusp, n_bands: int) -> list[BlockRun]:
    density = _cusp_wall_density(spec)
    runs: list[BlockRun] = []
    prev_top = None
    for k in range(2, 2 + n_bands):
        sp = 2.0 ** (-k * spec.alpha)
        count = _cusp_count(spec, k)
        top = 2.0 ** (-k) + (count - 1) * sp
        if prev_top is not None:
            # crossing block from this band's top cut up to the band above
            runs.append(
                BlockRun(
                    band=k,
                    count=1.0,
                    r=prev_top - top,
                    area_sum=(a := _gl_integrate(density, top, prev_top)),
                    area_isum=a,
                    vol_sum=(v := _cusp_volume_between(spec, top, prev_top)),
                    vol_isum=v,
                )
            )
        if count > 1:
            lo = 2.0 ** (-k)
            area_sum = _gl_integrate(density, lo, top)
            vol_sum = _cusp_volume_between(spec, lo, top)

            def widx(x: np.ndarray, top: float = top, sp: float = sp) -> np.ndarray:
                # smeared block index; the half-cell bias cancels in band sums
                return (top - x) / sp + 0.5

            area_isum = _gl_integrate(lambda x: widx(x) * density(x), lo, top)
            m = float(count - 1)
            vol_isum = _gl_integrate(
                lambda x: widx(x)
                * ball_volume(spec.d - 1)
                * np.asarray(x) ** (spec.alpha * (spec.d - 1)),
                lo,
                top,
            )
            runs.append(
                BlockRun(
                    band=k,
                    count=m,
                    r=sp,
                    area_sum=area_sum,
                    area_isum=area_isum,
                    vol_sum=vol_sum,
                    vol_isum=vol_isum,
                )
            )
        prev_top = 2.0 ** (-k)
    return runs


# --------------------------------------------------------------------------
# channels (planar and tube variants share the walk)
# --------------------------------------------------------------------------


class _ChannelScheme:
    """Closed-form measure callbacks plus memoized side-subtree totals."""

    def __init__(self, spec: FractalChannels2D | FractalChannelsD) -> None:
        self.spec = spec
        self.d = spec.d
        self.alpha = spec.alpha
        self.beta = spec.beta
        self.depth = spec.depth
        self._area_memo: dict[tuple[int, bool], float] = {}
        self._vol_memo: dict[int, float] = {}

    # per-generation primitives ------------------------------------------

    def width(self, g: int) -> float:
        return 2.0 ** (-g * self.beta)

    def length(self, g: int) -> float:
        return 2.0 ** (-g * self.alpha)

    def offset(self, g: int) -> float:
        # lateral shift of the branch child spawned into generation g
        return 2.0**-g

    def branch_ok(self, g: int) -> bool:
        if self.d == 2:
            return 2.0 ** -(g + 1) < self.width(g)
        return 2.0 ** -(g + 1) < self.width(g) + self.width(g + 1)

    def lateral_rate(self, g: int) -> float:
        if self.d == 2:
            return 2.0
        return sphere_area(self.d - 2, self.width(g))

    def cross_section(self, g: int) -> float:
        if self.d == 2:
            return self.width(g)
        return ball_volume(self.d - 1, self.width(g))

    def end_wall(self, g: int) -> float:
        return self.cross_section(g)

    def mouth_overlap(self, g: int, branch: bool) -> float:
        """Overlap of a generation-(g+1) mouth with its parent's end face."""
        if not branch:
            return self.cross_section(g + 1)
        delta = self.offset(g + 1)
        if self.d == 2:
            return max(0.0, min(self.width(g), delta + self.width(g + 1)) - delta)
        return _ball_lens_volume(self.d - 1, self.width(g), self.width(g + 1), delta)

    def entry_remainder(self, g: int, branch: bool) -> float:
        """Closed part of a generation-g mouth poking past the parent face."""
        if not branch:
            return 0.0
        return self.cross_section(g) - self.mouth_overlap(g - 1, True)

    def exit_remainder(self, g: int) -> float:
        if g >= self.depth:
            return self.end_wall(g)  # truncation wall
        open_area = self.mouth_overlap(g, False)
        if self.branch_ok(g):
            open_area += self.mouth_overlap(g, True)
        return max(0.0, self.end_wall(g) - open_area)

    # idealized subtree totals --------------------------------------------

    def subtree_area(self, g: int, branch: bool) -> float:
        if g > self.depth:
            return 0.0
        key = (g, branch)
        if key not in self._area_memo:
            total = self.entry_remainder(g, branch)
            total += self.lateral_rate(g) * self.length(g)
            total += self.exit_remainder(g)
            if g < self.depth:
                total += self.subtree_area(g + 1, False)
                if self.branch_ok(g):
                    total += self.subtree_area(g + 1, True)
            self._area_memo[key] = total
        return self._area_memo[key]

    def subtree_vol(self, g: int) -> float:
        if g > self.depth:
            return 0.0
        if g not in self._vol_memo:
            total = self.cross_section(g) * self.length(g)
            if g < self.depth:
                total += self.subtree_vol(g + 1)
                if self.branch_ok(g):
                    total += self.subtree_vol(g + 1)
            self._vol_memo[g] = total
        return self._vol_memo[g]

    def junction_extras(self, g: int) -> tuple[float, float]:
        """Closed walls and hung side branches where generation g ends."""
        area = self.exit_remainder(g)
        vol = 0.0
        if g < self.depth and self.branch_ok(g):
            area += self.subtree_area(g + 1, True)
            vol += self.subtree_vol(g + 1)
        return area, vol

    # cut schedule ---------------------------------------------------------

    def gen_cut_count(self, g: int) -> float:
        # cuts at a_g + n * width(g), n >= 1, not past the far junction
        return math.floor(2.0 ** (g * (self.beta - self.alpha)) + 1e-9)

    def a(self, g: int) -> float:
        return float(self.spec._a[g])

    def span_measures(self, g_lo: int, x_lo: float, g_hi: int, x_hi: float) -> tuple[float, float]:
        """Wall area and volume of the approach channel between two cuts.

        Junction faces inside [x_lo, x_hi) contribute their closed end wall
        and any side subtree hanging there.
        """
        area = 0.0
        vol = 0.0
        for g in range(g_lo, g_hi + 1):
            lo = max(x_lo, self.a(g))
            hi = min(x_hi, self.a(g + 1))
            if hi > lo:
                area += self.lateral_rate(g) * (hi - lo)
                vol += self.cross_section(g) * (hi - lo)
            face = self.a(g + 1)
            if x_lo <= face < x_hi and g < self.depth:
                ja, jv = self.junction_extras(g)
                area += ja
                vol += jv
        return area, vol


def _channel_cut_schedule(scheme: _ChannelScheme) -> Iterable[tuple[int, float]]:
    """(generation, abscissa) of every cut, in order toward the anchor."""
    for g in range(1, scheme.depth + 1):
        sp = scheme.width(g)
        count = int(min(scheme.gen_cut_count(g), 10_000_000))
        base = scheme.a(g)
        for n in range(1, count + 1):
            yield g, base + n * sp


def _channel_decompose(
    spec: FractalChannels2D | FractalChannelsD, n_max: int
) -> BlockDecomposition:
    scheme = _ChannelScheme(spec)
    cuts: list[Cut] = []
    blocks: list[Block] = []
    prev: tuple[int, float] | None = None
    for g, x in _channel_cut_schedule(scheme):
        cuts.append(Cut(kind="plane", band=g, t=float(x), toward=-1.0))
        if prev is not None:
            pg, px = prev
            area, vol = scheme.span_measures(pg, px, g, x)
            blocks.append(
                Block(n=len(blocks) + 1, band=g, r=x - px, area=area, vol=vol)
            )
        prev = (g, x)
        if len(blocks) >= n_max:
            break
    return _assemble(spec.anchor(), cuts, blocks, truncated=len(blocks) < n_max)


def _channel_band_runs(
    spec: FractalChannels2D | FractalChannelsD, n_bands: int
) -> list[BlockRun]:
    scheme = _ChannelScheme(spec)
    runs: list[BlockRun] = []
    prev: tuple[int, float] | None = None
    for g in range(1, min(scheme.depth, n_bands) + 1):
        count = scheme.gen_cut_count(g)
        if count < 1:
            continue
        sp = scheme.width(g)
        base = scheme.a(g)
        first = base + sp
        last = base + count * sp
        if prev is not None:
            pg, px = prev
            area, vol = scheme.span_measures(pg, px, g, first)
            runs.append(
                BlockRun(
                    band=g,
                    count=1.0,
                    r=first - px,
                    area_sum=area,
                    area_isum=area,
                    vol_sum=vol,
                    vol_isum=vol,
                )
            )
        if count > 1:
            m = float(count - 1)
            a1 = scheme.lateral_rate(g) * sp
            v1 = scheme.cross_section(g) * sp
            runs.append(
                BlockRun(
                    band=g,
                    count=m,
                    r=sp,
                    area_sum=m * a1,
                    area_isum=a1 * m * (m + 1.0) / 2.0,
                    vol_sum=m * v1,
                    vol_isum=v1 * m * (m + 1.0) / 2.0,
                )
            )
        prev = (g, last)
    return runs


# --------------------------------------------------------------------------
# snowflake cube chain
# --------------------------------------------------------------------------


def _dyadic_radii(lo: float, hi: float) -> list[float]:
    if hi < lo:
        return []
    jmin = int(math.ceil(math.log2(lo) - 1e-12))
    jmax = int(math.floor(math.log2(hi) + 1e-12))
    return [2.0**j for j in range(jmin, jmax + 1)]


class _SnowflakeScheme:
    def __init__(self, spec: SnowflakeCubes) -> None:
        self.spec = spec
        self.d = spec.d
        self.rho = spec.rho
        self.beta = spec.beta
        self.depth = spec.depth
        xs, _ = spec.chain_junctions()
        self.xs = xs  # xs[i]: face between chain cube i and cube i+1
        self._area_memo: dict[int, float] = {}
        self._vol_memo: dict[int, float] = {}

    def ball_radius(self, i: int) -> float:
        return 2.0 * self.rho ** (i * self.beta)

    def windows(self, i: int) -> tuple[list[float], list[float]]:
        """Dyadic cap radii on the source side and the anchor side."""
        s = 4.0 * self.ball_radius(i)
        a_side = _dyadic_radii(s, self.rho**i / 4.0)
        b_side = _dyadic_radii(s, self.rho ** (i + 1) / 4.0)
        return a_side, b_side

    def banded(self, i: int) -> bool:
        if i < 1 or i > self.depth - 1:
            return False
        a_side, b_side = self.windows(i)
        return bool(a_side) and bool(b_side)

    def subtree_area(self, g: int) -> float:
        if g > self.depth:
            return 0.0
        if g not in self._area_memo:
            d = self.d
            total = 2.0 * d * self.rho ** (g * (d - 1))
            total += (2.0 * d - 1.0) * self.subtree_area(g + 1)
            self._area_memo[g] = total
        return self._area_memo[g]

    def subtree_vol(self, g: int) -> float:
        if g > self.depth:
            return 0.0
        if g not in self._vol_memo:
            total = self.rho ** (g * self.d)
            total += (2.0 * self.d - 1.0) * self.subtree_vol(g + 1)
            self._vol_memo[g] = total
        return self._vol_memo[g]

    def chain_cube_measures(self, m: int) -> tuple[float, float]:
        """Idealized walls and volume of chain cube m plus its side branches."""
        d = self.d
        area = 2.0 * d * self.rho ** (m * (d - 1))
        vol = self.rho ** (m * d)
        side = 2.0 * d - 2.0
        area += side * self.subtree_area(m + 1)
        vol += side * self.subtree_vol(m + 1)
        return area, vol


def _snowflake_cuts_blocks(
    spec: SnowflakeCubes, n_max: int | None, max_bands: int | None
) -> tuple[list[Cut], list[Block], bool]:
    sch = _SnowflakeScheme(spec)
    d = spec.d
    nu_wall = ball_volume(d - 1)
    nu = ball_volume(d)

    banded = [i for i in range(1, sch.depth) if sch.banded(i)]
    if max_bands is not None:
        banded = banded[:max_bands]
    if not banded:
        raise DecompositionError(
            "no junction is slim enough to cut at this depth; increase depth"
        )

    # flat cut schedule: per banded junction, caps shrink toward the passage
    # ball on the source side then widen again on the anchor side
    schedule: list[tuple[int, str, float]] = []
    for i in banded:
        a_side, b_side = sch.windows(i)
        for radius in reversed(a_side):
            schedule.append((i, "A", radius))
        for radius in b_side:
            schedule.append((i, "B", radius))

    def cap_cut(i: int, side: str, radius: float) -> Cut:
        z = np.zeros(d)
        z[0] = sch.xs[i]
        return Cut(
            kind="cap",
            band=i,
            center=tuple(float(v) for v in z),
            radius=radius,
            side=side,
        )

    cuts: list[Cut] = []
    blocks: list[Block] = []
    for idx, (i, side, radius) in enumerate(schedule):
        cuts.append(cap_cut(i, side, radius))
        if idx == 0:
            continue
        pj, pside, pr = schedule[idx - 1]
        if pside == "B" and side == "A":
            # bridge spanning whole chain cubes between the two junctions
            r_gap = (sch.xs[i] - sch.xs[pj]) - pr - radius
            area = 0.0
            vol = 0.0
            for m in range(pj + 1, i + 1):
                ca, cv = sch.chain_cube_measures(m)
                area += ca
                vol += cv
            for m in range(pj + 1, i):
                vol += nu * sch.ball_radius(m) ** d
            block = Block(len(blocks) + 1, i, r_gap, area, vol)
        elif pside == "A" and side == "B":
            # crossing block through the junction's passage ball
            rb = sch.ball_radius(i)
            area = nu_wall * (pr ** (d - 1) - rb ** (d - 1))
            area += nu_wall * (radius ** (d - 1) - rb ** (d - 1))
            vol = 0.5 * nu * pr**d + 0.5 * nu * radius**d + nu * rb**d
            block = Block(
                len(blocks) + 1, i, max(pr, radius), max(area, 0.0), vol
            )
        else:
            # half-shell between nested caps on one side of the junction
            lo, hi = min(pr, radius), max(pr, radius)
            block = Block(
                len(blocks) + 1,
                i,
                hi - lo,
                nu_wall * (hi ** (d - 1) - lo ** (d - 1)),
                0.5 * nu * (hi**d - lo**d),
            )
        blocks.append(block)
        if n_max is not None and len(blocks) >= n_max:
            break
    truncated = n_max is not None and len(blocks) < n_max
    return cuts, blocks, truncated


def _snowflake_decompose(spec: SnowflakeCubes, n_max: int) -> BlockDecomposition:
    cuts, blocks, truncated = _snowflake_cuts_blocks(spec, n_max, None)
    return _assemble(spec.anchor(), cuts, blocks, truncated=truncated)


def _snowflake_band_runs(spec: SnowflakeCubes, n_bands: int) -> list[BlockRun]:
    _, blocks, _ = _snowflake_cuts_blocks(spec, None, n_bands)
    return [
        BlockRun(
            band=b.band,
            count=1.0,
            r=b.r,
            area_sum=b.area,
            area_isum=b.area,
            vol_sum=b.vol,
            vol_isum=b.vol,
        )
        for b in blocks
    ]


# --------------------------------------------------------------------------
# public entry points
# --------------------------------------------------------------------------


def _check_anchor(spec: DomainSpec, anchor: Any) -> np.ndarray:
    designated = anchor_point(spec)
    if designated is None:
        raise UnsupportedAnchorError(
            f"family {spec.family!r} has no designated deep boundary point"
        )
    a = np.asarray(anchor, dtype=float)
    if a.shape != designated.shape or not np.all(np.abs(a - designated) <= 1e-9):
        raise UnsupportedAnchorError(
            "only the family's designated deepest boundary point is supported"
        )
    return designated


def decompose(spec: DomainSpec, anchor: Any, n_max: int) -> BlockDecomposition:
    """First n_max blocks of the cross-cut decomposition toward the anchor."""
    if int(n_max) != n_max or n_max < 1:
        raise DecompositionError("n_max must be a positive integer")
    n_max = int(n_max)
    _check_anchor(spec, anchor)
    if isinstance(spec, Cusp):
        return _cusp_decompose(spec, n_max)
    if isinstance(spec, (FractalChannels2D, FractalChannelsD)):
        return _channel_decompose(spec, n_max)
    if isinstance(spec, SnowflakeCubes):
        return _snowflake_decompose(spec, n_max)
    raise UnsupportedAnchorError(f"family {spec.family!r} has no block structure")


def band_runs(spec: DomainSpec, n_bands: int) -> list[BlockRun]:
    """Per-band closed-form aggregates of the same decomposition."""
    if int(n_bands) != n_bands or n_bands < 1:
        raise DecompositionError("n_bands must be a positive integer")
    n_bands = int(n_bands)
    if isinstance(spec, Cusp):
        return _cusp_band_runs(spec, n_bands)
    if isinstance(spec, (FractalChannels2D, FractalChannelsD)):
        return _channel_band_runs(spec, n_bands)
    if isinstance(spec, SnowflakeCubes):
        return _snowflake_band_runs(spec, n_bands)
    raise UnsupportedAnchorError(f"family {spec.family!r} has no block structure")


def block_measures(
    spec: DomainSpec, block_range: Sequence[float] | Sequence[Sequence[float]]
) -> list[tuple[float, float, float]]:
    """(r, wall area, volume) for axis slabs of the approach channel.

    block_range is one (lo, hi) interval or a sequence of them, in the
    approach coordinate.  Cusp slabs use the revolved profile closed form
    for volume and adaptive quadrature for the wall; channel slabs must not
    span a junction.
    """
    if len(block_range) == 0:
        raise DecompositionError("block_range is empty")
    if hasattr(block_range[0], "__len__"):
        ranges = [tuple(r) for r in block_range]
    else:
        ranges = [tuple(block_range)]
    out: list[tuple[float, float, float]] = []
    for lo, hi in ranges:
        lo, hi = float(lo), float(hi)
        if not (0.0 <= lo < hi):
            raise DecompositionError("block range must satisfy 0 <= lo < hi")
        if isinstance(spec, Cusp):
            density = _cusp_wall_density(spec)
            val, err = quad(density, lo, hi, epsabs=0.0, epsrel=1e-10, limit=200)
            rel = err / val if val > 0.0 else 0.0
            if rel > 1e-4:
                raise QuadratureError("wall quadrature did not converge", rel)
            out.append((hi - lo, val, _cusp_volume_between(spec, lo, hi)))
        elif isinstance(spec, (FractalChannels2D, FractalChannelsD)):
            scheme = _ChannelScheme(spec)
            a = spec._a
            g_lo = int(np.searchsorted(a[1:], lo, side="right"))
            g_hi = int(np.searchsorted(a[1:], hi, side="left"))
            if g_lo < 1 or g_lo != g_hi or g_lo > spec.depth:
                raise DecompositionError(
                    "channel block range must lie inside one generation"
                )
            out.append(
                (
                    hi - lo,
                    scheme.lateral_rate(g_lo) * (hi - lo),
                    scheme.cross_section(g_lo) * (hi - lo),
                )
            )
        else:
            raise DecompositionError(
                f"family {spec.family!r} blocks are not axis slabs; use decompose"
            )
    return out
