import math

import numpy as np
import pytest

from robinsim.blocks import (
    BlockDecomposition,
    DecompositionError,
    UnsupportedAnchorError,
    band_runs,
    block_measures,
    decompose,
)
from robinsim.geometry import (
    Cusp,
    Disk,
    FractalChannels2D,
    FractalChannelsD,
    SnowflakeCubes,
    UnitBox,
    anchor_point,
    boundary_area_total,
)


def frustum_area_oracle(alpha: float, lo: float, hi: float, n: int = 200_000) -> float:
    """Revolved-profile wall area in 3d from a fine polyline of frusta."""
    x = np.linspace(lo, hi, n + 1)
    y = x**alpha
    seg = np.hypot(np.diff(x), np.diff(y))
    y_mid = 0.5 * (y[:-1] + y[1:])
    return float(np.sum(2.0 * math.pi * y_mid * seg))


# ---------------------------------------------------------------- cusp


def test_cusp_band2_cuts_are_frozen():
    dec = decompose(Cusp(d=2, alpha=2.0), (0.0, 0.0), 3)
    got = [g.t for g in dec.gammas]
    assert got == pytest.approx([0.4375, 0.375, 0.3125, 0.25], abs=1e-15)
    assert [g.band for g in dec.gammas] == [2, 2, 2, 2]


def test_cusp_cut_counts_scale_with_band():
    dec = decompose(Cusp(d=2, alpha=2.0), (0.0, 0.0), 80)
    per_band = {}
    for g in dec.gammas:
        per_band[g.band] = per_band.get(g.band, 0) + 1
    # alpha = 2 doubles the cut count per band: 4, 8, 16, 32
    assert per_band[2] == 4
    assert per_band[3] == 8
    assert per_band[4] == 16


def test_cusp_slab_volume_closed_form():
    r, area, vol = block_measures(Cusp(d=2, alpha=2.0), (0.25, 0.4375))[0]
    assert r == pytest.approx(0.1875)
    assert vol == pytest.approx(2.0 * (0.4375**3 - 0.25**3) / 3.0, rel=1e-12)


def test_cusp_wall_area_matches_frustum_oracle():
    spec = Cusp(d=3, alpha=1.5)
    lo, hi = 0.125, 0.25
    _, area, _ = block_measures(spec, (lo, hi))[0]
    assert area == pytest.approx(frustum_area_oracle(1.5, lo, hi), rel=1e-6)


def test_cusp_ratio_bounds_within_band_jump():
    # gaps shrink monotonically; consecutive-band crossings cap the jump
    for alpha in (1.3, 2.0, 2.7):
        dec = decompose(Cusp(d=2, alpha=alpha), (0.0, 0.0), 200)
        a1, a2 = dec.ratio_bounds
        assert a1 >= 1.0 - 1e-12
        assert a2 <= 2.0 ** (alpha + 1.0) + 1e-12
        big = decompose(Cusp(d=2, alpha=alpha), (0.0, 0.0), 400)
        assert big.ratio_bounds[1] <= 2.0 ** (alpha + 1.0) + 1e-12


def test_cusp_blocks_not_truncated():
    dec = decompose(Cusp(d=2, alpha=1.5), (0.0, 0.0), 50)
    assert len(dec.blocks) == 50
    assert not dec.truncated
    assert [b.n for b in dec.blocks] == list(range(1, 51))


def test_cusp_band_sums_follow_narrowing_rate():
    # sum of (index * area) over a band scales like 2^(-k(2-alpha))
    alpha = 1.6
    runs = band_runs(Cusp(d=2, alpha=alpha), 14)
    n0 = 0.0
    sums: dict[int, float] = {}
    for run in runs:
        sums[run.band] = sums.get(run.band, 0.0) + n0 * run.area_sum + run.area_isum
        n0 += run.count
    ks = sorted(sums)[2:]
    scaled = [sums[k] / 2.0 ** (-(2.0 - alpha) * k) for k in ks]
    assert max(scaled) / min(scaled) < 3.0


def test_cusp_block_volume_comparable_to_gap_cube():
    dec = decompose(Cusp(d=3, alpha=1.8), (0.0, 0.0, 0.0), 120)
    ratios = [b.vol / b.r**3 for b in dec.blocks]
    assert min(ratios) > 0.1


def test_cusp_runs_match_explicit_blocks():
    spec = Cusp(d=2, alpha=1.5)
    runs = band_runs(spec, 6)
    n_blocks = int(sum(r.count for r in runs))
    dec = decompose(spec, (0.0, 0.0), n_blocks)
    assert sum(r.area_sum for r in runs) == pytest.approx(
        sum(b.area for b in dec.blocks), rel=1e-10
    )
    assert sum(r.vol_sum for r in runs) == pytest.approx(
        sum(b.vol for b in dec.blocks), rel=1e-10
    )
    # index-weighted sums carry a half-cell smearing, keep a loose band
    explicit_i = sum(b.n * b.area for b in dec.blocks)
    n0 = 0.0
    run_i = 0.0
    for r in runs:
        run_i += n0 * r.area_sum + r.area_isum
        n0 += r.count
    assert run_i == pytest.approx(explicit_i, rel=0.02)


def test_cusp_cuts_separate_anchor_from_source():
    spec = Cusp(d=2, alpha=2.0)
    dec = decompose(spec, (0.0, 0.0), 20)
    src = np.asarray(spec.bstar.center)
    for g in dec.gammas:
        assert g.signed((0.0, 0.0)) < 0.0
        assert g.signed(src) > 0.0


# ---------------------------------------------------------------- channels


def test_channels_first_blocks_follow_cut_rule():
    spec = FractalChannels2D(alpha=1.5, beta=2.0, depth=10)
    dec = decompose(spec, anchor_point(spec), 4)
    a2 = 1.0 + 2.0**-1.5
    # gen 1 has floor(2^(beta-alpha)) = 1 cut, at 1 + 2^-2
    assert dec.gammas[0].t == pytest.approx(1.25)
    # junction block reaches the first gen-2 cut at a2 + 2^-4
    assert dec.gammas[1].t == pytest.approx(a2 + 0.0625)
    assert dec.blocks[0].r == pytest.approx((a2 - 1.25) + 0.0625)


def test_channels_junction_block_includes_side_branch():
    spec = FractalChannels2D(alpha=1.5, beta=2.0, depth=8)
    dec = decompose(spec, anchor_point(spec), 30)
    bare = {}
    for b in dec.blocks:
        w = 2.0 ** (-b.band * 2.0)
        bare.setdefault(b.band, []).append(b.area - 2.0 * b.r)
    # within each generation the junction block carries extra wall area
    for band, extras in bare.items():
        if len(extras) > 1:
            assert extras[0] > max(extras[1:]) + 1e-12


def test_channels_runs_match_explicit_blocks_exactly():
    spec = FractalChannels2D(alpha=1.5, beta=1.7, depth=9)
    runs = band_runs(spec, 9)
    dec = decompose(spec, anchor_point(spec), 10**6)
    assert dec.truncated  # finite tree exhausted before the cap
    assert sum(r.count for r in runs) == len(dec.blocks)
    assert sum(r.area_sum for r in runs) == pytest.approx(
        sum(b.area for b in dec.blocks), rel=1e-12
    )
    assert sum(r.vol_sum for r in runs) == pytest.approx(
        sum(b.vol for b in dec.blocks), rel=1e-12
    )


def test_channels_nd_block_measures_match_tube_forms():
    spec = FractalChannelsD(d=3, alpha=1.5, beta=2.0, depth=6)
    a2 = 1.0 + 2.0**-1.5
    lo, hi = 1.05, 1.2  # inside generation 1
    r, area, vol = block_measures(spec, (lo, hi))[0]
    R = 0.25
    assert area == pytest.approx(2.0 * math.pi * R * (hi - lo), rel=1e-12)
    assert vol == pytest.approx(math.pi * R * R * (hi - lo), rel=1e-12)


def test_channels_block_range_must_not_span_junction():
    spec = FractalChannels2D(alpha=1.5, beta=2.0, depth=6)
    with pytest.raises(DecompositionError):
        block_measures(spec, (1.2, 1.4))  # crosses the junction at ~1.354


def test_channels_area_sum_below_total():
    spec = FractalChannels2D(alpha=1.5, beta=2.0, depth=7)
    dec = decompose(spec, anchor_point(spec), 10**6)
    assert sum(b.area for b in dec.blocks) <= boundary_area_total(spec)


def test_channels_cuts_separate_anchor_from_source():
    spec = FractalChannels2D(alpha=1.5, beta=2.0, depth=6)
    dec = decompose(spec, anchor_point(spec), 10)
    anchor = anchor_point(spec)
    src = np.asarray(spec.bstar.center)
    for g in dec.gammas:
        assert g.signed(anchor) < 0.0
        assert g.signed(src) > 0.0


# ---------------------------------------------------------------- snowflake


def test_snowflake_cut_count_grows_with_junction_index():
    spec = SnowflakeCubes(d=3, rho=0.3, beta=2.0, depth=14)
    dec = decompose(spec, anchor_point(spec), 10**6)
    per_junction: dict[int, int] = {}
    for g in dec.gammas:
        per_junction[g.band] = per_junction.get(g.band, 0) + 1
    bands = sorted(per_junction)
    counts = [per_junction[b] for b in bands]
    assert all(b2 >= b1 for b1, b2 in zip(counts, counts[1:]))
    assert counts[-1] > counts[0]


def test_snowflake_blocks_positive_and_ordered():
    spec = SnowflakeCubes(d=4, rho=0.3, beta=1.8, depth=16)
    dec = decompose(spec, anchor_point(spec), 60)
    assert all(b.r > 0 for b in dec.blocks)
    assert all(b.area > 0 for b in dec.blocks)
    assert all(b.vol > 0 for b in dec.blocks)
    assert [b.n for b in dec.blocks] == list(range(1, len(dec.blocks) + 1))
    assert all(
        b1.band <= b2.band for b1, b2 in zip(dec.blocks, dec.blocks[1:])
    )


def test_snowflake_area_sum_below_total():
    spec = SnowflakeCubes(d=3, rho=0.3, beta=2.0, depth=12)
    dec = decompose(spec, anchor_point(spec), 10**6)
    assert sum(b.area for b in dec.blocks) <= boundary_area_total(spec)


def test_snowflake_cap_cut_flips_sign_across_surface():
    spec = SnowflakeCubes(d=3, rho=0.3, beta=2.0, depth=12)
    dec = decompose(spec, anchor_point(spec), 10)
    cap = dec.gammas[0]
    z = np.asarray(cap.center)
    e1 = np.array([1.0, 0.0, 0.0])
    eps = 0.25 * cap.radius
    inner = z - (cap.radius - eps) * e1
    outer = z - (cap.radius + eps) * e1
    assert cap.signed(inner) * cap.signed(outer) < 0.0


def test_snowflake_shallow_depth_has_no_cuts():
    spec = SnowflakeCubes(d=3, rho=0.3, beta=2.0, depth=3)
    with pytest.raises(DecompositionError):
        decompose(spec, anchor_point(spec), 5)


def test_snowflake_block_measures_unsupported():
    spec = SnowflakeCubes(d=3, rho=0.3, beta=2.0, depth=12)
    with pytest.raises(DecompositionError):
        block_measures(spec, (0.5, 0.6))


# ---------------------------------------------------------------- contracts


def test_decompose_rejects_wrong_anchor():
    with pytest.raises(UnsupportedAnchorError):
        decompose(Cusp(d=2, alpha=2.0), (0.5, 0.0), 10)


@pytest.mark.parametrize("spec", [UnitBox(d=2), Disk(d=2, R=1.0)])
def test_decompose_rejects_families_without_structure(spec):
    with pytest.raises(UnsupportedAnchorError):
        decompose(spec, (0.0, 0.0), 10)


def test_decompose_rejects_bad_n_max():
    with pytest.raises(DecompositionError):
        decompose(Cusp(d=2, alpha=2.0), (0.0, 0.0), 0)


def test_decomposition_json_payload_shape():
    dec = decompose(Cusp(d=2, alpha=2.0), (0.0, 0.0), 3)
    payload = dec.to_payload()
    assert set(payload) == {"anchor", "blocks", "ratio_bounds"}
    assert payload["anchor"] == [0.0, 0.0]
    assert [b["n"] for b in payload["blocks"]] == [1, 2, 3]
    assert set(payload["blocks"][0]) == {"n", "r", "area", "vol"}
    assert len(payload["ratio_bounds"]) == 2


def test_gammas_outnumber_blocks_by_one():
    for spec in (
        Cusp(d=2, alpha=1.7),
        FractalChannels2D(alpha=1.5, beta=2.0, depth=8),
        SnowflakeCubes(d=3, rho=0.3, beta=2.0, depth=12),
    ):
        dec = decompose(spec, anchor_point(spec), 7)
        assert len(dec.gammas) == len(dec.blocks) + 1
