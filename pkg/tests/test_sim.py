"""Sampler contract tests: determinism, identities, and coarse accuracy.

Tight statistical agreement with closed forms lives in the acceptance
suite; here ensembles stay small so the whole module runs in seconds.
"""
from __future__ import annotations

import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robinsim import (
    BStar,
    CriterionOnlyFamilyError,
    Cusp,
    Disk,
    GreenCells,
    SimConfig,
    SnowflakeCubes,
    UnitBox,
    estimate_green,
    estimate_hitting_prob,
    estimate_mean_exit,
    estimate_u,
    estimate_u_multi,
    harmonic_measure,
    local_time_profile,
    run_ensemble,
    run_path,
    step,
)
from robinsim.blocks import Cut
from robinsim.sim import LOWER_BOUND_ONLY, TRUNCATION_BIAS

DISK2 = Disk(d=2, R=1.0, bstar=BStar(center=(0.0, 0.0), radius=0.25))
DISK3 = Disk(d=3, R=1.0, bstar=BStar(center=(0.0, 0.0, 0.0), radius=0.25))
BOX = UnitBox(d=2, bstar=BStar(center=(0.5, 0.5), radius=0.2))

# radial closed forms for the concentric disk, absorbed at r0, reflected at R
EXIT_D2 = (0.25**2 - 1.0) / 2.0 + math.log(4.0)
EXIT_D3 = (0.25**2 - 1.0) / 3.0 + (2.0 / 3.0) * (4.0 - 1.0)


def cfg(**kw) -> SimConfig:
    base = dict(n_paths=400, seed=9, dt_max=1e-3, dt_min=1e-3, max_time=32.0)
    base.update(kw)
    return SimConfig(**base)


class TestConfig:
    def test_rejects_bad_fields(self):
        with pytest.raises(ValueError):
            SimConfig(n_paths=0, seed=1)
        with pytest.raises(ValueError):
            SimConfig(n_paths=10, seed=1, robin_c=-0.5)
        with pytest.raises(ValueError):
            SimConfig(n_paths=10, seed=1, dt_max=1e-6, dt_min=1e-3)
        with pytest.raises(ValueError):
            SimConfig(n_paths=10, seed=1, kappa=0.0)
        with pytest.raises(ValueError):
            SimConfig(n_paths=10, seed=1, max_time=-1.0)

    def test_rejects_blowup_budget(self):
        with pytest.raises(ValueError):
            SimConfig(n_paths=10**9, seed=1, max_time=1e9)

    def test_payload_round(self):
        c = cfg(robin_c=2.0)
        p = c.to_payload()
        assert p["robin_c"] == 2.0 and p["n_paths"] == 400


class TestStep:
    def test_projection_adds_correction_to_local_time(self):
        # start above the floor, force the proposal to (0.3, -0.02); the
        # projection lands on the floor and pushes 0.02 into L
        class Stub:
            def normals(self, dim):
                return np.array([0.0, -0.1 / math.sqrt(1e-3)])

        c = SimConfig(n_paths=1, seed=0, dt_max=1e-3, dt_min=1e-12)
        q, t, L = step(BOX, (np.array([0.3, 0.08]), 0.0, 0.0), c, Stub())
        assert q == pytest.approx([0.3, 0.0], abs=1e-12)
        assert t == pytest.approx(1e-3)
        assert L == pytest.approx(0.02, abs=1e-12)

    def test_interior_step_keeps_local_time(self):
        class Stub:
            def normals(self, dim):
                return np.array([0.1, 0.05])

        c = SimConfig(n_paths=1, seed=0, dt_max=1e-4, dt_min=1e-12)
        q, t, L = step(BOX, (np.array([0.3, 0.4]), 1.0, 0.5), c, Stub())
        assert L == 0.5
        assert t == pytest.approx(1.0 + 1e-4)

    def test_local_time_never_decreases(self):
        from robinsim import PathStream

        c = SimConfig(n_paths=1, seed=123, dt_max=1e-3, dt_min=1e-6)
        state = (np.array([0.9, 0.1]), 0.0, 0.0)
        stream = PathStream(123, 0)
        last = 0.0
        for _ in range(200):
            state = step(BOX, state, c, stream)
            assert state[2] >= last
            last = state[2]


class TestDeterminism:
    def test_same_seed_same_output(self):
        a = run_ensemble(DISK2, (0.5, 0.0), cfg())
        b = run_ensemble(DISK2, (0.5, 0.0), cfg())
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_worker_count_is_invisible(self, monkeypatch):
        monkeypatch.setenv("ROBINSIM_THREADS", "1")
        a = run_ensemble(DISK2, (0.5, 0.0), cfg())
        monkeypatch.setenv("ROBINSIM_THREADS", "5")
        b = run_ensemble(DISK2, (0.5, 0.0), cfg())
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_run_path_matches_ensemble_lane(self):
        c = cfg(n_paths=16)
        T, L, absorbed, steps = run_ensemble(DISK2, (0.6, 0.1), c)
        for i in (0, 3, 15):
            out = run_path(DISK2, (0.6, 0.1), c, i)
            assert out.T == T[i]
            assert out.L == L[i]
            assert out.absorbed == bool(absorbed[i])
            assert out.steps == steps[i]

    def test_run_path_matches_lane_generic_family(self):
        c = cfg(n_paths=8, max_time=8.0)
        T, L, absorbed, steps = run_ensemble(BOX, (0.1, 0.1), c)
        out = run_path(BOX, (0.1, 0.1), c, 5)
        assert (out.T, out.L) == (T[5], L[5])

    def test_path_index_bounds(self):
        with pytest.raises(ValueError):
            run_path(DISK2, (0.5, 0.0), cfg(n_paths=4), 4)


class TestEstimateU:
    def test_zero_membrane_is_exactly_one(self):
        est = estimate_u(DISK2, (0.5, 0.0), cfg(robin_c=0.0))
        assert est.mean == 1.0
        assert est.stderr == 0.0

    def test_start_inside_ball_is_one(self):
        est = estimate_u(DISK2, (0.1, 0.0), cfg(robin_c=3.0))
        assert est.mean == 1.0
        assert est.truncated_fraction == 0.0

    def test_start_on_ball_surface_is_one(self):
        est = estimate_u(DISK2, (0.25, 0.0), cfg(robin_c=3.0))
        assert est.mean == 1.0

    def test_wall_value_close_to_radial_solution(self):
        # u(R) = 1/(1 + log 4) for c=1 in the plane
        est = estimate_u(DISK2, (1.0, 0.0), cfg(n_paths=1500, seed=2, robin_c=1.0))
        target = 1.0 / (1.0 + math.log(4.0))
        assert abs(est.mean - target) < 4.0 * est.stderr + 0.02

    def test_wall_value_close_to_radial_solution_3d(self):
        # u(r) = r0/r for c = 1/r0 - ... reduces to 0.25 at the wall for c=1
        est = estimate_u(DISK3, (1.0, 0.0, 0.0), cfg(n_paths=1500, seed=2, robin_c=1.0))
        assert abs(est.mean - 0.25) < 4.0 * est.stderr + 0.02

    def test_truncation_flagged(self):
        est = estimate_u(DISK2, (1.0, 0.0), cfg(max_time=0.01, robin_c=1.0))
        assert est.truncated_fraction > 0.5
        assert TRUNCATION_BIAS in est.flags

    def test_multi_is_exactly_monotone(self):
        cs = [0.0, 0.25, 1.0, 4.0]
        ests = estimate_u_multi(DISK2, (1.0, 0.0), cfg(n_paths=300), cs)
        means = [e.mean for e in ests]
        assert means[0] == 1.0
        assert all(a >= b for a, b in zip(means, means[1:]))

    def test_multi_matches_single_runs(self):
        c = cfg(n_paths=300, robin_c=0.7)
        multi = estimate_u_multi(DISK2, (1.0, 0.0), c, [0.7])[0]
        single = estimate_u(DISK2, (1.0, 0.0), c)
        assert multi.mean == single.mean

    def test_multi_rejects_negative(self):
        with pytest.raises(ValueError):
            estimate_u_multi(DISK2, (1.0, 0.0), cfg(), [0.5, -1.0])


class TestMeanExit:
    def test_disk_2d_coarse(self):
        est = estimate_mean_exit(DISK2, (1.0, 0.0), cfg(n_paths=1500, seed=4))
        # dt_max = dt_min = 1e-3 carries visible wall bias; this only guards
        # against gross breakage
        assert abs(est.mean - EXIT_D2) < 0.2

    def test_disk_3d_coarse(self):
        # the coarse uniform step overshoots by ~25% in 3d; the acceptance
        # suite checks the converged value, this guards the plumbing
        est = estimate_mean_exit(DISK3, (1.0, 0.0, 0.0), cfg(n_paths=1000, seed=4))
        assert abs(est.mean - EXIT_D3) < 0.6

    def test_all_truncated_reports_lower_bound(self):
        est = estimate_mean_exit(DISK2, (1.0, 0.0), cfg(max_time=0.005))
        assert est.mean == pytest.approx(0.005, rel=1e-12)
        assert est.truncated_fraction == 1.0
        assert LOWER_BOUND_ONLY in est.flags

    def test_rejects_outside_start(self):
        with pytest.raises(ValueError):
            estimate_mean_exit(DISK2, (1.5, 0.0), cfg())

    def test_rejects_snowflake(self):
        spec = SnowflakeCubes(
            d=3, rho=0.25, beta=2.0, depth=4,
            bstar=BStar(center=(0.0, 0.0, 0.0), radius=0.2),
        )
        with pytest.raises(CriterionOnlyFamilyError):
            estimate_mean_exit(spec, (0.0, 0.0, 0.0), cfg())


class TestGreen:
    def test_cells_validate(self):
        with pytest.raises(ValueError):
            GreenCells(edges=(0.0,), volumes=())
        with pytest.raises(ValueError):
            GreenCells(edges=(0.0, 1.0), volumes=(0.5, 0.5))
        with pytest.raises(ValueError):
            GreenCells(edges=(0.0, 0.5, 0.4), volumes=(0.1, 0.1))

    def test_cell_index_closes_top_edge(self):
        cells = GreenCells(edges=(0.0, 0.5, 1.0), volumes=(0.5, 0.5))
        pts = np.array([[0.0, 0.1], [0.49, 0.0], [0.5, 0.0], [1.0, 0.9], [1.1, 0.0]])
        assert list(cells.index(pts)) == [0, 0, 1, 1, -1]

    def test_occupation_identity(self):
        cells = GreenCells(edges=(0.0, 0.25, 0.5, 0.75, 1.0), volumes=(0.25,) * 4)
        c = cfg(n_paths=300, seed=6)
        res = estimate_green(BOX, (0.1, 0.5), cells, c)
        T, L, absorbed, steps = run_ensemble(BOX, (0.1, 0.5), c)
        assert res.occupation_total == pytest.approx(T.mean(), rel=1e-12)
        total = sum(d * v for d, v in zip(res.density, res.cells.volumes))
        assert total == pytest.approx(res.occupation_total, rel=1e-12)

    def test_occupation_identity_with_truncation(self):
        cells = GreenCells(edges=(0.0, 0.5, 1.0), volumes=(0.5, 0.5))
        c = cfg(n_paths=200, seed=6, max_time=0.02)
        res = estimate_green(BOX, (0.1, 0.5), cells, c)
        T, L, absorbed, steps = run_ensemble(BOX, (0.1, 0.5), c)
        assert res.occupation_total == pytest.approx(T.mean(), rel=1e-12)
        assert LOWER_BOUND_ONLY in res.mean_exit.flags

    def test_zero_visit_flagged(self):
        # paths start and die in the left half; the far cell stays empty
        cells = GreenCells(edges=(0.0, 0.9, 0.999, 1.0), volumes=(0.9, 0.099, 0.001))
        c = cfg(n_paths=100, seed=1, max_time=0.01)
        res = estimate_green(BOX, (0.1, 0.5), cells, c)
        assert res.zero_visit[-1]
        assert res.visits[0] > 0


class TestHittingProb:
    def test_plane_cut_oracle(self):
        # crossing x=0.3 before x=0.7 from x=0.4: 0.75 by 1d scale invariance
        ball = UnitBox(d=2, bstar=BStar(center=(0.85, 0.85), radius=0.05))
        a = Cut(kind="plane", band=0, t=0.3, toward=-1.0)
        b = Cut(kind="plane", band=0, t=0.7, toward=1.0)
        est = estimate_hitting_prob(
            ball, (0.4, 0.3), a, b, cfg(n_paths=1500, seed=8)
        )
        assert est.truncated_fraction < 0.2
        assert abs(est.mean - 0.75) < 4.0 * est.stderr + 0.03

    def test_start_on_surface_decides_immediately(self):
        a = Cut(kind="plane", band=0, t=0.3, toward=-1.0)
        b = Cut(kind="plane", band=0, t=0.7, toward=1.0)
        hit = estimate_hitting_prob(BOX, (0.3, 0.5), a, b, cfg())
        assert hit.mean == 1.0 and hit.stderr == 0.0
        miss = estimate_hitting_prob(BOX, (0.7, 0.5), a, b, cfg())
        assert miss.mean == 0.0


class TestHarmonic:
    def test_wall_labels_sum_to_one(self):
        parts = [
            ("bottom", lambda q: q[1] <= 1e-9),
            ("top", lambda q: q[1] >= 1.0 - 1e-9),
        ]
        res = harmonic_measure(BOX, (0.5, 0.2), parts, cfg(n_paths=800, seed=3))
        total = sum(res.probabilities.values())
        assert total == pytest.approx(1.0 - res.truncated_fraction, abs=1e-12)
        assert res.probabilities["bottom"] > res.probabilities["top"]
        assert res.truncated_fraction < 0.01

    def test_rejects_boundary_start(self):
        with pytest.raises(ValueError):
            harmonic_measure(BOX, (0.0, 0.5), [], cfg())


class TestLocalTimeProfile:
    def test_probe_inside_ball_is_zero(self):
        rows = local_time_profile(DISK2, [(0.1, 0.0)], cfg(n_paths=50))
        assert rows[0]["q50"] == 0.0

    def test_quartiles_ordered(self):
        rows = local_time_profile(DISK2, [(0.9, 0.0), (0.5, 0.0)], cfg(n_paths=200))
        for row in rows:
            assert 0.0 <= row["q25"] <= row["q50"] <= row["q75"]
        # starting nearer the wall accrues more boundary pushes
        assert rows[0]["q50"] >= rows[1]["q50"]


@settings(max_examples=10, deadline=None)
@given(
    x=st.floats(0.05, 0.95),
    y=st.floats(0.05, 0.95),
    c=st.floats(0.0, 4.0),
)
def test_u_estimates_stay_in_unit_interval(x, y, c):
    est = estimate_u(
        BOX, (x, y), SimConfig(n_paths=40, seed=11, robin_c=c, dt_max=1e-2,
                               dt_min=1e-2, max_time=2.0)
    )
    assert 0.0 <= est.mean <= 1.0
    assert 0.0 <= est.truncated_fraction <= 1.0
