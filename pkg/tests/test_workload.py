import numpy as np
import pytest
from hypothesis import given, strategies as st

from splatbalance.fixtures import fixture_camera, gap40
from splatbalance.render import RenderConfig, TileWorkload, render_full
from splatbalance.workload import (PACKINGS, RegionDensity, baseline_schedule, build_schedule, classify_tiles, compare,
                                   default_thresholds, run_both, simulate, simulate_warps, tile_rho, warp_costs)


def tile(xy, counts):
    c = np.asarray(counts, dtype=np.int64).reshape(16, 16)
    return TileWorkload(tuple(xy), np.arange(int(c.max())), c)


def random_tiles(seed, n=12, hi=40):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        scale = rng.integers(0, hi + 1)
        out.append(tile((i % 4, i // 4), rng.integers(0, scale + 1, 256)))
    return out


def oracle_simulate(tiles, factors, order):
    """Independent loop: lanes sum their pixels, warps pay 32 x their slowest lane."""
    work = stall = 0
    lanes = []
    for t, m in zip(tiles, factors):
        flat = t.per_pixel_counts.ravel()
        lane_costs = [sum(int(flat[order[l * m + k]]) for k in range(m)) for l in range(256 // m)]
        lanes += lane_costs
        for w in range(0, len(lane_costs), 32):
            ws = lane_costs[w:w + 32]
            work += sum(ws)
            stall += 32 * max(ws) - sum(ws)
    return work, stall, lanes


def test_four_lane_example():
    assert warp_costs([40, 1, 1, 1]) == (43, 160, 117)
    r = simulate_warps([[[40], [1], [1], [1]]])
    assert r.total_work_cycles == 43 and r.total_stall_cycles == 117
    assert abs(r.utilization - 43 / 160) < 1e-15
    assert r.max_over_min_lane_ratio == 40.0


def test_balanced_lanes_no_stall():
    r = simulate_warps([[[5]] * 32])
    assert r.total_stall_cycles == 0 and r.utilization == 1.0


def test_merging_pixels_removes_stall():
    before = simulate_warps([[[2], [1], [1]]])
    after = simulate_warps([[[2], [1, 1]]])
    assert before.total_stall_cycles == 2 and after.total_stall_cycles == 0
    assert before.total_work_cycles == after.total_work_cycles == 4


def test_classification_boundaries():
    ts = [tile((i, 0), np.full(256, v)) for i, v in enumerate([0, 1, 2, 4, 5])]
    cls = [r.cls for r in classify_tiles(ts, (1.0, 4.0))]
    assert cls == ["sparse", "sparse", "semi_sparse", "dense", "dense"]
    with pytest.raises(ValueError):
        classify_tiles(ts, (4.0, 4.0))
    with pytest.raises(ValueError):
        RegionDensity((0, 0), -1.0, "dense")
    with pytest.raises(ValueError):
        RegionDensity((0, 0), 1.0, "medium")


def test_default_thresholds():
    ts = [tile((i, 0), np.full(256, v)) for i, v in enumerate([0, 2, 4, 8])]
    assert default_thresholds(ts) == (0.75, 3.0)
    empty = [tile((i, 0), np.zeros(256)) for i in range(3)]
    assert default_thresholds(empty) == (-1.0, 0.0)
    assert all(r.cls == "dense" for r in classify_tiles(empty))


def test_tile_rho():
    assert tile_rho(tile((0, 0), np.full(256, 3))) == 3.0


def test_single_sparse_tile_warps():
    ts = [tile((0, 0), np.ones(256))]
    s = build_schedule([RegionDensity((0, 0), 1.0, "sparse")], ts)
    assert s.warp_count == 2
    assert len(list(s.warps())) == 2
    assert baseline_schedule(ts).warp_count == 8


def test_warp_count_formula():
    ts = random_tiles(0)
    regions = classify_tiles(ts)
    s = build_schedule(regions, ts)
    assert s.warp_count == sum(8 // r.merge_factor for r in regions)
    assert simulate(s, ts).warp_count == s.warp_count


def test_morton_is_permutation_of_z_curve():
    o = PACKINGS["morton"]
    assert sorted(o) == list(range(256))
    assert list(o[:4]) == [0, 1, 16, 17]


@pytest.mark.parametrize("packing", ["row_major", "morton"])
@given(seed=st.integers(0, 2**31))
def test_simulate_matches_loop_oracle(packing, seed):
    ts = random_tiles(seed)
    regions = classify_tiles(ts)
    for sched in (baseline_schedule(ts, packing), build_schedule(regions, ts, packing)):
        rep = simulate(sched, ts)
        w, s, lanes = oracle_simulate(ts, sched.merge_factors, PACKINGS[packing])
        assert rep.total_work_cycles == w and rep.total_stall_cycles == s
        assert rep.max_over_min_lane_ratio == max(lanes) / max(min(lanes), 1)


@given(seed=st.integers(0, 2**31))
def test_work_conserved_and_stall_nonnegative(seed):
    ts = random_tiles(seed)
    regions, base, adapt, ratio = run_both(ts)
    assert base.total_work_cycles == adapt.total_work_cycles == sum(int(t.per_pixel_counts.sum()) for t in ts)
    assert all(r[3] >= 0 for r in base.per_warp + adapt.per_warp)
    assert 0 <= base.utilization <= 1 and 0 <= adapt.utilization <= 1
    assert ratio == base.total_cycles / adapt.total_cycles if adapt.total_cycles else True


def test_all_dense_ratio_one():
    ts = [tile((i, 0), np.full(256, 3) + (np.arange(256) % 2)) for i in range(4)]
    regions, base, adapt, ratio = run_both(ts, thresholds=(0.5, 1.0))
    assert all(r.cls == "dense" for r in regions)
    assert ratio == 1.0


def test_compare_rejects_mismatch():
    a = simulate(baseline_schedule(random_tiles(1)), random_tiles(1))
    b = simulate(baseline_schedule(random_tiles(2)), random_tiles(2))
    with pytest.raises(ValueError):
        compare(a, b)


def test_schedule_errors():
    ts = random_tiles(3)
    with pytest.raises(ValueError):
        build_schedule(classify_tiles(ts)[:-1], ts)
    with pytest.raises(ValueError):
        build_schedule(classify_tiles(ts), ts, "hilbert")
    with pytest.raises(ValueError):
        simulate(baseline_schedule(ts), ts[:-1])


def test_deterministic_on_rendered_tiles():
    s = gap40(0)
    tiles = render_full(s, fixture_camera(), RenderConfig()).tiles
    r1 = run_both(tiles)
    r2 = run_both(render_full(s, fixture_camera(), RenderConfig()).tiles)
    assert r1[1].summary() == r2[1].summary() and r1[3] == r2[3]
    assert r1[1].tile_signature == r2[1].tile_signature
