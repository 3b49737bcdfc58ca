import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial import ConvexHull, Delaunay

from splatbalance.density import (DensityParams, DensityStats, compute_stats, default_radius, density_control_step,
                                  density_report, densify_sparse, local_density, merge_dense, normalized_deviation)
from splatbalance.fixtures import contrast100, uniform
from splatbalance.scene import Rng, Scene
from splatbalance.spatial import knn_distances, radius_pairs


def pts_scene(points, opac=None, seed=0):
    p = np.asarray(points, dtype=np.float64)
    n = len(p)
    op = np.full(n, 0.5) if opac is None else np.asarray(opac, dtype=np.float64)
    return Scene(p, np.full((n, 3), 0.1), np.tile([1.0, 0, 0, 0], (n, 1)), op, np.full((n, 3), 0.5), seed)


def brute_counts(p, r):
    d = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1))
    return (d <= r).sum(1) - 1


def stats_with(rho_high, d_merge, rho_low=0.0, r=1.0):
    return DensityStats(r, 0.0, 0.0, rho_low, rho_high, 0.0, 0.0, d_merge, 1.0, 1.0, 1.0)


def test_local_density_examples():
    assert list(local_density(pts_scene([[0, 0, 0], [0.5, 0, 0]]), 1.0)) == [1, 1]
    assert list(local_density(pts_scene([[0, 0, 0], [2, 0, 0]]), 1.0)) == [0, 0]
    with pytest.raises(ValueError):
        local_density(pts_scene([[0, 0, 0]]), 0.0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_grid_equals_brute_force_1000(seed):
    p = Rng(seed).uniform(0, 1, (1000, 3))
    for r in (0.03, 0.1, 0.25):
        assert np.array_equal(local_density(pts_scene(p), r), brute_counts(p, r))


def test_grid_exact_at_boundary_distance():
    # points exactly r apart on a lattice count as neighbours
    g = np.stack(np.meshgrid(*[np.arange(4) * 0.25] * 3, indexing="ij"), -1).reshape(-1, 3)
    assert np.array_equal(local_density(pts_scene(g), 0.25), brute_counts(g, 0.25))


@given(st.integers(0, 2**31), st.floats(0.01, 0.6))
def test_grid_brute_property(seed, r):
    p = Rng(seed).normal(0, 0.3, (150, 3))
    assert np.array_equal(local_density(pts_scene(p), r), brute_counts(p, r))


def test_compute_stats_example():
    s = pts_scene(Rng(0).uniform(size=(10, 3)))
    st_ = compute_stats(s, 1.0, rho=np.array([1, 2, 3, 4, 5, 1, 2, 3, 4, 5]), k=2)
    assert st_.mu_rho == 3.0 and abs(st_.sigma_rho - math.sqrt(2)) < 1e-15
    assert abs(st_.rho_low - (3 - math.sqrt(2))) < 1e-15 and abs(st_.rho_high - (3 + math.sqrt(2))) < 1e-15
    d = knn_distances(s.means, 2)
    assert st_.mu_d == float(np.mean(d)) and st_.sigma_d == float(np.std(d))
    g0 = compute_stats(s, 1.0, gamma=0.0, k=2)
    assert g0.d_merge == g0.mu_d
    with pytest.raises(ValueError):
        compute_stats(s, 1.0, k=10)


def test_equal_density_degenerate():
    g = np.stack(np.meshgrid(*[np.arange(3)] * 3, indexing="ij"), -1).reshape(-1, 3).astype(float)
    st_ = compute_stats(pts_scene(g), 1.0, rho=np.full(27, 4))
    assert st_.rho_low == st_.rho_high == 4.0


def test_threshold_identities_from_report():
    s = contrast100(1)
    step = density_control_step(s, DensityParams(), Rng(1))
    st_, pre = step.stats, step.pre_report
    rho = pre.per_point_rho
    assert st_.mu_rho == float(np.mean(rho)) and st_.sigma_rho == float(np.std(rho))
    assert st_.rho_low == st_.mu_rho - st_.alpha * st_.sigma_rho
    assert st_.rho_high == st_.mu_rho + st_.beta * st_.sigma_rho
    assert st_.d_merge == st_.mu_d + st_.gamma * st_.sigma_d
    for rep in (pre, step.report):
        assert rep.counts_below + rep.counts_within + rep.counts_above == len(rep.per_point_rho)
    assert pre.counts_below == int(np.sum(rho < max(0, st_.rho_low)))
    assert pre.counts_above == int(np.sum(rho > st_.rho_high))


def test_merge_weighted_centroid_example():
    s = pts_scene([[0, 0, 0], [2, 0, 0]], opac=[1.0 / 4, 3.0 / 4])
    out = merge_dense(s, stats_with(rho_high=-1.0, d_merge=2.5), rho=np.array([1, 1]))
    assert len(out) == 1
    assert np.allclose(out.means[0], [1.5, 0, 0])
    assert out.opacities[0] == 1.0


def test_merge_attributes():
    s = Scene([[0, 0, 0], [1, 0, 0]], [[0.1, 0.2, 0.3], [0.3, 0.2, 0.1]],
              [[1, 0, 0, 0], [0, 1, 0, 0]], [0.2, 0.6], [[1, 0, 0], [0, 0, 1]])
    out = merge_dense(s, stats_with(-1.0, 2.0), rho=np.array([1, 1]))
    assert np.allclose(out.scales[0], [0.2, 0.2, 0.2])
    assert np.array_equal(out.rotations[0], [0, 1, 0, 0])
    assert np.allclose(out.colors[0], [0.25, 0, 0.75])
    assert abs(out.opacities[0] - 0.8) < 1e-15
    out2 = merge_dense(s, stats_with(-1.0, 2.0), rho=np.array([1, 1]), overlap_factor=0.5)
    assert abs(out2.opacities[0] - 0.4) < 1e-15


def test_merge_identity_when_not_dense():
    s = pts_scene(Rng(1).uniform(size=(50, 3)))
    assert merge_dense(s, stats_with(rho_high=1e9, d_merge=10.0)) is s


def test_merge_greedy_order_one_per_point():
    # 0-1 closest, then 1-2 (blocked), then 2-3
    s = pts_scene([[0, 0, 0], [0.1, 0, 0], [0.25, 0, 0], [0.45, 0, 0]])
    out = merge_dense(s, stats_with(-1.0, 1.0), rho=np.ones(4))
    assert len(out) == 2
    assert np.allclose(out.means[:, 0], [0.05, 0.35])


def test_merge_pair_scan_oracle():
    """Every pair left mergeable after a pass must involve a Gaussian that already merged.

    Checked against a plain all-pairs scan of the input.
    """
    s = contrast100(2)
    r = default_radius(s)
    rho = local_density(s, r)
    st_ = compute_stats(s, r, rho=rho)
    out = merge_dense(s, st_, rho)
    dense = np.nonzero(rho > st_.rho_high)[0]
    p = s.means[dense]
    d = np.sqrt(((p[:, None] - p[None]) ** 2).sum(-1))
    iu = np.triu_indices(len(dense), 1)
    ok = d[iu] <= st_.d_merge
    # replay greedy selection from the brute-force pair list
    order = np.lexsort((iu[1][ok], iu[0][ok], d[iu][ok]))
    used = np.zeros(len(dense), bool)
    merged = 0
    for a, b in zip(iu[0][ok][order], iu[1][ok][order]):
        if not used[a] and not used[b]:
            used[a] = used[b] = True
            merged += 1
    assert len(out) == len(s) - merged
    # no mergeable pair of two untouched dense Gaussians survives
    untouched = ~used
    assert not np.any(ok & untouched[iu[0]] & untouched[iu[1]])
    # the pair list from the grid equals the brute-force list
    gi, gj, gd = radius_pairs(p, st_.d_merge)
    assert np.array_equal(np.sort(gi * len(p) + gj), np.sort((iu[0] * len(p) + iu[1])[ok]))


@given(st.integers(0, 2**31), st.integers(2, 6))
def test_merged_position_in_member_hull(seed, n):
    rng = Rng(seed)
    p = rng.uniform(0, 1, (n, 3))
    w = rng.uniform(0.05, 1.0, n)
    # force a single merge of members 0 and 1: centroid lies on their segment
    s = pts_scene(p[:2], opac=w[:2])
    out = merge_dense(s, stats_with(-1.0, 10.0), rho=np.ones(2))
    m = out.means[0]
    t = np.dot(m - p[0], p[1] - p[0]) / max(np.dot(p[1] - p[0], p[1] - p[0]), 1e-300)
    assert -1e-12 <= t <= 1 + 1e-12
    assert np.allclose(m, p[0] + t * (p[1] - p[0]), atol=1e-12)


def test_merge_opacity_mass_bound():
    s = contrast100(3)
    r = default_radius(s)
    rho = local_density(s, r)
    out = merge_dense(s, compute_stats(s, r, rho=rho), rho)
    assert out.opacities.sum() <= s.opacities.sum() + 1e-9
    assert len(out) <= len(s)


def test_densify_noop_when_dense():
    s = pts_scene(Rng(1).uniform(size=(40, 3)))
    st_ = stats_with(rho_high=100, d_merge=0.1, rho_low=0.0, r=0.5)
    assert densify_sparse(s, st_, 8, 1.5, 0.01, Rng(0), 4) is s


def test_densify_isolated_point_reaches_target():
    pts = np.vstack([Rng(2).uniform(0, 0.2, (20, 3)), [[0.6, 0.1, 0.1]]])
    s = pts_scene(pts)
    r = 0.3
    assert local_density(s, r)[20] == 0
    sigma = 1.05 * knn_distances(s.means, 3).mean(axis=1)[20]
    for seed in range(5):
        out = densify_sparse(s, stats_with(rho_high=100, d_merge=0.1, rho_low=2.0, r=r), 3, 1.05, 0.0, Rng(seed), 50)
        assert len(out) > len(s)
        assert local_density(out, r)[20] >= 2
        assert out.equals(out) and np.array_equal(out.means[:len(s)], s.means)
        # children of the isolated parent carry its attributes
        kids = np.nonzero(np.all(out.colors[len(s):] == s.colors[20], axis=1))[0]
        assert len(kids) > 0
        assert np.all(np.linalg.norm(out.means[len(s):] - [0.3, 0.1, 0.1], axis=1) <= 0.3 + 6 * sigma)


def test_densify_determinism_and_errors():
    pts = np.vstack([Rng(2).uniform(0, 0.2, (20, 3)), [[5.0, 5.0, 5.0]]])
    s = pts_scene(pts)
    st_ = stats_with(100, 0.1, 2.0, 1.0)
    a = densify_sparse(s, st_, 3, 1.5, 0.0, Rng(4), 4)
    b = densify_sparse(s, st_, 3, 1.5, 0.0, Rng(4), 4)
    assert a.equals(b)
    with pytest.raises(ValueError):
        densify_sparse(s, st_, 3, 1.0, 0.0, Rng(4), 4)
    with pytest.raises(ValueError):
        densify_sparse(s, st_, 3, 1.5, -1.0, Rng(4), 4)


@given(st.integers(0, 2**31))
def test_merge_never_grows_densify_never_shrinks(seed):
    rng = Rng(seed)
    p = np.vstack([rng.normal(0, 0.2, (150, 3)), rng.uniform(-3, 3, (30, 3))])
    s = pts_scene(p, opac=rng.uniform(0.1, 1, len(p)))
    r = default_radius(s)
    rho = local_density(s, r)
    st_ = compute_stats(s, r, rho=rho)
    m = merge_dense(s, st_, rho)
    assert len(m) <= len(s)
    d = densify_sparse(m, st_, 8, 1.5, 0.1 * r, Rng(seed), 2)
    assert len(d) >= len(m)


def test_step_determinism():
    s = contrast100(1)
    a = density_control_step(s, DensityParams(), Rng(5))
    b = density_control_step(s, DensityParams(), Rng(5))
    assert a.scene.equals(b.scene)
    assert a.report.summary() == b.report.summary()


def test_normalized_deviation():
    assert normalized_deviation([2, 2, 2]) == 0.0
    assert normalized_deviation([0, 0]) == 0.0
    assert abs(normalized_deviation([1, 3]) - 0.5) < 1e-15


def test_step_reports_same_radius():
    s = uniform(0)
    step = density_control_step(s, DensityParams(), Rng(0))
    assert step.report.radius_r == step.pre_report.radius_r == step.stats.radius_r
    rep = density_report(local_density(step.scene, step.stats.radius_r), step.stats)
    assert np.array_equal(rep.per_point_rho, step.report.per_point_rho)


@pytest.mark.xfail(strict=True, reason="observed: about 16% of uniform points sit below rho_low at alpha = 1, "
                                      "so densification grows the scene far past 5%")
def test_uniform_count_change_under_five_percent():
    p = Rng(0).uniform(0, 1, (4000, 3))
    step = density_control_step(pts_scene(p), DensityParams(), Rng(0))
    assert abs(len(step.scene) - 4000) / 4000 < 0.05


def _peaked(seed):
    rng = Rng(seed)
    return pts_scene(np.vstack([rng.normal(0, 0.05, (600, 3)), rng.uniform(-3, 3, (400, 3))]))


@pytest.mark.parametrize("seed", [
    0, 1, 2,
    pytest.param(3, marks=pytest.mark.xfail(strict=True, reason="observed counterexample: 1.1304 -> 1.1342")),
    4, 5,
])
def test_deviation_decreases_when_above_one(seed):
    step = density_control_step(_peaked(seed), DensityParams(), Rng(seed))
    pre = step.pre_report.normalized_deviation
    assert pre > 1.0
    assert step.report.normalized_deviation < pre
