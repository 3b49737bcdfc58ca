"""Workload-sensitive density control.

One adaptation cycle measures each Gaussian's local density (neighbours within a
fixed radius), derives low/high thresholds from the global mean and standard
deviation, merges close pairs among over-dense Gaussians and spawns perturbed
neighbours around under-dense ones.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .scene import Rng, Scene
from .spatial import knn_distances, radius_counts, radius_pairs


@dataclass(frozen=True)
class DensityParams:
    radius_r: float | None = None  # None: median 8th-neighbour distance of the scene
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    k: int = 8
    alpha_sigma: float = 1.5
    delta: float | None = None  # None: 0.1 * radius_r
    max_rounds: int = 4
    interval: int = 1500
    overlap_factor: float = 1.0


@dataclass(frozen=True)
class DensityStats:
    radius_r: float
    mu_rho: float
    sigma_rho: float
    rho_low: float
    rho_high: float
    mu_d: float
    sigma_d: float
    d_merge: float
    alpha: float
    beta: float
    gamma: float

    @property
    def rho_low_clamped(self) -> float:
        return max(0.0, self.rho_low)


@dataclass
class DensityReport:
    per_point_rho: np.ndarray
    normalized_deviation: float
    counts_below: int
    counts_within: int
    counts_above: int
    radius_r: float
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = {
            "points": int(len(self.per_point_rho)),
            "radius_r": self.radius_r,
            "mean_rho": float(np.mean(self.per_point_rho)) if len(self.per_point_rho) else 0.0,
            "normalized_deviation": self.normalized_deviation,
            "counts_below": self.counts_below,
            "counts_within": self.counts_within,
            "counts_above": self.counts_above,
        }
        out.update(self.extra)
        return out


def local_density(scene: Scene, radius_r: float) -> np.ndarray:
    """Neighbours within radius_r of each Gaussian, itself excluded."""
    return radius_counts(scene.means, radius_r)


def default_radius(scene: Scene) -> float:
    return float(np.median(knn_distances(scene.means, 8)[:, -1]))


def normalized_deviation(rho) -> float:
    """sigma/mu of the densities (population std); 0 when the mean is 0."""
    rho = np.asarray(rho, dtype=np.float64)
    mu = float(rho.mean()) if len(rho) else 0.0
    return float(rho.std()) / mu if mu > 0 else 0.0


def compute_stats(scene: Scene, radius_r: float, alpha: float = 1.0, beta: float = 1.0,
                  gamma: float = 1.0, k: int = 8, rho: np.ndarray | None = None) -> DensityStats:
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(scene) < k + 1:
        raise ValueError(f"scene has {len(scene)} points; statistics need at least k+1={k + 1}")
    rho = local_density(scene, radius_r) if rho is None else np.asarray(rho)
    mu = float(np.mean(rho))
    sd = float(np.std(rho))
    d = knn_distances(scene.means, k)
    mu_d, sd_d = float(np.mean(d)), float(np.std(d))
    return DensityStats(
        radius_r=float(radius_r), mu_rho=mu, sigma_rho=sd,
        rho_low=mu - alpha * sd, rho_high=mu + beta * sd,
        mu_d=mu_d, sigma_d=sd_d, d_merge=mu_d + gamma * sd_d,
        alpha=alpha, beta=beta, gamma=gamma,
    )


def density_report(rho, stats: DensityStats, **extra) -> DensityReport:
    rho = np.asarray(rho)
    below = int(np.sum(rho < stats.rho_low_clamped))
    above = int(np.sum(rho > stats.rho_high))
    return DensityReport(rho, normalized_deviation(rho), below, len(rho) - below - above, above,
                         stats.radius_r, dict(extra))


def merge_dense(scene: Scene, stats: DensityStats, rho: np.ndarray | None = None,
                overlap_factor: float = 1.0) -> Scene:
    """Greedy pair merge among Gaussians above rho_high.

    Candidate pairs within d_merge are taken in ascending distance (ties by index)
    and each Gaussian joins at most one merge. The merged Gaussian takes the lower
    index's slot.
    """
    rho = local_density(scene, stats.radius_r) if rho is None else np.asarray(rho)
    dense = np.nonzero(rho > stats.rho_high)[0]
    if len(dense) < 2:
        return scene
    pi, pj, _ = radius_pairs(scene.means[dense], stats.d_merge)
    if len(pi) == 0:
        return scene
    means = scene.means.copy()
    scales = scene.scales.copy()
    rots = scene.rotations.copy()
    opac = scene.opacities.copy()
    cols = scene.colors.copy()
    used = np.zeros(len(scene), dtype=bool)
    drop = []
    for a, b in zip(dense[pi], dense[pj]):
        if used[a] or used[b]:
            continue
        used[a] = used[b] = True
        lo, hi = (a, b) if a < b else (b, a)
        w1, w2 = opac[lo], opac[hi]
        ws = w1 + w2
        if ws > 0:
            means[lo] = (w1 * means[lo] + w2 * means[hi]) / ws
            cols[lo] = (w1 * cols[lo] + w2 * cols[hi]) / ws
        else:
            means[lo] = (means[lo] + means[hi]) / 2.0
            cols[lo] = (cols[lo] + cols[hi]) / 2.0
        scales[lo] = (scales[lo] + scales[hi]) / 2.0
        if w2 > w1:
            rots[lo] = rots[hi]
        opac[lo] = min(1.0, ws * overlap_factor)
        drop.append(hi)
    keep = np.ones(len(scene), dtype=bool)
    keep[drop] = False
    return Scene(means[keep], scales[keep], rots[keep], opac[keep], cols[keep], scene.seed)


def densify_sparse(scene: Scene, stats: DensityStats, k: int, alpha_sigma: float, delta: float,
                   rng: Rng, max_rounds: int) -> Scene:
    """Spawn jittered copies around Gaussians below rho_low until they reach it.

    Each round, every still-sparse parent (ascending index) receives
    ceil(rho_low - rho) children drawn from N(p, sigma_p^2 I) plus U(-delta, delta)
    per axis, where sigma_p = alpha_sigma times its mean k-nearest distance.
    Children copy the parent's scale, rotation, opacity and color.
    """
    if not alpha_sigma > 1:
        raise ValueError("alpha_sigma must exceed 1")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    target = stats.rho_low_clamped
    rho = local_density(scene, stats.radius_r)
    pending = np.nonzero(rho < target)[0]
    if len(pending) == 0 or max_rounds <= 0:
        return scene
    if len(scene) < 2:
        raise ValueError("densification needs at least two points to measure spacing")
    kk = min(k, len(scene) - 1)
    sigma = alpha_sigma * knn_distances(scene.means, kk).mean(axis=1)
    out = scene
    for _ in range(max_rounds):
        new = []
        for p in pending:
            n = max(1, int(math.ceil(target - rho[p])))
            pos = rng.normal(scene.means[p], sigma[p], (n, 3))
            pos = pos + rng.uniform(-delta, delta, (n, 3))
            new.append((p, pos))
        parents = np.concatenate([np.full(len(pos), p) for p, pos in new])
        child = Scene(np.vstack([pos for _, pos in new]), scene.scales[parents], scene.rotations[parents],
                      scene.opacities[parents], scene.colors[parents], scene.seed)
        out = out.concat(child)
        rho = local_density(out, stats.radius_r)
        pending = pending[rho[pending] < target]
        if len(pending) == 0:
            break
    return out


@dataclass
class StepResult:
    scene: Scene
    report: DensityReport
    stats: DensityStats
    pre_report: DensityReport

    def __iter__(self):
        return iter((self.scene, self.report))

    @property
    def deviation_ratio(self) -> float:
        pre = self.pre_report.normalized_deviation
        return self.report.normalized_deviation / pre if pre > 0 else 1.0


def density_control_step(scene: Scene, params: DensityParams, rng: Rng) -> StepResult:
    """compute_stats -> merge_dense -> densify_sparse, then a report on the result.

    The post-step report measures density with the same radius as the pre-step
    statistics so the two deviations are comparable.
    """
    r = params.radius_r if params.radius_r is not None else default_radius(scene)
    rho = local_density(scene, r)
    stats = compute_stats(scene, r, params.alpha, params.beta, params.gamma, params.k, rho=rho)
    pre = density_report(rho, stats)
    merged = merge_dense(scene, stats, rho, params.overlap_factor)
    delta = params.delta if params.delta is not None else 0.1 * r
    grown = densify_sparse(merged, stats, params.k, params.alpha_sigma, delta, rng, params.max_rounds)
    post = density_report(local_density(grown, r), stats,
                          points_before=len(scene), points_after_merge=len(merged),
                          points_after=len(grown), pre_normalized_deviation=pre.normalized_deviation)
    post.extra["deviation_ratio"] = (post.normalized_deviation / pre.normalized_deviation
                                     if pre.normalized_deviation > 0 else 1.0)
    return StepResult(grown, post, stats, pre)


def params_dict(p: DensityParams) -> dict:
    return asdict(p)
