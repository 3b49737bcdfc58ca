"""Ablation runs for the three techniques and the render/control loop."""

from __future__ import annotations

import math
import time
from collections import Counter

import numpy as np

from .color import bucket_summary, importance_scores, prioritize, tile_buckets
from .config import RunConfig
from .density import density_control_step
from .errors import InternalInvariantError, SplatError, TechniqueError
from .memory import compare_layouts, materialize_colors, verify_reorder_invariance
from .metrics import psnr, ssim
from .render import Image, render, render_full
from .report import RunReport
from .scene import Camera, Rng, Scene, standard_camera
from .workload import baseline_schedule, build_schedule, classify_tiles, compare, simulate

TECHNIQUES = ("t1", "t2", "t3")


def quality(a: Image, b: Image) -> dict:
    return {"psnr": psnr(a, b), "ssim": ssim(a, b)}


def _density_block(step) -> dict:
    st, pre, post = step.stats, step.pre_report, step.report
    return {
        "radius_r": st.radius_r,
        "mu_rho": st.mu_rho,
        "sigma_rho": st.sigma_rho,
        "rho_low": st.rho_low,
        "rho_high": st.rho_high,
        "mu_d": st.mu_d,
        "sigma_d": st.sigma_d,
        "d_merge": st.d_merge,
        "points_before": post.extra["points_before"],
        "points_after_merge": post.extra["points_after_merge"],
        "points_after": post.extra["points_after"],
        "pre_counts_below": pre.counts_below,
        "pre_counts_within": pre.counts_within,
        "pre_counts_above": pre.counts_above,
        "post_counts_below": post.counts_below,
        "post_counts_within": post.counts_within,
        "post_counts_above": post.counts_above,
        "pre_normalized_deviation": pre.normalized_deviation,
        "post_normalized_deviation": post.normalized_deviation,
        "deviation_ratio": step.deviation_ratio,
    }


def run_t1(scene: Scene, camera: Camera, cfg: RunConfig, report: RunReport) -> Scene:
    rc = cfg.render_config()
    step = density_control_step(scene, cfg.density_params(), Rng(cfg["run.seed"]))
    report.add("t1.density", _density_block(step))
    report.add("t1.quality", quality(render(scene, camera, rc), render(step.scene, camera, rc)))
    return step.scene


def workload_blocks(tiles, cfg: RunConfig) -> dict:
    mode = cfg["workload.mode"]
    packing = cfg["workload.packing"]
    regions = classify_tiles(tiles, cfg.workload_thresholds())
    classes = Counter(r.cls for r in regions)
    out = {"t2.classes": {
        "tiles": len(tiles),
        "dense": classes.get("dense", 0),
        "semi_sparse": classes.get("semi_sparse", 0),
        "sparse": classes.get("sparse", 0),
    }}
    base = adapt = None
    if mode in ("baseline", "both"):
        base = simulate(baseline_schedule(tiles, packing), tiles)
        out["t2.baseline"] = base.summary()
    if mode in ("adaptive", "both"):
        adapt = simulate(build_schedule(regions, tiles, packing), tiles)
        out["t2.adaptive"] = adapt.summary()
    if base is not None and adapt is not None:
        if base.total_work_cycles != adapt.total_work_cycles:
            raise InternalInvariantError("work cycles differ between schedules of the same tiles")
        out["t2.compare"] = {"speedup": compare(base, adapt),
                             "baseline_utilization": base.utilization,
                             "adaptive_utilization": adapt.utilization}
    return out


def run_t2(scene: Scene, camera: Camera, cfg: RunConfig, report: RunReport) -> None:
    rc = cfg.render_config()
    full = render_full(scene, camera, rc)
    report.add("t2.buckets", bucket_summary(tile_buckets(scene, full.tiles)))
    table = importance_scores(scene, camera, full.tiles, full.image, rc)
    keep = prioritize(table, cfg["color.keep_fraction"], cfg["color.invert"])
    s = table.scores
    report.add("t2.importance", {
        "gaussians": len(s),
        "score_mean": float(np.mean(s)),
        "score_min": float(np.min(s)),
        "score_max": float(np.max(s)),
        "zero_scores": int(np.sum(s == 0.0)),
        "kept": len(keep),
    })
    pruned = render(scene.take(np.sort(np.asarray(keep, dtype=np.int64))), camera, rc)
    report.add("t2.quality", quality(full.image, pruned))
    for name, vals in workload_blocks(full.tiles, cfg).items():
        report.add(name, vals)


def run_t3(scene: Scene, camera: Camera, cfg: RunConfig, report: RunReport) -> None:
    rc = cfg.render_config()
    full = render_full(scene, camera, rc)
    base, opt, tx_ratio, speed = compare_layouts(full.tiles, len(scene), cfg["memory.segment_bytes"],
                                                 cfg["memory.cost_ratio"])
    layout = cfg["memory.layout"]
    if layout in ("channel_split", "both"):
        report.add("t3.baseline", base.summary())
    if layout in ("interleaved", "both"):
        report.add("t3.optimized", opt.summary())
    if layout == "both":
        report.add("t3.compare", {"transaction_ratio": tx_ratio, "modeled_speedup": speed})
    ok = verify_reorder_invariance(scene, camera, rc)
    if not ok:
        raise InternalInvariantError("[t3] layout change altered the render")
    a = render(scene, camera, rc, colors=materialize_colors(scene, "channel_split"))
    b = render(scene, camera, rc, colors=materialize_colors(scene, "interleaved"))
    fault_seen = not verify_reorder_invariance(scene, camera, rc, fault=True)
    report.add("t3.invariance", {"bit_identical": ok, "fault_detected": fault_seen})
    report.add("t3.quality", quality(a, b))


RUNNERS = {"t1": run_t1, "t2": run_t2, "t3": run_t3}


def ablate(technique: str, scene: Scene, camera: Camera, cfg: RunConfig, command: str | None = None) -> RunReport:
    if technique not in TECHNIQUES + ("all",):
        raise ValueError(f"unknown technique {technique!r}; choose from t1, t2, t3, all")
    report = RunReport(command or f"ablate {technique}", cfg)
    report.add("scene", {"gaussians": len(scene), "width": camera.width, "height": camera.height})
    for t in (TECHNIQUES if technique == "all" else (technique,)):
        t0 = time.perf_counter()
        try:
            RUNNERS[t](scene, camera, cfg, report)
        except (SplatError, ValueError) as e:
            if isinstance(e, TechniqueError):
                raise
            raise TechniqueError(t, e) from e
        report.timings[f"{t}_seconds"] = time.perf_counter() - t0
    return report


def loop_cameras(n: int, width: int = 256, height: int = 256) -> list[Camera]:
    """The standard rig, plus n-1 copies shifted sideways on a circle of radius 2."""
    if n < 1:
        raise ValueError("need at least one camera")
    cams = [standard_camera(width, height)]
    for i in range(1, n):
        a = 2.0 * math.pi * (i - 1) / max(n - 1, 1)
        cams.append(standard_camera(width, height, (2.0 * math.cos(a), 2.0 * math.sin(a))))
    return cams


def run_loop(scene: Scene, cameras: list[Camera], iterations: int, cfg: RunConfig):
    """Render every camera each iteration and run density control every ``interval`` iterations.

    The scene only changes at control steps, so renders are cached between them;
    a segment records the per-iteration workload cost for a stretch of iterations
    sharing one scene. Returns (final scene, report).
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if not cameras:
        raise ValueError("need at least one camera")
    params = cfg.density_params()
    rc = cfg.render_config()
    rng = Rng(cfg["run.seed"])
    report = RunReport(f"loop {iterations}", cfg)
    thresholds = cfg.workload_thresholds()
    t0 = time.perf_counter()

    def cost(sc: Scene):
        b = a = 0
        for cam in cameras:
            tiles = render_full(sc, cam, rc).tiles
            regions = classify_tiles(tiles, thresholds)
            b += simulate(baseline_schedule(tiles), tiles).total_cycles
            a += simulate(build_schedule(regions, tiles), tiles).total_cycles
        return b, a

    invocations = []
    segments = []
    seg_start = 1
    current = cost(scene)
    for it in range(1, iterations + 1):
        if it % params.interval == 0:
            segments.append((seg_start, it, current))
            step = density_control_step(scene, params, rng)
            scene = step.scene
            invocations.append((it, step))
            current = cost(scene)
            seg_start = it + 1
    if seg_start <= iterations:
        segments.append((seg_start, iterations, current))

    report.add("loop", {
        "iterations": iterations,
        "interval": params.interval,
        "cameras": len(cameras),
        "invocations": len(invocations),
        "final_gaussians": len(scene),
    })
    devs = []
    for i, (it, step) in enumerate(invocations):
        blk = _density_block(step)
        blk["iteration"] = it
        report.add(f"loop.density.{i + 1}", blk)
        devs.append(step.report.normalized_deviation)
    if devs:
        report.add("loop.trend", {
            "post_normalized_deviation": devs,
            "non_increasing": all(b <= a for a, b in zip(devs, devs[1:])),
        })
    for i, (a, b, (cb, ca)) in enumerate(segments):
        report.add(f"loop.cost.{i + 1}", {
            "first_iteration": a, "last_iteration": b,
            "baseline_cycles_per_iteration": cb, "adaptive_cycles_per_iteration": ca,
        })
    report.timings["loop_seconds"] = time.perf_counter() - t0
    return scene, report

