"""Named synthetic scenes, all framed for ``standard_camera()``.

The standard rig looks down +z from 20 units away with focal length equal to the
image width, so at depth 20 one world unit spans 256/20 = 12.8 pixels of a
256-pixel frame and world x = 5 lands on the image centre.
"""

from __future__ import annotations

import numpy as np

from .scene import Camera, Cluster, Rng, Scene, SyntheticSpec, generate_synthetic_scene, look_from, standard_camera

DEPTH = 20.0
CENTER_X = 5.0


def pixel_to_world(px, py, depth=DEPTH, width=256, height=256, focal=256.0):
    """World point that the standard camera projects onto pixel (px, py) at camera depth ``depth``."""
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    x = (px - width / 2.0) * depth / focal + CENTER_X
    y = (py - height / 2.0) * depth / focal
    return np.stack(np.broadcast_arrays(x, y, depth - DEPTH), axis=-1)


def px_to_world_len(pixels, depth=DEPTH, focal=256.0):
    return pixels * depth / focal


def _build(means, scales, opac, colors, rng: Rng, seed: int) -> Scene:
    n = len(means)
    return Scene(means, scales, rng.random_quaternions(n), opac, colors, seed)


def contrast100(seed: int = 0) -> Scene:
    """Two equal-volume cubes 10 units apart holding 10000 and 100 Gaussians."""
    return generate_synthetic_scene(SyntheticSpec(
        [Cluster(10000, (0.0, 0.0, 0.0), 1.0, color=(0.8, 0.35, 0.2)),
         Cluster(100, (10.0, 0.0, 0.0), 1.0, color=(0.2, 0.45, 0.8))],
        seed=seed, meta={"fixture": "contrast100"}))


def gap40(seed: int = 0) -> Scene:
    """Dense left half (about 40 blends per pixel) against a sparse right half.

    Every right-half tile column also carries one thin vertical line, built from 40
    stacked faint splats centred on its middle pixel column. Each line pixel costs
    about 40 evaluations while its tile neighbours cost about 1, which is the
    per-thread workload gap the scheduler targets.
    """
    rng = Rng(seed)
    sig_px = 4.0
    s_world = px_to_world_len(sig_px)
    # dense half: centres over x in [0, 116) px so splats stay out of the right half
    n_dense = 2700
    px = rng.uniform(0.0, 116.0, n_dense)
    py = rng.uniform(0.0, 256.0, n_dense)
    dz = rng.uniform(-1.0, 1.0, n_dense)
    dense = pixel_to_world(px, py, DEPTH + dz)
    # sparse background: about one blend per pixel
    n_bg = 68
    bx = rng.uniform(140.0, 256.0, n_bg)
    by = rng.uniform(0.0, 256.0, n_bg)
    bz = rng.uniform(-1.0, 1.0, n_bg)
    bg = pixel_to_world(bx, by, DEPTH + bz)
    # lines sit at depth exactly 20 so each maps onto an exact pixel column; ties sort by index
    cols = np.repeat(np.arange(8, 16) * 16 + 8, 40).astype(np.float64)
    line = pixel_to_world(cols, np.full(len(cols), 128.0), DEPTH)
    means = np.vstack([dense, bg, line])
    iso = np.full((n_dense + n_bg, 3), s_world)
    thin = np.tile([1e-4, px_to_world_len(80.0), 1e-4], (len(line), 1))
    scales = np.vstack([iso, thin])
    opac = np.concatenate([np.full(n_dense + n_bg, 0.5), np.full(len(line), 0.02)])
    colors = np.vstack([
        np.clip(np.array([0.75, 0.3, 0.25]) + rng.normal(0.0, 0.05, (n_dense, 3)), 0.0, 1.0),
        np.clip(np.array([0.2, 0.3, 0.7]) + rng.normal(0.0, 0.05, (n_bg, 3)), 0.0, 1.0),
        np.tile([0.95, 0.95, 0.9], (len(line), 1)),
    ])
    # lines must stay axis aligned: identity rotation for them
    rots = np.vstack([rng.random_quaternions(n_dense + n_bg), np.tile([1.0, 0.0, 0.0, 0.0], (len(line), 1))])
    return Scene(means, scales, rots, opac, colors, seed)


def uniform(seed: int = 0) -> Scene:
    """Large overlapping splats spread evenly past the frame edges: smooth per-pixel load."""
    rng = Rng(seed)
    n = 900
    sig_px = 12.0
    px = rng.uniform(-36.0, 292.0, n)
    py = rng.uniform(-36.0, 292.0, n)
    dz = rng.uniform(-1.0, 1.0, n)
    means = pixel_to_world(px, py, DEPTH + dz)
    scales = np.full((n, 3), px_to_world_len(sig_px))
    opac = np.full(n, 0.5)
    colors = np.clip(np.array([0.5, 0.55, 0.5]) + rng.normal(0.0, 0.05, (n, 3)), 0.0, 1.0)
    return _build(means, scales, opac, colors, rng, seed)


def clustered(seed: int = 0) -> Scene:
    """Five Gaussian blobs of different sizes and populations inside the frame."""
    specs = [
        (3000, (2.0, -3.0, 0.0), 1.2, (0.85, 0.3, 0.25)),
        (1500, (8.0, 4.0, 0.0), 1.5, (0.3, 0.75, 0.35)),
        (600, (0.0, 5.0, 0.0), 2.0, (0.25, 0.35, 0.85)),
        (250, (10.0, -4.0, 0.0), 2.0, (0.85, 0.8, 0.3)),
        (80, (5.0, 0.0, 0.0), 4.0, (0.6, 0.6, 0.6)),
    ]
    return generate_synthetic_scene(SyntheticSpec(
        [Cluster(n, c, s, distribution="normal", color=col) for n, c, s, col in specs],
        seed=seed, meta={"fixture": "clustered"}))


FIXTURES = {
    "contrast100": (contrast100, "10000 vs 100 Gaussians in equal cubes 10 units apart (100x density contrast)"),
    "gap40": (gap40, "dense left half (~40 blends/pixel) vs sparse right half with one 40-blend line per tile"),
    "uniform": (uniform, "900 large overlapping splats covering the frame evenly"),
    "clustered": (clustered, "five normal blobs, 80 to 3000 Gaussians each"),
}


def make_fixture(name: str, seed: int = 0) -> Scene:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; valid fixtures: {', '.join(sorted(FIXTURES))}")
    return FIXTURES[name][0](seed)


def fixture_camera(width: int = 256, height: int = 256) -> Camera:
    return standard_camera(width, height)


def random_tile_scene(seed: int = 0, per_tile: int = 48) -> tuple[Scene, Camera]:
    """128x128 frame (64 tiles) with small splats scattered evenly, about ``per_tile`` listed per tile."""
    rng = Rng(seed)
    cam = look_from((0.0, 0.0, DEPTH), 128, 128, focal=128.0, name="random64")
    # 2 px splats: a 3-sigma box of 12 px touches about 1.6 tiles per axis
    n = int(per_tile * 64 / 2.2)
    px = rng.uniform(0.0, 128.0, n)
    py = rng.uniform(0.0, 128.0, n)
    z = DEPTH + rng.uniform(-1.0, 1.0, n)
    means = np.stack([(px - 64.0) * z / 128.0, (py - 64.0) * z / 128.0, z - DEPTH], axis=-1)
    scales = np.full((n, 3), 2.0 * DEPTH / 128.0)
    opac = rng.uniform(0.3, 1.0, n)
    colors = rng.uniform(0.0, 1.0, (n, 3))
    return _build(means, scales, opac, colors, rng, seed), cam
