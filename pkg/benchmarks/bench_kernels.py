"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--fixture gap40]

Each kernel is run on the same inputs with both backends; the table reports the
best-of-N wall time and the speedup of the compiled core. Outputs are compared
so a faster-but-wrong backend shows up here too.
"""

import argparse
import time

import numpy as np

from splatbalance import kernels
from splatbalance.fixtures import fixture_camera, make_fixture, random_tile_scene
from splatbalance.memory import LayoutSpec, trace_optimized
from splatbalance.render import RenderConfig, render_full


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(fixture, seed):
    scene = make_fixture(fixture, seed)
    cam = fixture_camera()
    r = 0.25
    tscene, tcam = random_tile_scene(seed)
    tiles = render_full(tscene, tcam, RenderConfig()).tiles
    addr = trace_optimized(tiles, LayoutSpec("interleaved", len(tscene))).addresses
    rng = np.random.default_rng(seed)
    scattered = (rng.integers(0, 1 << 16, (20000, 32)) * 4).astype(np.int64)
    return {
        f"rasterize ({fixture}, {len(scene)} splats)":
            lambda b: render_full(scene, cam, RenderConfig(backend=b)).image.pixels,
        f"neighbor_counts ({len(scene)} pts, r={r})":
            lambda b: kernels.available_backends()[b].neighbor_counts(scene.means, r),
        f"segment_counts (stripes, {len(addr)} rows)":
            lambda b: kernels.available_backends()[b].segment_counts(addr, 128, 4),
        "segment_counts (scattered, 20000 rows)":
            lambda b: kernels.available_backends()[b].segment_counts(scattered, 128, 4),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--fixture", default="gap40")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled core not built; only the python backend is available")
    print(f"{'kernel':<44} {'python s':>10} {'cython s':>10} {'speedup':>8}  match")
    for name, fn in cases(args.fixture, args.seed).items():
        tp, outp = best_of(lambda: fn("python"), args.repeat)
        if "cython" in backends:
            tc, outc = best_of(lambda: fn("cython"), args.repeat)
            if isinstance(outp, tuple):
                match = all(np.array_equal(a, b) for a, b in zip(outp, outc))
            else:
                match = np.allclose(outp, outc, rtol=0, atol=1e-12)
            print(f"{name:<44} {tp:>10.4f} {tc:>10.4f} {tp / tc:>7.1f}x  {match}")
        else:
            print(f"{name:<44} {tp:>10.4f} {'-':>10} {'-':>8}  -")


if __name__ == "__main__":
    main()
