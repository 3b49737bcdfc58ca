"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import __version__
from .color import ImportanceTable, importance_scores, prioritize
from .config import RunConfig
from .errors import ConfigError, InternalInvariantError, SplatError
from .experiments import ablate, loop_cameras, run_loop, workload_blocks
from .fixtures import FIXTURES, make_fixture
from .memory import compare_layouts
from .metrics import psnr, ssim
from .render import read_ppm, read_raw, render, render_full, write_ppm, write_raw
from .report import RunReport, fmt_value
from .scene import Camera, Scene, fit_camera, load_scene, save_scene, standard_camera

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d, help="overrides run.seed")
    p.add_argument("--config", default=d, metavar="PATH", help="flat key = value config file")
    p.add_argument("--out", default=d, metavar="DIR", help="output directory (default: out)")
    p.add_argument("--show-config", action="store_true", default=argparse.SUPPRESS if suppress else False,
                   help="print the effective configuration and exit")


def _scene_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--scene", metavar="PATH", help="scene file")
    g.add_argument("--fixture", choices=sorted(FIXTURES), help="generate a fixture in memory (default: run.fixture)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="splatbalance", description="Density control, warp scheduling and memory-layout lab for Gaussian splatting.")
    ap.add_argument("--version", action="version", version=f"splatbalance {__version__}")
    _global_flags(ap, suppress=False)
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("generate", parents=[common], help="write a fixture scene file")
    p.add_argument("fixture_name", metavar="fixture", help=f"one of: {', '.join(sorted(FIXTURES))}")
    p.add_argument("-o", "--output", metavar="PATH", help="scene path (default: <out>/<fixture>.scene)")

    p = sub.add_parser("render", parents=[common], help="render a scene to PPM and raw float files")
    p.add_argument("scene", help="scene file")
    p.add_argument("--camera", choices=("standard", "fit"), default="standard")
    p.add_argument("--name", default="render", help="output file stem")
    p.add_argument("--reference", metavar="PATH", help=".ppm or .raw image to compare against")
    p.add_argument("--importance", metavar="PATH", help="importance table; render only the kept Gaussians")

    p = sub.add_parser("ablate", parents=[common], help="run one technique's experiment, or all")
    p.add_argument("technique", choices=("t1", "t2", "t3", "all"))
    _scene_args(p)

    p = sub.add_parser("loop", parents=[common], help="render/control loop over iterations")
    _scene_args(p)
    p.add_argument("--iterations", type=int, help="overrides loop.iterations")
    p.add_argument("--cameras", type=int, help="overrides loop.cameras")

    p = sub.add_parser("simulate-workload", parents=[common], help="warp stall model on a scene's tiles")
    _scene_args(p)
    p.add_argument("--mode", choices=("baseline", "adaptive", "both"))
    p.add_argument("--packing", choices=("row_major", "morton"))

    p = sub.add_parser("simulate-memory", parents=[common], help="coalescing model for color loads")
    _scene_args(p)
    p.add_argument("--layout", choices=("channel_split", "interleaved", "both"))
    p.add_argument("--segment-bytes", type=int)
    p.add_argument("--cost-ratio", type=float)
    return ap


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.set("run.seed", args.seed)
    overrides = {
        "iterations": "loop.iterations", "cameras": "loop.cameras", "mode": "workload.mode",
        "packing": "workload.packing", "layout": "memory.layout", "segment_bytes": "memory.segment_bytes",
        "cost_ratio": "memory.cost_ratio", "fixture": "run.fixture",
    }
    for attr, key in overrides.items():
        v = getattr(args, attr, None)
        if v is not None:
            cfg.set(key, v)
    return cfg


def _camera(cfg: RunConfig, scene: Scene | None = None, kind: str = "standard") -> Camera:
    w, h = cfg["render.width"], cfg["render.height"]
    if kind == "fit":
        return fit_camera(scene, w, h)
    return standard_camera(w, h)


def _scene(args, cfg: RunConfig) -> Scene:
    if getattr(args, "scene", None):
        return load_scene(args.scene, cfg["run.seed"])
    return make_fixture(cfg["run.fixture"], cfg["run.seed"])


def _out(args) -> str:
    d = getattr(args, "out", None) or "out"
    os.makedirs(d, exist_ok=True)
    return d


def _emit(report: RunReport, args, stem: str) -> None:
    tp, jp = report.write(_out(args), stem)
    sys.stdout.write(report.to_text())
    print(f"# wrote {tp} and {jp}")


def cmd_generate(args, cfg) -> int:
    name = args.fixture_name
    scene = make_fixture(name, cfg["run.seed"])
    path = args.output or os.path.join(_out(args), f"{name}.scene")
    save_scene(scene, path)
    print(f"{name}: {FIXTURES[name][1]}")
    print(f"seed = {cfg['run.seed']}")
    print(f"gaussians = {len(scene)}")
    print(f"wrote {path}")
    return EXIT_OK


def _read_image(path):
    with open(path, "rb") as fh:
        magic = fh.read(2)
    return read_ppm(path) if magic == b"P6" else read_raw(path)


def cmd_render(args, cfg) -> int:
    scene = load_scene(args.scene, cfg["run.seed"])
    cam = _camera(cfg, scene, args.camera)
    if args.importance:
        table = ImportanceTable.load(args.importance)
        if len(table.scores) != len(scene):
            raise SplatError(f"importance table has {len(table.scores)} scores, scene has {len(scene)} Gaussians")
        keep = prioritize(table, cfg["color.keep_fraction"], cfg["color.invert"])
        scene = scene.take(np.sort(np.asarray(keep, dtype=np.int64)))
    t0 = time.perf_counter()
    img = render(scene, cam, cfg.render_config())
    dt = time.perf_counter() - t0
    d = _out(args)
    ppm = os.path.join(d, args.name + ".ppm")
    raw = os.path.join(d, args.name + ".raw")
    write_ppm(img, ppm)
    write_raw(img, raw)
    print(f"gaussians = {len(scene)}")
    print(f"wrote {ppm} and {raw}")
    if args.reference:
        ref = _read_image(args.reference)
        print(f"psnr = {fmt_value(psnr(img, ref))}")
        print(f"ssim = {fmt_value(ssim(img, ref))}")
    print(f"# render_seconds = {dt:.6f}")
    return EXIT_OK


def cmd_ablate(args, cfg) -> int:
    scene = _scene(args, cfg)
    cam = _camera(cfg)
    report = ablate(args.technique, scene, cam, cfg)
    if args.technique in ("t2", "all"):
        full = render_full(scene, cam, cfg.render_config())
        table = importance_scores(scene, cam, full.tiles, full.image, cfg.render_config())
        table.save(os.path.join(_out(args), "importance.txt"))
    _emit(report, args, f"ablate_{args.technique}")
    return EXIT_OK


def cmd_loop(args, cfg) -> int:
    scene = _scene(args, cfg)
    cams = loop_cameras(cfg["loop.cameras"], cfg["render.width"], cfg["render.height"])
    final, report = run_loop(scene, cams, cfg["loop.iterations"], cfg)
    path = os.path.join(_out(args), "loop_final.scene")
    save_scene(final, path)
    _emit(report, args, "loop")
    print(f"# wrote {path}")
    return EXIT_OK


def cmd_simulate_workload(args, cfg) -> int:
    scene = _scene(args, cfg)
    cam = _camera(cfg)
    t0 = time.perf_counter()
    tiles = render_full(scene, cam, cfg.render_config()).tiles
    report = RunReport("simulate-workload", cfg)
    for name, vals in workload_blocks(tiles, cfg).items():
        report.add(name.replace("t2.", "workload."), vals)
    report.timings["workload_seconds"] = time.perf_counter() - t0
    _emit(report, args, "workload")
    return EXIT_OK


def cmd_simulate_memory(args, cfg) -> int:
    scene = _scene(args, cfg)
    cam = _camera(cfg)
    t0 = time.perf_counter()
    tiles = render_full(scene, cam, cfg.render_config()).tiles
    base, opt, tx_ratio, speed = compare_layouts(tiles, len(scene), cfg["memory.segment_bytes"], cfg["memory.cost_ratio"])
    report = RunReport("simulate-memory", cfg)
    layout = cfg["memory.layout"]
    if layout in ("channel_split", "both"):
        report.add("memory.baseline", base.summary())
    if layout in ("interleaved", "both"):
        report.add("memory.optimized", opt.summary())
    if layout == "both":
        report.add("memory.compare", {"transaction_ratio": tx_ratio, "modeled_speedup": speed})
    report.timings["memory_seconds"] = time.perf_counter() - t0
    _emit(report, args, "memory")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "render": cmd_render,
    "ablate": cmd_ablate,
    "loop": cmd_loop,
    "simulate-workload": cmd_simulate_workload,
    "simulate-memory": cmd_simulate_memory,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _config(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE if isinstance(e, ConfigError) else EXIT_DATA
    if args.show_config:
        sys.stdout.write(cfg.dump(with_help=True))
        return EXIT_OK
    if not args.command:
        parser.print_usage(sys.stderr)
        print("error: a command is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, cfg)
    except InternalInvariantError as e:
        print(f"internal invariant violated: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except KeyError as e:
        print(f"error: {e.args[0] if e.args else e}", file=sys.stderr)
        return EXIT_DATA
    except (SplatError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
