"""Warp-execution cost model for tile rasterization.

Each tile's 256 pixels are handed to lanes of 32-wide warps. A lane's cost is the
number of Gaussian-pixel evaluations over its pixels; a warp runs as long as its
slowest lane, so idle lanes accumulate stall cycles. Adaptive scheduling lets a
lane own 2 or 4 pixels in lighter tiles, which shrinks the warp count for those
tiles.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .render import TileWorkload

WARP = 32
TILE_PIXELS = 256
MERGE = {"dense": 1, "semi_sparse": 2, "sparse": 4}


@dataclass(frozen=True)
class RegionDensity:
    tile_xy: tuple[int, int]
    rho: float
    cls: str

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if self.cls not in MERGE:
            raise ValueError(f"unknown region class {self.cls!r}")

    @property
    def merge_factor(self) -> int:
        return MERGE[self.cls]


def tile_rho(tile: TileWorkload) -> float:
    """Active Gaussians per pixel: summed per-pixel counts over the 256 pixels."""
    return float(np.sum(tile.per_pixel_counts)) / TILE_PIXELS


def default_thresholds(tiles: list[TileWorkload]) -> tuple[float, float]:
    """(0.25 * median rho, median rho). A non-positive median makes every tile dense."""
    med = float(np.median([tile_rho(t) for t in tiles])) if tiles else 0.0
    if med <= 0:
        return (-1.0, 0.0)
    return (0.25 * med, med)


def classify_tiles(tiles: list[TileWorkload], thresholds: tuple[float, float] | None = None) -> list[RegionDensity]:
    """sparse if rho <= t_sparse, dense if rho >= t_dense, semi_sparse otherwise."""
    t_sparse, t_dense = thresholds if thresholds is not None else default_thresholds(tiles)
    if not t_sparse < t_dense:
        raise ValueError(f"need t_sparse < t_dense, got {t_sparse} and {t_dense}")
    out = []
    for t in tiles:
        rho = tile_rho(t)
        if rho >= t_dense:
            cls = "dense"
        elif rho <= t_sparse:
            cls = "sparse"
        else:
            cls = "semi_sparse"
        out.append(RegionDensity(tuple(t.tile_xy), rho, cls))
    return out


def _morton_order() -> np.ndarray:
    idx = np.arange(TILE_PIXELS)
    x, y = idx % 16, idx // 16
    code = np.zeros(TILE_PIXELS, dtype=np.int64)
    for b in range(4):
        code |= ((x >> b) & 1) << (2 * b) | ((y >> b) & 1) << (2 * b + 1)
    return np.argsort(code, kind="stable")


PACKINGS = {"row_major": np.arange(TILE_PIXELS), "morton": _morton_order()}


@dataclass
class ScheduleAssignment:
    """Per-tile merge factors plus the pixel order lanes are filled from.

    Lane l of a tile with factor m owns local pixels order[l*m:(l+1)*m]
    (flat index y*16 + x); warp w owns lanes 32w..32w+31.
    """

    tile_xy: list[tuple[int, int]]
    merge_factors: np.ndarray
    packing: str = "row_major"

    @property
    def order(self) -> np.ndarray:
        return PACKINGS[self.packing]

    @property
    def warp_count(self) -> int:
        return int(np.sum(TILE_PIXELS // WARP // self.merge_factors))

    def lane_pixels(self, tile_index: int) -> np.ndarray:
        """(lanes, m) flat local pixel indices for one tile."""
        m = int(self.merge_factors[tile_index])
        return self.order.reshape(-1, m)

    def warps(self):
        """Yield (tile_xy, [[(x, y), ...] per lane]) for every warp."""
        for ti, xy in enumerate(self.tile_xy):
            lp = self.lane_pixels(ti)
            for w in range(0, len(lp), WARP):
                yield xy, [[(int(p % 16), int(p // 16)) for p in lane] for lane in lp[w:w + WARP]]


def build_schedule(regions: list[RegionDensity], tiles: list[TileWorkload], packing: str = "row_major") -> ScheduleAssignment:
    if len(regions) != len(tiles) or any(tuple(r.tile_xy) != tuple(t.tile_xy) for r, t in zip(regions, tiles)):
        raise ValueError("regions must cover the tiles one-to-one and in order")
    if packing not in PACKINGS:
        raise ValueError(f"unknown packing {packing!r}; choose from {sorted(PACKINGS)}")
    return ScheduleAssignment([tuple(t.tile_xy) for t in tiles],
                              np.array([r.merge_factor for r in regions], dtype=np.int64), packing)


def baseline_schedule(tiles: list[TileWorkload], packing: str = "row_major") -> ScheduleAssignment:
    """One pixel per lane everywhere."""
    return ScheduleAssignment([tuple(t.tile_xy) for t in tiles], np.ones(len(tiles), dtype=np.int64), packing)


@dataclass
class StallReport:
    total_work_cycles: int
    total_stall_cycles: int
    utilization: float
    max_over_min_lane_ratio: float
    per_warp: list = field(default_factory=list)  # (tile_xy, work, cost, stall)
    warp_count: int = 0
    tile_signature: str = ""

    @property
    def total_cycles(self) -> int:
        return self.total_work_cycles + self.total_stall_cycles

    @property
    def stall_fraction(self) -> float:
        tot = self.total_cycles
        return self.total_stall_cycles / tot if tot else 0.0

    def summary(self) -> dict:
        return {
            "warps": self.warp_count,
            "total_work_cycles": self.total_work_cycles,
            "total_stall_cycles": self.total_stall_cycles,
            "total_cycles": self.total_cycles,
            "stall_fraction": self.stall_fraction,
            "utilization": self.utilization,
            "max_over_min_lane_ratio": self.max_over_min_lane_ratio,
        }


def tile_signature(tiles: list[TileWorkload]) -> str:
    h = hashlib.sha1()
    for t in tiles:
        h.update(np.asarray(t.tile_xy, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(t.per_pixel_counts, dtype=np.int64).tobytes())
    return h.hexdigest()


def warp_costs(lane_costs) -> tuple[int, int, int]:
    """(work, cost, stall) of one lockstep warp: cost = lanes * slowest lane."""
    lc = np.asarray(lane_costs, dtype=np.int64)
    work = int(lc.sum())
    cost = int(len(lc) * lc.max()) if len(lc) else 0
    return work, cost, cost - work


def simulate_warps(warps) -> StallReport:
    """Report for explicit warps given as lists of lanes, each a list of pixel costs."""
    rows = []
    lanes_all = []
    for w in warps:
        lane = [int(sum(px)) for px in w]
        lanes_all += lane
        rows.append((None,) + warp_costs(lane))
    return _report(rows, np.array(lanes_all, dtype=np.int64), "")


def simulate(schedule: ScheduleAssignment, tiles: list[TileWorkload]) -> StallReport:
    if [tuple(t.tile_xy) for t in tiles] != list(schedule.tile_xy):
        raise ValueError("schedule does not cover these tiles")
    rows = []
    lanes_all = []
    order = schedule.order
    for ti, t in enumerate(tiles):
        m = int(schedule.merge_factors[ti])
        px = np.asarray(t.per_pixel_counts, dtype=np.int64).reshape(TILE_PIXELS)[order]
        lane = px.reshape(-1, m).sum(axis=1)
        lanes_all.append(lane)
        per = lane.reshape(-1, WARP)
        work = per.sum(axis=1)
        cost = WARP * per.max(axis=1)
        for wk, c in zip(work, cost):
            rows.append((tuple(t.tile_xy), int(wk), int(c), int(c - wk)))
    lanes = np.concatenate(lanes_all) if lanes_all else np.zeros(0, np.int64)
    return _report(rows, lanes, tile_signature(tiles))


def _report(rows, lanes: np.ndarray, sig: str) -> StallReport:
    work = sum(r[1] for r in rows)
    stall = sum(r[3] for r in rows)
    util = work / (work + stall) if work + stall > 0 else 1.0
    # idle lanes count as one cycle so the ratio stays finite
    ratio = float(lanes.max() / max(int(lanes.min()), 1)) if len(lanes) else 1.0
    return StallReport(int(work), int(stall), float(util), ratio, rows, len(rows), sig)


def compare(baseline: StallReport, adaptive: StallReport) -> float:
    """Baseline total cycles over adaptive total cycles."""
    if baseline.tile_signature != adaptive.tile_signature:
        raise ValueError("reports were simulated on different tiles")
    if baseline.total_work_cycles != adaptive.total_work_cycles:
        raise ValueError("work totals differ; reports are not comparable")
    if adaptive.total_cycles == 0:
        return 1.0
    return baseline.total_cycles / adaptive.total_cycles


def run_both(tiles: list[TileWorkload], thresholds=None, packing: str = "row_major"):
    """(regions, baseline report, adaptive report, ratio) for one set of tiles."""
    regions = classify_tiles(tiles, thresholds)
    base = simulate(baseline_schedule(tiles, packing), tiles)
    adapt = simulate(build_schedule(regions, tiles, packing), tiles)
    return regions, base, adapt, compare(base, adapt)
