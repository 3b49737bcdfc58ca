"""Color quantization, hash grouping, bucket aggregation and per-view importance scores."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import ProvenanceError
from .render import Image, RenderConfig, TileWorkload, project_scene
from .scene import Camera, Scene

LEVELS = 16
N_KEYS = LEVELS ** 3
SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class QuantizedColor:
    rq: int
    gq: int
    bq: int

    def __post_init__(self):
        for name in ("rq", "gq", "bq"):
            v = getattr(self, name)
            if not 0 <= v < LEVELS:
                raise ValueError(f"{name}={v} outside [0, {LEVELS - 1}]")


def to_8bit(c):
    """Unit range to 8-bit: floor(c * 256) clamped to 255."""
    return np.minimum(255, np.floor(np.asarray(c, dtype=np.float64) * 256.0)).astype(np.int64)


def quantize_8bit(c8):
    """floor(c8 / 256 * 16) per channel."""
    return np.floor(np.asarray(c8, dtype=np.float64) / 256.0 * LEVELS).astype(np.int64)


def quantize(color) -> QuantizedColor:
    q = quantize_8bit(to_8bit(color))
    return QuantizedColor(int(q[0]), int(q[1]), int(q[2]))


def hash_key(q: QuantizedColor) -> int:
    return q.rq * 256 + q.gq * 16 + q.bq


def decode_key(key: int) -> QuantizedColor:
    if not 0 <= key < N_KEYS:
        raise ValueError(f"key {key} outside [0, {N_KEYS - 1}]")
    return QuantizedColor(key // 256, (key // 16) % 16, key % 16)


def color_keys(colors) -> np.ndarray:
    """Vectorized quantize + hash_key for (N, 3) unit-range colors."""
    q = quantize_8bit(to_8bit(np.asarray(colors, dtype=np.float64).reshape(-1, 3)))
    return q[:, 0] * 256 + q[:, 1] * 16 + q[:, 2]


@dataclass(frozen=True)
class ColorBucket:
    key: int
    color_sum: tuple[float, float, float]
    opacity_sum: float
    count: int

    @property
    def representative(self) -> tuple[float, float, float] | None:
        if self.count == 0:
            return None
        return tuple(c / self.count for c in self.color_sum)


def build_buckets(members) -> list[ColorBucket]:
    """Group (color, opacity) members by quantized key; sums are correctly rounded.

    ``math.fsum`` makes every sum independent of member order. Buckets come back
    sorted by key.
    """
    members = list(members)
    if not members:
        return []
    colors = np.array([m[0] for m in members], dtype=np.float64).reshape(-1, 3)
    opac = np.array([m[1] for m in members], dtype=np.float64)
    return _buckets(colors, opac)


def _buckets(colors: np.ndarray, opac: np.ndarray) -> list[ColorBucket]:
    keys = color_keys(colors)
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    bounds = np.flatnonzero(np.diff(sk)) + 1
    out = []
    for grp in np.split(order, bounds):
        c = colors[grp]
        out.append(ColorBucket(
            int(keys[grp[0]]),
            (math.fsum(c[:, 0]), math.fsum(c[:, 1]), math.fsum(c[:, 2])),
            math.fsum(opac[grp]),
            len(grp),
        ))
    return out


def tile_buckets(scene: Scene, tiles: list[TileWorkload]) -> list[list[ColorBucket]]:
    """Per-tile buckets over the Gaussians each tile blends."""
    return [_buckets(scene.colors[t.gaussian_list], scene.opacities[t.gaussian_list])
            if len(t.gaussian_list) else [] for t in tiles]


def bucket_summary(per_tile: list[list[ColorBucket]]) -> dict:
    members = sum(b.count for tile in per_tile for b in tile)
    buckets = sum(len(tile) for tile in per_tile)
    busy = [tile for tile in per_tile if tile]
    return {
        "tiles_with_gaussians": len(busy),
        "members": members,
        "buckets": buckets,
        "mean_members_per_bucket": members / buckets if buckets else 0.0,
        "mergeable_fraction": (members - buckets) / members if members else 0.0,
        "max_buckets_in_tile": max((len(t) for t in per_tile), default=0),
    }


# -- importance --------------------------------------------------------------------------

def similarity(cg, ci) -> np.ndarray:
    """1 - ||cg - ci|| / sqrt(3): 1 for equal colors, 0 for opposite cube corners."""
    d = np.asarray(cg, dtype=np.float64) - np.asarray(ci, dtype=np.float64)
    return 1.0 - np.sqrt(np.sum(d * d, axis=-1)) / SQRT3


def importance_from_samples(color_g, pixel_colors, alphas, alpha_min: float = 1.0 / 255.0) -> float:
    """Mean of similarity * alpha over samples whose alpha reaches the cutoff; 0 if none do."""
    a = np.asarray(alphas, dtype=np.float64)
    keep = a >= alpha_min
    if not np.any(keep):
        return 0.0
    s = similarity(color_g, np.asarray(pixel_colors, dtype=np.float64)[keep])
    return float(np.sum(s * a[keep]) / np.count_nonzero(keep))


@dataclass
class ImportanceTable:
    scores: np.ndarray
    view_id: str

    def save(self, path) -> None:
        lines = [f"view_id {self.view_id}"]
        lines += [f"{i} {float(s)!r}" for i, s in enumerate(self.scores)]
        with open(os.fspath(path), "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "ImportanceTable":
        with open(os.fspath(path), "r", encoding="ascii") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
        head = lines[0].split(maxsplit=1)
        if head[0] != "view_id":
            raise ValueError("importance table must start with 'view_id <id>'")
        rows = [ln.split() for ln in lines[1:]]
        idx = [int(r[0]) for r in rows]
        if idx != list(range(len(rows))):
            raise ValueError("importance table indices must be 0..N-1 in order")
        return cls(np.array([float(r[1]) for r in rows]), head[1] if len(head) > 1 else "")


def importance_scores(scene: Scene, camera: Camera, tiles: list[TileWorkload], image: Image,
                      config: RenderConfig = RenderConfig(), view_id: str | None = None) -> ImportanceTable:
    """Opacity-weighted color similarity of each Gaussian against the pixels it covers.

    Samples are the pixels of the Gaussian's tiles where its own evaluated alpha
    reaches the cutoff; Gaussians with no such pixel score 0.
    """
    if len(tiles) != camera.tiles_x * camera.tiles_y or (image.width, image.height) != (camera.width, camera.height):
        raise ProvenanceError("tiles/image do not match the camera")
    batch = project_scene(scene, camera, config)
    row_of = np.full(len(scene), -1, dtype=np.int64)
    row_of[batch.source] = np.arange(len(batch))
    listed = np.concatenate([t.gaussian_list for t in tiles]) if tiles else np.zeros(0, np.int64)
    if len(listed) and (listed.max() >= len(scene) or np.any(row_of[listed] < 0)):
        raise ProvenanceError("tile lists reference Gaussians this scene does not project")
    if len(np.unique(listed)) != len(batch):
        raise ProvenanceError("tile lists do not cover the projected scene")
    ca, cb, cc = batch.conics()
    acc = np.zeros(len(scene))
    cnt = np.zeros(len(scene), dtype=np.int64)
    ly, lx = np.mgrid[0:16, 0:16]
    for t in tiles:
        if not len(t.gaussian_list):
            continue
        tx, ty = t.tile_xy
        rows = row_of[t.gaussian_list]
        dx = (lx.ravel() + 16 * tx)[None, :] - batch.mx[rows][:, None]
        dy = (ly.ravel() + 16 * ty)[None, :] - batch.my[rows][:, None]
        power = -0.5 * (ca[rows][:, None] * dx * dx + cc[rows][:, None] * dy * dy) - cb[rows][:, None] * dx * dy
        alpha = batch.opacity[rows][:, None] * np.exp(power)
        hit = alpha >= config.alpha_min
        pix = image.pixels[16 * ty:16 * ty + 16, 16 * tx:16 * tx + 16].reshape(256, 3)
        diff = scene.colors[t.gaussian_list][:, None, :] - pix[None, :, :]
        sim = 1.0 - np.sqrt(np.sum(diff * diff, axis=-1)) / SQRT3
        acc[t.gaussian_list] += np.sum(np.where(hit, sim * alpha, 0.0), axis=1)
        cnt[t.gaussian_list] += hit.sum(axis=1)
    scores = np.where(cnt > 0, acc / np.maximum(cnt, 1), 0.0)
    return ImportanceTable(np.clip(scores, 0.0, 1.0), view_id if view_id is not None else camera.name)


def prioritize(table: ImportanceTable, keep_fraction: float, invert: bool = False) -> list[int]:
    """Indices ranked by ascending score (most distinct color first), ties by index.

    ``invert`` ranks by descending score instead. Keeps ceil(keep_fraction * N).
    """
    n = len(table.scores)
    if n == 0:
        raise ValueError("empty importance table")
    if not 0 < keep_fraction <= 1:
        raise ValueError("keep_fraction must be in (0, 1]")
    idx = np.arange(n)
    key = -table.scores if invert else table.scores
    order = np.lexsort((idx, key))
    keep = min(n, int(math.ceil(keep_fraction * n - 1e-9)))
    return [int(i) for i in order[:keep]]
