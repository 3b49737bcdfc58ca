"""CPU reference forward pass: projection, 16x16 tiling, depth sort, front-to-back blending."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionError
from .scene import Camera, Gaussian, Scene, covariance_from_factors

TILE = 16


@dataclass(frozen=True)
class RenderConfig:
    alpha_min: float = 1.0 / 255.0
    t_min: float = 1e-4
    early_stop: bool = True
    cov_floor: float = 0.3  # px^2 added to the projected covariance diagonal
    cull_sigma: float = 3.0
    backend: str | None = None  # None: kernels.BACKEND


@dataclass
class Splat2D:
    center_px: np.ndarray
    cov2d: np.ndarray
    depth: float
    color: np.ndarray
    opacity: float
    source_index: int


@dataclass
class SplatBatch:
    """Column-wise projected splats; row k came from scene index ``source[k]``."""

    source: np.ndarray
    mx: np.ndarray
    my: np.ndarray
    cov_a: np.ndarray
    cov_b: np.ndarray
    cov_c: np.ndarray
    depth: np.ndarray
    opacity: np.ndarray
    colors: np.ndarray
    radius_x: np.ndarray
    radius_y: np.ndarray

    def __len__(self):
        return len(self.source)

    def conics(self):
        det = self.cov_a * self.cov_c - self.cov_b * self.cov_b
        return self.cov_c / det, -self.cov_b / det, self.cov_a / det

    def splat(self, k: int) -> Splat2D:
        cov = np.array([[self.cov_a[k], self.cov_b[k]], [self.cov_b[k], self.cov_c[k]]])
        return Splat2D(np.array([self.mx[k], self.my[k]]), cov, float(self.depth[k]),
                       self.colors[k].copy(), float(self.opacity[k]), int(self.source[k]))

    def splats(self) -> list[Splat2D]:
        return [self.splat(k) for k in range(len(self))]

    @classmethod
    def from_splats(cls, splats: list[Splat2D], cull_sigma: float = 3.0) -> "SplatBatch":
        if not splats:
            z = np.zeros(0)
            return cls(np.zeros(0, dtype=np.int64), z, z, z, z, z, z, z, np.zeros((0, 3)), z, z)
        cov = np.array([s.cov2d for s in splats], dtype=np.float64)
        return cls(
            np.array([s.source_index for s in splats], dtype=np.int64),
            np.array([s.center_px[0] for s in splats], dtype=np.float64),
            np.array([s.center_px[1] for s in splats], dtype=np.float64),
            cov[:, 0, 0], cov[:, 0, 1], cov[:, 1, 1],
            np.array([s.depth for s in splats], dtype=np.float64),
            np.array([s.opacity for s in splats], dtype=np.float64),
            np.array([s.color for s in splats], dtype=np.float64),
            cull_sigma * np.sqrt(cov[:, 0, 0]), cull_sigma * np.sqrt(cov[:, 1, 1]),
        )


@dataclass
class TileWorkload:
    tile_xy: tuple[int, int]
    gaussian_list: np.ndarray  # scene indices, depth ascending, ties by index
    per_pixel_counts: np.ndarray  # (16, 16) entries with alpha >= cutoff at each pixel


@dataclass
class Image:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) row-major RGB

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.shape != (self.height, self.width, 3):
            raise DimensionError(f"pixel array {px.shape} does not match {self.height}x{self.width}x3")
        if not np.all(np.isfinite(px)):
            raise ValueError("image has non-finite channels")
        self.pixels = np.clip(px, 0.0, 1.0)

    @classmethod
    def black(cls, width: int, height: int) -> "Image":
        return cls(width, height, np.zeros((height, width, 3)))


@dataclass
class RenderResult:
    image: Image
    tiles: list[TileWorkload]
    splats: SplatBatch
    counts: np.ndarray = field(repr=False)  # (H, W) full-frame per-pixel active counts


def project_scene(scene: Scene, camera: Camera, config: RenderConfig = RenderConfig(),
                  colors: np.ndarray | None = None) -> SplatBatch:
    """Project every Gaussian; Gaussians behind the near plane or fully off screen are dropped."""
    return _project_arrays(scene.means, covariance_from_factors(scene.scales, scene.rotations),
                           scene.opacities, scene.colors if colors is None else np.asarray(colors, dtype=np.float64),
                           camera, config)


def _project_arrays(means, cov3, opac, cols, camera: Camera, config: RenderConfig) -> SplatBatch:
    V = camera.view
    W = V[:3, :3]
    x = W[0, 0] * means[:, 0] + W[0, 1] * means[:, 1] + W[0, 2] * means[:, 2] + V[0, 3]
    y = W[1, 0] * means[:, 0] + W[1, 1] * means[:, 1] + W[1, 2] * means[:, 2] + V[1, 3]
    z = W[2, 0] * means[:, 0] + W[2, 1] * means[:, 1] + W[2, 2] * means[:, 2] + V[2, 3]
    keep = z > camera.near
    idx = np.nonzero(keep)[0]
    x, y, z = x[idx], y[idx], z[idx]
    cov3 = cov3[idx]
    fx, fy = camera.fx, camera.fy
    cx, cy = camera.principal
    # rows of J @ W, J the perspective Jacobian at the camera-space mean
    j00, j02 = fx / z, -fx * x / (z * z)
    j11, j12 = fy / z, -fy * y / (z * z)
    T0 = [j00 * W[0, k] + j02 * W[2, k] for k in range(3)]
    T1 = [j11 * W[1, k] + j12 * W[2, k] for k in range(3)]

    def quad(P, Q):
        acc = 0.0
        for i in range(3):
            for j in range(3):
                acc = acc + P[i] * cov3[:, i, j] * Q[j]
        return acc

    a = quad(T0, T0) + config.cov_floor
    b = quad(T0, T1)
    c = quad(T1, T1) + config.cov_floor
    mx = fx * x / z + cx
    my = fy * y / z + cy
    rx = config.cull_sigma * np.sqrt(a)
    ry = config.cull_sigma * np.sqrt(c)
    on = (mx + rx >= 0) & (mx - rx <= camera.width - 1) & (my + ry >= 0) & (my - ry <= camera.height - 1)
    on &= (np.ceil(mx - rx) <= np.floor(mx + rx)) & (np.ceil(my - ry) <= np.floor(my + ry))
    s = np.nonzero(on)[0]
    return SplatBatch(idx[s].astype(np.int64), mx[s], my[s], a[s], b[s], c[s], z[s],
                      np.asarray(opac, dtype=np.float64)[idx[s]], np.ascontiguousarray(cols[idx[s]]),
                      rx[s], ry[s])


def project(gaussian: Gaussian, camera: Camera, config: RenderConfig = RenderConfig(),
            source_index: int = 0) -> Splat2D | None:
    """Project one Gaussian; None when culled by the near plane or off screen."""
    batch = _project_arrays(np.array([gaussian.mean]), gaussian.covariance()[None],
                            np.array([gaussian.opacity]), np.array([gaussian.color]), camera, config)
    if len(batch) == 0:
        return None
    sp = batch.splat(0)
    sp.source_index = source_index
    return sp


def _bin(batch: SplatBatch, camera: Camera):
    """Tile offsets/entries (positions into batch), depth sorted with index tie-break."""
    n_tiles = camera.tiles_x * camera.tiles_y
    order = np.lexsort((batch.source, batch.depth))
    x0 = np.clip(np.ceil(batch.mx - batch.radius_x), 0, camera.width - 1).astype(np.int64) // TILE
    x1 = np.clip(np.floor(batch.mx + batch.radius_x), 0, camera.width - 1).astype(np.int64) // TILE
    y0 = np.clip(np.ceil(batch.my - batch.radius_y), 0, camera.height - 1).astype(np.int64) // TILE
    y1 = np.clip(np.floor(batch.my + batch.radius_y), 0, camera.height - 1).astype(np.int64) // TILE
    nx = (x1 - x0 + 1)[order]
    ny = (y1 - y0 + 1)[order]
    per = nx * ny
    total = int(per.sum())
    rank = np.repeat(np.arange(len(order)), per)
    local = np.arange(total) - np.repeat(np.cumsum(per) - per, per)
    ox = local % np.repeat(nx, per)
    oy = local // np.repeat(nx, per)
    tid = (np.repeat(y0[order], per) + oy) * camera.tiles_x + np.repeat(x0[order], per) + ox
    srt = np.argsort(tid, kind="stable")
    entries = order[rank[srt]].astype(np.int64)
    offsets = np.zeros(n_tiles + 1, dtype=np.int64)
    np.cumsum(np.bincount(tid, minlength=n_tiles), out=offsets[1:])
    return offsets, np.ascontiguousarray(entries)


def _tiles_from(batch, offsets, entries, counts, camera) -> list[TileWorkload]:
    tiles = []
    for t in range(camera.tiles_x * camera.tiles_y):
        ty, tx = divmod(t, camera.tiles_x)
        lst = batch.source[entries[offsets[t]:offsets[t + 1]]]
        pc = np.asarray(counts[ty * TILE:(ty + 1) * TILE, tx * TILE:(tx + 1) * TILE], dtype=np.int64)
        tiles.append(TileWorkload((tx, ty), lst.copy(), pc.copy()))
    return tiles


def build_tiles(splats, camera: Camera, config: RenderConfig = RenderConfig()) -> list[TileWorkload]:
    """Tile lists for a list of Splat2D (or a SplatBatch), with per-pixel active counts."""
    batch = splats if isinstance(splats, SplatBatch) else SplatBatch.from_splats(list(splats), config.cull_sigma)
    return _raster(batch, camera, config)[1]


def _raster(batch: SplatBatch, camera: Camera, config: RenderConfig):
    offsets, entries = _bin(batch, camera)
    ca, cb, cc = batch.conics()
    impl = kernels.available_backends()[config.backend] if config.backend else kernels
    img, counts = impl.rasterize(offsets, entries,
                                 np.ascontiguousarray(batch.mx), np.ascontiguousarray(batch.my),
                                 np.ascontiguousarray(ca), np.ascontiguousarray(cb), np.ascontiguousarray(cc),
                                 np.ascontiguousarray(batch.opacity), np.ascontiguousarray(batch.colors),
                                 camera.width, camera.height, config.alpha_min, config.t_min, config.early_stop)
    return img, _tiles_from(batch, offsets, entries, counts, camera), counts


def render_full(scene: Scene, camera: Camera, config: RenderConfig = RenderConfig(),
                colors: np.ndarray | None = None) -> RenderResult:
    batch = project_scene(scene, camera, config, colors)
    img, tiles, counts = _raster(batch, camera, config)
    return RenderResult(Image(camera.width, camera.height, img), tiles, batch, counts)


def render(scene: Scene, camera: Camera, config: RenderConfig = RenderConfig(),
           colors: np.ndarray | None = None) -> Image:
    """Render over a black background. ``colors`` overrides the scene's per-Gaussian RGB."""
    return render_full(scene, camera, config, colors).image


# -- image files ---------------------------------------------------------------------------

def write_ppm(image: Image, path) -> None:
    data = np.round(image.pixels * 255.0).astype(np.uint8)
    with open(os.fspath(path), "wb") as fh:
        fh.write(f"P6\n{image.width} {image.height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_ppm(path) -> Image:
    with open(os.fspath(path), "rb") as fh:
        raw = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos].decode("ascii"))
    if tokens[0] != "P6" or tokens[3] != "255":
        raise ValueError("only 8-bit binary PPM (P6) is supported")
    w, h = int(tokens[1]), int(tokens[2])
    data = np.frombuffer(raw[pos + 1:pos + 1 + w * h * 3], dtype=np.uint8)
    return Image(w, h, data.reshape(h, w, 3) / 255.0)


def write_raw(image: Image, path) -> None:
    """``width height`` text line, then row-major RGB as little-endian float64."""
    with open(os.fspath(path), "wb") as fh:
        fh.write(f"{image.width} {image.height}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(image.pixels, dtype="<f8").tobytes())


def read_raw(path) -> Image:
    with open(os.fspath(path), "rb") as fh:
        header = fh.readline().split()
        w, h = int(header[0]), int(header[1])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != w * h * 3:
        raise DimensionError(f"raw dump holds {data.size} floats, header says {w}x{h}x3")
    return Image(w, h, data.reshape(h, w, 3).copy())
