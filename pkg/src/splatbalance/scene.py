"""Gaussian primitives, scene containers, cameras, seeded randomness and scene I/O."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvariantError, SceneFormatError

SCENE_HEADER = "balancegs-scene v1"
QUAT_TOL = 1e-6


def quat_to_rotmat(q: np.ndarray) -> np.ndarray:
    """Rotation matrices for (..., 4) unit quaternions in (w, x, y, z) order."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[..., 0, 1] = 2.0 * (x * y - w * z)
    R[..., 0, 2] = 2.0 * (x * z + w * y)
    R[..., 1, 0] = 2.0 * (x * y + w * z)
    R[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[..., 1, 2] = 2.0 * (y * z - w * x)
    R[..., 2, 0] = 2.0 * (x * z - w * y)
    R[..., 2, 1] = 2.0 * (y * z + w * x)
    R[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return R


def covariance_from_factors(scales: np.ndarray, rotations: np.ndarray) -> np.ndarray:
    """Sigma = R S S^T R^T for (N, 3) scales and (N, 4) quaternions.

    The products are spelled out term by term so each Gaussian's covariance is
    computed with the same float operations regardless of batch size.
    """
    R = quat_to_rotmat(rotations)
    M = R * np.asarray(scales, dtype=np.float64)[..., None, :]  # R @ diag(s)
    cov = np.empty(M.shape)
    for i in range(3):
        for j in range(3):
            cov[..., i, j] = M[..., i, 0] * M[..., j, 0] + M[..., i, 1] * M[..., j, 1] + M[..., i, 2] * M[..., j, 2]
    return cov


@dataclass(frozen=True)
class Gaussian:
    mean: tuple[float, float, float]
    scale: tuple[float, float, float]
    rotation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    opacity: float = 1.0
    color: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        mean = tuple(float(v) for v in self.mean)
        scale = tuple(float(v) for v in self.scale)
        if len(mean) != 3 or not all(math.isfinite(v) for v in mean):
            raise InvariantError("mean", f"expected 3 finite values, got {self.mean!r}")
        if len(scale) != 3 or not all(math.isfinite(v) and v > 0 for v in scale):
            raise InvariantError("scale", f"components must be finite and > 0, got {self.scale!r}")
        q = np.asarray(self.rotation, dtype=np.float64)
        n = float(np.sqrt(np.sum(q * q))) if q.shape == (4,) else 0.0
        if not (n > 0 and math.isfinite(n)):
            raise InvariantError("rotation", f"quaternion must be non-zero and finite, got {self.rotation!r}")
        color = tuple(min(1.0, max(0.0, float(c))) for c in self.color)
        if len(color) != 3:
            raise InvariantError("color", "expected 3 channels")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "rotation", tuple(float(v) for v in q / n))
        object.__setattr__(self, "opacity", min(1.0, max(0.0, float(self.opacity))))
        object.__setattr__(self, "color", color)

    def covariance(self) -> np.ndarray:
        return covariance_from_factors(np.array([self.scale]), np.array([self.rotation]))[0]


def _ro(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


class Scene:
    """Ordered Gaussians stored column-wise.

    Arrays are read-only; mutation goes through methods that return a new Scene.
    """

    def __init__(self, means, scales, rotations, opacities, colors, seed: int = 0):
        means = np.asarray(means, dtype=np.float64).reshape(-1, 3)
        n = len(means)
        scales = np.asarray(scales, dtype=np.float64).reshape(n, 3)
        rotations = np.asarray(rotations, dtype=np.float64).reshape(n, 4)
        opacities = np.asarray(opacities, dtype=np.float64).reshape(n)
        colors = np.asarray(colors, dtype=np.float64).reshape(n, 3)
        if not np.all(np.isfinite(means)):
            raise InvariantError("mean", "non-finite position")
        if not np.all(np.isfinite(scales) & (scales > 0)):
            raise InvariantError("scale", "components must be finite and > 0")
        qn = np.sqrt(np.sum(rotations * rotations, axis=1))
        if not np.all(np.isfinite(qn) & (qn > 0)):
            raise InvariantError("rotation", "quaternion must be non-zero and finite")
        if np.any(np.abs(qn - 1.0) > QUAT_TOL):
            rotations = rotations / qn[:, None]
        self.means = _ro(means)
        self.scales = _ro(scales)
        self.rotations = _ro(rotations)
        self.opacities = _ro(np.clip(opacities, 0.0, 1.0))
        self.colors = _ro(np.clip(colors, 0.0, 1.0))
        self.seed = int(seed)

    @classmethod
    def from_gaussians(cls, gaussians: Iterable[Gaussian], seed: int = 0) -> "Scene":
        gs = list(gaussians)
        if not gs:
            return cls.empty(seed)
        return cls(
            [g.mean for g in gs],
            [g.scale for g in gs],
            [g.rotation for g in gs],
            [g.opacity for g in gs],
            [g.color for g in gs],
            seed=seed,
        )

    @classmethod
    def empty(cls, seed: int = 0) -> "Scene":
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 4)), np.zeros(0), np.zeros((0, 3)), seed)

    def __len__(self) -> int:
        return len(self.means)

    def __getitem__(self, i: int) -> Gaussian:
        return Gaussian(
            tuple(self.means[i]), tuple(self.scales[i]), tuple(self.rotations[i]),
            float(self.opacities[i]), tuple(self.colors[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def gaussians(self) -> list[Gaussian]:
        return list(self)

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned (min, max); both zero vectors for an empty scene."""
        if len(self) == 0:
            return np.zeros(3), np.zeros(3)
        return self.means.min(axis=0), self.means.max(axis=0)

    @property
    def bbox_degenerate(self) -> bool:
        lo, hi = self.bbox
        return len(self) == 0 or bool(np.any(hi <= lo))

    def covariances(self) -> np.ndarray:
        return covariance_from_factors(self.scales, self.rotations)

    def take(self, indices) -> "Scene":
        idx = np.asarray(indices, dtype=np.int64)
        return Scene(self.means[idx], self.scales[idx], self.rotations[idx],
                     self.opacities[idx], self.colors[idx], self.seed)

    def replace(self, **arrays) -> "Scene":
        cols = dict(means=self.means, scales=self.scales, rotations=self.rotations,
                    opacities=self.opacities, colors=self.colors)
        seed = arrays.pop("seed", self.seed)
        cols.update(arrays)
        return Scene(seed=seed, **cols)

    def concat(self, other: "Scene") -> "Scene":
        return Scene(
            np.vstack([self.means, other.means]),
            np.vstack([self.scales, other.scales]),
            np.vstack([self.rotations, other.rotations]),
            np.concatenate([self.opacities, other.opacities]),
            np.vstack([self.colors, other.colors]),
            self.seed,
        )

    def equals(self, other: "Scene") -> bool:
        return (
            len(self) == len(other)
            and all(np.array_equal(getattr(self, k), getattr(other, k))
                    for k in ("means", "scales", "rotations", "opacities", "colors"))
        )

    def __repr__(self) -> str:
        return f"Scene(n={len(self)}, seed={self.seed})"


@dataclass(frozen=True)
class Camera:
    """Pinhole camera; pixel (i, j) samples image-plane point (i, j), principal point at (W/2, H/2)."""

    view: np.ndarray
    fx: float
    fy: float
    width: int
    height: int
    near: float = 0.1
    name: str = "camera"

    def __post_init__(self):
        view = np.asarray(self.view, dtype=np.float64)
        if view.shape != (4, 4) or not np.all(np.isfinite(view)):
            raise InvariantError("view", "expected a finite 4x4 matrix")
        R = view[:3, :3]
        if np.max(np.abs(R @ R.T - np.eye(3))) > 1e-5:
            raise InvariantError("view", "rotation block is not orthonormal")
        for name in ("width", "height"):
            v = getattr(self, name)
            if int(v) != v or v <= 0 or int(v) % 16:
                raise InvariantError(name, f"must be a positive multiple of 16, got {v}")
        if not (self.fx > 0 and self.fy > 0):
            raise InvariantError("focal", "focal lengths must be positive")
        if not self.near > 0:
            raise InvariantError("near", "must be positive")
        view = view.copy()
        view.setflags(write=False)
        object.__setattr__(self, "view", view)
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    @property
    def principal(self) -> tuple[float, float]:
        return self.width / 2.0, self.height / 2.0

    @property
    def tiles_x(self) -> int:
        return self.width // 16

    @property
    def tiles_y(self) -> int:
        return self.height // 16


def look_from(translation: Sequence[float], width: int = 256, height: int = 256,
              focal: float | None = None, near: float = 0.1, name: str = "camera") -> Camera:
    """Axis-aligned camera whose view matrix only translates world points."""
    view = np.eye(4)
    view[:3, 3] = translation
    f = float(width if focal is None else focal)
    return Camera(view, f, f, width, height, near, name)


def standard_camera(width: int = 256, height: int = 256, offset=(0.0, 0.0)) -> Camera:
    """The fixed rig every synthetic fixture is framed for.

    World (5, 0, 0) sits on the optical axis 20 units ahead; focal length equals
    the image width.
    """
    return look_from((-5.0 + offset[0], 0.0 + offset[1], 20.0), width, height,
                     focal=float(width), name="standard")


def fit_camera(scene: Scene, width: int = 256, height: int = 256, margin: float = 0.8) -> Camera:
    """Axis-aligned camera looking down +z that frames the scene's bounding box."""
    lo, hi = scene.bbox
    center = (lo + hi) / 2.0
    half = max(float(np.max(hi[:2] - lo[:2])) / 2.0, 1e-3)
    f = float(width)
    dist = f * half / (margin * min(width, height) / 2.0) + (hi[2] - lo[2]) / 2.0 + 1.0
    return look_from((-center[0], -center[1], -center[2] + dist), width, height, focal=f, name="fit")


class Rng:
    """Seeded generator (numpy PCG64). Single owner; use fork() for parallel work."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))

    def uniform(self, low=0.0, high=1.0, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None) -> np.ndarray:
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def fork(self, n: int) -> list["Rng"]:
        seeds = np.random.SeedSequence(self.seed).spawn(n)
        return [Rng(int(s.generate_state(1, np.uint64)[0])) for s in seeds]

    def random_quaternions(self, n: int) -> np.ndarray:
        q = self._gen.normal(size=(n, 4))
        return q / np.linalg.norm(q, axis=1, keepdims=True)


# -- scene files ---------------------------------------------------------------------------

_FIELDS = ("x", "y", "z", "sx", "sy", "sz", "qw", "qx", "qy", "qz", "opacity", "r", "g", "b")


def load_scene(path, seed: int = 0) -> Scene:
    path = os.fspath(path)
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != SCENE_HEADER:
        raise SceneFormatError(1, f"expected header {SCENE_HEADER!r}")
    if len(lines) < 2:
        raise SceneFormatError(2, "missing 'count <N>' line")
    parts = lines[1].split()
    if len(parts) != 2 or parts[0] != "count" or not parts[1].isdigit():
        raise SceneFormatError(2, "expected 'count <N>'")
    n = int(parts[1])
    body = [(i + 3, ln) for i, ln in enumerate(lines[2:]) if ln.strip()]
    if len(body) != n:
        lineno = body[n][0] if len(body) > n else len(lines) + 1
        raise SceneFormatError(lineno, f"count says {n} records, found {len(body)}")
    data = np.empty((n, 14))
    for row, (lineno, ln) in enumerate(body):
        toks = ln.split()
        if len(toks) != 14:
            raise SceneFormatError(lineno, f"expected 14 values, got {len(toks)}")
        try:
            data[row] = [float(t) for t in toks]
        except ValueError as exc:
            raise SceneFormatError(lineno, str(exc)) from None
        if not np.all(np.isfinite(data[row])):
            bad = _FIELDS[int(np.argmin(np.isfinite(data[row])))]
            raise InvariantError(bad, f"non-finite value on line {lineno}")
        _check_record(data[row], lineno)
    return Scene(data[:, 0:3], data[:, 3:6], data[:, 6:10], data[:, 10], data[:, 11:14], seed=seed)


def _check_record(rec: np.ndarray, lineno: int) -> None:
    if np.any(rec[3:6] <= 0):
        raise InvariantError("scale", f"non-positive scale on line {lineno}")
    q = rec[6:10]
    if not np.dot(q, q) > 0:
        raise InvariantError("rotation", f"zero quaternion on line {lineno}")
    if not 0.0 <= rec[10] <= 1.0:
        raise InvariantError("opacity", f"{rec[10]} outside [0, 1] on line {lineno}")
    for name, v in zip("rgb", rec[11:14]):
        if not 0.0 <= v <= 1.0:
            raise InvariantError(f"color.{name}", f"{v} outside [0, 1] on line {lineno}")


def save_scene(scene: Scene, path) -> None:
    data = np.hstack([scene.means, scene.scales, scene.rotations,
                      scene.opacities[:, None], scene.colors])
    out = [SCENE_HEADER, f"count {len(scene)}"]
    out.extend(" ".join(repr(float(v)) for v in row) for row in data)
    with open(os.fspath(path), "w", encoding="ascii") as fh:
        fh.write("\n".join(out) + "\n")


# -- synthetic scenes ----------------------------------------------------------------------

@dataclass
class Cluster:
    count: int
    center: tuple[float, float, float]
    spread: float
    distribution: str = "cube"  # "cube": uniform in a cube of side `spread`; "normal": isotropic std `spread`
    scale: float | None = None  # isotropic splat scale; default 0.5 * mean spacing
    opacity: tuple[float, float] = (0.3, 1.0)
    color: tuple[float, float, float] | None = None  # None: random per Gaussian


@dataclass
class SyntheticSpec:
    clusters: list[Cluster]
    seed: int = 0
    color_jitter: float = 0.05
    meta: dict = field(default_factory=dict)


def generate_synthetic_scene(spec: SyntheticSpec) -> Scene:
    if not spec.clusters:
        raise ValueError("synthetic spec needs at least one cluster")
    rng = Rng(spec.seed)
    parts = []
    for ci, cl in enumerate(spec.clusters):
        if not cl.spread > 0:
            raise ValueError(f"cluster {ci}: spread must be positive, got {cl.spread}")
        if cl.count < 0:
            raise ValueError(f"cluster {ci}: negative count")
        n = int(cl.count)
        if cl.distribution == "cube":
            pos = rng.uniform(-0.5, 0.5, (n, 3)) * cl.spread
        elif cl.distribution == "normal":
            pos = rng.normal(0.0, cl.spread, (n, 3))
        else:
            raise ValueError(f"unknown distribution {cl.distribution!r}")
        pos = pos + np.asarray(cl.center, dtype=np.float64)
        s = cl.scale if cl.scale is not None else 0.5 * cl.spread / max(n, 1) ** (1.0 / 3.0)
        scales = s * rng.uniform(0.7, 1.3, (n, 3))
        rots = rng.random_quaternions(n)
        op = rng.uniform(cl.opacity[0], cl.opacity[1], n)
        if cl.color is None:
            col = rng.uniform(0.0, 1.0, (n, 3))
        else:
            col = np.clip(np.asarray(cl.color) + rng.normal(0.0, spec.color_jitter, (n, 3)), 0.0, 1.0)
        parts.append((pos, scales, rots, op, col))
    cat = [np.concatenate([p[i] for p in parts]) for i in range(5)]
    return Scene(*cat, seed=spec.seed)
