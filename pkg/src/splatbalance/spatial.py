"""Exact neighbour queries: uniform-grid radius counts/pairs, k-d tree k-nearest distances."""

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from ._pycore import _grid_candidates


def radius_counts(points, radius: float) -> np.ndarray:
    """Count of other points q with |p - q| <= radius, for every p."""
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    return kernels.neighbor_counts(np.ascontiguousarray(points, dtype=np.float64), float(radius))


def radius_pairs(points, radius: float):
    """All index pairs i < j with |p_i - p_j| <= radius, sorted by (distance, i, j)."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if len(pts) < 2:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    I, J, D = [], [], []
    for i, j in zip(*_grid_candidates(pts, radius)):
        keep = i < j
        i, j = i[keep], j[keep]
        d = pts[i] - pts[j]
        d2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
        ok = d2 <= radius * radius
        I.append(i[ok])
        J.append(j[ok])
        D.append(np.sqrt(d2[ok]))
    if not I:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    i, j, d = np.concatenate(I), np.concatenate(J), np.concatenate(D)
    order = np.lexsort((j, i, d))
    return i[order], j[order], d[order]


def knn_distances(points, k: int) -> np.ndarray:
    """(N, k) distances to the k nearest other points, ascending."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < k + 1:
        raise ValueError(f"need at least k+1={k + 1} points, have {len(pts)}")
    d, _ = cKDTree(pts).query(pts, k + 1)
    return d[:, 1:]
