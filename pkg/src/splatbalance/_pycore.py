"""Pure numpy implementations of the hot kernels.

Same signatures and arithmetic as the compiled ``_core`` module. The blend uses
sequential cumulative products and sums so each pixel sees the same float
operations, in the same order, as the compiled loop.
"""

import numpy as np

TILE = 16
_CHUNK = 2048


def rasterize(tile_offsets, tile_entries, mx, my, conic_a, conic_b, conic_c,
              opacity, colors, width, height, alpha_min, t_min, early_stop):
    """Blend every tile front to back.

    Returns (image (H, W, 3) float64, counts (H, W) int32) where counts holds the
    number of list entries whose alpha at the pixel reaches ``alpha_min``.
    """
    tiles_x = width // TILE
    image = np.zeros((height, width, 3))
    counts = np.zeros((height, width), dtype=np.int32)
    ly, lx = np.mgrid[0:TILE, 0:TILE]
    lx = lx.ravel().astype(np.float64)
    ly = ly.ravel().astype(np.float64)
    for t in range(len(tile_offsets) - 1):
        start, stop = int(tile_offsets[t]), int(tile_offsets[t + 1])
        if stop == start:
            continue
        ty, tx = divmod(t, tiles_x)
        px = lx + tx * TILE
        py = ly + ty * TILE
        acc = np.zeros((TILE * TILE, 3))
        T = np.ones(TILE * TILE)
        cnt = np.zeros(TILE * TILE, dtype=np.int64)
        for c0 in range(start, stop, _CHUNK):
            idx = np.asarray(tile_entries[c0:min(stop, c0 + _CHUNK)])
            dx = px[None, :] - np.asarray(mx)[idx][:, None]
            dy = py[None, :] - np.asarray(my)[idx][:, None]
            a = np.asarray(conic_a)[idx][:, None]
            b = np.asarray(conic_b)[idx][:, None]
            c = np.asarray(conic_c)[idx][:, None]
            power = -0.5 * (a * dx * dx + c * dy * dy) - b * dx * dy
            alpha = np.asarray(opacity)[idx][:, None] * np.exp(power)
            hit = alpha >= alpha_min
            cnt += hit.sum(axis=0)
            a_eff = np.where(hit, alpha, 0.0)
            chain = np.cumprod(np.vstack([T[None, :], 1.0 - a_eff]), axis=0)
            T_before = chain[:-1]
            w = a_eff * T_before
            if early_stop:
                w = np.where(T_before >= t_min, w, 0.0)
            contrib = np.asarray(colors)[idx][:, None, :] * w[:, :, None]
            acc = np.cumsum(np.concatenate([acc[None], contrib]), axis=0)[-1]
            # once below t_min the chain stays below, so later weights stay masked
            T = chain[-1]
        image[ty * TILE:(ty + 1) * TILE, tx * TILE:(tx + 1) * TILE] = acc.reshape(TILE, TILE, 3)
        counts[ty * TILE:(ty + 1) * TILE, tx * TILE:(tx + 1) * TILE] = cnt.reshape(TILE, TILE)
    return image, counts


def neighbor_counts(points, radius):
    """Number of other points within ``radius`` (inclusive) of each point, via a uniform grid."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    n = len(pts)
    out = np.zeros(n, dtype=np.int64)
    if n == 0:
        return out
    i_all, j_all = _grid_candidates(pts, radius)
    for i, j in zip(i_all, j_all):
        d = pts[i] - pts[j]
        d2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
        ok = (d2 <= radius * radius) & (i != j)
        out += np.bincount(i[ok], minlength=n)
    return out


def _grid_candidates(pts, radius):
    """Yield (i, j) candidate arrays, one batch per neighbouring-cell offset."""
    n = len(pts)
    lo = pts.min(axis=0)
    # cell edge padded so float rounding can never push a true neighbour two cells away
    cell = np.floor((pts - lo) / (radius * (1.0 + 1e-9))).astype(np.int64) + 1
    dims = cell.max(axis=0) + 2
    key = (cell[:, 0] * dims[1] + cell[:, 1]) * dims[2] + cell[:, 2]
    order = np.argsort(key, kind="stable")
    skey = key[order]
    offs = [(a, b, c) for a in (-1, 0, 1) for b in (-1, 0, 1) for c in (-1, 0, 1)]
    iis, jjs = [], []
    for oa, ob, oc in offs:
        nkey = ((cell[:, 0] + oa) * dims[1] + cell[:, 1] + ob) * dims[2] + cell[:, 2] + oc
        lo_i = np.searchsorted(skey, nkey, side="left")
        hi_i = np.searchsorted(skey, nkey, side="right")
        span = hi_i - lo_i
        total = int(span.sum())
        if total == 0:
            continue
        i = np.repeat(np.arange(n), span)
        base = np.repeat(lo_i - np.cumsum(span) + span, span)
        j = order[base + np.arange(total)]
        iis.append(i)
        jjs.append(j)
    return iis, jjs


def segment_counts(addresses, segment_bytes, element_bytes):
    """Per-instruction (distinct segments, distinct bytes) for (M, lanes) address rows; -1 = inactive."""
    addr = np.asarray(addresses, dtype=np.int64)
    if addr.size == 0:
        return np.zeros(len(addr), dtype=np.int64), np.zeros(len(addr), dtype=np.int64)
    active = addr >= 0
    seg = np.where(active, addr // segment_bytes, -1)
    return _distinct_nonneg(seg), _distinct_nonneg(np.where(active, addr, -1)) * element_bytes


def _distinct_nonneg(rows):
    s = np.sort(rows, axis=1)
    first = s[:, :1] >= 0
    changes = (s[:, 1:] != s[:, :-1]) & (s[:, 1:] >= 0)
    return first[:, 0].astype(np.int64) + changes.sum(axis=1)
