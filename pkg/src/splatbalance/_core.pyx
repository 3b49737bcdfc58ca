# cython: language_level=3
"""Compiled hot kernels. Mirrors ``_pycore`` exactly in signature and arithmetic."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, floor

cnp.import_array()

DEF TILE = 16


def rasterize(const long long[::1] tile_offsets, const long long[::1] tile_entries,
              const double[::1] mx, const double[::1] my,
              const double[::1] conic_a, const double[::1] conic_b, const double[::1] conic_c,
              const double[::1] opacity, const double[:, ::1] colors,
              int width, int height, double alpha_min, double t_min, bint early_stop):
    cdef int tiles_x = width // TILE
    cdef Py_ssize_t n_tiles = tile_offsets.shape[0] - 1
    image_arr = np.zeros((height, width, 3), dtype=np.float64)
    counts_arr = np.zeros((height, width), dtype=np.int32)
    cdef double[:, :, ::1] image = image_arr
    cdef int[:, ::1] counts = counts_arr
    cdef Py_ssize_t t, k, g
    cdef int tx, ty, lx, ly, px, py, cnt
    cdef double T, alpha, power, dx, dy, w, r, gr, b
    cdef bint done
    for t in range(n_tiles):
        if tile_offsets[t + 1] == tile_offsets[t]:
            continue
        ty = <int>(t // tiles_x)
        tx = <int>(t % tiles_x)
        for ly in range(TILE):
            py = ty * TILE + ly
            for lx in range(TILE):
                px = tx * TILE + lx
                T = 1.0
                r = 0.0
                gr = 0.0
                b = 0.0
                cnt = 0
                done = False
                for k in range(tile_offsets[t], tile_offsets[t + 1]):
                    g = tile_entries[k]
                    dx = <double>px - mx[g]
                    dy = <double>py - my[g]
                    power = -0.5 * (conic_a[g] * dx * dx + conic_c[g] * dy * dy) - conic_b[g] * dx * dy
                    alpha = opacity[g] * exp(power)
                    if alpha < alpha_min:
                        continue
                    cnt += 1
                    if done:
                        continue
                    w = alpha * T
                    r = r + colors[g, 0] * w
                    gr = gr + colors[g, 1] * w
                    b = b + colors[g, 2] * w
                    T = T * (1.0 - alpha)
                    if early_stop and T < t_min:
                        done = True
                image[py, px, 0] = r
                image[py, px, 1] = gr
                image[py, px, 2] = b
                counts[py, px] = cnt
    return image_arr, counts_arr


def neighbor_counts(points, double radius):
    pts_arr = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = pts_arr.shape[0]
    out_arr = np.zeros(n, dtype=np.int64)
    if n == 0:
        return out_arr
    cdef const double[:, ::1] pts = pts_arr
    cdef long long[::1] out = out_arr
    lo = pts_arr.min(axis=0)
    cell_arr = np.floor((pts_arr - lo) / (radius * (1.0 + 1e-9))).astype(np.int64) + 1
    dims_arr = cell_arr.max(axis=0) + 2
    key_arr = (cell_arr[:, 0] * dims_arr[1] + cell_arr[:, 1]) * dims_arr[2] + cell_arr[:, 2]
    order_arr = np.argsort(key_arr, kind="stable").astype(np.int64)
    skey_arr = np.ascontiguousarray(key_arr[order_arr])
    cdef long long[:, ::1] cell = np.ascontiguousarray(cell_arr)
    cdef long long[::1] order = order_arr
    cdef long long[::1] skey = skey_arr
    cdef long long d1 = dims_arr[1], d2 = dims_arr[2]
    cdef double r2 = radius * radius
    cdef Py_ssize_t i, j, s, lo_i, hi_i, mid
    cdef long long nkey
    cdef int oa, ob, oc
    cdef double ex, ey, ez
    for i in range(n):
        for oa in range(-1, 2):
            for ob in range(-1, 2):
                for oc in range(-1, 2):
                    nkey = ((cell[i, 0] + oa) * d1 + cell[i, 1] + ob) * d2 + cell[i, 2] + oc
                    # lower bound
                    lo_i = 0
                    hi_i = n
                    while lo_i < hi_i:
                        mid = (lo_i + hi_i) >> 1
                        if skey[mid] < nkey:
                            lo_i = mid + 1
                        else:
                            hi_i = mid
                    s = lo_i
                    while s < n and skey[s] == nkey:
                        j = order[s]
                        s += 1
                        if j == i:
                            continue
                        ex = pts[i, 0] - pts[j, 0]
                        ey = pts[i, 1] - pts[j, 1]
                        ez = pts[i, 2] - pts[j, 2]
                        if ex * ex + ey * ey + ez * ez <= r2:
                            out[i] += 1
    return out_arr


cdef inline void _insertion_sort(long long* buf, Py_ssize_t n) nogil:
    # rows are at most a warp wide
    cdef Py_ssize_t i, j
    cdef long long x
    for i in range(1, n):
        x = buf[i]
        j = i - 1
        while j >= 0 and buf[j] > x:
            buf[j + 1] = buf[j]
            j -= 1
        buf[j + 1] = x


def segment_counts(addresses, long long segment_bytes, long long element_bytes):
    addr_arr = np.ascontiguousarray(addresses, dtype=np.int64)
    cdef Py_ssize_t m = addr_arr.shape[0]
    tx_arr = np.zeros(m, dtype=np.int64)
    ub_arr = np.zeros(m, dtype=np.int64)
    if addr_arr.size == 0:
        return tx_arr, ub_arr
    cdef Py_ssize_t lanes = addr_arr.shape[1]
    if lanes > 64:
        raise ValueError("at most 64 lanes per instruction")
    cdef const long long[:, ::1] addr = addr_arr
    cdef long long[::1] tx = tx_arr
    cdef long long[::1] ub = ub_arr
    cdef long long abuf[64]
    cdef Py_ssize_t i, a, n
    cdef long long v, seg, prev_seg, d_addr, d_seg
    with nogil:
        for i in range(m):
            n = 0
            for a in range(lanes):
                v = addr[i, a]
                if v >= 0:
                    abuf[n] = v
                    n += 1
            if n == 0:
                continue
            _insertion_sort(abuf, n)
            # floor division is monotone, so sorted addresses give sorted segments
            d_addr = 1
            d_seg = 1
            prev_seg = abuf[0] // segment_bytes
            for a in range(1, n):
                if abuf[a] != abuf[a - 1]:
                    d_addr += 1
                seg = abuf[a] // segment_bytes
                if seg != prev_seg:
                    d_seg += 1
                    prev_seg = seg
            tx[i] = d_seg
            ub[i] = d_addr * element_bytes
    return tx_arr, ub_arr
