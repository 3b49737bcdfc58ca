"""Global-memory access model for per-Gaussian color loads.

Color reads are expressed as warp instructions, each a row of lane addresses, and
counted against fixed-size memory segments. The baseline reads R, G and B as three
broadcast instructions per Gaussian per pixel-warp out of a channel-split buffer.
The optimized path stages each tile's Gaussians as interleaved RGB triples in a
contiguous region and loads it in full-warp stripes once per tile; later per-pixel
reads are served from shared memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .render import RenderConfig, TileWorkload, render
from .scene import Camera, Scene

WARP = 32
WARPS_PER_TILE = 8
LAYOUTS = ("channel_split", "interleaved")


@dataclass(frozen=True)
class LayoutSpec:
    kind: str
    gaussian_count: int
    element_bytes: int = 4
    base: int = 0

    def __post_init__(self):
        if self.kind not in LAYOUTS:
            raise ValueError(f"unknown layout {self.kind!r}; choose from {LAYOUTS}")
        if self.gaussian_count < 0 or self.element_bytes <= 0:
            raise ValueError("gaussian_count must be >= 0 and element_bytes > 0")

    @property
    def size_bytes(self) -> int:
        return 3 * self.gaussian_count * self.element_bytes

    def address(self, g, c):
        g = np.asarray(g, dtype=np.int64)
        c = np.asarray(c, dtype=np.int64)
        if self.kind == "channel_split":
            return self.base + (c * self.gaussian_count + g) * self.element_bytes
        return self.base + (g * 3 + c) * self.element_bytes

    def store(self, colors: np.ndarray) -> np.ndarray:
        """Flat buffer holding ``colors`` in this layout."""
        colors = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
        if self.kind == "channel_split":
            return np.ascontiguousarray(colors.T).reshape(-1)
        return np.ascontiguousarray(colors).reshape(-1)

    def load(self, buf: np.ndarray, channel_map=(0, 1, 2)) -> np.ndarray:
        """(N, 3) colors read back through the address formula.

        ``channel_map`` says which stored channel feeds each output channel; anything
        other than the identity is a broken reorder, used as a negative control.
        """
        n = self.gaussian_count
        g = np.arange(n)[:, None]
        c = np.asarray(channel_map, dtype=np.int64)[None, :]
        idx = (self.address(g, c) - self.base) // self.element_bytes
        return buf[idx]


@dataclass
class AccessTrace:
    """Warp instructions as rows of byte addresses.

    ``addresses`` has one column per distinct lane address; -1 marks an inactive
    lane. With ``broadcast`` set each row holds a single address read by all 32
    lanes, which keeps the baseline compact.
    """

    addresses: np.ndarray
    broadcast: bool = False
    shared_reads: int = 0
    element_bytes: int = 4
    label: str = ""

    def __post_init__(self):
        a = np.asarray(self.addresses, dtype=np.int64)
        if a.ndim != 2:
            a = a.reshape(-1, 1 if self.broadcast else WARP)
        if a.shape[1] > WARP or (self.broadcast and a.shape[1] != 1):
            raise ValueError(f"bad trace shape {a.shape}")
        active = a[a >= 0]
        if np.any(active % self.element_bytes):
            raise ValueError("addresses must be aligned to element_bytes")
        self.addresses = a

    def __len__(self) -> int:
        return len(self.addresses)

    def lanes(self) -> np.ndarray:
        """(instructions, 32) lane addresses, broadcast rows expanded."""
        if self.broadcast:
            return np.repeat(self.addresses, WARP, axis=1)
        if self.addresses.shape[1] == WARP:
            return self.addresses
        pad = np.full((len(self.addresses), WARP - self.addresses.shape[1]), -1, dtype=np.int64)
        return np.hstack([self.addresses, pad])


@dataclass
class TransactionReport:
    instructions: int
    transactions: int
    ideal_transactions: float  # unique bytes / segment size, summed
    ideal_transactions_ceil: int  # per-instruction ceil, min 1
    unique_bytes: int
    coalesced_efficiency: float
    shared_reads: int
    modeled_time: float
    segment_bytes: int
    t_transaction: float
    t_shared: float

    def summary(self) -> dict:
        return {k: getattr(self, k) for k in (
            "instructions", "transactions", "ideal_transactions", "ideal_transactions_ceil",
            "unique_bytes", "coalesced_efficiency", "shared_reads", "modeled_time")}


def trace_baseline(tiles: list[TileWorkload], layout: LayoutSpec) -> AccessTrace:
    """8 pixel-warps per tile; each walks the tile list reading R, G, B as broadcasts."""
    rows = []
    for t in tiles:
        lst = np.asarray(t.gaussian_list, dtype=np.int64)
        if not len(lst):
            continue
        if lst.max() >= layout.gaussian_count:
            raise ValueError("tile list references a Gaussian outside the layout")
        per_warp = layout.address(lst[:, None], np.arange(3)[None, :]).reshape(-1)
        rows.append(np.tile(per_warp, WARPS_PER_TILE))
    addr = np.concatenate(rows) if rows else np.zeros(0, np.int64)
    return AccessTrace(addr.reshape(-1, 1), broadcast=True, shared_reads=0,
                       element_bytes=layout.element_bytes, label=f"baseline/{layout.kind}")


def staging_offsets(tiles: list[TileWorkload], layout: LayoutSpec, segment_bytes: int = 128) -> np.ndarray:
    """Start address of each tile's staging region: after the color array, segment aligned."""
    def align(x):
        return -(-x // segment_bytes) * segment_bytes

    start = align(layout.base + layout.size_bytes)
    out = np.zeros(len(tiles), dtype=np.int64)
    for i, t in enumerate(tiles):
        out[i] = start
        start = align(start + 3 * len(t.gaussian_list) * layout.element_bytes)
    return out


def trace_optimized(tiles: list[TileWorkload], layout: LayoutSpec, segment_bytes: int = 128) -> AccessTrace:
    """Per tile, ceil(3L/32) stripe loads over its staged triples; per-pixel reads go to shared memory."""
    if layout.kind != "interleaved":
        raise ValueError("the optimized path stages interleaved triples")
    starts = staging_offsets(tiles, layout, segment_bytes)
    rows = []
    shared = 0
    eb = layout.element_bytes
    for t, s in zip(tiles, starts):
        L = len(t.gaussian_list)
        if not L:
            continue
        words = 3 * L
        n_instr = -(-words // WARP)
        e = np.arange(n_instr * WARP).reshape(n_instr, WARP)
        rows.append(np.where(e < words, s + e * eb, -1))
        shared += WARPS_PER_TILE * 3 * L
    addr = np.vstack(rows) if rows else np.zeros((0, WARP), np.int64)
    return AccessTrace(addr, broadcast=False, shared_reads=shared, element_bytes=eb,
                       label=f"optimized/{layout.kind}")


def count_transactions(trace: AccessTrace, segment_bytes: int = 128, cost_ratio: float = 10.0,
                       t_shared: float = 1.0) -> TransactionReport:
    """Distinct segments per instruction, against the byte-exact ideal.

    The ideal is unique bytes / segment_bytes without rounding, so a broadcast of
    one 4-byte word counts as 1/32 of a segment. The per-instruction ceil form is
    reported alongside.
    """
    if segment_bytes <= 0 or segment_bytes % trace.element_bytes:
        raise ValueError("segment_bytes must be a positive multiple of element_bytes")
    t_tx = cost_ratio * t_shared
    m = len(trace)
    if m == 0:
        return TransactionReport(0, 0, 0.0, 0, 0, 1.0, trace.shared_reads,
                                 trace.shared_reads * t_shared, segment_bytes, t_tx, t_shared)
    if trace.broadcast:
        active = trace.addresses[:, 0] >= 0
        tx = active.astype(np.int64)
        ub = tx * trace.element_bytes
    else:
        tx, ub = kernels.segment_counts(np.ascontiguousarray(trace.addresses), segment_bytes, trace.element_bytes)
    transactions = int(tx.sum())
    unique = int(ub.sum())
    ideal = unique / segment_bytes
    ideal_ceil = int(np.sum(np.maximum(1, -(-ub // segment_bytes))))
    eff = ideal / transactions if transactions else 1.0
    return TransactionReport(m, transactions, ideal, ideal_ceil, unique, eff, trace.shared_reads,
                             transactions * t_tx + trace.shared_reads * t_shared, segment_bytes, t_tx, t_shared)


def brute_force_transactions(trace: AccessTrace, segment_bytes: int = 128) -> tuple[int, int]:
    """(transactions, unique bytes) by plain set counting over expanded lanes."""
    tx = ub = 0
    for row in trace.lanes():
        act = [int(a) for a in row if a >= 0]
        tx += len({a // segment_bytes for a in act})
        ub += len(set(act)) * trace.element_bytes
    return tx, ub


def materialize_colors(scene: Scene, kind: str, channel_map=(0, 1, 2)) -> np.ndarray:
    layout = LayoutSpec(kind, len(scene))
    return layout.load(layout.store(scene.colors), channel_map)


def verify_reorder_invariance(scene: Scene, camera: Camera, config: RenderConfig = RenderConfig(),
                              fault: bool = False) -> bool:
    """Render with colors read through each layout; True iff the images are bit-identical.

    ``fault`` swaps G and B on the interleaved read path.
    """
    split = materialize_colors(scene, "channel_split")
    inter = materialize_colors(scene, "interleaved", (0, 2, 1) if fault else (0, 1, 2))
    a = render(scene, camera, config, colors=split)
    b = render(scene, camera, config, colors=inter)
    return bool(np.array_equal(a.pixels, b.pixels))


def compare_layouts(tiles: list[TileWorkload], gaussian_count: int, segment_bytes: int = 128,
                    cost_ratio: float = 10.0):
    """(baseline report, optimized report, transaction ratio, modeled speedup)."""
    base = count_transactions(trace_baseline(tiles, LayoutSpec("channel_split", gaussian_count)),
                              segment_bytes, cost_ratio)
    opt = count_transactions(trace_optimized(tiles, LayoutSpec("interleaved", gaussian_count), segment_bytes),
                             segment_bytes, cost_ratio)
    tx_ratio = opt.transactions / base.transactions if base.transactions else 1.0
    speed = base.modeled_time / opt.modeled_time if opt.modeled_time else 1.0
    return base, opt, tx_ratio, speed


def ideal_stripe_instructions(list_length: int) -> int:
    return math.ceil(3 * list_length / WARP)
