"""Classical (non-robust) turnstile estimators for F0 and F_p, p in (0, 2].

Each sketch class holds `copies` independent instances side by side in
flat numpy arrays, so one stream update touches every copy in a handful of
vectorized operations.  A single-instance estimator is simply a bank with
copies=1.  All state is linear in the stream: processing any reordering of
the same updates yields identical arrays, and every hash is regenerated
from seeds on demand rather than stored.  The F0 and p-stable banks defer
pending updates and fold them into the arrays in blocks when an estimate
is requested; linearity makes the deferred result identical to eager
processing.

Accuracy contract (per copy, fixed stream prefix): estimate() is a
(1 +/- alpha)-approximation of the moment with probability >= 9/10 over
the initial randomness.  The sizing constants below are tuned against the
Monte-Carlo suite, not derived; size_scale shrinks them proportionally for
desk-scale experiment budgets.
"""

from __future__ import annotations

import math
import struct

import numpy as np

from .core import ConfigError
from .hashing import MASK64, mix64_array, mix64_with, seed_streams, to_unit

_PI = math.pi

# row sums of squares stay exact in int64 as long as (m*C)^2 fits
_EXACT_SQ_LIMIT = 3_037_000_499

_U0 = np.uint64(0)
_U1 = np.uint64(1)
_U63 = np.uint64(63)


class UnsupportedMomentError(ConfigError):
    """No estimator is available for this moment exponent."""


def _as_u64(x: int) -> np.uint64:
    return np.uint64(x & MASK64)


def _le_bytes(arr: np.ndarray) -> bytes:
    return arr.astype(arr.dtype.newbyteorder("<")).tobytes()


def _le_load(arr: np.ndarray, raw: bytes) -> None:
    arr[:] = np.frombuffer(raw, dtype=arr.dtype.newbyteorder("<")).astype(arr.dtype)


def _row_medians(values: np.ndarray, copies: int, rows: int) -> np.ndarray:
    """Median over the row axis; rows is kept odd so this is one element."""
    part = np.partition(values.reshape(copies, rows), rows // 2, axis=1)
    return part[:, rows // 2].astype(np.float64)


class F2Sketch:
    """CountSketch/AMS second-moment bank.

    rows x buckets signed counters per copy; estimate is the median over
    rows of the per-row sum of squared counters, maintained incrementally
    so queries cost O(rows) per copy.  Updates are applied eagerly because
    the incremental square sums need each counter's prior value.
    """

    kind = "f2"

    def __init__(
        self,
        alpha: float,
        n: int,
        m: int,
        seed: int,
        copies: int = 1,
        rows: int = 5,
        buckets: int | None = None,
        size_scale: float = 1.0,
    ):
        if not 0 < alpha < 1:
            raise ConfigError("alpha must be in (0, 1)")
        if rows % 2 == 0:
            raise ConfigError("rows must be odd (median of rows)")
        self.p = 2.0
        self.alpha = alpha
        self.n = n
        self.m = m
        self.seed = seed
        self.copies = copies
        self.rows = rows
        if buckets is None:
            buckets = max(8, math.ceil(20.0 / (alpha * alpha) * size_scale))
        self.buckets = buckets
        lanes = copies * rows
        self._seeds = seed_streams(seed, lanes, "f2")
        self._counters = np.zeros(lanes * buckets, dtype=np.int64)
        sq_exact = m <= _EXACT_SQ_LIMIT
        self._rowsq = np.zeros(lanes, dtype=np.int64 if sq_exact else np.float64)
        self._offsets = np.arange(lanes, dtype=np.intp) * buckets
        self._h = np.empty(lanes, dtype=np.uint64)
        self._t = np.empty(lanes, dtype=np.uint64)
        self._pos = np.empty(lanes, dtype=np.intp)
        self._inc = np.empty(lanes, dtype=np.int64)
        self._ubuckets = np.uint64(buckets)

    def update(self, index: int, delta: int) -> None:
        h = mix64_with(self._seeds, _as_u64(index), self._h, self._t)
        np.remainder(h, self._ubuckets, out=self._t)
        np.add(self._offsets, self._t.astype(np.intp), out=self._pos)
        np.right_shift(h, _U63, out=self._t)
        inc = self._inc
        np.multiply(self._t.astype(np.int64), -2 * delta, out=inc)
        inc += delta
        pos = self._pos
        old = self._counters[pos]
        self._counters[pos] = old + inc
        self._rowsq += inc * (2 * old + inc)

    def estimates(self) -> np.ndarray:
        return _row_medians(self._rowsq, self.copies, self.rows)

    def estimate(self) -> float:
        return float(self.estimates()[0])

    def words_used(self) -> int:
        return self._counters.size + self._rowsq.size + self._seeds.size + 4

    @property
    def counters(self) -> np.ndarray:
        return self._counters.reshape(self.copies, self.rows, self.buckets)

    def config_blob(self) -> bytes:
        return struct.pack(
            "<dqqqqqq", self.alpha, self.n, self.m, self.seed, self.copies,
            self.rows, self.buckets,
        )

    def serial_chunks(self) -> list[bytes]:
        return [_le_bytes(self._counters), _le_bytes(self._rowsq)]

    @classmethod
    def from_serialized(cls, cfg: bytes, chunks: list[bytes]) -> "F2Sketch":
        alpha, n, m, seed, copies, rows, buckets = struct.unpack("<dqqqqqq", cfg)
        sketch = cls(alpha, n, m, seed, copies=copies, rows=rows, buckets=buckets)
        _le_load(sketch._counters, chunks[0])
        _le_load(sketch._rowsq, chunks[1])
        return sketch


class StableSketch:
    """Dense p-stable projection bank for p in (0, 2).

    Each copy keeps `rows` projections sum_i v_i * s_{j,i} where the
    s values are p-stable variates produced by the Chambers-Mallows-Stuck
    transform from counter-based hashes of (seed, row, index) - regenerated
    whenever needed, never stored.  The estimate inverts the median of
    absolute projections by the median of the absolute p-stable
    distribution (computed numerically once per p).
    """

    kind = "stable"

    def __init__(
        self,
        p: float,
        alpha: float,
        n: int,
        m: int,
        seed: int,
        copies: int = 1,
        rows: int | None = None,
        size_scale: float = 1.0,
    ):
        if not 0 < p < 2:
            raise UnsupportedMomentError("StableSketch requires p in (0, 2)")
        if not 0 < alpha < 1:
            raise ConfigError("alpha must be in (0, 1)")
        self.p = p
        self.alpha = alpha
        self.n = n
        self.m = m
        self.seed = seed
        self.copies = copies
        if rows is None:
            # (1+alpha) accuracy on the moment needs (1+alpha)^(1/p) on the
            # norm; the sample median of |projections| concentrates with
            # relative deviation spread(p)/sqrt(rows)
            gamma = (1.0 + alpha) ** (1.0 / p) - 1.0
            spread = stable_median_spread(p)
            rows = max(17, math.ceil((2.2 * spread / gamma) ** 2 * size_scale))
        if rows % 2 == 0:
            rows += 1
        self.rows = rows
        lanes = copies * rows
        self._seeds_u = seed_streams(seed, lanes, "stable-u")
        self._seeds_w = seed_streams(seed, lanes, "stable-w")
        self._proj = np.zeros(lanes, dtype=np.float64)
        self._scale = stable_abs_median(p)
        self._pending_i: list[int] = []
        self._pending_d: list[int] = []

    def variates(self, index: int) -> np.ndarray:
        """Regenerate the stable multipliers of one coordinate, all lanes."""
        return self._variates_block(
            np.asarray([index], dtype=np.uint64)
        ).reshape(self.copies * self.rows)

    def _variates_block(self, indices: np.ndarray) -> np.ndarray:
        """(lanes, len(indices)) stable variates for a batch of coordinates."""
        keys = mix64_array(indices)
        hu = mix64_array(self._seeds_u[:, None] ^ keys[None, :])
        u = to_unit(hu) + 2.0 ** -54  # strictly inside (0, 1)
        theta = _PI * (u - 0.5)
        if self.p == 1.0:
            return np.tan(theta, out=theta)
        hw = mix64_array(self._seeds_w[:, None] ^ keys[None, :])
        w = to_unit(hw) + 2.0 ** -54
        return _cms_transform(self.p, theta, -np.log(w))

    def update(self, index: int, delta: int) -> None:
        self._pending_i.append(index)
        self._pending_d.append(delta)
        if len(self._pending_i) >= 64:
            self._flush()

    def _flush(self) -> None:
        if not self._pending_i:
            return
        idx = np.asarray(self._pending_i, dtype=np.uint64)
        deltas = np.asarray(self._pending_d, dtype=np.float64)
        self._pending_i.clear()
        self._pending_d.clear()
        block = self._variates_block(idx)
        self._proj += block @ deltas

    def estimates(self) -> np.ndarray:
        self._flush()
        med = _row_medians(np.abs(self._proj), self.copies, self.rows)
        return (med / self._scale) ** self.p

    def estimate(self) -> float:
        return float(self.estimates()[0])

    def words_used(self) -> int:
        return self._proj.size + self._seeds_u.size + self._seeds_w.size + 4

    @property
    def projections(self) -> np.ndarray:
        self._flush()
        return self._proj.reshape(self.copies, self.rows)

    def config_blob(self) -> bytes:
        return struct.pack(
            "<ddqqqqq", self.p, self.alpha, self.n, self.m, self.seed,
            self.copies, self.rows,
        )

    def serial_chunks(self) -> list[bytes]:
        self._flush()
        return [_le_bytes(self._proj)]

    @classmethod
    def from_serialized(cls, cfg: bytes, chunks: list[bytes]) -> "StableSketch":
        p, alpha, n, m, seed, copies, rows = struct.unpack("<ddqqqqq", cfg)
        sketch = cls(p, alpha, n, m, seed, copies=copies, rows=rows)
        _le_load(sketch._proj, chunks[0])
        return sketch


def _cms_transform(p: float, theta: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Chambers-Mallows-Stuck map from (theta, W) to standard p-stable."""
    w = np.maximum(w, 1e-300)
    a = np.sin(p * theta) / np.cos(theta) ** (1.0 / p)
    b = (np.cos((1.0 - p) * theta) / w) ** ((1.0 - p) / p)
    return a * b


_STABLE_STATS: dict[float, tuple[float, float]] = {}


def _stable_stats(p: float, samples: int = 4_000_000) -> tuple[float, float]:
    """(median of |S|, relative spread of the sample median) for p-stable S.

    Both come from one fixed-seed Monte-Carlo draw through the same CMS
    transform the sketch uses, cached per exponent; the median is accurate
    to ~1e-3.  The spread is the interquantile slope 1/(2 f(median)),
    normalized by the median: the sample median of r draws deviates
    relatively by about spread/sqrt(r).  p=1 pins the Cauchy median at
    exactly 1.
    """
    if p in _STABLE_STATS:
        return _STABLE_STATS[p]
    rng = np.random.default_rng(0x5AB1E << 8 | 7)
    theta = _PI * (rng.random(samples) - 0.5)
    if p == 1.0:
        draws = np.abs(np.tan(theta))
        median = 1.0
    else:
        w = -np.log1p(-rng.random(samples))
        draws = np.abs(_cms_transform(p, theta, w))
        median = float(np.median(draws))
    q45, q55 = np.quantile(draws, [0.45, 0.55])
    spread = float((q55 - q45) / 0.2 / median)
    _STABLE_STATS[p] = (median, spread)
    return _STABLE_STATS[p]


def stable_abs_median(p: float) -> float:
    """Median of |S| for standard p-stable S (numeric, cached, ~1e-3)."""
    if p == 1.0:
        return 1.0
    return _stable_stats(p)[0]


def stable_median_spread(p: float) -> float:
    """Relative concentration constant of the sample median of |S|."""
    return _stable_stats(p)[1]


class F0Sketch:
    """Hierarchical-subsampling distinct-count bank (turnstile safe).

    L = ceil(log2 n) + 1 nested levels per copy; level l sees the
    coordinates whose seeded hash has at least l trailing zero bits, so
    level 0 sees everything and level membership is fixed for the whole
    stream.  Each level is a detector of `cells` fingerprint words: a cell
    holds the sum of v_i * g(i) over its coordinates (g a seeded 64-bit
    mix, so deletions cancel insertions exactly) and counts as occupied
    while nonzero.  Occupancy per level is maintained incrementally; the
    cardinality readout inverts the expected-occupancy curve, and a level
    is saturated once its readout exceeds the design capacity.  The
    estimate is 2^level times the readout at the lowest unsaturated level.
    """

    kind = "f0"

    def __init__(
        self,
        alpha: float,
        n: int,
        m: int,
        seed: int,
        copies: int = 1,
        capacity: int | None = None,
        size_scale: float = 1.0,
    ):
        if not 0 < alpha < 1:
            raise ConfigError("alpha must be in (0, 1)")
        self.p = 0.0
        self.alpha = alpha
        self.n = n
        self.m = m
        self.seed = seed
        self.copies = copies
        self.levels = (max(1, math.ceil(math.log2(n))) if n > 1 else 1) + 1
        if capacity is None:
            capacity = max(16, math.ceil(24.0 / (alpha * alpha) * size_scale))
        self.capacity = capacity
        self.cells = 2 * capacity
        pairs = copies * self.levels
        self._level_seeds = seed_streams(seed, copies, "f0-level")
        self._fp_seeds = seed_streams(seed, copies, "f0-fp")
        self._cell_seeds = seed_streams(seed, pairs, "f0-cell")
        self._table = np.zeros(pairs * self.cells, dtype=np.uint64)
        self._occ = np.zeros(pairs, dtype=np.int64)
        b = float(self.cells)
        self._sat_occ = b * (1.0 - (1.0 - 1.0 / b) ** capacity)
        self._inv_log = 1.0 / math.log(1.0 - 1.0 / b)
        self._copy_base = np.arange(copies, dtype=np.intp) * self.levels
        self._pending_i: list[int] = []
        self._pending_d: list[int] = []

    def update(self, index: int, delta: int) -> None:
        self._pending_i.append(index)
        self._pending_d.append(delta)
        if len(self._pending_i) >= 64:
            self._flush()

    def _flush(self) -> None:
        if not self._pending_i:
            return
        idx = np.asarray(self._pending_i, dtype=np.uint64)
        deltas = np.asarray(self._pending_d, dtype=np.int64)
        self._pending_i.clear()
        self._pending_d.clear()
        keys = mix64_array(idx)
        hz = mix64_array(self._level_seeds[:, None] ^ keys[None, :])
        lowbit = (hz & (~hz + _U1)) | _U1
        depth = np.log2(lowbit.astype(np.float64)).astype(np.intp)
        np.minimum(depth, self.levels - 1, out=depth)
        nlev = (depth + 1).ravel()  # copy-major, then update-major
        total = int(nlev.sum())
        pair_of = np.repeat(
            (self._copy_base[:, None] + np.zeros(len(idx), dtype=np.intp)).ravel(), nlev
        )
        starts = np.cumsum(nlev) - nlev
        pair_of += np.arange(total, dtype=np.intp) - np.repeat(starts, nlev)
        key_of = np.repeat(np.tile(keys, self.copies), nlev)
        hcell = mix64_array(self._cell_seeds[pair_of] ^ key_of)
        flat = pair_of * self.cells + (hcell % np.uint64(self.cells)).astype(np.intp)
        g = mix64_array(self._fp_seeds[:, None] ^ keys[None, :]) | _U1
        inc = np.repeat(
            (g * deltas.astype(np.uint64)[None, :]).ravel(), nlev
        )
        touched = np.unique(flat)
        before = self._table[touched]
        np.add.at(self._table, flat, inc)
        after = self._table[touched]
        change = (after != _U0).astype(np.int64) - (before != _U0)
        np.add.at(self._occ, touched // self.cells, change)

    def estimates(self) -> np.ndarray:
        self._flush()
        occ = self._occ.reshape(self.copies, self.levels).astype(np.float64)
        np.minimum(occ, self.cells - 1.0, out=occ)
        readout = np.log1p(-occ / self.cells) * self._inv_log
        unsat = readout <= self.capacity
        level = np.argmax(unsat, axis=1)
        level[~unsat.any(axis=1)] = self.levels - 1
        chosen = readout[np.arange(self.copies), level]
        return np.ldexp(chosen, level.astype(np.int32))

    def estimate(self) -> float:
        return float(self.estimates()[0])

    def level_membership(self, index: int) -> np.ndarray:
        """Deepest level containing the coordinate, per copy (test hook)."""
        self._flush()
        hz = mix64_array(self._level_seeds ^ mix64_array(np.asarray([index], np.uint64)))
        lowbit = (hz & (~hz + _U1)) | _U1
        depth = np.log2(lowbit.astype(np.float64)).astype(np.int64)
        return np.minimum(depth, self.levels - 1)

    def occupancy(self) -> np.ndarray:
        self._flush()
        return self._occ.reshape(self.copies, self.levels).copy()

    def words_used(self) -> int:
        return (
            self._table.size + self._occ.size + self._cell_seeds.size
            + self._level_seeds.size + self._fp_seeds.size + 4
        )

    def config_blob(self) -> bytes:
        return struct.pack(
            "<dqqqqq", self.alpha, self.n, self.m, self.seed, self.copies,
            self.capacity,
        )

    def serial_chunks(self) -> list[bytes]:
        self._flush()
        return [_le_bytes(self._table), _le_bytes(self._occ)]

    @classmethod
    def from_serialized(cls, cfg: bytes, chunks: list[bytes]) -> "F0Sketch":
        alpha, n, m, seed, copies, capacity = struct.unpack("<dqqqqq", cfg)
        sketch = cls(alpha, n, m, seed, copies=copies, capacity=capacity)
        _le_load(sketch._table, chunks[0])
        _le_load(sketch._occ, chunks[1])
        return sketch


def make_estimator(p: float, alpha: float, n: int, m: int, seed: int, **kwargs):
    """Estimator for the given moment: F0Sketch, StableSketch, or F2Sketch.

    p > 2 has no in-scope construction and raises UnsupportedMomentError.
    """
    if p < 0:
        raise UnsupportedMomentError("p must be nonnegative")
    if p == 0:
        return F0Sketch(alpha, n, m, seed, **kwargs)
    if p < 2:
        return StableSketch(p, alpha, n, m, seed, **kwargs)
    if p == 2:
        return F2Sketch(alpha, n, m, seed, **kwargs)
    raise UnsupportedMomentError(f"no turnstile estimator in scope for p={p}")


_MAGIC = b"RMSK"
_SERIAL_VERSION = 1
_KIND_CODES = {"f2": 1, "stable": 2, "f0": 3, "recovery": 4}
_KIND_CLASSES: dict[int, type] = {}


def register_sketch_kind(cls) -> None:
    _KIND_CLASSES[_KIND_CODES[cls.kind]] = cls


for _cls in (F2Sketch, StableSketch, F0Sketch):
    register_sketch_kind(_cls)


def serialize_sketch(sketch) -> bytes:
    """Versioned little-endian blob: magic, version, kind, config, raw state."""
    cfg = sketch.config_blob()
    out = [
        _MAGIC,
        struct.pack("<HB", _SERIAL_VERSION, _KIND_CODES[sketch.kind]),
        struct.pack("<I", len(cfg)),
        cfg,
    ]
    for raw in sketch.serial_chunks():
        out.append(struct.pack("<I", len(raw)))
        out.append(raw)
    return b"".join(out)


def deserialize_sketch(blob: bytes):
    if blob[:4] != _MAGIC:
        raise ConfigError("bad sketch blob magic")
    version, kind = struct.unpack("<HB", blob[4:7])
    if version != _SERIAL_VERSION:
        raise ConfigError(f"unsupported sketch blob version {version}")
    if kind not in _KIND_CLASSES:
        raise ConfigError(f"unknown sketch kind {kind}")
    (cfg_len,) = struct.unpack("<I", blob[7:11])
    pos = 11
    cfg = blob[pos : pos + cfg_len]
    pos += cfg_len
    chunks = []
    while pos < len(blob):
        (raw_len,) = struct.unpack("<I", blob[pos : pos + 4])
        pos += 4
        chunks.append(blob[pos : pos + raw_len])
        pos += raw_len
    return _KIND_CLASSES[kind].from_serialized(cfg, chunks)
