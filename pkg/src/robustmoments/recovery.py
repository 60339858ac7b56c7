"""Exact recovery of k-sparse frequency vectors from a linear sketch.

Peeling table: d rows of 2k buckets, each bucket holding the triple
(count, index-sum, fingerprint), all linear in the input vector.  The
fingerprint field is the integers mod 2^61 - 1 with per-index value
r^index for a seeded r, so a bucket containing a single coordinate i with
frequency c reads exactly (c, c*i, c*r^i).

Recovery peels verified singletons and then re-encodes the candidate
vector with the same seeds, accepting only if every bucket word of the
re-encoding matches the live sketch.  That verification step is what makes
the structure safe against adaptively constructed inputs: a wrong answer
cannot survive it, whatever the input process, so failures are always
visible.
"""

from __future__ import annotations

import struct

import numpy as np

from .core import ConfigError, SparseVector
from .hashing import MASK64, mix64

FINGERPRINT_PRIME = (1 << 61) - 1


class RecoveryError(RuntimeError):
    """Peeling stalled or the re-encoded candidate failed verification."""


class RecoverySketch:
    """Linear sketch supporting exact recovery of k-sparse vectors."""

    kind = "recovery"
    rows = 4

    def __init__(self, k: int, n: int, seed: int):
        if k < 1:
            raise ConfigError("sparsity parameter k must be >= 1")
        self.k = k
        self.n = n
        self.seed = seed
        self.buckets = 2 * k
        size = self.rows * self.buckets
        self._count = [0] * size
        self._isum = [0] * size
        self._fp = [0] * size
        self._row_seeds = [mix64(seed ^ (0xA5 + 131 * r)) for r in range(self.rows)]
        self._fp_base = 2 + mix64(seed ^ 0xF1B0) % (FINGERPRINT_PRIME - 3)
        # (positions, r^index) per coordinate; pure cache, not sketch state
        self._site: dict[int, tuple[list[int], int]] = {}

    def _lookup(self, index: int) -> tuple[list[int], int]:
        entry = self._site.get(index)
        if entry is None:
            entry = (self._positions(index), pow(self._fp_base, index, FINGERPRINT_PRIME))
            if len(self._site) < (1 << 17):
                self._site[index] = entry
        return entry

    def _power(self, index: int) -> int:
        return self._lookup(index)[1]

    def _positions(self, index: int) -> list[int]:
        b = self.buckets
        return [
            r * b + mix64(self._row_seeds[r] ^ index) % b
            for r in range(self.rows)
        ]

    def update(self, index: int, delta: int) -> None:
        if not 1 <= index <= self.n:
            raise ConfigError(f"index {index} outside [1, {self.n}]")
        positions, power = self._lookup(index)
        fp_inc = delta * power
        di = delta * index
        count, isum, fp = self._count, self._isum, self._fp
        for pos in positions:
            count[pos] += delta
            isum[pos] += di
            fp[pos] = (fp[pos] + fp_inc) % FINGERPRINT_PRIME

    def _encode(self, entries: dict[int, int]):
        shadow = RecoverySketch.__new__(RecoverySketch)
        shadow.k = self.k
        shadow.n = self.n
        shadow.seed = self.seed
        shadow.buckets = self.buckets
        size = self.rows * self.buckets
        shadow._count = [0] * size
        shadow._isum = [0] * size
        shadow._fp = [0] * size
        shadow._row_seeds = self._row_seeds
        shadow._fp_base = self._fp_base
        shadow._site = self._site
        for index, value in entries.items():
            shadow.update(index, value)
        return shadow

    def _matches(self, other: "RecoverySketch") -> bool:
        return (
            self._count == other._count
            and self._isum == other._isum
            and self._fp == other._fp
        )

    def recover(self) -> SparseVector:
        """Exact vector when it is k-sparse; RecoveryError otherwise.

        Never returns an unverified answer: the peeled candidate must
        re-encode to the sketch's exact bucket words.
        """
        count = list(self._count)
        isum = list(self._isum)
        fp = list(self._fp)
        entries: dict[int, int] = {}
        pending = [pos for pos in range(len(count)) if count[pos] != 0]
        peels = 0
        max_peels = self.rows * self.buckets
        while pending and peels < max_peels:
            pos = pending.pop()
            c = count[pos]
            if c == 0:
                continue
            if isum[pos] % c != 0:
                continue
            index = isum[pos] // c
            if not 1 <= index <= self.n:
                continue
            if fp[pos] != (c % FINGERPRINT_PRIME) * self._power(index) % FINGERPRINT_PRIME:
                continue
            peels += 1
            entries[index] = entries.get(index, 0) + c
            if entries[index] == 0:
                del entries[index]
            fp_dec = c * self._power(index)
            for other in self._positions(index):
                count[other] -= c
                isum[other] -= c * index
                fp[other] = (fp[other] - fp_dec) % FINGERPRINT_PRIME
                if count[other] != 0:
                    pending.append(other)
        if any(count) or any(isum) or any(fp):
            raise RecoveryError("peeling stalled before emptying the sketch")
        if not self._matches(self._encode(entries)):
            raise RecoveryError("recovered candidate failed re-encoding verification")
        return SparseVector(self.n, entries)

    def words_used(self) -> int:
        # three words per bucket plus row seeds and scalars; the power
        # cache is a time/space tradeoff outside the sketch contract
        return 3 * self.rows * self.buckets + self.rows + 4

    def bucket_words(self):
        """(count, index-sum, fingerprint) arrays, for audits and tests."""
        return list(self._count), list(self._isum), list(self._fp)

    def config_blob(self) -> bytes:
        return struct.pack("<qqq", self.k, self.n, self.seed)

    def serial_chunks(self) -> list[bytes]:
        return [
            np.asarray(self._count, dtype=np.int64).tobytes(),
            np.asarray(self._isum, dtype=np.int64).tobytes(),
            np.asarray(self._fp, dtype=np.int64).tobytes(),
        ]

    @classmethod
    def from_serialized(cls, cfg: bytes, chunks: list[bytes]) -> "RecoverySketch":
        k, n, seed = struct.unpack("<qqq", cfg)
        sketch = cls(k, n, seed)
        sketch._count = np.frombuffer(chunks[0], dtype="<i8").tolist()
        sketch._isum = np.frombuffer(chunks[1], dtype="<i8").tolist()
        sketch._fp = np.frombuffer(chunks[2], dtype="<i8").tolist()
        return sketch


from .estimators import register_sketch_kind  # noqa: E402  (one-way dependency)

register_sketch_kind(RecoverySketch)
