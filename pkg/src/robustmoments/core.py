"""Domain types, the exact ground-truth oracle, and flip-number measurement.

The turnstile model: a stream of (index, delta) updates accumulates into a
frequency vector v over [1, n]; frequencies may go negative.  Everything in
this module is exact and deterministic; it is the reference against which
all sketch-based estimators are judged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

MAX_STREAM_LENGTH = 1 << 40  # keeps p<=2 exact integer paths inside 64 bits


class ConfigError(ValueError):
    """Invalid configuration or parameter value."""


class RangeError(ValueError):
    """Update outside the configured universe or delta bound."""


@dataclass(frozen=True)
class Update:
    """One turnstile stream event: add `delta` to coordinate `index`."""

    index: int
    delta: int

    def validate(self, n: int, c: int = 1) -> None:
        if not 1 <= self.index <= n:
            raise RangeError(f"index {self.index} outside [1, {n}]")
        if self.delta == 0 or abs(self.delta) > c:
            raise RangeError(f"delta {self.delta} outside [-{c}, {c}] \\ {{0}}")

    def inverse(self) -> "Update":
        return Update(self.index, -self.delta)


@dataclass
class SparseVector:
    """Exact frequency vector stored as a map from index to nonzero value."""

    n: int
    entries: dict[int, int] = field(default_factory=dict)

    def copy(self) -> "SparseVector":
        return SparseVector(self.n, dict(self.entries))

    def __getitem__(self, index: int) -> int:
        return self.entries.get(index, 0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return self.n == other.n and self.entries == other.entries


def apply_update(v: SparseVector, u: Update, c: int | None = None) -> SparseVector:
    """Return a new vector with `u` applied; entries hitting 0 are dropped."""
    u.validate(v.n, c if c is not None else abs(u.delta))
    out = v.copy()
    new = out.entries.get(u.index, 0) + u.delta
    if new == 0:
        out.entries.pop(u.index, None)
    else:
        out.entries[u.index] = new
    return out


def density(v: SparseVector) -> int:
    """Number of nonzero coordinates (the 0th moment)."""
    return len(v.entries)


def moment(v: SparseVector, p: float) -> float | int:
    """Sum of |v_i|^p with the 0^0 = 0 convention.

    Exact integer arithmetic for p in {0, 1, 2}; float otherwise.
    """
    if p < 0:
        raise ConfigError("moment exponent must be nonnegative")
    if p == 0:
        return len(v.entries)
    if p == 1:
        return sum(abs(x) for x in v.entries.values())
    if p == 2:
        return sum(x * x for x in v.entries.values())
    return float(sum(abs(x) ** p for x in v.entries.values()))


@dataclass(frozen=True)
class StreamConfig:
    """Shared stream parameters.

    m is an upper bound on the stream length; the usual m = poly(n)
    assumption from the analysis is not enforced.
    """

    n: int
    m: int
    p: float
    alpha: float
    delta: float
    c: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if not 1 <= self.m <= MAX_STREAM_LENGTH:
            raise ConfigError(f"m must be in [1, 2^40], got {self.m}")
        if self.p < 0:
            raise ConfigError("p must be >= 0")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must be in (0, 1)")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must be in (0, 1)")
        if self.c < 1:
            raise ConfigError("delta bound C must be >= 1")


class MomentTracker:
    """Incrementally maintained exact vector and moment.

    For p in {0, 1, 2} the moment is an exact integer; for fractional p it
    is a float accumulator (per-entry |v_i|^p recomputed on touch, so the
    drift stays at rounding level).
    """

    def __init__(self, n: int, p: float):
        self.n = n
        self.p = p
        self.vector = SparseVector(n)
        self._moment: float | int = 0

    def apply(self, u: Update) -> None:
        entries = self.vector.entries
        old = entries.get(u.index, 0)
        new = old + u.delta
        if new == 0:
            entries.pop(u.index, None)
        else:
            entries[u.index] = new
        p = self.p
        if p == 0:
            self._moment += (new != 0) - (old != 0)
        elif p == 1:
            self._moment += abs(new) - abs(old)
        elif p == 2:
            self._moment += new * new - old * old
        else:
            self._moment += (abs(new) ** p if new else 0.0) - (abs(old) ** p if old else 0.0)

    @property
    def moment(self) -> float | int:
        return self._moment

    @property
    def density(self) -> int:
        return len(self.vector.entries)


def is_approx(value: float, target: float, alpha: float, slack: float = 0.0) -> bool:
    """True when (1-alpha)*target <= value <= (1+alpha)*target.

    `slack` adds a relative tolerance for float round-off on fractional-p
    paths; exact integer paths should pass with slack 0.
    """
    pad = slack * abs(target)
    return (1.0 - alpha) * target - pad <= value <= (1.0 + alpha) * target + pad


class _FenwickMax:
    """Prefix-maximum tree over nonnegative scores (point raise only)."""

    def __init__(self, size: int):
        self._tree = [0] * (size + 1)

    def raise_at(self, index: int, score: int) -> None:
        index += 1
        tree = self._tree
        while index < len(tree):
            if tree[index] < score:
                tree[index] = score
            index += index & -index

    def prefix_max(self, index: int) -> int:
        index += 1
        best = 0
        tree = self._tree
        while index > 0:
            if tree[index] > best:
                best = tree[index]
            index -= index & -index
        return best


def flip_number(updates: Iterable[Update], n: int, p: float, alpha: float) -> int:
    """Size of the largest flip subsequence of the prefix moments.

    Walks the prefix moments F_p(v^(0)), ..., F_p(v^(m)) and returns the
    length of the longest subsequence in which no element is a
    (1 +/- alpha)-approximation of its successor, per the flip-number
    definition.  The initial prefix (the zero vector) participates, so a
    constant stream has flip number 1 and the count never exceeds m + 1;
    any transition between 0 and a nonzero value flips, because no
    multiplicative approximation relates them.  A single greedy scan can
    undercount the maximum (re-anchoring early can hide later flips), so
    the exact value is computed by a longest-chain recurrence: a prefix
    with moment v extends the best chain over earlier prefixes whose
    moment u satisfies u (1+alpha) < v or u (1-alpha) > v, both contiguous
    ranges in value order, queried through prefix-maximum trees.
    """
    if not 0 < alpha < 1:
        raise ConfigError("alpha must be in (0, 1)")
    tracker = MomentTracker(n, p)
    values = [tracker.moment]
    for u in updates:
        tracker.apply(u)
        values.append(tracker.moment)
    uniq = sorted(set(values))
    rank = {v: i for i, v in enumerate(uniq)}
    size = len(uniq)
    up = 1.0 + alpha
    down = 1.0 - alpha
    low_tree = _FenwickMax(size)
    high_tree = _FenwickMax(size)
    best_overall = 1
    for v in values:
        # count of unique moments u with u*(1+alpha) < v (they sit below v)
        lo, hi = 0, size
        while lo < hi:
            mid = (lo + hi) // 2
            if uniq[mid] * up < v:
                lo = mid + 1
            else:
                hi = mid
        low_count = lo
        # first unique moment u with u*(1-alpha) > v (they sit above v)
        lo, hi = 0, size
        while lo < hi:
            mid = (lo + hi) // 2
            if uniq[mid] * down > v:
                hi = mid
            else:
                lo = mid + 1
        high_start = lo
        best = 0
        if low_count > 0:
            best = low_tree.prefix_max(low_count - 1)
        if high_start < size:
            tail = high_tree.prefix_max(size - 1 - high_start)
            if tail > best:
                best = tail
        chain = best + 1
        if chain > best_overall:
            best_overall = chain
        r = rank[v]
        low_tree.raise_at(r, chain)
        high_tree.raise_at(size - 1 - r, chain)
    return best_overall


def read_stream(path) -> Iterator[Update]:
    """Parse a stream replay file: one `<index> <delta>` pair per line.

    Lines starting with `#` and blank lines are ignored.
    """
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: expected '<index> <delta>'")
            try:
                idx, delta = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: non-integer field") from exc
            yield Update(idx, delta)


def write_stream(path, updates: Iterable[Update]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for u in updates:
            fh.write(f"{u.index} {u.delta}\n")


def words_for_vector(v: SparseVector) -> int:
    """Sparse-map space accounting: one index word plus one value word per entry."""
    return 2 * len(v.entries)


def auto_threshold(p: float, m: int) -> int:
    """Density threshold balancing sparse and dense regime space.

    m^(1/3) for p in [0, 1] and m^(p/(2p+1)) for p > 1, rounded up, with a
    guard against float round-up on exact powers, and floored at 10 so the
    density refresh stride stays positive.
    """
    if p <= 1:
        expo = 1.0 / 3.0
    else:
        expo = p / (2.0 * p + 1.0)
    t = m ** expo
    return max(10, math.ceil(t - 1e-9 * t))
