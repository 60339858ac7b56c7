"""(epsilon, 0)-differentially private median over a finite geometric grid.

The mechanism is the exponential mechanism with the standard rank-interval
median utility, sampled via the max-Gumbel trick.  Adjacency is
add/remove-one; the utility has sensitivity at most 1 under it.  This is
the only privacy primitive the bounded-query wrapper needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError


class DatabaseTooSmallError(ValueError):
    """Database smaller than the mechanism's size precondition."""


@dataclass(frozen=True)
class ValueGrid:
    """The finite output set {0} union {(1+alpha/3)^j} truncated to [1, tau).

    Estimates are rounded *up* onto this grid, so the grid ratio matches
    the rounding ratio of the wrapper that owns it.
    """

    alpha: float
    tau: float
    values: np.ndarray = field(compare=False, default=None)

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must be in (0, 1)")
        if self.tau < 1:
            raise ConfigError("tau must be >= 1")
        ratio = 1.0 + self.alpha / 3.0
        # powers strictly below tau; j_max + 1 points, plus the zero element
        count = max(1, math.ceil(math.log(self.tau) / math.log(ratio) - 1e-12))
        pts = np.empty(count + 1, dtype=np.float64)
        pts[0] = 0.0
        pts[1:] = ratio ** np.arange(count)
        object.__setattr__(self, "values", pts)

    def __len__(self) -> int:
        return len(self.values)

    def round_up(self, x: float) -> float:
        """Smallest grid element >= x; values >= tau truncate to the top."""
        if x < 0:
            raise ConfigError("grid values are nonnegative")
        if x == 0.0:
            return 0.0
        j = int(np.searchsorted(self.values, x, side="left"))
        if j >= len(self.values):
            j = len(self.values) - 1
        return float(self.values[j])

    def round_up_array(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized round_up; negative inputs clip to 0 first."""
        xs = np.maximum(np.asarray(xs, dtype=np.float64), 0.0)
        pos = np.searchsorted(self.values, xs, side="left")
        np.minimum(pos, len(self.values) - 1, out=pos)
        return self.values[pos]

    def index_of(self, x: float) -> int:
        j = int(np.searchsorted(self.values, x, side="left"))
        if j >= len(self.values) or self.values[j] != x:
            raise ConfigError(f"{x} is not a grid element")
        return j

    def words_used(self) -> int:
        return len(self.values)


def round_to_grid(x: float, grid: ValueGrid) -> float:
    return grid.round_up(x)


@dataclass(frozen=True)
class MedianParams:
    """Privacy and utility parameters of the private median.

    gamma_bound is the advertised rank-error bound
    c_gamma * (1/epsilon) * ln(|X|/delta); min_db_size is the matching
    size precondition with constant c_s.
    """

    epsilon: float
    delta: float
    c_gamma: float = 4.0
    c_s: float = 8.0

    def __post_init__(self) -> None:
        if not 0 < self.epsilon:
            raise ConfigError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must be in (0, 1)")

    def gamma_bound(self, grid_size: int) -> float:
        return self.c_gamma / self.epsilon * math.log(grid_size / self.delta)

    def min_db_size(self, grid_size: int) -> int:
        return math.ceil(self.c_s / self.epsilon * math.log(grid_size / self.delta))


def rank_utilities(values, grid: ValueGrid) -> np.ndarray:
    """Median utility of every grid point against the database `values`.

    u(S, x) = -max(0, #(s < x) - |S|/2, #(s > x) - |S|/2): zero when x's
    rank interval contains |S|/2, else minus the rank deficit.
    """
    data = np.sort(np.asarray(values, dtype=np.float64))
    half = len(data) / 2.0
    below = np.searchsorted(data, grid.values, side="left")
    above = len(data) - np.searchsorted(data, grid.values, side="right")
    deficit = np.maximum(below - half, above - half)
    return -np.maximum(deficit, 0.0)


def rank_deficit(value: float, values, half_weight: float | None = None) -> float:
    """Rank deficit of one output against a database (test/audit helper)."""
    data = np.asarray(values, dtype=np.float64)
    half = len(data) / 2.0 if half_weight is None else half_weight
    below = float(np.count_nonzero(data < value))
    above = float(np.count_nonzero(data > value))
    return max(0.0, below - half, above - half)


def private_median(
    values,
    grid: ValueGrid,
    params: MedianParams,
    rng: np.random.Generator,
) -> float:
    """Exponential-mechanism median of grid values, sampled with Gumbel noise.

    All elements of `values` must lie on the grid.  Output is always a grid
    element.  With probability >= 1 - delta the output's rank deficit is at
    most the params' gamma bound.  Ties in the noisy argmax resolve to the
    lowest grid index for a given rng stream.
    """
    size = len(values)
    if size < params.min_db_size(len(grid)):
        raise DatabaseTooSmallError(
            f"database size {size} below required {params.min_db_size(len(grid))}"
        )
    scores = rank_utilities(values, grid) * (params.epsilon / 2.0)
    noisy = scores + rng.gumbel(size=len(grid))
    return float(grid.values[int(np.argmax(noisy))])
