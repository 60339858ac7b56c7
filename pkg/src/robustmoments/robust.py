"""Adversarially robust F_p estimation by sparse/dense regime switching.

While the frequency vector has fewer than 4T nonzero coordinates it is
kept explicitly, so outputs are exact and cost nothing against adversarial
flips.  Once it turns dense, outputs come from a rate-limited bounded-query
wrapper: the moment of a T-dense vector cannot move by a (1 +/- alpha/4)
factor in fewer than `interval` updates, so one wrapper estimate serves a
whole interval.  A second bounded-query wrapper tracks the distinct count;
when it drops back to 2T the exact vector is reconstructed from a sparse
recovery sketch and the estimator returns to the sparse regime.

All three sub-structures see every update.  Scheduled wrapper refreshes
fire on fixed step multiples whether or not the current regime consumes
them, exactly matching their query budgets q = ceil(m / stride).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import ConfigError, SparseVector, StreamConfig, Update, auto_threshold
from .estimators import F0Sketch, F2Sketch, StableSketch, UnsupportedMomentError
from .hashing import derive_seed
from .recovery import RecoveryError, RecoverySketch
from .wrapper import RobustWrapper, WrapperParams, build_wrapper

SPARSE = "sparse"
DENSE = "dense"

AUTO = "auto"


def regime_interval(p: float, alpha: float, threshold: float) -> int:
    """Steps between dense-regime moment refreshes.

    alpha*T/4 for p <= 1, (alpha/32p) * (alpha*T/16)^(1/p) for p > 1 -
    the bounded-change budgets at approximation alpha/4 and density T -
    floored and clamped to at least 1.
    """
    if p <= 1:
        raw = alpha * threshold / 4.0
    else:
        raw = alpha / (32.0 * p) * (alpha * threshold / 16.0) ** (1.0 / p)
    return max(math.floor(raw), 1)


@dataclass(frozen=True)
class EstimatorParams:
    """Everything derived from (stream config, density threshold).

    The scaling knobs trade provable slack for desk-scale runtime: k_scale
    multiplies the wrapper copy counts (k_scale_density overrides it for
    the distinct-count wrapper), sketch_scale multiplies per-copy detector
    and bucket sizes, and stable_rows pins the p-stable projection count.
    All keep the parameter formulas' functional form intact.
    """

    p: float
    n: int
    m: int
    threshold: int
    alpha: float
    delta: float
    c: int = 1
    seed: int = 0
    c_k: float = 1.0
    k_scale: float = 1.0
    k_scale_density: float | None = None
    sketch_scale: float = 1.0
    stable_rows: int | None = None
    k_recovery: int = field(init=False, default=0)
    density_stride: int = field(init=False, default=0)
    interval: int = field(init=False, default=0)
    q_density: int = field(init=False, default=0)
    q_approx: int = field(init=False, default=0)
    tau_density: float = field(init=False, default=0.0)
    tau_approx: float = field(init=False, default=0.0)

    def __post_init__(self) -> None:
        if self.p < 0:
            raise ConfigError("p must be nonnegative")
        if self.threshold < 10:
            raise ConfigError("density threshold must be at least 10")
        if not 0 < self.alpha < 1 or not 0 < self.delta < 1:
            raise ConfigError("alpha and delta must be in (0, 1)")
        object.__setattr__(self, "k_recovery", math.ceil(4 * self.threshold))
        stride = self.threshold // 10
        object.__setattr__(self, "density_stride", stride)
        object.__setattr__(self, "interval", regime_interval(self.p, self.alpha, self.threshold))
        object.__setattr__(self, "q_density", math.ceil(self.m / stride))
        object.__setattr__(self, "q_approx", math.ceil(self.m / self.interval))
        object.__setattr__(self, "tau_density", float(min(self.n, self.m)))
        limit = self.m * self.c
        if self.p == 0:
            tau = float(min(self.n, self.m))
        elif self.p <= 1:
            tau = float(limit)
        else:
            tau = float(limit) ** self.p
        object.__setattr__(self, "tau_approx", tau)

    @classmethod
    def from_config(cls, cfg: StreamConfig, threshold: int | str = AUTO, **knobs) -> "EstimatorParams":
        if threshold == AUTO:
            threshold = auto_threshold(cfg.p, cfg.m)
        return cls(
            p=cfg.p, n=cfg.n, m=cfg.m, threshold=int(threshold),
            alpha=cfg.alpha, delta=cfg.delta, c=cfg.c, seed=cfg.seed, **knobs,
        )

    def density_wrapper_params(self) -> WrapperParams:
        """The (m / floor(T/10))-query wrapper for (1 +/- 0.25) distinct counts."""
        return WrapperParams(
            q=self.q_density, delta=self.delta / 2.0, tau=self.tau_density,
            alpha=0.25, c_k=self.c_k,
            k_scale=self.k_scale_density if self.k_scale_density is not None else self.k_scale,
        )

    def approx_wrapper_params(self) -> WrapperParams:
        """The (m / interval)-query wrapper for (1 +/- alpha/4) moments."""
        return WrapperParams(
            q=self.q_approx, delta=self.delta / 2.0, tau=self.tau_approx,
            alpha=self.alpha / 4.0, c_k=self.c_k, k_scale=self.k_scale,
        )


class _SummationTree:
    """Balanced summation tree over per-coordinate terms |v_i|^p.

    Updating one term recomputes only the partial sums on its root path,
    so the total never accumulates drift from long add/subtract chains.
    """

    def __init__(self) -> None:
        self._cap = 1
        self._tree = [0.0, 0.0]
        self._slots: dict[int, int] = {}
        self._free: list[int] = []

    def _grow(self) -> None:
        old_cap = self._cap
        self._cap = 2 * old_cap
        tree = [0.0] * (2 * self._cap)
        tree[self._cap : self._cap + old_cap] = self._tree[old_cap : 2 * old_cap]
        for pos in range(self._cap - 1, 0, -1):
            tree[pos] = tree[2 * pos] + tree[2 * pos + 1]
        self._tree = tree

    def set_term(self, key: int, value: float) -> None:
        slot = self._slots.get(key)
        if value == 0.0:
            if slot is None:
                return
            del self._slots[key]
            self._free.append(slot)
        elif slot is None:
            if self._free:
                slot = self._free.pop()
            else:
                slot = len(self._slots) + len(self._free)
                if slot >= self._cap:
                    self._grow()
            self._slots[key] = slot
        tree = self._tree
        pos = self._cap + slot
        tree[pos] = value
        pos >>= 1
        while pos:
            tree[pos] = tree[2 * pos] + tree[2 * pos + 1]
            pos >>= 1

    @property
    def total(self) -> float:
        return self._tree[1]

    def words_used(self) -> int:
        return 2 * self._cap + 2 * len(self._slots)


class _ExactState:
    """Explicit vector plus exact moment for the sparse regime.

    Integer accumulators for p in {0, 1, 2}; a summation tree of |v_i|^p
    terms for fractional p.
    """

    def __init__(self, n: int, p: float):
        self.n = n
        self.p = p
        self.entries: dict[int, int] = {}
        self._int_path = p in (0.0, 1.0, 2.0)
        self._acc: int = 0
        self._tree = None if self._int_path else _SummationTree()

    def apply(self, index: int, delta: int) -> None:
        entries = self.entries
        old = entries.get(index, 0)
        new = old + delta
        if new == 0:
            entries.pop(index, None)
        else:
            entries[index] = new
        p = self.p
        if self._int_path:
            if p == 0:
                self._acc += (new != 0) - (old != 0)
            elif p == 1:
                self._acc += abs(new) - abs(old)
            else:
                self._acc += new * new - old * old
        else:
            self._tree.set_term(index, abs(new) ** p if new else 0.0)

    @property
    def moment(self):
        return self._acc if self._int_path else self._tree.total

    @property
    def density(self) -> int:
        return len(self.entries)

    def clear(self) -> None:
        self.entries = {}
        self._acc = 0
        if not self._int_path:
            self._tree = _SummationTree()

    def load(self, v: SparseVector) -> None:
        self.clear()
        for index, value in v.entries.items():
            self.apply(index, value)

    def words_used(self) -> int:
        words = 2 * len(self.entries) + 2
        if not self._int_path:
            words += self._tree.words_used()
        return words


class RobustMomentEstimator:
    """The full regime-switching estimator; one process() call per update."""

    def __init__(self, params: EstimatorParams):
        if params.p > 2:
            raise UnsupportedMomentError(
                "no oblivious estimator in scope for p > 2; parameter formulas "
                "remain available via EstimatorParams"
            )
        self.params = params
        seed = params.seed
        self.count = 0
        self.regime = SPARSE
        self._state = _ExactState(params.n, params.p)
        self.k_approx: float = 0.0
        self.m_approx: float = 0.0
        self.sparse_sketch = RecoverySketch(
            params.k_recovery, params.n, derive_seed(seed, "recovery")
        )
        self.density_wrapper = build_wrapper(
            params.density_wrapper_params(), self._f0_factory, derive_seed(seed, "density")
        )
        self.approx_wrapper = build_wrapper(
            params.approx_wrapper_params(), self._approx_factory, derive_seed(seed, "approx")
        )

    def _f0_factory(self, alpha: float, copies: int, seed: int) -> F0Sketch:
        p = self.params
        return F0Sketch(alpha, p.n, p.m, seed, copies=copies, size_scale=p.sketch_scale)

    def _approx_factory(self, alpha: float, copies: int, seed: int):
        p = self.params
        if p.p == 0:
            return F0Sketch(alpha, p.n, p.m, seed, copies=copies, size_scale=p.sketch_scale)
        if p.p < 2:
            return StableSketch(
                p.p, alpha, p.n, p.m, seed,
                copies=copies, rows=p.stable_rows, size_scale=p.sketch_scale,
            )
        return F2Sketch(alpha, p.n, p.m, seed, copies=copies, size_scale=p.sketch_scale)

    def process(self, u: Update):
        """Advance one update and return this step's moment estimate.

        Raises RecoveryError when a dense-to-sparse reconstruction fails
        (the O(n^-3) failure event) and QueryBudgetError on budget
        arithmetic bugs; both are fatal to the run.
        """
        params = self.params
        if self.count >= params.m:
            raise ConfigError("stream length bound m exceeded")
        u.validate(params.n, params.c)
        self.count += 1
        index, delta = u.index, u.delta
        self.sparse_sketch.update(index, delta)
        self.density_wrapper.update(index, delta)
        self.approx_wrapper.update(index, delta)
        if self.count % params.density_stride == 0:
            self.density_wrapper.schedule_query()
        if self.count % params.interval == 0:
            self.approx_wrapper.schedule_query()
        four_t = 4 * params.threshold
        if self.regime == SPARSE:
            self._state.apply(index, delta)
            out = self._state.moment
            if self._state.density >= four_t:
                self.regime = DENSE
                self._state.clear()
        else:
            self.m_approx = self.approx_wrapper.current_value()
            out = self.m_approx
            self.k_approx = self.density_wrapper.current_value()
            if self.k_approx <= 2 * params.threshold:
                recovered = self.sparse_sketch.recover()
                self._state.load(recovered)
                self.regime = SPARSE
        return out

    @property
    def vector(self) -> SparseVector:
        """Sparse-regime view of the maintained vector (stale when dense)."""
        return SparseVector(self.params.n, dict(self._state.entries))

    def words_used(self) -> int:
        return (
            self._state.words_used()
            + self.sparse_sketch.words_used()
            + self.density_wrapper.words_used()
            + self.approx_wrapper.words_used()
            + 6
        )


def make_robust_estimator(
    cfg: StreamConfig, threshold: int | str = AUTO, **knobs
) -> RobustMomentEstimator:
    """Estimator from a stream config; threshold 'auto' balances the regimes."""
    return RobustMomentEstimator(EstimatorParams.from_config(cfg, threshold, **knobs))
