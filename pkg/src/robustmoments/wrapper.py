"""Bounded-query adversarially robust estimation via DP-protected medians.

Runs k independent oblivious estimator copies over the same stream and
answers each of at most q adaptively timed queries with a differentially
private median of the copies' grid-rounded estimates.  Privacy is applied
to the copies' random strings, not the data: the adversary's view through
q queries stays (eps, delta')-DP with respect to that randomness, which is
what stops it from steering the stream against the copies.

Parameter cascade (exact forms, validated arithmetically in tests):

    eps    = 1/100
    delta' = eps * delta / (10 q)
    eps'   = eps / sqrt(8 q ln(1/delta'))
    k      = ceil(c_k * (1/eps') * ln(2 q log2(2 tau) / (alpha delta)))

scaled by k_scale when desk-scale experiments cannot afford the full copy
count.  The factory consumed here must produce (1 +/- alpha/3)
approximators correct with probability 9/10; rounding up onto the
(1 + alpha/3) grid then costs at most another (1 + alpha/3) factor, and
(1 + alpha/3)^2 < 1 + alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError
from .dpmedian import MedianParams, ValueGrid, private_median
from .hashing import derive_seed


class QueryBudgetError(RuntimeError):
    """More than q queries issued to a q-query wrapper."""


@dataclass(frozen=True)
class WrapperParams:
    """Derived parameters of the bounded-query wrapper."""

    q: int
    delta: float
    tau: float
    alpha: float
    c_k: float = 1.0
    k_scale: float = 1.0
    epsilon: float = field(init=False, default=0.01)
    delta_prime: float = field(init=False, default=0.0)
    eps_prime: float = field(init=False, default=0.0)
    k_formula: int = field(init=False, default=0)
    k: int = field(init=False, default=0)

    def __post_init__(self) -> None:
        if self.q < 1:
            raise ConfigError("query budget q must be >= 1")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must be in (0, 1)")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must be in (0, 1)")
        if self.tau < 1:
            raise ConfigError("tau must be >= 1")
        if self.c_k <= 0 or self.k_scale <= 0:
            raise ConfigError("c_k and k_scale must be positive")
        delta_prime = self.epsilon * self.delta / (10.0 * self.q)
        eps_prime = self.epsilon / math.sqrt(8.0 * self.q * math.log(1.0 / delta_prime))
        k_formula = math.ceil(
            self.c_k
            / eps_prime
            * math.log(2.0 * self.q * math.log2(2.0 * self.tau) / (self.alpha * self.delta))
        )
        object.__setattr__(self, "delta_prime", delta_prime)
        object.__setattr__(self, "eps_prime", eps_prime)
        object.__setattr__(self, "k_formula", k_formula)
        object.__setattr__(self, "k", max(1, round(k_formula * self.k_scale)))

    @property
    def median_delta(self) -> float:
        return self.delta / (2.0 * self.q)

    def median_epsilon(self, grid_size: int) -> float:
        """Privacy parameter handed to each private-median call.

        The algorithm's value is eps'; when k_scale shrinks the copy count
        below what the full formula provides, eps' alone would drown the
        median in noise, so the budget is floored at the smallest epsilon
        whose exponential-mechanism tail keeps the rank error within k/10
        with probability 1 - delta/(2q).  At full-scale constants the floor
        is below eps' and the paper's setting is used unchanged.
        """
        floor = 20.0 / self.k * math.log(grid_size / self.median_delta)
        return max(self.eps_prime, floor)


class RobustWrapper:
    """q-query adversarially robust wrapper around an estimator bank."""

    def __init__(self, params: WrapperParams, bank, rng: np.random.Generator):
        self.params = params
        self.bank = bank
        self.grid = ValueGrid(params.alpha, params.tau)
        self.queries_used = 0
        self._rng = rng
        self._pending = False
        self._value = 0.0
        self._median_params = MedianParams(
            epsilon=params.median_epsilon(len(self.grid)),
            delta=params.median_delta,
        )

    def update(self, index: int, delta: int) -> None:
        self.bank.update(index, delta)

    def schedule_query(self) -> None:
        """Spend one query of the budget; the answer is produced on read.

        Deferring the median until current_value() keeps the observable
        behavior (budget spent per schedule, value reflects the bank no
        earlier than the scheduled step) while skipping the computation
        entirely for values nothing ever reads.  Raises QueryBudgetError
        beyond q queries; exceeding the budget is always a caller bug,
        because callers size q to their schedule.
        """
        if self.queries_used >= self.params.q:
            raise QueryBudgetError(f"query budget {self.params.q} exhausted")
        self.queries_used += 1
        self._pending = True

    def current_value(self, rng: np.random.Generator | None = None) -> float:
        """Latest scheduled answer (computed now if still pending)."""
        if self._pending:
            self._pending = False
            estimates = self.bank.estimates()
            rounded = self.grid.round_up_array(estimates)
            self._value = private_median(
                rounded, self.grid, self._median_params,
                rng if rng is not None else self._rng,
            )
        return self._value

    def query(self, rng: np.random.Generator | None = None) -> float:
        """DP median of the copies' grid-rounded estimates (one budget unit)."""
        self.schedule_query()
        return self.current_value(rng)

    def words_used(self) -> int:
        return self.bank.words_used() + self.grid.words_used() + 4


def build_wrapper(params: WrapperParams, estimator_factory, seed: int) -> RobustWrapper:
    """Wrapper from precomputed params; factory(alpha/3, copies, seed).

    The produced copies target a (1 +/- alpha/3)-approximation, the
    accuracy class the median argument consumes.
    """
    bank = estimator_factory(params.alpha / 3.0, params.k, derive_seed(seed, "copies"))
    rng = np.random.default_rng(derive_seed(seed, "dp-median"))
    return RobustWrapper(params, bank, rng)


def make_wrapper(
    q: int,
    delta: float,
    tau: float,
    alpha: float,
    estimator_factory,
    seed: int,
    c_k: float = 1.0,
    k_scale: float = 1.0,
) -> RobustWrapper:
    params = WrapperParams(q=q, delta=delta, tau=tau, alpha=alpha, c_k=c_k, k_scale=k_scale)
    return build_wrapper(params, estimator_factory, seed)
