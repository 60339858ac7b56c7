"""The adversary-vs-algorithm game, with an exact oracle keeping score.

One game: in each round the adversary picks an update after seeing every
previous update and output, the algorithm answers with a moment estimate,
and an exact tracker (sharing no state with the algorithm under test)
records the true moment and whether the answer was a (1 +/- alpha)
approximation.  Transcripts are fully determined by the (algorithm seed,
adversary seed) pair.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigError,
    MomentTracker,
    RangeError,
    StreamConfig,
    Update,
    is_approx,
    read_stream,
    words_for_vector,
)
from .recovery import RecoveryError
from .wrapper import QueryBudgetError

CSV_HEADER = "step,index,delta,output,true_value,correct,regime,words_used"

STATUS_OK = "ok"
STATUS_PROTOCOL = "protocol-violation"


class GameTranscript:
    """Columnar record of one game plus summary fields."""

    def __init__(self, cfg: StreamConfig):
        self.cfg = cfg
        self.indices: list[int] = []
        self.deltas: list[int] = []
        self.outputs: list[float] = []
        self.true_values: list[float] = []
        self.correct: list[bool] = []
        self.regimes: list[str] = []
        self.words: list[int] = []
        self.status: str = STATUS_OK
        self.wall_time: float = 0.0

    def append(self, index, delta, output, truth, ok, regime, words) -> None:
        self.indices.append(index)
        self.deltas.append(delta)
        self.outputs.append(output)
        self.true_values.append(truth)
        self.correct.append(ok)
        self.regimes.append(regime)
        self.words.append(words)

    @property
    def steps(self) -> int:
        return len(self.indices)

    @property
    def all_correct(self) -> bool:
        return self.status == STATUS_OK and all(self.correct)

    @property
    def first_failure_step(self) -> int | None:
        for j, ok in enumerate(self.correct, 1):
            if not ok:
                return j
        if self.status != STATUS_OK:
            return self.steps + 1
        return None

    @property
    def max_words(self) -> int:
        return max(self.words) if self.words else 0

    def regime_transitions(self) -> int:
        flips = 0
        for prev, cur in zip(self.regimes, self.regimes[1:]):
            flips += prev != cur
        return flips

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for j in range(self.steps):
                fh.write(
                    f"{j + 1},{self.indices[j]},{self.deltas[j]},"
                    f"{self.outputs[j]!r},{self.true_values[j]!r},"
                    f"{int(self.correct[j])},{self.regimes[j]},{self.words[j]}\n"
                )


class Adversary:
    """Strategy interface: produce the next update, or None to stop early.

    `history` is the live transcript; updates and outputs of earlier
    rounds are readable through it and must not be mutated.
    """

    def next_update(self, history: GameTranscript) -> Update | None:
        raise NotImplementedError


class RandomOblivious(Adversary):
    """Uniform random coordinate with a fair +/-1 delta; ignores outputs."""

    def __init__(self, n: int, seed: int = 0):
        self.n = n
        self._rng = np.random.default_rng(seed)
        self._block: list[Update] = []

    def _refill(self) -> None:
        idx = self._rng.integers(1, self.n + 1, size=2048)
        sign = 1 - 2 * self._rng.integers(0, 2, size=2048)
        self._block = [Update(int(i), int(s)) for i, s in zip(idx, sign)]
        self._block.reverse()

    def next_update(self, history: GameTranscript) -> Update:
        if not self._block:
            self._refill()
        return self._block.pop()


class FlipAttack(Adversary):
    """Insertion-deletion pairs on one coordinate: the moment flips 0,1,0,1,..."""

    def __init__(self, index: int = 1):
        self.index = index
        self._phase = 0

    def next_update(self, history: GameTranscript) -> Update:
        delta = 1 if self._phase == 0 else -1
        self._phase ^= 1
        return Update(self.index, delta)


class DensityOscillator(Adversary):
    """Drives the nonzero count across [1.6T, 4T+1] to force regime churn.

    Inserts the contiguous prefix 1..4T+1 one coordinate at a time, then
    deletes back below 1.6T, and repeats; its own density is always the
    prefix length.
    """

    def __init__(self, threshold: int, n: int):
        self.high = 4 * threshold + 1
        self.low = math.floor(1.6 * threshold)
        if n < self.high:
            raise ConfigError(f"need n >= {self.high} for the oscillator")
        self._live = 0
        self._ascending = True

    def next_update(self, history: GameTranscript) -> Update:
        if self._ascending:
            self._live += 1
            u = Update(self._live, 1)
            if self._live >= self.high:
                self._ascending = False
        else:
            u = Update(self._live, -1)
            self._live -= 1
            if self._live <= self.low:
                self._ascending = True
        return u


class SketchAttack(Adversary):
    """Adaptive cancellation search against a linear sketch's outputs.

    After seeding a base block to populate the sketch, probes fresh
    coordinates one at a time: if the reported estimate rises by less than
    `keep_fraction` of the true second-moment increase, the coordinate is
    kept (it interferes destructively with the sketch's view); otherwise
    it is deleted again.  Kept coordinates pile up mass the sketch cannot
    see, so the report drifts below the truth.
    """

    def __init__(self, n: int, base_size: int = 64, keep_fraction: float = 0.5):
        self.n = n
        self.base_size = min(base_size, n // 2)
        self.keep_fraction = keep_fraction
        self._next_coord = 1
        self._pending: int | None = None
        self._pending_drop = False
        self._before: float = 0.0
        self._f2 = 0
        self._freq: dict[int, int] = {}

    def _apply_own(self, u: Update) -> None:
        old = self._freq.get(u.index, 0)
        new = old + u.delta
        if new == 0:
            self._freq.pop(u.index, None)
        else:
            self._freq[u.index] = new
        self._f2 += new * new - old * old

    def next_update(self, history: GameTranscript) -> Update | None:
        if self._pending_drop:
            self._pending_drop = False
            u = Update(self._pending, -1)
            self._pending = None
            self._apply_own(u)
            return u
        if self._pending is not None:
            reported_gain = history.outputs[-1] - self._before
            truth_gain = 2 * self._freq[self._pending] - 1
            if reported_gain >= self.keep_fraction * truth_gain:
                self._pending_drop = True
                return self.next_update(history)
            self._pending = None
        if self._next_coord > self.n:
            return None
        coord = self._next_coord
        self._next_coord += 1
        self._before = history.outputs[-1] if history.outputs else 0.0
        u = Update(coord, 1)
        self._apply_own(u)
        if coord > self.base_size:
            self._pending = coord
        return u


class StreamReplay(Adversary):
    """Plays back a fixed update sequence (e.g. from a stream file)."""

    def __init__(self, updates):
        self._it = iter(updates)

    @classmethod
    def from_file(cls, path) -> "StreamReplay":
        return cls(list(read_stream(path)))

    def next_update(self, history: GameTranscript) -> Update | None:
        return next(self._it, None)


class BareSketchAlgorithm:
    """Non-robust baseline: a single fixed-seed linear sketch, queried every step."""

    regime = "-"

    def __init__(self, estimator):
        self.estimator = estimator

    def process(self, u: Update) -> float:
        self.estimator.update(u.index, u.delta)
        return self.estimator.estimate()

    def words_used(self) -> int:
        return self.estimator.words_used()


class ExactOracleAlgorithm:
    """Reference player that maintains the vector explicitly (always correct)."""

    regime = "-"

    def __init__(self, n: int, p: float):
        self.tracker = MomentTracker(n, p)

    def process(self, u: Update) -> float:
        self.tracker.apply(u)
        return self.tracker.moment

    def words_used(self) -> int:
        return words_for_vector(self.tracker.vector) + 2


FATAL_ERRORS = (RecoveryError, QueryBudgetError)


def run_game(algorithm, adversary: Adversary, cfg: StreamConfig) -> GameTranscript:
    """Play out one full game of at most cfg.m rounds.

    The adversary is consulted before every round with the transcript so
    far; invalid updates truncate the game with a protocol-violation flag,
    and fatal algorithm errors (failed recovery, exhausted query budget)
    are recorded in the status rather than raised.
    """
    oracle = MomentTracker(cfg.n, cfg.p)
    transcript = GameTranscript(cfg)
    started = time.perf_counter()
    for _ in range(cfg.m):
        u = adversary.next_update(transcript)
        if u is None:
            break
        try:
            u.validate(cfg.n, cfg.c)
        except RangeError:
            transcript.status = STATUS_PROTOCOL
            break
        try:
            output = algorithm.process(u)
        except FATAL_ERRORS as exc:
            transcript.status = f"fatal:{type(exc).__name__}"
            break
        oracle.apply(u)
        truth = oracle.moment
        ok = is_approx(output, truth, cfg.alpha, slack=1e-9)
        transcript.append(
            u.index, u.delta, output, truth, ok,
            getattr(algorithm, "regime", "-"), algorithm.words_used(),
        )
    transcript.wall_time = time.perf_counter() - started
    return transcript


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a success proportion."""
    if trials == 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class RunSummary:
    """What survives of a game when the transcript is not kept."""

    steps: int
    all_correct: bool
    first_failure_step: int | None
    max_words: int
    wall_time: float
    status: str
    regime_transitions: int

    @classmethod
    def of(cls, t: GameTranscript) -> "RunSummary":
        return cls(
            steps=t.steps,
            all_correct=t.all_correct,
            first_failure_step=t.first_failure_step,
            max_words=t.max_words,
            wall_time=t.wall_time,
            status=t.status,
            regime_transitions=t.regime_transitions(),
        )
