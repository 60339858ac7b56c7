"""Batch experiment engine: specs, seeded runs, summaries, scaling sweeps.

A spec pins every knob; seeds for run r derive from (spec.seed, r), so a
batch is reproducible run by run regardless of worker scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .core import ConfigError, StreamConfig, auto_threshold
from .estimators import make_estimator
from .harness import (
    BareSketchAlgorithm,
    DensityOscillator,
    ExactOracleAlgorithm,
    FlipAttack,
    GameTranscript,
    RandomOblivious,
    RunSummary,
    SketchAttack,
    StreamReplay,
    run_game,
)
from .hashing import derive_seed
from .robust import AUTO, EstimatorParams, RobustMomentEstimator

ALGORITHMS = ("robust", "bare-sketch", "exact-oracle")
ADVERSARIES = ("random", "flip", "oscillator", "sketch", "replay")

SUMMARY_HEADER = "run,all_correct,first_failure,max_words,wall_time,status"
SWEEP_HEADER = "m,threshold,max_words,all_correct_runs,runs"


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment configuration; validated before any run starts."""

    p: float
    n: int
    m: int
    alpha: float
    delta: float
    algorithm: str = "robust"
    adversary: str = "random"
    threshold: int | str = AUTO
    c: int = 1
    seed: int = 1
    runs: int = 1
    c_k: float = 1.0
    k_scale: float = 1.0
    k_scale_density: float | None = None
    sketch_scale: float = 1.0
    stable_rows: int | None = None
    stream_file: str | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        StreamConfig(self.n, self.m, self.p, self.alpha, self.delta, self.c, self.seed)
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.adversary not in ADVERSARIES:
            raise ConfigError(f"unknown adversary {self.adversary!r}")
        if self.adversary == "replay" and not self.stream_file:
            raise ConfigError("replay adversary needs --stream-file")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.threshold != AUTO and int(self.threshold) < 10:
            raise ConfigError("threshold must be 'auto' or an integer >= 10")

    def resolved_threshold(self) -> int:
        if self.threshold == AUTO:
            return auto_threshold(self.p, self.m)
        return int(self.threshold)

    def stream_config(self, seed: int) -> StreamConfig:
        return StreamConfig(self.n, self.m, self.p, self.alpha, self.delta, self.c, seed)


def build_algorithm(spec: ExperimentSpec, seed: int):
    if spec.algorithm == "robust":
        params = EstimatorParams(
            p=spec.p, n=spec.n, m=spec.m, threshold=spec.resolved_threshold(),
            alpha=spec.alpha, delta=spec.delta, c=spec.c, seed=seed,
            c_k=spec.c_k, k_scale=spec.k_scale, k_scale_density=spec.k_scale_density,
            sketch_scale=spec.sketch_scale, stable_rows=spec.stable_rows,
        )
        return RobustMomentEstimator(params)
    if spec.algorithm == "bare-sketch":
        return BareSketchAlgorithm(
            make_estimator(spec.p, spec.alpha, spec.n, spec.m, seed)
        )
    return ExactOracleAlgorithm(spec.n, spec.p)


def build_adversary(spec: ExperimentSpec, seed: int):
    if spec.adversary == "random":
        return RandomOblivious(spec.n, seed)
    if spec.adversary == "flip":
        return FlipAttack(1)
    if spec.adversary == "oscillator":
        return DensityOscillator(spec.resolved_threshold(), spec.n)
    if spec.adversary == "sketch":
        return SketchAttack(spec.n)
    return StreamReplay.from_file(spec.stream_file)


def play_run(spec: ExperimentSpec, run_index: int) -> GameTranscript:
    """One seeded game; the transcript is fully kept (memory scales with m)."""
    alg_seed = derive_seed(spec.seed, "algorithm", run_index)
    adv_seed = derive_seed(spec.seed, "adversary", run_index)
    algorithm = build_algorithm(spec, alg_seed)
    adversary = build_adversary(spec, adv_seed)
    return run_game(algorithm, adversary, spec.stream_config(alg_seed))


def _run_to_summary(args) -> RunSummary:
    spec, run_index, outdir = args
    transcript = play_run(spec, run_index)
    if outdir is not None:
        transcript.to_csv(os.path.join(outdir, f"run_{run_index:03d}.csv"))
    return RunSummary.of(transcript)


def run_batch(spec: ExperimentSpec, outdir: str | None = None) -> list[RunSummary]:
    """Execute spec.runs games; transcripts go to outdir when given.

    Runs are independent (separate algorithm and adversary instances), so
    they may execute in parallel worker processes; results are returned in
    run order either way.
    """
    if outdir is not None:
        os.makedirs(outdir, exist_ok=True)
    jobs = [(spec, r, outdir) for r in range(spec.runs)]
    if spec.workers > 1 and spec.runs > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            return list(pool.map(_run_to_summary, jobs))
    return [_run_to_summary(job) for job in jobs]


def write_summary(path, summaries: list[RunSummary]) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        for r, s in enumerate(summaries):
            first = "" if s.first_failure_step is None else s.first_failure_step
            fh.write(
                f"{r},{int(s.all_correct)},{first},{s.max_words},"
                f"{s.wall_time:.3f},{s.status}\n"
            )


@dataclass(frozen=True)
class SweepPoint:
    m: int
    threshold: int
    max_words: int
    all_correct_runs: int
    runs: int


def run_sweep(spec: ExperimentSpec, m_values: list[int], outdir: str | None = None):
    """Run the spec at each stream length; returns points and log-log slope.

    max_words per point is the maximum across the point's runs; the slope
    is the least-squares fit of log10(max_words) against log10(m).
    """
    points = []
    for m in m_values:
        point_spec = replace(spec, m=m)
        summaries = run_batch(point_spec)
        points.append(
            SweepPoint(
                m=m,
                threshold=point_spec.resolved_threshold(),
                max_words=max(s.max_words for s in summaries),
                all_correct_runs=sum(s.all_correct for s in summaries),
                runs=len(summaries),
            )
        )
    slope = float("nan")
    if len(points) >= 2:
        xs = np.log10([pt.m for pt in points])
        ys = np.log10([pt.max_words for pt in points])
        slope = float(np.polyfit(xs, ys, 1)[0])
    if outdir is not None:
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "sweep.csv"), "w", encoding="ascii") as fh:
            fh.write(SWEEP_HEADER + "\n")
            for pt in points:
                fh.write(
                    f"{pt.m},{pt.threshold},{pt.max_words},"
                    f"{pt.all_correct_runs},{pt.runs}\n"
                )
            fh.write(f"# loglog_slope,{slope!r}\n")
    return points, slope


def parse_length(text: str) -> int:
    """Accept plain integers plus the 10^k shorthand used in sweep lists."""
    text = text.strip()
    if "^" in text:
        base, expo = text.split("^", 1)
        return int(base) ** int(expo)
    return int(text)
