#!/usr/bin/env python3
"""Measure the space scaling trend of the robust estimator.

Runs the density oscillator at several stream lengths with auto threshold
and a fixed reduced copy-count scale, then reports the log-log slope of
max_words against m (1/3 expected for p in [0,1], p/(2p+1) above).

Usage: python scripts/scaling_sweep.py [--p 2] [--m 10^4,10^5,10^6] [--out DIR]
"""

import argparse
import sys

from robustmoments import auto_threshold
from robustmoments.driver import ExperimentSpec, parse_length, run_sweep
from robustmoments.robust import EstimatorParams


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--p", type=float, default=2.0)
    parser.add_argument("--m", default="10^4,10^5,10^6")
    parser.add_argument("--n", type=int, default=65536)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    m_values = [parse_length(tok) for tok in args.m.split(",") if tok]
    m_ref = m_values[len(m_values) // 2]
    probe = EstimatorParams(
        p=args.p, n=args.n, m=m_ref, threshold=auto_threshold(args.p, m_ref),
        alpha=0.5, delta=0.2,
    )
    spec = ExperimentSpec(
        p=args.p, n=args.n, m=m_ref, alpha=0.5, delta=0.2,
        adversary="oscillator", threshold="auto", seed=args.seed, runs=1,
        k_scale=40 / probe.approx_wrapper_params().k_formula,
        k_scale_density=30 / probe.density_wrapper_params().k_formula,
        sketch_scale=0.2,
        stable_rows=65 if 0 < args.p < 2 else None,
    )
    points, slope = run_sweep(spec, m_values, outdir=args.out)
    for pt in points:
        print(f"m={pt.m:>9d} T={pt.threshold:>5d} max_words={pt.max_words}")
    print(f"loglog slope: {slope:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
