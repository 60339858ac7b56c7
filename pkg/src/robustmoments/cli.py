"""Command-line driver for games and scaling sweeps.

Configuration may come from a JSON file (--config) with the same keys as
the flags; explicit flags win.  Unknown config keys are rejected.  The
default output directory is $ROBUSTMOMENTS_OUT or ./results.  Exit status
2 signals a bad configuration; fatal per-run algorithm errors are recorded
in summary.csv and do not fail the process.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .core import ConfigError
from .driver import (
    ADVERSARIES,
    ALGORITHMS,
    ExperimentSpec,
    parse_length,
    run_batch,
    run_sweep,
    write_summary,
)
from .robust import AUTO

_SPEC_KEYS = {
    "p", "n", "m", "alpha", "delta", "algorithm", "adversary", "threshold",
    "c", "seed", "runs", "c_k", "k_scale", "k_scale_density", "sketch_scale",
    "stable_rows", "stream_file", "workers",
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with spec keys; flags override it")
    parser.add_argument("--p", type=float, help="moment exponent")
    parser.add_argument("--n", type=int, help="universe size")
    parser.add_argument("--alpha", type=float, help="approximation parameter")
    parser.add_argument("--delta", type=float, help="failure probability")
    parser.add_argument("--algorithm", choices=ALGORITHMS)
    parser.add_argument("--adversary", choices=ADVERSARIES)
    parser.add_argument("--T", dest="threshold", help="density threshold or 'auto'")
    parser.add_argument("--auto-T", action="store_true", help="force threshold=auto")
    parser.add_argument("--C", dest="c", type=int, help="update magnitude bound")
    parser.add_argument("--seed", type=int, help="global seed")
    parser.add_argument("--runs", type=int, help="repetitions")
    parser.add_argument("--c-k", dest="c_k", type=float, help="copy-count constant")
    parser.add_argument("--k-scale", dest="k_scale", type=float,
                        help="scale on wrapper copy counts")
    parser.add_argument("--k-scale-density", dest="k_scale_density", type=float,
                        help="copy-count scale for the distinct-count wrapper")
    parser.add_argument("--sketch-scale", dest="sketch_scale", type=float,
                        help="scale on per-copy sketch sizes")
    parser.add_argument("--stable-rows", dest="stable_rows", type=int,
                        help="projection count override for p-stable copies")
    parser.add_argument("--stream-file", dest="stream_file",
                        help="replay updates from this file")
    parser.add_argument("--workers", type=int, help="parallel run slots")
    parser.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robustmoments",
        description="Run adversary-vs-algorithm moment estimation games.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="play one spec for --runs games")
    _add_common(run_p)
    run_p.add_argument("--m", help="stream length bound (accepts 10^k)")
    sweep_p = sub.add_parser("sweep", help="scaling sweep over stream lengths")
    _add_common(sweep_p)
    sweep_p.add_argument("--m", help="comma-separated stream lengths (accepts 10^k)")
    return parser


def _load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(data) - _SPEC_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def _spec_from_args(args: argparse.Namespace, m: int) -> ExperimentSpec:
    values: dict = {}
    if args.config:
        values.update(_load_config(args.config))
    for key in _SPEC_KEYS - {"m"}:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if getattr(args, "auto_T", False):
        values["threshold"] = AUTO
    if "threshold" in values and values["threshold"] != AUTO:
        values["threshold"] = int(values["threshold"])
    values["m"] = m
    missing = {"p", "n", "alpha", "delta"} - set(values)
    if missing:
        raise ConfigError(f"missing required settings: {sorted(missing)}")
    return ExperimentSpec(**values)


def _outdir(args: argparse.Namespace) -> str:
    if args.out:
        return args.out
    return os.environ.get("ROBUSTMOMENTS_OUT", "results")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            if args.m is None and not args.config:
                raise ConfigError("missing required settings: ['m']")
            m = parse_length(args.m) if args.m is not None else None
            if m is None:
                m = int(_load_config(args.config).get("m", 0)) or None
            if m is None:
                raise ConfigError("missing required settings: ['m']")
            spec = _spec_from_args(args, m)
            outdir = _outdir(args)
            os.makedirs(outdir, exist_ok=True)
            summaries = run_batch(spec, outdir=outdir)
            write_summary(os.path.join(outdir, "summary.csv"), summaries)
            good = sum(s.all_correct for s in summaries)
            print(f"{len(summaries)} runs, all_correct in {good}/{len(summaries)}")
            return 0
        if args.m is None:
            raise ConfigError("sweep needs --m with a comma-separated list")
        m_values = [parse_length(tok) for tok in args.m.split(",") if tok]
        spec = _spec_from_args(args, m_values[0])
        outdir = _outdir(args)
        points, slope = run_sweep(spec, m_values, outdir=outdir)
        for pt in points:
            print(f"m={pt.m} T={pt.threshold} max_words={pt.max_words}")
        print(f"loglog_slope={slope:.4f}" if slope == slope else "loglog_slope=nan")
        return 0
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
