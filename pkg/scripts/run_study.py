#!/usr/bin/env python3
"""End-to-end comparative study over the built-in methods.

Corrupts a clean corpus with the two synthetic regimes (AWGN sigma=50 and
the sigma=50 + 20% salt-and-pepper mixture), runs identity / median / BM3D
on identical noisy inputs, and prints the summary tables, per-regime
rankings, and the cross-regime Kendall tau matrix.

    python scripts/make_corpus.py --out /tmp/study/clean
    python scripts/run_study.py --corpus /tmp/study/clean --out /tmp/study/run

Add an external method with --plugin "node plugin-example/dist/cli.js --mode blur".
"""

import argparse
import shlex
from pathlib import Path

from denoise_bench.core import DatasetManifest
from denoise_bench.harness import RunManifest, emit_csv, emit_summary, run_benchmark, save_manifest
from denoise_bench.noise import NoiseSpec
from denoise_bench.plugin import DenoiserDescriptor


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", required=True, help="directory of clean images")
    parser.add_argument("--out", required=True, help="run output directory")
    parser.add_argument("--seed", type=int, default=20260809)
    parser.add_argument("--sigma", type=float, default=50.0)
    parser.add_argument("--fraction", type=float, default=0.2)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--timing-repeats", type=int, default=0,
                        help=">=3 adds the serialized 256x256 timing pass")
    parser.add_argument("--plugin", action="append", default=[],
                        help="external method command line (repeatable)")
    args = parser.parse_args()

    datasets = (
        DatasetManifest(name="gaussian", kind="synthetic", clean_dir=Path(args.corpus),
                        noise=NoiseSpec("gaussian", sigma=args.sigma, master_seed=args.seed)),
        DatasetManifest(name="mixture", kind="synthetic", clean_dir=Path(args.corpus),
                        noise=NoiseSpec("mixture", sigma=args.sigma, fraction=args.fraction,
                                        master_seed=args.seed)),
    )
    methods = [
        DenoiserDescriptor(name="none", kind="builtin", builtin_id="identity"),
        DenoiserDescriptor(name="median", kind="builtin", builtin_id="median",
                           parameters={"radius": 1}),
        DenoiserDescriptor(name="bm3d", kind="builtin", builtin_id="bm3d",
                           parameters={"sigma": args.sigma}),
    ]
    for k, command in enumerate(args.plugin):
        methods.append(DenoiserDescriptor(
            name=f"plugin{k}" if len(args.plugin) > 1 else "plugin",
            kind="external", command=tuple(shlex.split(command)), timeout=600.0))

    manifest = RunManifest(datasets=datasets, methods=tuple(methods),
                           master_seed=args.seed, output_dir=Path(args.out),
                           timing_repeats=args.timing_repeats)
    manifest.output_dir.mkdir(parents=True, exist_ok=True)
    save_manifest(manifest, manifest.output_dir / "manifest.yaml")

    result = run_benchmark(manifest, jobs=args.jobs)
    emit_csv(result.records, manifest.output_dir / "results.csv")
    summary = emit_summary(result.records)
    print(summary.render(show_percentiles=True))
    if result.timings:
        print("\n== Median wall time per method (s) ==")
        for name, seconds in result.timings.items():
            print(f"{name}: {seconds:.6g}")
    for failure in result.failures:
        print(f"FAILED {failure.method} on {failure.dataset}: {failure.message}")
    print(f"\nresults: {manifest.output_dir / 'results.csv'}")


if __name__ == "__main__":
    main()
