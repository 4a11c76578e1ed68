"""Command-line front end: corrupt / validate / run / report.

Exit codes: 0 success, 1 runtime failure, 2 usage error. The
``DENOISE_BENCH_LOG`` environment variable selects the log level
(DEBUG/INFO/WARNING/ERROR).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import shlex
import sys
from pathlib import Path

import yaml

from .core import DatasetManifest, list_corpus, save_image
from .harness import (MethodFailure, RunResult, emit_csv, emit_summary, load_manifest,
                      parse_csv, run_benchmark, save_manifest)
from .noise import corrupt_dataset, parse_noise_expr
from .plugin import DenoiserDescriptor, validate_plugin

log = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="denoise-bench",
        description="Reproducible benchmarking harness for image denoisers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    corrupt = sub.add_parser("corrupt", help="materialize a noisy corpus from clean images")
    corrupt.add_argument("--in", dest="input_dir", required=True, help="clean corpus directory")
    corrupt.add_argument("--out", dest="output_dir", required=True, help="destination directory")
    corrupt.add_argument("--noise", required=True,
                         help="noise expression, e.g. gaussian:sigma=50 or "
                              "mixture:sigma=50,fraction=0.2 or 'gaussian:sigma=50 | sp:fraction=0.2'")
    corrupt.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    corrupt.add_argument("--jobs", type=int, default=1, help="worker count (output is identical for any N)")

    validate = sub.add_parser("validate", help="check an external plugin against Protocol v1")
    validate.add_argument("--plugin", required=True, help="plugin command line (quoted)")
    validate.add_argument("--timeout", type=float, default=60.0, help="seconds per invocation")

    run = sub.add_parser("run", help="execute a benchmark manifest")
    run.add_argument("--manifest", required=True, help="YAML run manifest")
    run.add_argument("--dry-run", action="store_true", help="print the resolved plan and exit")
    run.add_argument("--jobs", type=int, default=1, help="worker count for corruption and scoring")

    report = sub.add_parser("report", help="reprint summary tables from a stored CSV")
    report.add_argument("--csv", required=True, help="CSV emitted by 'run'")
    report.add_argument("--rank", action="store_true", help="include per-dataset rankings")
    report.add_argument("--tau", action="store_true", help="include the Kendall tau matrix")
    report.add_argument("--percentiles", action="store_true", help="include PSNR percentile rows")
    return parser


def cmd_corrupt(args) -> int:
    try:
        spec = parse_noise_expr(args.noise, default_seed=args.seed)
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    manifest = DatasetManifest(name="corrupt", kind="synthetic",
                               clean_dir=args.input_dir, noise=spec)
    suffix_by_id = {image_id: path.suffix for image_id, path in list_corpus(args.input_dir)}
    samples = corrupt_dataset(manifest, jobs=args.jobs)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for sample in samples:
        save_image(sample.noisy, out_dir / f"{sample.image_id}{suffix_by_id[sample.image_id]}")
    log.info("corrupted %d images into %s", len(samples), out_dir)
    return 0


def cmd_validate(args) -> int:
    descriptor = DenoiserDescriptor(
        name=Path(shlex.split(args.plugin)[0]).name, kind="external",
        command=tuple(shlex.split(args.plugin)), timeout=args.timeout,
    )
    report = validate_plugin(descriptor)
    print(report.render())
    return 0 if report.ok else 1


def _print_plan(manifest) -> None:
    print("resolved plan (dry run):")
    print(f"  master_seed: {manifest.master_seed}")
    print(f"  metrics: {', '.join(manifest.metrics)}")
    print(f"  timing: {manifest.timing} (repeats: {manifest.timing_repeats})")
    print(f"  output_dir: {manifest.output_dir}")
    for d in manifest.datasets:
        size = len(list_corpus(d.clean_dir))
        used = min(size, d.test_count) if d.test_count else size
        noise = f" noise={d.noise.to_dict()}" if d.noise else ""
        print(f"  dataset {d.name}: kind={d.kind} images={used}/{size}{noise}")
    for m in manifest.methods:
        if m.kind == "builtin":
            print(f"  method {m.name}: builtin {m.builtin_id} {m.parameters or ''}")
        else:
            print(f"  method {m.name}: external {' '.join(m.command)} "
                  f"(timeout {m.timeout}s, batch={m.batch})")


def cmd_run(args) -> int:
    manifest = load_manifest(args.manifest)
    if args.dry_run:
        _print_plan(manifest)
        return 0
    if not any(m.kind == "builtin" and m.builtin_id == "identity" for m in manifest.methods):
        log.warning("no identity baseline in the manifest; comparative tables "
                    "read best with a 'no denoising' row")

    # Externals are validated up front; failing ones are recorded and excluded
    # so one broken plugin cannot abort the comparative study.
    validation_failures: list[MethodFailure] = []
    usable = []
    for desc in manifest.methods:
        if desc.kind == "external":
            report = validate_plugin(desc)
            if not report.ok:
                bad = "; ".join(f"{c.name}: {c.detail}" for c in report.checks if not c.passed)
                log.warning("plugin %s failed validation: %s", desc.name, bad)
                validation_failures.append(
                    MethodFailure(desc.name, "<validation>", f"plugin validation failed: {bad}"))
                continue
        usable.append(desc)

    if usable:
        result = run_benchmark(dataclasses.replace(manifest, methods=tuple(usable)), jobs=args.jobs)
    else:
        manifest.output_dir.mkdir(parents=True, exist_ok=True)
        result = RunResult((), ())
    result = dataclasses.replace(result, failures=tuple(validation_failures) + result.failures)
    failures = result.failures

    out = manifest.output_dir
    emit_csv(result.records, out / "results.csv")
    save_manifest(manifest, out / "manifest.snapshot.yaml")
    (out / "run.log").write_text(result.render_log(), encoding="utf-8")
    if failures:
        with open(out / "failures.csv", "w", encoding="utf-8") as fh:
            fh.write("method,dataset,message\n")
            for f in failures:
                fh.write(f"{f.method},{f.dataset},{f.message.replace(chr(10), ' ')!r}\n")
        for f in failures:
            print(f"FAILED {f.method} on {f.dataset}: {f.message}", file=sys.stderr)
    if result.records:
        summary = emit_summary(result.records)
        text = summary.render(show_rank=True, show_tau=True, show_percentiles=True)
        print(text)
        (out / "summary.txt").write_text(text + "\n", encoding="utf-8")
        if result.timings:
            print("\n== Median wall time per method (s) ==")
            for name, seconds in result.timings.items():
                print(f"{name}: {seconds:.6g}")
    print(f"results: {out / 'results.csv'} ({len(result.records)} records, "
          f"{len(failures)} failures)")
    return 0 if not failures else 1


def cmd_report(args) -> int:
    records = parse_csv(args.csv)
    if not records:
        print("(no records in CSV)")
        return 0
    summary = emit_summary(records)
    print(summary.render(show_rank=args.rank, show_tau=args.tau,
                         show_percentiles=args.percentiles))
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("DENOISE_BENCH_LOG", "WARNING").upper())
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = {
        "corrupt": cmd_corrupt,
        "validate": cmd_validate,
        "run": cmd_run,
        "report": cmd_report,
    }[args.command]
    try:
        return handler(args)
    except (OSError, ValueError, RuntimeError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
