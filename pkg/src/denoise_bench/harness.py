"""Benchmark orchestration: corruption -> denoising -> scoring -> reporting.

Noisy inputs are materialized to disk once per dataset and every method
consumes the identical files (fairness is asserted by hashing the input
directory before each method run). Failures are isolated per method so one
broken plugin cannot abort the comparative study.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .core import DatasetManifest, EvaluationRecord, Image, list_corpus, load_image, save_image
from .denoisers import make_builtin
from .metrics import AggregateStats, MethodRanking, aggregate, kendall_tau, psnr, rank_methods, ssim
from .noise import CorruptedSample, NoiseSpec, corrupt_dataset
from .plugin import DenoiserDescriptor, PluginError, run_external

log = logging.getLogger(__name__)

CSV_HEADER = ("method", "dataset", "image_id", "psnr_db", "ssim", "wall_time_s", "output_path")
METRIC_NAMES = ("psnr", "ssim")


@dataclass(frozen=True)
class RunManifest:
    """Everything that determines a run's primary outputs (modulo wall clock)."""

    datasets: tuple[DatasetManifest, ...]
    methods: tuple[DenoiserDescriptor, ...]
    metrics: tuple[str, ...] = ("psnr", "ssim")
    master_seed: int = 0
    output_dir: Path = Path("bench-out")
    timing: str = "batch"  # "batch" | "per_image": how externals are invoked
    timing_repeats: int = 0  # >= 3 enables the dedicated serialized timing pass

    def __post_init__(self):
        object.__setattr__(self, "datasets", tuple(self.datasets))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        if not self.datasets:
            raise ValueError("manifest needs at least one dataset")
        if not self.methods:
            raise ValueError("manifest needs at least one method")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ValueError(f"method names must be unique, got {names}")
        ds_names = [d.name for d in self.datasets]
        if len(set(ds_names)) != len(ds_names):
            raise ValueError(f"dataset names must be unique, got {ds_names}")
        if not self.metrics or any(m not in METRIC_NAMES for m in self.metrics):
            raise ValueError(f"metrics must be a non-empty subset of {METRIC_NAMES}")
        if self.timing not in ("batch", "per_image"):
            raise ValueError(f"timing must be 'batch' or 'per_image', got {self.timing!r}")
        if self.timing_repeats and self.timing_repeats < 3:
            raise ValueError("timing_repeats must be 0 (off) or >= 3")


@dataclass(frozen=True)
class MethodFailure:
    method: str
    dataset: str
    message: str


@dataclass(frozen=True)
class RunResult:
    records: tuple[EvaluationRecord, ...]
    failures: tuple[MethodFailure, ...]
    input_hashes: dict[str, str] = field(default_factory=dict)  # dataset -> sha256
    timings: dict[str, float] = field(default_factory=dict)  # method -> median seconds
    plugin_stderr: dict[tuple[str, str], str] = field(default_factory=dict)  # (method, dataset)

    @property
    def ok(self) -> bool:
        return not self.failures

    def render_log(self) -> str:
        """Human-readable run log: input hashes, plugin stderr, failures."""
        lines = []
        for dataset, digest in self.input_hashes.items():
            lines.append(f"input sha256 {dataset}: {digest}")
        for name, seconds in self.timings.items():
            lines.append(f"timing {name}: {seconds:.6g}s")
        for (method, dataset), text in self.plugin_stderr.items():
            lines.append(f"--- stderr of {method} on {dataset} ---")
            lines.append(text.rstrip("\n"))
        for f in self.failures:
            lines.append(f"FAILED {f.method} on {f.dataset}: {f.message}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Manifest file format (human-editable YAML; see README for the schema).

def _descriptor_from_dict(d: dict) -> DenoiserDescriptor:
    known = {"name", "builtin", "parameters", "command", "timeout", "batch"}
    extra = set(d) - known
    if extra:
        raise ValueError(f"unknown method keys: {sorted(extra)}")
    if "name" not in d:
        raise ValueError("every method needs a 'name'")
    if ("builtin" in d) == ("command" in d):
        raise ValueError(f"method {d['name']!r}: give exactly one of 'builtin' or 'command'")
    if "builtin" in d:
        return DenoiserDescriptor(
            name=d["name"], kind="builtin", builtin_id=d["builtin"],
            parameters=dict(d.get("parameters", {})),
            timeout=float(d.get("timeout", 600.0)),
        )
    command = d["command"]
    if isinstance(command, str):
        command = command.split()
    return DenoiserDescriptor(
        name=d["name"], kind="external", command=tuple(str(c) for c in command),
        timeout=float(d.get("timeout", 600.0)), batch=bool(d.get("batch", True)),
    )


def _dataset_from_dict(d: dict, base: Path, default_seed: int) -> DatasetManifest:
    known = {"name", "kind", "clean_dir", "noisy_dir", "noise", "test_count"}
    extra = set(d) - known
    if extra:
        raise ValueError(f"unknown dataset keys: {sorted(extra)}")
    for key in ("name", "kind", "clean_dir"):
        if key not in d:
            raise ValueError(f"every dataset needs {key!r}")
    noise = None
    if d.get("noise") is not None:
        noise = NoiseSpec.from_dict(d["noise"], default_seed=default_seed)
    return DatasetManifest(
        name=d["name"], kind=d["kind"],
        clean_dir=(base / d["clean_dir"]),
        noisy_dir=(base / d["noisy_dir"]) if d.get("noisy_dir") else None,
        noise=noise,
        test_count=d.get("test_count"),
    )


def load_manifest(path) -> RunManifest:
    """Read a YAML run manifest; relative paths resolve against its directory."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: manifest must be a mapping")
    known = {"datasets", "methods", "metrics", "master_seed", "output_dir", "timing", "timing_repeats"}
    extra = set(data) - known
    if extra:
        raise ValueError(f"{path}: unknown manifest keys: {sorted(extra)}")
    base = path.parent
    seed = int(data.get("master_seed", 0))
    return RunManifest(
        datasets=tuple(_dataset_from_dict(d, base, seed) for d in data.get("datasets", [])),
        methods=tuple(_descriptor_from_dict(m) for m in data.get("methods", [])),
        metrics=tuple(data.get("metrics", ("psnr", "ssim"))),
        master_seed=seed,
        output_dir=base / data.get("output_dir", "bench-out"),
        timing=data.get("timing", "batch"),
        timing_repeats=int(data.get("timing_repeats", 0)),
    )


def manifest_to_dict(manifest: RunManifest) -> dict:
    datasets = []
    for d in manifest.datasets:
        entry: dict = {"name": d.name, "kind": d.kind, "clean_dir": str(d.clean_dir)}
        if d.noisy_dir is not None:
            entry["noisy_dir"] = str(d.noisy_dir)
        if d.noise is not None:
            entry["noise"] = d.noise.to_dict()
        if d.test_count is not None:
            entry["test_count"] = d.test_count
        datasets.append(entry)
    methods = []
    for m in manifest.methods:
        if m.kind == "builtin":
            entry = {"name": m.name, "builtin": m.builtin_id}
            if m.parameters:
                entry["parameters"] = dict(m.parameters)
        else:
            entry = {"name": m.name, "command": list(m.command), "batch": m.batch}
        entry["timeout"] = m.timeout
        methods.append(entry)
    return {
        "master_seed": manifest.master_seed,
        "output_dir": str(manifest.output_dir),
        "metrics": list(manifest.metrics),
        "timing": manifest.timing,
        "timing_repeats": manifest.timing_repeats,
        "datasets": datasets,
        "methods": methods,
    }


def save_manifest(manifest: RunManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(manifest_to_dict(manifest), fh, sort_keys=False)


# ---------------------------------------------------------------------------
# Benchmark execution.

def _hash_dir(directory: Path) -> str:
    digest = hashlib.sha256()
    for p in sorted(directory.iterdir()):
        if p.is_file():
            digest.update(p.name.encode())
            digest.update(b"\0")
            digest.update(p.read_bytes())
    return digest.hexdigest()


def _fresh_dir(directory: Path) -> Path:
    # Reruns into the same output root must not inherit stale files.
    import shutil

    if directory.is_dir():
        shutil.rmtree(directory)
    directory.mkdir(parents=True)
    return directory


def _score(manifest: RunManifest, method: str, dataset: str, sample: CorruptedSample,
           output: Image, wall: float, output_path: str) -> EvaluationRecord:
    psnr_db = psnr(sample.clean, output) if "psnr" in manifest.metrics else math.nan
    ssim_val = ssim(sample.clean, output) if "ssim" in manifest.metrics else None
    return EvaluationRecord(
        method=method, dataset=dataset, image_id=sample.image_id,
        psnr_db=psnr_db, ssim=ssim_val, wall_time=wall, output_path=output_path,
    )


def _run_builtin(manifest: RunManifest, desc: DenoiserDescriptor, dataset: DatasetManifest,
                 samples: list[CorruptedSample], method_dir: Path, jobs: int):
    fn = make_builtin(desc.builtin_id, desc.parameters)

    def one(sample: CorruptedSample) -> EvaluationRecord:
        start = time.perf_counter()
        out = fn(sample.noisy)
        wall = time.perf_counter() - start
        rel = f"{desc.name}/{dataset.name}/{sample.image_id}.png"
        save_image(out, method_dir / f"{sample.image_id}.png")
        return _score(manifest, desc.name, dataset.name, sample, out, wall, rel)

    if jobs <= 1 or len(samples) <= 1:
        return [one(s) for s in samples]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, samples))


def _run_external_method(manifest: RunManifest, desc: DenoiserDescriptor,
                         dataset: DatasetManifest, samples: list[CorruptedSample],
                         noisy_dir: Path, method_dir: Path):
    runner = desc if manifest.timing == "batch" else replace(desc, batch=False)
    result = run_external(runner, noisy_dir, method_dir)
    if result.stderr.strip():
        log.info("plugin %s stderr:\n%s", desc.name, result.stderr.strip())
    records = []
    for sample in samples:
        out = load_image(method_dir / f"{sample.image_id}.png")
        rel = f"{desc.name}/{dataset.name}/{sample.image_id}.png"
        records.append(_score(manifest, desc.name, dataset.name, sample,
                              out, result.wall_times[sample.image_id], rel))
    return records, result.stderr


def run_benchmark(manifest: RunManifest, jobs: int = 1) -> RunResult:
    """Execute the full study described by a manifest.

    Per dataset: corrupt (or read) the corpus once, write the noisy images
    under ``output_dir/noisy/<dataset>/``, then run every method over those
    identical files, saving outputs under ``output_dir/<method>/<dataset>/``
    and scoring them against the clean side. Method failures are recorded
    and the run continues.
    """
    out_root = manifest.output_dir
    out_root.mkdir(parents=True, exist_ok=True)
    records: list[EvaluationRecord] = []
    failures: list[MethodFailure] = []
    input_hashes: dict[str, str] = {}
    plugin_stderr: dict[tuple[str, str], str] = {}
    for dataset in manifest.datasets:
        samples = corrupt_dataset(dataset, jobs=jobs)
        noisy_dir = _fresh_dir(out_root / "noisy" / dataset.name)
        for s in samples:
            save_image(s.noisy, noisy_dir / f"{s.image_id}.png")
        baseline = _hash_dir(noisy_dir)
        input_hashes[dataset.name] = baseline
        for desc in manifest.methods:
            if _hash_dir(noisy_dir) != baseline:
                raise RuntimeError(
                    f"fairness violation: noisy inputs for dataset {dataset.name!r} "
                    f"changed before method {desc.name!r} ran"
                )
            method_dir = _fresh_dir(out_root / desc.name / dataset.name)
            try:
                if desc.kind == "builtin":
                    recs = _run_builtin(manifest, desc, dataset, samples, method_dir, jobs)
                else:
                    recs, stderr = _run_external_method(manifest, desc, dataset, samples,
                                                        noisy_dir, method_dir)
                    if stderr.strip():
                        plugin_stderr[(desc.name, dataset.name)] = stderr
            except (PluginError, OSError, ValueError) as exc:
                log.warning("method %s failed on dataset %s: %s", desc.name, dataset.name, exc)
                failures.append(MethodFailure(desc.name, dataset.name, str(exc)))
                continue
            records.extend(recs)
        if _hash_dir(noisy_dir) != baseline:
            raise RuntimeError(
                f"fairness violation: noisy inputs for dataset {dataset.name!r} "
                f"changed during the last method run"
            )
    timings: dict[str, float] = {}
    if manifest.timing_repeats >= 3:
        probe = _timing_probe(manifest)
        for desc in manifest.methods:  # serialized, unloaded
            try:
                timings[desc.name] = time_denoiser(desc, probe, manifest.timing_repeats)
            except (PluginError, OSError, ValueError) as exc:
                failures.append(MethodFailure(desc.name, "<timing>", str(exc)))
    return RunResult(tuple(records), tuple(failures), input_hashes, timings, plugin_stderr)


def _timing_probe(manifest: RunManifest) -> Image:
    """A 256x256 probe image built from the first dataset's first clean image."""
    import numpy as np

    dataset = manifest.datasets[0]
    corpus = list_corpus(dataset.clean_dir)
    base = load_image(corpus[0][1]).pixels
    reps = (256 // base.shape[0] + 1, 256 // base.shape[1] + 1)
    return Image(np.tile(base, reps)[:256, :256])


def time_denoiser(descriptor: DenoiserDescriptor, image: Image, repeats: int) -> float:
    """Median wall time of `repeats` runs on one image, after one warm-up."""
    if repeats < 3:
        raise ValueError(f"repeats must be >= 3, got {repeats}")
    if descriptor.kind == "builtin":
        fn = make_builtin(descriptor.builtin_id, descriptor.parameters)
        fn(image)
        times = []
        for _ in range(repeats):
            start = time.perf_counter()
            fn(image)
            times.append(time.perf_counter() - start)
        return statistics.median(times)
    import tempfile

    with tempfile.TemporaryDirectory(prefix="denoise-bench-time-") as tmp:
        tmp = Path(tmp)
        input_dir = tmp / "in"
        input_dir.mkdir()
        save_image(image, input_dir / "probe.png")
        times = []
        for rep in range(repeats + 1):  # first is the warm-up
            out_dir = tmp / f"out{rep}"
            out_dir.mkdir()
            result = run_external(replace(descriptor, batch=True), input_dir, out_dir)
            times.append(result.wall_times["probe"])
        return statistics.median(times[1:])


# ---------------------------------------------------------------------------
# CSV emission and parsing.

def _fmt(value: float | None) -> str:
    if value is None:
        return ""
    return format(value, ".6g")


def emit_csv(records, path) -> None:
    """Write records as UTF-8 CSV, 6 significant digits, +inf printed as inf,
    rows sorted by (dataset, method, image_id)."""
    rows = sorted(records, key=lambda r: (r.dataset, r.method, r.image_id))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([
                r.method, r.dataset, r.image_id,
                _fmt(r.psnr_db), _fmt(r.ssim), _fmt(r.wall_time), r.output_path,
            ])


def parse_csv(path) -> list[EvaluationRecord]:
    """Read back an emitted CSV; rejects any schema drift."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != CSV_HEADER:
            raise ValueError(
                f"{path}: unexpected CSV schema {header!r}; expected {CSV_HEADER!r}"
            )
        records = []
        for row in reader:
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"{path}: malformed row {row!r}")
            method, dataset, image_id, psnr_s, ssim_s, wall_s, out_path = row
            records.append(EvaluationRecord(
                method=method, dataset=dataset, image_id=image_id,
                psnr_db=float(psnr_s), ssim=float(ssim_s) if ssim_s else None,
                wall_time=float(wall_s), output_path=out_path,
            ))
    return records


# ---------------------------------------------------------------------------
# Summary: Table-1-style means, rankings, tau matrix, percentile stats.

@dataclass(frozen=True)
class SummaryReport:
    datasets: tuple[str, ...]
    methods: tuple[str, ...]
    mean_psnr: dict[tuple[str, str], float]
    mean_ssim: dict[tuple[str, str], float | None]
    psnr_stats: dict[tuple[str, str], AggregateStats | None]
    rankings: dict[str, MethodRanking]
    tau: tuple[tuple[float, ...], ...]

    def best(self, dataset: str) -> str:
        return self.rankings[dataset].ordered_methods[0]

    def render(self, show_rank: bool = True, show_tau: bool = True,
               show_percentiles: bool = False) -> str:
        width = max([len(m) for m in self.methods] + [8])
        dwidth = max([len(d) for d in self.datasets] + [8])
        lines = ["== Mean PSNR (dB) / SSIM per dataset and method (* = best PSNR) =="]
        header = " " * dwidth + "".join(f"  {m:>{width + 1}}" for m in self.methods)
        lines.append(header)
        for ds in self.datasets:
            cells = []
            for m in self.methods:
                mean = self.mean_psnr.get((ds, m))
                if mean is None:
                    cells.append(f"  {'-':>{width + 1}}")
                    continue
                flag = "*" if self.best(ds) == m else ""
                sval = self.mean_ssim.get((ds, m))
                text = f"{flag}{mean:.2f}" + (f"/{sval:.2f}" if sval is not None else "")
                cells.append(f"  {text:>{width + 1}}")
            lines.append(f"{ds:<{dwidth}}" + "".join(cells))
        if show_rank:
            lines.append("")
            lines.append("== Ranking per dataset (best first, mean PSNR) ==")
            for ds in self.datasets:
                lines.append(f"{ds}: " + " > ".join(self.rankings[ds].ordered_methods))
        if show_tau:
            lines.append("")
            lines.append("== Kendall tau between dataset rankings ==")
            lines.append(" " * dwidth + "".join(f"  {d:>{dwidth}}" for d in self.datasets))
            for i, ds in enumerate(self.datasets):
                row = "".join(f"  {self.tau[i][j]:>{dwidth}.3f}" for j in range(len(self.datasets)))
                lines.append(f"{ds:<{dwidth}}" + row)
        if show_percentiles:
            lines.append("")
            lines.append("== PSNR percentiles (p10 / p25 / median / p75 / p90) ==")
            for ds in self.datasets:
                for m in self.methods:
                    st = self.psnr_stats.get((ds, m))
                    if st is None:
                        continue
                    lines.append(
                        f"{ds} {m}: {st.p10:.2f} / {st.p25:.2f} / {st.median:.2f}"
                        f" / {st.p75:.2f} / {st.p90:.2f}  (n={st.count})"
                    )
        return "\n".join(lines)


def emit_summary(records) -> SummaryReport:
    """Aggregate records into the summary tables and the tau matrix."""
    records = list(records)
    if not records:
        raise ValueError("no records to summarize")
    # Canonical order so a reloaded CSV summarizes identically to the run.
    datasets = sorted({r.dataset for r in records})
    methods = sorted({r.method for r in records})
    mean_psnr: dict[tuple[str, str], float] = {}
    mean_ssim: dict[tuple[str, str], float | None] = {}
    psnr_stats: dict[tuple[str, str], AggregateStats | None] = {}
    for ds in datasets:
        for m in methods:
            cell = [r for r in records if r.dataset == ds and r.method == m]
            if not cell:
                continue
            finite = [r.psnr_db for r in cell if math.isfinite(r.psnr_db)]
            mean_psnr[(ds, m)] = (sum(finite) / len(finite)) if finite else math.inf
            ssims = [r.ssim for r in cell if r.ssim is not None]
            mean_ssim[(ds, m)] = (sum(ssims) / len(ssims)) if ssims else None
            psnr_stats[(ds, m)] = aggregate(finite) if finite else None
    rankings = {ds: rank_methods(records, ds) for ds in datasets}
    tau = tuple(
        tuple(kendall_tau(rankings[a], rankings[b]) for b in datasets)
        for a in datasets
    )
    return SummaryReport(
        datasets=tuple(datasets), methods=tuple(methods),
        mean_psnr=mean_psnr, mean_ssim=mean_ssim, psnr_stats=psnr_stats,
        rankings=rankings, tau=tau,
    )
