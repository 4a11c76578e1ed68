"""Language-neutral external-denoiser protocol (Protocol v1).

An external denoiser is any executable invoked as::

    <command...> --input INPUT_DIR --output OUTPUT_DIR

with 8-bit grayscale PNG files in INPUT_DIR. On success (exit code 0) the
output directory must contain one decodable file per input with the
identical file name and dimensions. Standard error is captured into the run
log, and the child sees ``DENOISE_BENCH_PROTOCOL=1`` in its environment.
Plugin output is never trusted: every file is re-validated before scoring.
"""

from __future__ import annotations

import logging
import os
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Image, load_image, quantize, save_image
from .rng import derive_seed, standard_normals

log = logging.getLogger(__name__)

PROTOCOL_ENV = "DENOISE_BENCH_PROTOCOL"
PROTOCOL_VERSION = "1"


class PluginError(RuntimeError):
    """Base class for external-denoiser protocol failures."""

    def __init__(self, message: str, image_ids: tuple[str, ...] = ()):
        super().__init__(message)
        self.image_ids = image_ids


class PluginExecutionError(PluginError):
    """The plugin exited with a nonzero status."""


class PluginTimeoutError(PluginError):
    """The plugin exceeded its time budget; partial outputs were discarded."""


class PluginOutputError(PluginError):
    """The plugin violated the output contract (missing/undecodable/mismatched)."""


@dataclass(frozen=True)
class DenoiserDescriptor:
    """A runnable method: built-in by id, or external by command line."""

    name: str
    kind: str  # "builtin" | "external"
    builtin_id: str | None = None
    parameters: dict = field(default_factory=dict)
    command: tuple[str, ...] = ()
    timeout: float = 600.0
    batch: bool = True

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError(f"method {self.name!r}: timeout must be > 0")
        if self.kind == "builtin":
            if not self.builtin_id:
                raise ValueError(f"method {self.name!r}: builtin kind requires builtin_id")
        elif self.kind == "external":
            if not self.command:
                raise ValueError(f"method {self.name!r}: external kind requires a command")
            object.__setattr__(self, "command", tuple(self.command))
        else:
            raise ValueError(f"method {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class ExternalRunResult:
    """Per-image wall times plus whatever the plugin wrote to stderr."""

    wall_times: dict[str, float]
    stderr: str


def _invoke(descriptor: DenoiserDescriptor, input_dir: Path, output_dir: Path) -> tuple[float, str]:
    """One protocol invocation; returns (elapsed seconds, stderr text)."""
    cmd = list(descriptor.command) + ["--input", str(input_dir), "--output", str(output_dir)]
    env = dict(os.environ, **{PROTOCOL_ENV: PROTOCOL_VERSION})
    start = time.perf_counter()
    try:
        proc = subprocess.run(
            cmd, env=env, capture_output=True, text=True, timeout=descriptor.timeout
        )
    except subprocess.TimeoutExpired as exc:
        _clear_dir(output_dir)
        raise PluginTimeoutError(
            f"plugin {descriptor.name!r} exceeded {descriptor.timeout}s and was killed"
        ) from exc
    except FileNotFoundError as exc:
        raise PluginExecutionError(f"plugin {descriptor.name!r}: executable not found: {exc}") from exc
    elapsed = time.perf_counter() - start
    if proc.stderr:
        log.debug("plugin %s stderr: %s", descriptor.name, proc.stderr.strip())
    if proc.returncode != 0:
        raise PluginExecutionError(
            f"plugin {descriptor.name!r} exited with code {proc.returncode}"
            + (f"; stderr: {proc.stderr.strip()}" if proc.stderr.strip() else "")
        )
    return elapsed, proc.stderr


def _clear_dir(directory: Path) -> None:
    if directory.is_dir():
        for child in directory.iterdir():
            if child.is_file():
                child.unlink()
            else:
                shutil.rmtree(child)


def _check_outputs(descriptor, input_files: list[Path], output_dir: Path) -> None:
    missing = [p.stem for p in input_files if not (output_dir / p.name).is_file()]
    if missing:
        raise PluginOutputError(
            f"plugin {descriptor.name!r} produced no output for: {', '.join(sorted(missing))}",
            image_ids=tuple(sorted(missing)),
        )
    bad_dims, undecodable = [], []
    for p in input_files:
        try:
            out = load_image(output_dir / p.name)
        except Exception:
            undecodable.append(p.stem)
            continue
        if out.shape != load_image(p).shape:
            bad_dims.append(p.stem)
    if undecodable:
        raise PluginOutputError(
            f"plugin {descriptor.name!r} wrote undecodable output for: {', '.join(sorted(undecodable))}",
            image_ids=tuple(sorted(undecodable)),
        )
    if bad_dims:
        raise PluginOutputError(
            f"plugin {descriptor.name!r} changed dimensions for: {', '.join(sorted(bad_dims))}",
            image_ids=tuple(sorted(bad_dims)),
        )


def run_external(descriptor: DenoiserDescriptor, input_dir, output_dir) -> ExternalRunResult:
    """Run an external denoiser over a directory of noisy images.

    Batch mode issues one invocation and amortizes the wall time over the
    inputs; per-image mode stages one file at a time and measures each
    invocation individually. Output files are validated (existence, name,
    decodability, dimensions) before returning.
    """
    input_dir = Path(input_dir)
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    input_files = sorted(p for p in input_dir.iterdir() if p.suffix.lower() == ".png")
    if not input_files:
        raise ValueError(f"no PNG inputs in {input_dir}")

    if descriptor.batch:
        elapsed, stderr = _invoke(descriptor, input_dir, output_dir)
        _check_outputs(descriptor, input_files, output_dir)
        share = elapsed / len(input_files)
        return ExternalRunResult({p.stem: share for p in input_files}, stderr)

    times: dict[str, float] = {}
    chunks: list[str] = []
    for p in input_files:
        with tempfile.TemporaryDirectory(prefix="denoise-bench-stage-") as staging:
            stage_in = Path(staging) / "in"
            stage_out = Path(staging) / "out"
            stage_in.mkdir()
            stage_out.mkdir()
            shutil.copy2(p, stage_in / p.name)
            elapsed, stderr = _invoke(descriptor, stage_in, stage_out)
            _check_outputs(descriptor, [stage_in / p.name], stage_out)
            shutil.copy2(stage_out / p.name, output_dir / p.name)
            times[p.stem] = elapsed
            if stderr:
                chunks.append(stderr)
    return ExternalRunResult(times, "".join(chunks))


@dataclass(frozen=True)
class PluginCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class PluginReport:
    """Diagnostic result of running a plugin over the built-in smoke set."""

    plugin: str
    checks: tuple[PluginCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def render(self) -> str:
        lines = [f"plugin check: {self.plugin}"]
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"  [{status}] {c.name}" + (f": {c.detail}" if c.detail else ""))
        return "\n".join(lines)


def smoke_images() -> dict[str, Image]:
    """The 3-image validation set: constant, gradient, and seeded random."""
    size = 32
    constant = Image(np.full((size, size), 128.0))
    ramp = np.tile(np.linspace(0, 255, size), (size, 1))
    gradient = quantize(Image(ramp))
    seed = derive_seed(0xD1A6, "plugin-smoke")
    noise = standard_normals(seed, size * size).reshape(size, size)
    random = quantize(Image(127.5 + 64.0 * noise))
    return {"constant": constant, "gradient": gradient, "random": random}


def validate_plugin(descriptor: DenoiserDescriptor) -> PluginReport:
    """Exercise a plugin on the smoke set and check every protocol clause."""
    images = smoke_images()
    checks: list[PluginCheck] = []
    with tempfile.TemporaryDirectory(prefix="denoise-bench-validate-") as tmp:
        input_dir = Path(tmp) / "in"
        output_dir = Path(tmp) / "out"
        input_dir.mkdir()
        output_dir.mkdir()
        for name, img in images.items():
            save_image(img, input_dir / f"{name}.png")
        expected = {f"{name}.png" for name in images}

        timed_out = False
        exit_ok = True
        detail = ""
        try:
            _invoke(descriptor, input_dir, output_dir)
        except PluginTimeoutError as exc:
            timed_out = True
            detail = str(exc)
        except PluginExecutionError as exc:
            exit_ok = False
            detail = str(exc)
        checks.append(PluginCheck("timeout", not timed_out, detail if timed_out else ""))
        checks.append(PluginCheck("exit_code", exit_ok, "" if exit_ok else detail))
        if timed_out or not exit_ok:
            for name in ("outputs_present", "name_contract", "decodable", "dimensions"):
                checks.append(PluginCheck(name, False, "skipped: invocation failed"))
            return PluginReport(" ".join(descriptor.command), tuple(checks))

        produced = {p.name for p in output_dir.iterdir() if p.is_file()}
        missing = sorted(expected - produced)
        checks.append(PluginCheck(
            "outputs_present", not missing,
            f"missing output for: {', '.join(missing)}" if missing else "",
        ))
        extra = sorted(produced - expected)
        checks.append(PluginCheck(
            "name_contract", not extra,
            f"unexpected output files: {', '.join(extra)}" if extra else "",
        ))
        undecodable, bad_dims = [], []
        for name, img in images.items():
            path = output_dir / f"{name}.png"
            if not path.is_file():
                continue
            try:
                out = load_image(path)
            except Exception:
                undecodable.append(name)
                continue
            if out.shape != img.shape:
                bad_dims.append(f"{name} ({img.shape} -> {out.shape})")
        checks.append(PluginCheck(
            "decodable", not undecodable,
            f"undecodable: {', '.join(sorted(undecodable))}" if undecodable else "",
        ))
        checks.append(PluginCheck(
            "dimensions", not bad_dims,
            f"dimension mismatch: {', '.join(sorted(bad_dims))}" if bad_dims else "",
        ))
    return PluginReport(" ".join(descriptor.command), tuple(checks))
