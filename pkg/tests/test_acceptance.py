"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
The natural-image corpus (>= 20 grayscale 160x160 crops) comes from
tests/conftest.py; corpus-level checks all use the fixed master seed there.
"""

import itertools
import math
import stat
import textwrap
import time
from contextlib import contextmanager

import numpy as np
import pytest

from denoise_bench.core import Image, load_image, quantize, save_image
from denoise_bench.denoisers import (Bm3dParams, bm3d, bm3d_hard_stage,
                                     bm3d_wiener_stage, dct2, haar_matrix, idct2)
from denoise_bench.harness import RunManifest, emit_csv, run_benchmark, time_denoiser
from denoise_bench.metrics import SSIM_C1, MethodRanking, kendall_tau, psnr, ssim
from denoise_bench.noise import NoiseSpec, awgn, mixture, salt_pepper
from denoise_bench.plugin import DenoiserDescriptor, validate_plugin
from denoise_bench.core import DatasetManifest
from denoise_bench.rng import derive_seed

from conftest import CORPUS_SEED


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE FAIL: {name}")
        raise
    print(f"ACCEPTANCE PASS: {name}")


def test_awgn_anchor(corpus_images):
    with criterion("AWGN anchor (mean noisy PSNR at sigma 50)"):
        assert len(corpus_images) >= 20
        start = time.perf_counter()
        values = []
        for image_id, clean in corpus_images:
            noisy = awgn(clean, 50.0, derive_seed(CORPUS_SEED, image_id))
            values.append(psnr(clean, noisy))
        elapsed = time.perf_counter() - start
        mean = float(np.mean(values))
        print(f"  mean PSNR {mean:.3f} dB over {len(values)} images in {elapsed:.2f}s")
        assert 14.0 <= mean <= 15.5
        assert elapsed < 10.0


def test_mixture_anchor(corpus_images):
    with criterion("Mixture anchor (sigma 50 + 20% salt-and-pepper)"):
        values = []
        for image_id, clean in corpus_images:
            noisy = mixture(clean, 50.0, 0.2, derive_seed(CORPUS_SEED, image_id))
            values.append(psnr(clean, noisy))
        mean = float(np.mean(values))
        print(f"  mean PSNR {mean:.3f} dB")
        assert 9.5 <= mean <= 11.5
        # Exact-count policy, checked where every impulse is observable:
        # remap each image into [1, 254] so a written 0/255 always differs.
        for image_id, clean in corpus_images:
            shifted = quantize(Image(1.0 + clean.pixels * (253.0 / 255.0)))
            out = salt_pepper(shifted, 0.2, derive_seed(CORPUS_SEED, image_id))
            changed = int((out.pixels != shifted.pixels).sum())
            assert changed == round(0.2 * shifted.pixels.size)


def test_clipping_anchor():
    with criterion("Clipping anchor (constant 255, sigma 50, 1e6 pixels)"):
        img = Image(np.full((1000, 1000), 255.0))
        noisy = awgn(img, 50.0, derive_seed(CORPUS_SEED, "clipping-anchor"))
        mean = float(noisy.pixels.mean())
        print(f"  sample mean {mean:.3f} (window 235.1 +- 0.2)")
        assert 234.9 <= mean <= 235.3


def test_bm3d_effectiveness(corpus_images):
    with criterion("BM3D effectiveness (sigma 50: PSNR gain >= 7 dB, SSIM gain >= 0.25)"):
        start = time.perf_counter()
        psnr_gains, ssim_gains = [], []
        for image_id, clean in corpus_images:
            noisy = awgn(clean, 50.0, derive_seed(CORPUS_SEED, image_id))
            restored = bm3d(noisy, 50.0)
            psnr_gains.append(psnr(clean, restored) - psnr(clean, noisy))
            ssim_gains.append(ssim(clean, restored) - ssim(clean, noisy))
        elapsed = time.perf_counter() - start
        print(f"  mean gain {np.mean(psnr_gains):.2f} dB / {np.mean(ssim_gains):.3f} SSIM "
              f"on {len(psnr_gains)} images in {elapsed:.1f}s")
        assert float(np.mean(psnr_gains)) >= 7.0
        assert float(np.mean(ssim_gains)) >= 0.25
        assert elapsed < 300.0


def test_bm3d_internals():
    with criterion("BM3D internals (orthonormality 1e-10; Wiener >= hard - 0.1 dB)"):
        rng = np.random.default_rng(12345)
        patches = rng.normal(0, 64, size=(1000, 8, 8))
        back = idct2(dct2(patches))
        assert np.abs(back - patches).max() / np.abs(patches).max() < 1e-10
        energy_in = np.sum(patches ** 2, axis=(1, 2))
        energy_out = np.sum(dct2(patches) ** 2, axis=(1, 2))
        assert np.max(np.abs(energy_in - energy_out) / energy_in) < 1e-10
        for k in (2, 4, 8, 16):
            h = haar_matrix(k)
            vecs = rng.normal(0, 64, size=(1000, k))
            assert np.abs(vecs @ h.T @ h - vecs).max() / np.abs(vecs).max() < 1e-10
            assert np.max(np.abs(np.sum((vecs @ h.T) ** 2, 1) - np.sum(vecs ** 2, 1))
                          / np.sum(vecs ** 2, 1)) < 1e-10

        data = pytest.importorskip("skimage.data")
        from denoise_bench.core import LUMA_WEIGHTS, round_half_away_from_zero

        def gray(arr):
            arr = arr.astype(float)
            if arr.ndim == 3:
                arr = round_half_away_from_zero(arr @ np.asarray(LUMA_WEIGHTS))
            return round_half_away_from_zero(np.clip(arr, 0, 255))

        scenes = [("camera", (0, 0)), ("moon", (0, 0)), ("astronaut", (0, 0)),
                  ("coffee", (100, 150)), ("chelsea", (30, 90))]
        params = Bm3dParams(sigma=25.0)
        deltas = []
        for k, (name, (r, c)) in enumerate(scenes):
            clean = Image(gray(getattr(data, name)())[r:r + 256, c:c + 256])
            noisy = awgn(clean, 25.0, derive_seed(CORPUS_SEED, f"wiener-fixture-{k}"))
            hard = bm3d_hard_stage(noisy, params)
            final = bm3d_wiener_stage(noisy, hard, params)
            deltas.append(psnr(clean, final) - psnr(clean, hard))
        print(f"  wiener-vs-hard deltas: {np.round(deltas, 3)}")
        assert min(deltas) >= -0.1


def test_metric_identities():
    with criterion("Metric identities (tau exhaustive; SSIM closed form; PSNR hand cases)"):
        def ranking(order):
            scores = {m: float(len(order) - i) for i, m in enumerate(order)}
            return MethodRanking("r", tuple(order), scores)

        def brute_force(order_a, order_b):
            pos_a = {m: i for i, m in enumerate(order_a)}
            pos_b = {m: i for i, m in enumerate(order_b)}
            c = d = 0
            for x, y in itertools.combinations(sorted(order_a), 2):
                s = (pos_a[x] - pos_a[y]) * (pos_b[x] - pos_b[y])
                c += s > 0
                d += s < 0
            n = len(order_a)
            return (c - d) / (n * (n - 1) / 2)

        for n in range(2, 7):
            methods = [f"m{i}" for i in range(n)]
            for perm in itertools.permutations(methods):
                assert kendall_tau(ranking(methods), ranking(perm)) == brute_force(methods, perm)

        # zero-variance closed form for constant images
        expected = (2 * 100 * 150 + SSIM_C1) / (100 ** 2 + 150 ** 2 + SSIM_C1)
        got = ssim(Image(np.full((32, 32), 100.0)), Image(np.full((32, 32), 150.0)))
        print(f"  constant-image SSIM {got:.6f} vs closed form {expected:.6f}")
        assert got == pytest.approx(expected, abs=1e-4)

        assert psnr(Image(np.zeros((8, 8))), Image(np.full((8, 8), 255.0))) == pytest.approx(0.0, abs=1e-2)
        assert psnr(Image(np.full((8, 8), 100.0)), Image(np.full((8, 8), 150.0))) == pytest.approx(14.15, abs=1e-2)


def _determinism_manifest(tmp_path, run_tag):
    clean_dir = tmp_path / "clean"
    if not clean_dir.is_dir():
        clean_dir.mkdir()
        rng = np.random.default_rng(3)
        for i in range(3):
            img = Image(rng.integers(20, 235, size=(48, 48)).astype(float))
            save_image(img, clean_dir / f"img{i}.png")
    datasets = (
        DatasetManifest(name="gauss50", kind="synthetic", clean_dir=clean_dir,
                        noise=NoiseSpec("gaussian", sigma=50.0, master_seed=9)),
        DatasetManifest(name="mix", kind="synthetic", clean_dir=clean_dir,
                        noise=NoiseSpec("mixture", sigma=50.0, fraction=0.2, master_seed=9)),
    )
    methods = (
        DenoiserDescriptor(name="none", kind="builtin", builtin_id="identity"),
        DenoiserDescriptor(name="median", kind="builtin", builtin_id="median",
                           parameters={"radius": 1}),
        DenoiserDescriptor(name="bm3d", kind="builtin", builtin_id="bm3d",
                           parameters={"sigma": 50.0}),
    )
    return RunManifest(datasets=datasets, methods=methods,
                       output_dir=tmp_path / f"out-{run_tag}")


def _csv_without_wall_time(path):
    lines = path.read_text().splitlines()
    wall_col = lines[0].split(",").index("wall_time_s")
    stripped = []
    for line in lines:
        cells = line.split(",")
        del cells[wall_col]
        stripped.append(",".join(cells))
    return "\n".join(stripped)


def test_determinism(tmp_path):
    with criterion("Determinism (same manifest, 1 and 8 workers, byte-identical CSVs)"):
        outputs = []
        for tag, jobs in (("a1", 1), ("a2", 1), ("b1", 8), ("b2", 8)):
            manifest = _determinism_manifest(tmp_path, tag)
            result = run_benchmark(manifest, jobs=jobs)
            assert result.ok
            assert len(result.records) == 18  # 3 images x 3 methods x 2 regimes
            csv_path = manifest.output_dir / "results.csv"
            emit_csv(result.records, csv_path)
            outputs.append(_csv_without_wall_time(csv_path))
        assert outputs[0] == outputs[1] == outputs[2] == outputs[3]


def test_timing_harness(corpus_images):
    with criterion("Timing harness (identity < median < bm3d on 256x256)"):
        base = dict(corpus_images)["camera_0_0"].pixels
        probe = Image(np.tile(base, (2, 2))[:256, :256])
        identity = DenoiserDescriptor(name="none", kind="builtin", builtin_id="identity")
        median = DenoiserDescriptor(name="median", kind="builtin", builtin_id="median")
        heavy = DenoiserDescriptor(name="bm3d", kind="builtin", builtin_id="bm3d",
                                   parameters={"sigma": 25.0})
        t_identity = time_denoiser(identity, probe, repeats=3)
        t_median = time_denoiser(median, probe, repeats=3)
        t_bm3d = time_denoiser(heavy, probe, repeats=3)
        print(f"  medians: identity {t_identity:.2e}s, median {t_median:.2e}s, bm3d {t_bm3d:.2e}s")
        assert t_identity < t_median < t_bm3d


ARG_PARSE = """
    while [ $# -gt 0 ]; do
      case "$1" in
        --input) IN="$2"; shift 2;;
        --output) OUT="$2"; shift 2;;
        *) shift;;
      esac
    done
"""


def _shell_plugin(tmp_path, name, body, timeout=30.0):
    script = tmp_path / name
    script.write_text("#!/bin/sh\n" + textwrap.dedent(body))
    script.chmod(script.stat().st_mode | stat.S_IEXEC)
    return DenoiserDescriptor(name=name, kind="external",
                              command=("sh", str(script)), timeout=timeout)


def test_protocol_robustness(tmp_path):
    with criterion("Protocol robustness (five designated rejections + shell identity)"):
        identity = _shell_plugin(tmp_path, "identity.sh", ARG_PARSE + 'cp "$IN"/*.png "$OUT"/\n')
        assert validate_plugin(identity).ok

        def failed(report):
            return {c.name for c in report.checks if not c.passed}

        missing = _shell_plugin(tmp_path, "missing.sh",
                                ARG_PARSE + 'cp "$IN"/*.png "$OUT"/ && rm "$OUT"/constant.png\n')
        assert "outputs_present" in failed(validate_plugin(missing))

        renamed = _shell_plugin(tmp_path, "renamed.sh", ARG_PARSE +
                                'cp "$IN"/*.png "$OUT"/\nmv "$OUT"/random.png "$OUT"/out.png\n')
        assert "name_contract" in failed(validate_plugin(renamed))

        shrink = tmp_path / "shrink.py"
        shrink.write_text(textwrap.dedent("""
            import argparse, pathlib
            from PIL import Image
            ap = argparse.ArgumentParser()
            ap.add_argument("--input"); ap.add_argument("--output")
            a = ap.parse_args()
            for p in pathlib.Path(a.input).glob("*.png"):
                Image.open(p).resize((4, 4)).save(pathlib.Path(a.output) / p.name)
        """))
        wrong_dims = DenoiserDescriptor(name="shrink", kind="external",
                                        command=("python3", str(shrink)), timeout=60.0)
        assert "dimensions" in failed(validate_plugin(wrong_dims))

        crash = _shell_plugin(tmp_path, "crash.sh", "exit 7\n")
        assert "exit_code" in failed(validate_plugin(crash))

        sleeper = _shell_plugin(tmp_path, "sleeper.sh", "sleep 30\n", timeout=1.0)
        assert "timeout" in failed(validate_plugin(sleeper))

        # Full harness pass over the shell identity plugin, no secondary needed.
        clean_dir = tmp_path / "clean"
        clean_dir.mkdir()
        rng = np.random.default_rng(4)
        for i in range(3):
            save_image(Image(rng.integers(0, 256, size=(32, 32)).astype(float)),
                       clean_dir / f"img{i}.png")
        manifest = RunManifest(
            datasets=(DatasetManifest(name="g25", kind="synthetic", clean_dir=clean_dir,
                                      noise=NoiseSpec("gaussian", sigma=25.0, master_seed=1)),),
            methods=(DenoiserDescriptor(name="builtin-id", kind="builtin", builtin_id="identity"),
                     identity),
            output_dir=tmp_path / "run-out",
        )
        result = run_benchmark(manifest)
        assert result.ok
        by_method = {}
        for rec in result.records:
            by_method.setdefault(rec.method, {})[rec.image_id] = rec.psnr_db
        assert by_method["builtin-id"] == by_method["identity.sh"]


# --- secondary component ---------------------------------------------------------

PLUGIN_EXAMPLE = __file__.rsplit("/", 2)[0] + "/plugin-example/dist/cli.js"


@pytest.mark.skipif(not __import__("pathlib").Path(PLUGIN_EXAMPLE).is_file(),
                    reason="plugin-example not built (npm install && npm run build)")
def test_secondary_plugin_example(tmp_path, corpus_images):
    with criterion("Secondary: plugin-example passes validation and matches identity"):
        identity_cmd = ("node", PLUGIN_EXAMPLE, "--mode", "identity")
        blur_cmd = ("node", PLUGIN_EXAMPLE, "--mode", "blur")
        for cmd in (identity_cmd, blur_cmd):
            report = validate_plugin(DenoiserDescriptor(
                name="plugin-example", kind="external", command=cmd, timeout=60.0))
            assert report.ok, report.render()

        clean_dir = tmp_path / "clean"
        clean_dir.mkdir()
        for image_id, img in corpus_images[:5]:
            save_image(img, clean_dir / f"{image_id}.png")
        manifest = RunManifest(
            datasets=(DatasetManifest(name="g25", kind="synthetic", clean_dir=clean_dir,
                                      noise=NoiseSpec("gaussian", sigma=25.0, master_seed=2)),),
            methods=(DenoiserDescriptor(name="builtin-id", kind="builtin", builtin_id="identity"),
                     DenoiserDescriptor(name="example-id", kind="external",
                                        command=identity_cmd, timeout=120.0)),
            output_dir=tmp_path / "out",
        )
        result = run_benchmark(manifest)
        assert result.ok
        by_method = {}
        for rec in result.records:
            by_method.setdefault(rec.method, {})[rec.image_id] = rec.psnr_db
        assert by_method["builtin-id"] == by_method["example-id"]
