"""denoise-bench: reproducible benchmarking harness for image denoisers."""

from .core import (DatasetManifest, EvaluationRecord, Image, ImageFormatError,
                   UnquantizedImageError, list_corpus, load_image, quantize, save_image)
from .denoisers import (Bm3dParams, PatchGroup, block_match, bm3d, bm3d_hard_stage,
                        bm3d_wiener_stage, identity_denoise, median_denoise)
from .harness import (RunManifest, RunResult, emit_csv, emit_summary, load_manifest,
                      parse_csv, run_benchmark, save_manifest, time_denoiser)
from .metrics import (AggregateStats, MethodRanking, aggregate, kendall_tau, psnr,
                      rank_methods, ssim)
from .noise import NoiseSpec, awgn, corrupt_dataset, mixture, parse_noise_expr, salt_pepper
from .plugin import (DenoiserDescriptor, PluginError, PluginExecutionError,
                     PluginOutputError, PluginReport, PluginTimeoutError, run_external,
                     validate_plugin)
from .rng import derive_seed, fnv1a64, shuffle_prefix, standard_normals, stream_u64, stream_unit

__version__ = "0.1.0"
