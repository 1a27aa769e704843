"""Unpaired high/low-noise denoising: phantoms, baselines, metrics and model inference."""

from ._core import (
    Checkpoint,
    ComputeError,
    ConfigError,
    DataError,
    MaskExtractionError,
    baseline,
    baseline_names,
    cnr,
    denoise,
    estimate_noise_sigma,
    extract_masks,
    feature_maps,
    generate_phantom,
    load_checkpoint,
    msr,
    presentation_orders,
    psnr,
    register_translation,
    sha256_hex,
    ssim,
)

__all__ = [
    "Checkpoint",
    "ComputeError",
    "ConfigError",
    "DataError",
    "MaskExtractionError",
    "baseline",
    "baseline_names",
    "cnr",
    "denoise",
    "estimate_noise_sigma",
    "extract_masks",
    "feature_maps",
    "generate_phantom",
    "load_checkpoint",
    "msr",
    "presentation_orders",
    "psnr",
    "register_translation",
    "sha256_hex",
    "ssim",
]
