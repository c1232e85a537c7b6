"""Experiment plumbing: config files, dataset generation, end-to-end runs.

Everything here is deterministic under the experiment seed.  Per-image
randomness fans out through a documented counter scheme: image i in the
sorted input listing gets the seed SeedSequence([seed, i]).  All CSV and
image writes go through a temp file and an atomic rename.
"""

from __future__ import annotations

import configparser
import csv
import logging
import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .calibrate import estimate_noise_image
from .denoise import DENOISER_KINDS, make_denoiser
from .errors import ValidationError
from .forward import (
    BOUNDARY_RULES,
    ForwardModel,
    add_noise,
    apply_forward,
    gaussian_kernel,
)
from .metrics import (
    bicubic_upsample,
    ndwi,
    psnr,
    save_mask_png,
    ssim,
    threshold_water,
    water_area,
)
from .raster import MultispectralImage, load_image, save_image, save_rgb_png
from .solver import SolveConfig, best_cell, fb_pnp, sweep

logger = logging.getLogger("pnpsr")

SCHEMA_VERSION = 1

TRACE_HEADER = ("iter", "residual", "data_fidelity", "psnr")
METRICS_HEADER = (
    "image_id", "method", "psnr_db", "ssim",
    "water_area_m2", "reference_water_area_m2", "acquisition_gap_days",
)
SWEEP_HEADER = ("tau", "lambda", "iterations", "final_psnr", "final_ssim", "diverged")
MANIFEST_HEADER = ("hr_id", "lr_id", "noise_sigma", "noise_seed")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: forward model, denoiser, solve settings, paths, seed."""

    seed: int = 0
    kernel_size: int = 4
    kernel_sigma: float = 0.7
    scale: int = 3
    noise_sigma: float = 0.09
    boundary: str = "reflective"
    denoiser_kind: str = "tv_prox"
    model_path: str | None = None
    tau: float = 3.0
    lam: float = 0.08
    max_iters: int = 200
    tol: float = 1e-5
    init: str = "bicubic"
    water_threshold: float = 0.0
    input: str | None = None
    reference: str | None = None
    out_dir: str = "."

    def __post_init__(self):
        if self.kernel_size < 1:
            raise ValidationError(f"kernel_size must be >= 1, got {self.kernel_size}")
        if not (np.isfinite(self.kernel_sigma) and self.kernel_sigma > 0):
            raise ValidationError(f"kernel_sigma must be > 0, got {self.kernel_sigma}")
        if self.scale < 1:
            raise ValidationError(f"scale must be >= 1, got {self.scale}")
        if not (np.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise ValidationError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.boundary not in BOUNDARY_RULES:
            raise ValidationError(f"boundary must be one of {BOUNDARY_RULES}, got {self.boundary!r}")
        if self.denoiser_kind not in DENOISER_KINDS:
            raise ValidationError(f"denoiser must be one of {DENOISER_KINDS}, got {self.denoiser_kind!r}")
        if self.denoiser_kind == "external" and not self.model_path:
            raise ValidationError("external denoiser requires model_path")
        if not np.isfinite(self.water_threshold):
            raise ValidationError("water_threshold must be finite")

    def forward_model(self) -> ForwardModel:
        return ForwardModel(
            kernel=gaussian_kernel(self.kernel_size, self.kernel_sigma),
            s=self.scale, noise_sigma=self.noise_sigma, boundary=self.boundary,
        )

    def solve_config(self, reference: MultispectralImage | None = None) -> SolveConfig:
        return SolveConfig(
            tau=self.tau, lam=self.lam, max_iters=self.max_iters,
            tol=self.tol, init=self.init, record_psnr_against=reference,
        )


_SCHEMA = {
    "experiment": ("schema_version", "seed"),
    "forward": ("kernel_size", "kernel_sigma", "scale", "noise_sigma", "boundary"),
    "denoiser": ("kind", "model_path"),
    "solve": ("tau", "lambda", "max_iters", "tol", "init"),
    "analysis": ("water_threshold",),
    "paths": ("input", "reference", "out_dir"),
}

_INT_KEYS = {"seed", "kernel_size", "scale", "max_iters", "schema_version"}
_FLOAT_KEYS = {"kernel_sigma", "noise_sigma", "tau", "lambda", "tol", "water_threshold"}


def load_config(path) -> ExperimentConfig:
    """Parse and schema-validate an experiment config file (INI syntax)."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as f:
            parser.read_file(f)
    except configparser.Error as e:
        raise ValidationError(f"{path}: {e}") from e

    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ValidationError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ValidationError(f"{path}: unknown key {key!r} in [{section}]")
            values[key] = raw

    if "schema_version" not in values:
        raise ValidationError(f"{path}: missing schema_version in [experiment]")

    def take(key, kind=str):
        raw = values.pop(key, None)
        if raw is None or raw == "":
            return None
        try:
            return kind(raw)
        except ValueError:
            raise ValidationError(f"{path}: bad value {raw!r} for {key}") from None

    version = take("schema_version", int)
    if version != SCHEMA_VERSION:
        raise ValidationError(f"{path}: schema_version {version} not supported (expected {SCHEMA_VERSION})")

    kwargs = {}
    rename = {"kind": "denoiser_kind", "lambda": "lam"}
    for key in list(values):
        kind = int if key in _INT_KEYS else float if key in _FLOAT_KEYS else str
        parsed = take(key, kind)
        if parsed is not None:
            kwargs[rename.get(key, key)] = parsed
    return ExperimentConfig(**kwargs)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def write_csv(path, header, rows) -> Path:
    """CSV with header, atomically replaced; cell values run through _fmt."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_csv(path):
    """Rows of a headered CSV as dicts, all values strings."""
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def image_seed(seed: int, counter: int) -> int:
    """Per-image seed: position in the sorted input listing fans out the run seed."""
    return int(np.random.SeedSequence([seed, counter]).generate_state(1)[0])


def make_synthetic(hr_dir, m: ForwardModel, seed: int, out_dir) -> Path:
    """Degrade every MSR image in hr_dir onto the LR grid; write a manifest.

    Images whose dims are not divisible by the scale (or that fail to load)
    are skipped with a logged reason and left out of the manifest.
    """
    hr_dir = Path(hr_dir)
    out_dir = Path(out_dir)
    if not hr_dir.is_dir():
        raise ValidationError(f"HR directory not found: {hr_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for counter, path in enumerate(sorted(hr_dir.glob("*.msr"))):
        try:
            hr = load_image(path)
            if hr.height % m.s or hr.width % m.s:
                raise ValidationError(f"dims {hr.height}x{hr.width} not divisible by s={m.s}")
        except Exception as e:
            logger.warning("skipping %s: %s", path.name, e)
            continue
        noise_seed = image_seed(seed, counter)
        lr = add_noise(apply_forward(hr, m), m.noise_sigma, seed=noise_seed)
        lr_name = f"{path.stem}_lr.msr"
        save_image(lr, out_dir / lr_name)
        rows.append((path.name, lr_name, m.noise_sigma, noise_seed))
    return write_csv(out_dir / "manifest.csv", MANIFEST_HEADER, rows)


def _require_file(path, what) -> Path:
    if path is None:
        raise ValidationError(f"{what} path is required")
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"{what} not found: {p}")
    return p


def _clip01(img: MultispectralImage) -> MultispectralImage:
    return img.with_data(np.clip(img.data, 0.0, 1.0))


def _metrics_row(image_id, method, candidate, reference, threshold, gap_days):
    """One metrics CSV row; PSNR/SSIM and reference area need a reference."""
    area = water_area(threshold_water(ndwi(candidate), threshold, pixel_size=candidate.pixel_size))
    if reference is None:
        return (image_id, method, None, None, area, None, gap_days)
    ref_area = water_area(threshold_water(ndwi(reference), threshold, pixel_size=reference.pixel_size))
    return (
        image_id, method,
        psnr(candidate, reference), ssim(candidate, reference),
        area, ref_area, gap_days,
    )


@dataclass(frozen=True)
class ReconstructResult:
    sr_path: Path
    baseline_path: Path
    trace_path: Path
    metrics_path: Path
    diverged: bool
    iterations_run: int


def run_reconstruct(cfg: ExperimentConfig, *, png_preview: bool = False,
                    gap_days: float | None = None) -> ReconstructResult:
    """Reconstruct cfg.input on the HR grid and evaluate against cfg.reference.

    Always writes the bicubic baseline row next to the solver row, so no
    report lacks a comparator.  Metrics are computed on the clipped-to-[0,1]
    images; the saved reconstruction itself is not clipped.
    """
    lr_path = _require_file(cfg.input, "input image")
    if cfg.denoiser_kind == "external":
        _require_file(cfg.model_path, "model file")
    z = load_image(lr_path)
    m = cfg.forward_model()
    d = make_denoiser(cfg.denoiser_kind, cfg.model_path)

    reference = None
    if cfg.reference is not None:
        reference = load_image(_require_file(cfg.reference, "reference image"))
        want = (z.band_count, z.height * m.s, z.width * m.s)
        if reference.data.shape != want:
            raise ValidationError(
                f"reference shape {reference.data.shape} does not match HR grid {want}"
            )

    report = fb_pnp(z, m, d, cfg.solve_config(reference))
    baseline = bicubic_upsample(z, m.s)

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = lr_path.stem

    sr_path = out_dir / f"{stem}_sr.msr"
    save_image(report.final, sr_path)
    baseline_path = out_dir / f"{stem}_bicubic.msr"
    save_image(baseline, baseline_path)

    trace_rows = []
    for i in range(report.iterations_run):
        trace_rows.append((
            i + 1,
            report.residual_trace[i],
            report.data_fidelity_trace[i],
            report.psnr_trace[i] if report.psnr_trace is not None else None,
        ))
    trace_path = write_csv(out_dir / f"{stem}_trace.csv", TRACE_HEADER, trace_rows)

    sr_eval = _clip01(report.final)
    metrics_rows = [
        _metrics_row(stem, "fb_pnp", sr_eval, reference, cfg.water_threshold, gap_days),
        _metrics_row(stem, "bicubic", _clip01(baseline), reference, cfg.water_threshold, gap_days),
    ]
    metrics_path = write_csv(out_dir / f"{stem}_metrics.csv", METRICS_HEADER, metrics_rows)

    if png_preview:
        save_rgb_png(sr_eval, out_dir / f"{stem}_sr.png")
        mask = threshold_water(ndwi(sr_eval), cfg.water_threshold, pixel_size=sr_eval.pixel_size)
        save_mask_png(mask, out_dir / f"{stem}_sr_mask.png")

    if report.diverged:
        logger.warning("solver diverged after %d iterations", report.iterations_run)
    return ReconstructResult(
        sr_path=sr_path, baseline_path=baseline_path,
        trace_path=trace_path, metrics_path=metrics_path,
        diverged=report.diverged, iterations_run=report.iterations_run,
    )


@dataclass(frozen=True)
class SweepResult:
    grid_path: Path
    best_path: Path | None
    trace_paths: tuple
    all_diverged: bool


def run_sweep(cfg: ExperimentConfig, taus, lambdas, threads: int = 1) -> SweepResult:
    """Grid sweep over tau and lambda with Fig-style per-tau PSNR traces.

    Writes the grid CSV, a one-row best-cell summary (highest PSNR among
    non-diverged cells) and, for the best lambda, one trace CSV per tau.
    """
    lr_path = _require_file(cfg.input, "input image")
    ref_path = _require_file(cfg.reference, "reference image")
    if cfg.denoiser_kind == "external":
        _require_file(cfg.model_path, "model file")
    z = load_image(lr_path)
    reference = load_image(ref_path)
    m = cfg.forward_model()
    d = make_denoiser(cfg.denoiser_kind, cfg.model_path)

    cells = sweep(z, m, d, taus, lambdas, cfg.solve_config(reference), threads=threads)

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid_path = write_csv(
        out_dir / "sweep.csv", SWEEP_HEADER,
        [(c.tau, c.lam, c.iterations, c.final_psnr, c.final_ssim, int(c.diverged)) for c in cells],
    )

    best = best_cell(cells)
    if best is None:
        logger.warning("every sweep cell diverged")
        return SweepResult(grid_path=grid_path, best_path=None, trace_paths=(), all_diverged=True)

    best_path = write_csv(
        out_dir / "best.csv", SWEEP_HEADER,
        [(best.tau, best.lam, best.iterations, best.final_psnr, best.final_ssim, int(best.diverged))],
    )

    trace_paths = []
    for cell in cells:
        if cell.lam != best.lam:
            continue
        rep = cell.report
        rows = [
            (i + 1, rep.residual_trace[i], rep.data_fidelity_trace[i], rep.psnr_trace[i])
            for i in range(rep.iterations_run)
        ]
        trace_paths.append(write_csv(out_dir / f"trace_tau_{cell.tau:g}.csv", TRACE_HEADER, rows))
    return SweepResult(
        grid_path=grid_path, best_path=best_path,
        trace_paths=tuple(trace_paths), all_diverged=False,
    )


def noise_report(img: MultispectralImage):
    """Per-band MAD noise estimates plus their mean, CSV-ready."""
    per_band, mean = estimate_noise_image(img)
    rows = [(name, sigma) for name, sigma in per_band.items()]
    rows.append(("mean", mean))
    return rows
