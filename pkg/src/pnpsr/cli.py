"""Command-line front end.

Subcommands cover the full experiment cycle: synthetic degradation,
calibration, pairing, reconstruction, baselines, evaluation, and parameter
sweeps.  Settings resolve in three layers: built-in defaults, then the
--config file, then explicit flags.

Exit codes: 0 success, 2 validation error, 3 solver divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .calibrate import PairedSample, calibrate_kernel, pair_by_time
from .errors import FormatError, ValidationError
from .forward import save_kernel
from .metrics import (
    bicubic_upsample,
    ndwi,
    save_mask_png,
    threshold_water,
    water_area,
)
from .raster import load_image, save_image, save_plane_png, save_rgb_png
from .workflows import (
    METRICS_HEADER,
    ExperimentConfig,
    _clip01,
    _metrics_row,
    _require_file,
    load_config,
    make_synthetic,
    noise_report,
    read_csv,
    run_reconstruct,
    run_sweep,
    write_csv,
)

logger = logging.getLogger("pnpsr")


def _float_list(text: str):
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list: {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty number list")
    return values


def _experiment_config(args, **overrides) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out_dir is not None:
        updates["out_dir"] = args.out_dir
    for key, value in overrides.items():
        if value is not None:
            updates[key] = value
    return replace(cfg, **updates) if updates else cfg


def _solver_overrides(args) -> dict:
    return {
        "kernel_size": args.kernel_size,
        "kernel_sigma": args.kernel_sigma,
        "scale": args.scale,
        "noise_sigma": args.noise_sigma,
        "boundary": args.boundary,
        "denoiser_kind": args.denoiser,
        "model_path": args.model,
        "tau": args.tau,
        "lam": args.lam,
        "max_iters": args.max_iters,
        "tol": args.tol,
        "init": args.init,
        "water_threshold": args.water_threshold,
    }


def _add_solver_flags(p):
    p.add_argument("--denoiser", choices=("identity", "wavelet_soft", "tv_prox", "external"))
    p.add_argument("--model", help="weights file for --denoiser external")
    p.add_argument("--tau", type=float, help="step size")
    p.add_argument("--lambda", dest="lam", type=float, help="regularization weight")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--tol", type=float, help="relative fixed-point residual tolerance")
    p.add_argument("--init", choices=("adjoint", "bicubic", "zeros"))
    p.add_argument("--water-threshold", type=float, help="NDWI water threshold")


def _add_forward_flags(p):
    p.add_argument("--kernel-size", type=int)
    p.add_argument("--kernel-sigma", type=float)
    p.add_argument("--scale", type=int, help="super-resolution factor s")
    p.add_argument("--noise-sigma", type=float)
    p.add_argument("--boundary", choices=("reflective", "zero"))


def _cmd_degrade(args) -> int:
    cfg = _experiment_config(
        args, kernel_size=args.kernel_size, kernel_sigma=args.kernel_sigma,
        scale=args.scale, noise_sigma=args.noise_sigma, boundary=args.boundary,
    )
    manifest = make_synthetic(args.hr_dir, cfg.forward_model(), cfg.seed, cfg.out_dir)
    print(f"wrote {manifest}")
    return 0


def _cmd_calibrate_kernel(args) -> int:
    cfg = _experiment_config(args, kernel_size=args.kernel_size, scale=args.scale,
                             boundary=args.boundary)
    manifest = _require_file(args.pairs, "pairs manifest")
    base = manifest.parent
    pairs = []
    for row in read_csv(manifest):
        if "hr_path" not in row or "lr_path" not in row:
            raise ValidationError(f"{manifest}: expected hr_path,lr_path columns")
        hr = load_image(base / row["hr_path"])
        lr = load_image(base / row["lr_path"])
        pairs.append(PairedSample(hr=hr, lr=lr))
    if not pairs:
        raise ValidationError(f"{manifest}: no pairs listed")
    kernel, residuals = calibrate_kernel(
        pairs, cfg.kernel_size, args.sigma_grid, cfg.scale, boundary=cfg.boundary,
    )
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_kernel(kernel, out_dir / "kernel.txt")
    write_csv(out_dir / "calibration.csv", ("sigma", "residual"), residuals)
    print(f"calibrated sigma={kernel.sigma:g} over {len(pairs)} pairs; wrote {out_dir / 'kernel.txt'}")
    return 0


def _cmd_estimate_noise(args) -> int:
    cfg = _experiment_config(args)
    img = load_image(_require_file(args.input, "input image"))
    rows = noise_report(img)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = write_csv(out_dir / f"{Path(args.input).stem}_noise.csv", ("band", "sigma"), rows)
    mean = rows[-1][1]
    print(f"estimated noise sigma={mean:.6g}; wrote {path}")
    return 0


def _read_timestamp_manifest(path):
    manifest = _require_file(path, "manifest")
    entries = []
    for row in read_csv(manifest):
        if "id" not in row or "timestamp" not in row:
            raise ValidationError(f"{manifest}: expected id,timestamp columns")
        entries.append((row["id"], row["timestamp"]))
    return entries


def _cmd_pair(args) -> int:
    cfg = _experiment_config(args)
    result = pair_by_time(
        _read_timestamp_manifest(args.hr_manifest),
        _read_timestamp_manifest(args.lr_manifest),
        args.max_gap_days,
    )
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = write_csv(out_dir / "pairs.csv", ("hr_id", "lr_id", "gap_days"), result.pairs)
    for side, ids in (("HR", result.unmatched_hr), ("LR", result.unmatched_lr)):
        if ids:
            logger.warning("%d unmatched %s ids: %s", len(ids), side, ", ".join(ids))
    print(f"paired {len(result.pairs)} images within {args.max_gap_days:g} days; wrote {path}")
    return 0


def _cmd_superres(args) -> int:
    cfg = _experiment_config(args, input=args.input, reference=args.reference,
                             **_solver_overrides(args))
    result = run_reconstruct(cfg, png_preview=args.png_preview, gap_days=args.gap_days)
    print(f"wrote {result.sr_path} ({result.iterations_run} iterations"
          f"{', diverged' if result.diverged else ''})")
    return 3 if result.diverged else 0


def _cmd_baseline(args) -> int:
    cfg = _experiment_config(args, input=args.input, reference=args.reference,
                             scale=args.scale, water_threshold=args.water_threshold)
    z = load_image(_require_file(cfg.input, "input image"))
    reference = load_image(_require_file(cfg.reference, "reference image")) if cfg.reference else None
    up = bicubic_upsample(z, cfg.scale)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(cfg.input).stem
    out_path = out_dir / f"{stem}_bicubic.msr"
    save_image(up, out_path)
    row = _metrics_row(stem, "bicubic", _clip01(up), reference, cfg.water_threshold, None)
    write_csv(out_dir / f"{stem}_bicubic_metrics.csv", METRICS_HEADER, [row])
    if args.png_preview:
        save_rgb_png(_clip01(up), out_dir / f"{stem}_bicubic.png")
    print(f"wrote {out_path}")
    return 0


def _cmd_metrics(args) -> int:
    cfg = _experiment_config(args, input=args.input, reference=args.reference,
                             water_threshold=args.water_threshold)
    img = load_image(_require_file(cfg.input, "input image"))
    reference = load_image(_require_file(cfg.reference, "reference image")) if cfg.reference else None
    stem = Path(cfg.input).stem
    row = _metrics_row(stem, args.method, _clip01(img), reference, cfg.water_threshold, args.gap_days)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = write_csv(out_dir / f"{stem}_metrics.csv", METRICS_HEADER, [row])
    print(f"wrote {path}")
    return 0


def _cmd_ndwi(args) -> int:
    cfg = _experiment_config(args, water_threshold=args.water_threshold)
    img = load_image(_require_file(args.input, "input image"))
    plane = ndwi(img)
    mask = threshold_water(plane, cfg.water_threshold, pixel_size=img.pixel_size)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    save_plane_png(plane, out_dir / f"{stem}_ndwi.png")
    save_mask_png(mask, out_dir / f"{stem}_mask.png")
    area = water_area(mask)
    path = write_csv(
        out_dir / f"{stem}_water.csv",
        ("image_id", "threshold", "water_area_m2"),
        [(stem, cfg.water_threshold, area)],
    )
    print(f"water area {area:g} m^2 at threshold {cfg.water_threshold:g}; wrote {path}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _experiment_config(args, input=args.input, reference=args.reference,
                             **_solver_overrides(args))
    result = run_sweep(cfg, args.taus, args.lambdas, threads=args.threads)
    if result.all_diverged:
        print("every sweep cell diverged", file=sys.stderr)
        return 3
    print(f"wrote {result.grid_path} and {result.best_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pnpsr",
        description="Multispectral super-resolution: forward model, FB-PnP solver, evaluation.",
    )
    p.add_argument("--config", help="experiment config file (INI)")
    p.add_argument("--seed", type=int, help="override the experiment seed")
    p.add_argument("--threads", type=int, default=1, help="parallel sweep cells")
    p.add_argument("--out-dir", help="output directory")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("degrade", help="apply the forward model to a directory of HR images")
    sp.add_argument("--hr-dir", required=True)
    _add_forward_flags(sp)
    sp.set_defaults(func=_cmd_degrade)

    sp = sub.add_parser("calibrate-kernel", help="grid-search the blur kernel width on HR/LR pairs")
    sp.add_argument("--pairs", required=True, help="CSV with hr_path,lr_path columns")
    sp.add_argument("--sigma-grid", type=_float_list, required=True,
                    help="comma-separated candidate sigmas")
    sp.add_argument("--kernel-size", type=int)
    sp.add_argument("--scale", type=int)
    sp.add_argument("--boundary", choices=("reflective", "zero"))
    sp.set_defaults(func=_cmd_calibrate_kernel)

    sp = sub.add_parser("estimate-noise", help="wavelet MAD noise estimate per band")
    sp.add_argument("--input", required=True)
    sp.set_defaults(func=_cmd_estimate_noise)

    sp = sub.add_parser("pair", help="match HR and LR acquisitions by timestamp")
    sp.add_argument("--hr-manifest", required=True, help="CSV with id,timestamp columns")
    sp.add_argument("--lr-manifest", required=True, help="CSV with id,timestamp columns")
    sp.add_argument("--max-gap-days", type=float, default=3.0)
    sp.set_defaults(func=_cmd_pair)

    sp = sub.add_parser("superres", help="FB-PnP reconstruction of one LR image")
    sp.add_argument("--input", required=True)
    sp.add_argument("--reference", help="HR truth for PSNR/SSIM")
    sp.add_argument("--gap-days", type=float, help="acquisition gap to record")
    sp.add_argument("--png-preview", action="store_true")
    _add_forward_flags(sp)
    _add_solver_flags(sp)
    sp.set_defaults(func=_cmd_superres)

    sp = sub.add_parser("baseline", help="bicubic upsampling baseline")
    sp.add_argument("--input", required=True)
    sp.add_argument("--reference")
    sp.add_argument("--scale", type=int)
    sp.add_argument("--water-threshold", type=float)
    sp.add_argument("--png-preview", action="store_true")
    sp.set_defaults(func=_cmd_baseline)

    sp = sub.add_parser("metrics", help="evaluate one image against a reference")
    sp.add_argument("--input", required=True)
    sp.add_argument("--reference")
    sp.add_argument("--method", default="input", help="method label for the CSV row")
    sp.add_argument("--gap-days", type=float)
    sp.add_argument("--water-threshold", type=float)
    sp.set_defaults(func=_cmd_metrics)

    sp = sub.add_parser("ndwi", help="NDWI plane, water mask, and area")
    sp.add_argument("--input", required=True)
    sp.add_argument("--water-threshold", type=float)
    sp.set_defaults(func=_cmd_ndwi)

    sp = sub.add_parser("sweep", help="tau x lambda grid sweep with traces")
    sp.add_argument("--input", required=True)
    sp.add_argument("--reference", required=True)
    sp.add_argument("--taus", type=_float_list, required=True)
    sp.add_argument("--lambdas", type=_float_list, required=True)
    _add_forward_flags(sp)
    _add_solver_flags(sp)
    sp.set_defaults(func=_cmd_sweep)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (FormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
