"""Command-line entry point: train on a crop directory, export the archive.

Exit codes follow the consumer toolkit's convention: 2 validation, 3 training
divergence, 4 unreadable files.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

from .archive import export_weights
from .data import build_pairs
from .errors import FormatError, TrainingError, ValidationError
from .model import NetworkArch
from .train import TrainConfig, desk_preset, full_preset, train, write_loss_curve

_PRESETS = {"desk": desk_preset, "full": full_preset}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pnpsr-train",
        description="Train a residual U-net denoiser on clean MSR crops and "
                    "export portable weights.",
    )
    p.add_argument("--crops", required=True, help="directory of clean .msr crops")
    p.add_argument("--out", required=True, help="output weights archive path (.npz)")
    p.add_argument("--losses", help="optional loss-curve CSV path")
    p.add_argument("--preset", choices=sorted(_PRESETS), default="desk")
    for f in fields(TrainConfig):
        flag = "--" + f.name.replace("_", "-")
        p.add_argument(flag, type=type(f.default), default=None,
                       help=f"override preset {f.name}")
    p.add_argument("--scales", type=int, default=None, help="network scale count")
    p.add_argument("--base-width", type=int, default=None, help="channels at the top scale")
    p.add_argument("--blocks", type=int, default=None, help="residual blocks per stage")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {
            f.name: getattr(args, f.name)
            for f in fields(TrainConfig) if getattr(args, f.name) is not None
        }
        cfg = _PRESETS[args.preset](**overrides)
        arch_kw = {
            k: getattr(args, k)
            for k in ("scales", "base_width", "blocks") if getattr(args, k) is not None
        }
        arch = NetworkArch(**arch_kw)
        pairs = build_pairs(args.crops, cfg.noise_sigma, cfg.seed)
        result = train(cfg, pairs, arch)
        export_weights(args.out, result.weights, arch.scales, arch.base_width, arch.blocks)
        if args.losses:
            write_loss_curve(args.losses, result.losses)
        print(f"wrote {args.out} (final loss {result.losses[-1]:.6g})")
        return 0
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except TrainingError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (FormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
