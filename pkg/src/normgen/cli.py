"""Command-line interface.

Subcommands: dataset, mask, train, infer, eval. Every run is deterministic
under a fixed --seed with noise_mode off.

Exit codes:
    0  success
    2  usage error or missing input file
    3  data/processing error (bad image, invalid config, dataset problem)
    4  unexpected internal error
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .codec import load_gray_png, load_normal_png, save_gray_png, save_normal_png
from .config import parse_config_file, resolve
from .curvature import sample_hints, write_mask_sidecar
from .dataset import build_dataset, load_manifest
from .errors import NormgenError
from .metrics import evaluate_run, report_table, write_report
from .models import load_checkpoint
from .shapes import ShapeSpec
from .training import TrainConfig, default_model_configs, generate_normal_map, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def _load_specs(path: Path, size: int):
    if not path.is_file():
        raise FileNotFoundError(f"spec file not found: {path}")
    raw = json.loads(path.read_text(encoding="utf-8"))
    specs = []
    for entry in raw:
        entry = dict(entry)
        entry.setdefault("size", size)
        for key in ("center", "p0", "p1"):
            if key in entry:
                entry[key] = tuple(entry[key])
        if "spheres" in entry:
            entry["spheres"] = tuple(tuple(s) for s in entry["spheres"])
        specs.append(ShapeSpec(**entry))
    return specs


def cmd_dataset(args) -> int:
    specs = _load_specs(Path(args.specs), args.size)
    manifest = build_dataset(
        specs, args.out, seed=args.seed, keep_prob=args.keep_prob,
        val_every=args.val_every,
    )
    n_train = len(manifest.ids("train"))
    n_val = len(manifest.ids("val"))
    print(f"wrote {len(manifest.entries)} pairs ({n_train} train, {n_val} val) "
          f"to {manifest.path()}")
    return EXIT_OK


def cmd_mask(args) -> int:
    nmap = load_normal_png(args.normal)
    mask = sample_hints(nmap, keep_prob=args.keep_prob, seed=args.seed,
                        t_hi=args.t_hi, t_lo=args.t_lo)
    out = Path(args.out)
    save_gray_png(out, mask.to_byte_image())
    write_mask_sidecar(out.with_suffix(".txt"), mask, args.t_hi, args.t_lo)
    print(f"wrote {out} ({int(mask.bits.sum())} hint pixels)")
    return EXIT_OK


# (key, flag, help) registry used for both flag construction and --help
_TRAIN_KEYS = [
    ("lambda_l1", "--lambda-l1", "weight of the L1 reconstruction term"),
    ("lambda_mask", "--lambda-mask", "weight of the hint-mask term"),
    ("learning_rate", "--learning-rate", "RMSProp learning rate"),
    ("clip_c", "--clip-c", "critic weight-clipping bound"),
    ("critic_steps_per_gen", "--critic-steps-per-gen", "critic updates per generator update"),
    ("batch_size", "--batch-size", "training batch size"),
    ("max_iterations", "--max-iterations", "generator steps to run"),
    ("seed", "--seed", "global RNG seed (env NORMGEN_SEED is the lowest-priority source)"),
    ("noise_mode", "--noise-mode", "off | dropout"),
    ("composite_scope", "--composite-scope", "critic_only | everywhere"),
    ("checkpoint_interval", "--checkpoint-interval", "iterations between checkpoints"),
    ("augment", "--augment", "enable horizontal-flip augmentation"),
    ("depth", "--depth", "U-Net layer count (even; 16 for 256px, 12 for 64px)"),
    ("base_channels", "--base-channels", "channels of the first encoder block"),
]


def _train_defaults() -> dict:
    defaults = asdict(TrainConfig())
    defaults.pop("rmsprop_alpha")
    defaults.pop("rmsprop_eps")
    defaults["depth"] = 16
    defaults["base_channels"] = 64
    return defaults


def cmd_train(args) -> int:
    file_values = parse_config_file(args.config) if args.config else {}
    flag_values = {key: getattr(args, key) for key, _, _ in _TRAIN_KEYS}
    run_cfg = resolve(_train_defaults(), file_values, flag_values)
    print(run_cfg.describe())

    manifest = load_manifest(args.data)
    depth = run_cfg["depth"]
    base = run_cfg["base_channels"]
    gen_cfg, disc_cfg = default_model_configs(depth=depth, base_channels=base)
    train_kwargs = {k: v for k, v in run_cfg.values.items()
                    if k not in ("depth", "base_channels")}
    state = train(manifest, gen_cfg, disc_cfg, TrainConfig(**train_kwargs),
                  args.run_dir, resume_from=args.resume)
    print(f"finished at iteration {state.iteration}; artifacts in {args.run_dir}")
    return EXIT_OK


def cmd_infer(args) -> int:
    generator, _, _ = load_checkpoint(args.checkpoint)
    sketch = load_gray_png(args.sketch)
    hint_bits = None
    if not args.no_mask:
        hint_bits = load_gray_png(args.mask) > 127
    out = generate_normal_map(generator, sketch, hint_bits)
    save_normal_png(args.out, out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    names = args.names.split(",") if args.names else None
    if names and len(names) != len(args.dirs):
        raise NormgenError("--names must list one name per method directory")
    method_dirs = {
        (names[i] if names else Path(d).name or f"method{i}"): d
        for i, d in enumerate(args.dirs)
    }
    reports = evaluate_run(manifest, method_dirs, split=args.split,
                           write_error_maps=args.error_maps)
    print(report_table(reports))
    if args.report:
        write_report(reports, args.report)
        print(f"report written to {args.report}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="normgen",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"normgen {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset", help="render a synthetic paired dataset")
    p.add_argument("specs", help="JSON file with a list of shape specs")
    p.add_argument("out", help="output dataset directory")
    p.add_argument("--size", type=int, default=64, help="image size in pixels (default 64)")
    p.add_argument("--seed", type=int, default=0, help="global dataset seed (default 0)")
    p.add_argument("--keep-prob", type=float, default=0.05,
                   help="hint dropout keep probability (default 0.05)")
    p.add_argument("--val-every", type=int, default=5,
                   help="assign every Nth pair to validation; 0 disables (default 5)")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("mask", help="preview the hint mask for one normal map")
    p.add_argument("normal", help="normal map PNG")
    p.add_argument("out", help="output mask PNG (sidecar .txt written alongside)")
    p.add_argument("--keep-prob", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-hi", type=int, default=127, help="upper curvature threshold (default 127)")
    p.add_argument("--t-lo", type=int, default=126, help="lower curvature threshold (default 126)")
    p.set_defaults(func=cmd_mask)

    defaults = _train_defaults()
    p = sub.add_parser(
        "train", help="run adversarial training",
        description="Train the generator/critic pair. Flags override config-file "
                    "values, which override NORMGEN_SEED and built-in defaults.",
    )
    p.add_argument("--data", required=True, help="dataset directory or manifest.tsv")
    p.add_argument("--run-dir", required=True, help="output directory for checkpoints/losses")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--resume", help="checkpoint to resume from")
    for key, flag, help_text in _TRAIN_KEYS:
        default = defaults[key]
        if isinstance(default, bool):
            p.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction,
                           default=None, help=f"{help_text} (default {default})")
        else:
            p.add_argument(flag, dest=key, type=str, default=None,
                           help=f"{help_text} (default {default})")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="generate a normal map from a sketch")
    p.add_argument("checkpoint", help="training checkpoint file")
    p.add_argument("sketch", help="sketch PNG (0 = stroke)")
    p.add_argument("out", help="output normal map PNG")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--mask", help="hint mask PNG (set bits = 255)")
    group.add_argument("--no-mask", action="store_true",
                       help="feed an all-zero hint channel")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score generated normal maps against ground truth")
    p.add_argument("manifest", help="dataset directory or manifest.tsv")
    p.add_argument("dirs", nargs="+", help="one directory of <pair_id>.png per method")
    p.add_argument("--names", help="comma-separated method names matching dirs")
    p.add_argument("--split", default="val", choices=("train", "val", "all"),
                   help="pair set to score (default val; falls back to all if empty)")
    p.add_argument("--report", help="write a TSV report to this path")
    p.add_argument("--error-maps", action="store_true",
                   help="write per-pair angular error heatmaps next to the images")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NormgenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
