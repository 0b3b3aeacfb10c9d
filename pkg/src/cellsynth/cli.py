"""Command-line entry points.

Subcommands: ``estimate`` (transition model from a stage CSV),
``build-ssm`` (shape models from mask directories), ``ingest`` (all three
models from annotated snippets), ``simulate`` (run a config and export the
dataset), ``export-conditioning`` (conditioning triplets and optional
procedural target patches for external texture training) and ``preview``
(frame montage). Exit code 0 on success, 2 on any validation error.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys

from . import dataset_io
from . import shapes as sh
from . import stages as st
from .population import SimConfig, iter_conditionings, simulate
from .textures import (
    ProceduralTextureProvider,
    save_patches,
    write_conditioning_triplet,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellsynth",
        description="Synthetic 2D+t microscopy sequences of cell nuclei "
        "with full ground truth.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate a stage transition model")
    p.add_argument("--csv", required=True, help="stage CSV, one row per cell")
    p.add_argument("--out", required=True, help="output transition JSON")

    p = sub.add_parser("build-ssm", help="build shape models from mask PNGs")
    p.add_argument(
        "--masks", required=True,
        help="directory with stage1/..stage6/ subdirectories of mask PNGs",
    )
    p.add_argument("--out", required=True, help="output shape model JSON")

    p = sub.add_parser("ingest", help="estimate all models from snippets")
    p.add_argument("--snippets", required=True, help="cellCCC_tTTT.png directory")
    p.add_argument("--csv", required=True, help="stage CSV, one row per cell")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("simulate", help="run a simulation and export it")
    p.add_argument("--config", required=True, help="SimConfig JSON")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--out", required=True, help="output dataset directory")

    p = sub.add_parser(
        "export-conditioning",
        help="emit conditioning triplets (and optional procedural targets)",
    )
    p.add_argument("--config", required=True, help="SimConfig JSON")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--targets", action="store_true",
        help="also write procedural texture patches under targets/",
    )

    p = sub.add_parser("preview", help="montage selected frames of a dataset")
    p.add_argument("--dataset", required=True, help="exported dataset directory")
    p.add_argument("--frames", required=True, help="comma-separated frame indices")
    p.add_argument("--out", default=None, help="montage path (default in dataset)")
    return parser


def _load_config(args) -> SimConfig:
    config = SimConfig.load(args.config)
    if args.seed is not None:
        config.seed = args.seed
    return config


def _cmd_estimate(args) -> int:
    model = st.estimate_transition_model(st.read_stage_csv(args.csv))
    model.save(args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_build_ssm(args) -> int:
    from .pngio import read_gray

    models = {}
    for stage in range(1, st.N_STAGES + 1):
        stage_dir = os.path.join(args.masks, f"stage{stage}")
        paths = sorted(glob.glob(os.path.join(stage_dir, "*.png")))
        shapes_ = [sh.extract_landmarks(read_gray(p) > 0) for p in paths]
        if len(shapes_) >= 2:
            models[stage] = sh.build_shape_model(shapes_, stage)
        else:
            print(f"stage {stage}: {len(shapes_)} masks, skipped", file=sys.stderr)
    if not models:
        raise ValueError(f"no stage in {args.masks} had enough masks")
    sh.save_shape_models(models, args.out)
    print(f"wrote {args.out} ({len(models)} stage models)")
    return 0


def _cmd_ingest(args) -> int:
    transition, models, table = dataset_io.ingest_annotated(args.snippets, args.csv)
    os.makedirs(args.out, exist_ok=True)
    transition.save(os.path.join(args.out, "transition.json"))
    sh.save_shape_models(models, os.path.join(args.out, "ssm.json"))
    with open(os.path.join(args.out, "intensity.json"), "w") as fh:
        json.dump(table.to_dict(), fh, indent=2, sort_keys=True)
    print(f"wrote transition.json, ssm.json, intensity.json to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    config = _load_config(args)
    result = simulate(config)
    manifest = dataset_io.export_dataset(result, args.out)
    print(
        f"wrote {manifest.frame_count} frames, {manifest.cell_count} tracks "
        f"to {args.out}"
    )
    return 0


def _cmd_export_conditioning(args) -> int:
    config = _load_config(args)
    result = simulate(config)
    os.makedirs(args.out, exist_ok=True)
    n = 0
    targets = {}
    provider = ProceduralTextureProvider()
    for key, cond in iter_conditionings(result):
        write_conditioning_triplet(args.out, key, cond)
        if args.targets:
            targets[key] = provider(cond).image
        n += 1
    if args.targets:
        save_patches(os.path.join(args.out, "targets"), targets)
    print(f"wrote {n} conditioning triplets to {args.out}")
    return 0


def _cmd_preview(args) -> int:
    frames = [int(v) for v in args.frames.split(",") if v.strip() != ""]
    if not frames:
        raise ValueError("no frames given")
    out = args.out or os.path.join(args.dataset, "montage.png")
    dataset_io.preview_montage(args.dataset, frames, out)
    print(f"wrote {out}")
    return 0


_COMMANDS = {
    "estimate": _cmd_estimate,
    "build-ssm": _cmd_build_ssm,
    "ingest": _cmd_ingest,
    "simulate": _cmd_simulate,
    "export-conditioning": _cmd_export_conditioning,
    "preview": _cmd_preview,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
