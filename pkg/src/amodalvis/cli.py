"""Command-line interface.

Subcommands: ``generate`` (synthetic dataset), ``train``, ``infer``,
``eval`` (JSON report plus a plain-text table) and ``render`` (overlay
images).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config
from .dataset_io import read_video, video_dirs, write_dataset
from .metrics import evaluate_dataset
from .pipeline import infer_video, load_model_for_inference, train
from .render import render_overlays
from .synthgen import SceneConfig, generate_dataset
from .tracks import read_predictions, read_tracks, tracks_from_sample, write_tracks

logger = logging.getLogger(__name__)


def cmd_generate(args) -> int:
    config = load_config(args.config)
    gen = config["generate"]
    scene = SceneConfig(
        height=gen["height"], width=gen["width"],
        num_frames=gen["num_frames"],
        num_instances_min=gen["num_instances_min"],
        num_instances_max=gen["num_instances_max"],
        num_categories=gen["num_categories"],
        size_min=gen["size_min"], size_max=gen["size_max"],
        speed_max=gen["speed_max"], bounce=gen["bounce"],
        noise_std=gen["noise_std"], spawn_margin=gen["spawn_margin"])
    samples = generate_dataset(scene, gen["num_videos"], gen["seed"])
    write_dataset(samples, args.out)
    logger.info("wrote %d videos to %s", len(samples), args.out)
    return 0


def cmd_train(args) -> int:
    config = load_config(args.config)
    result = train(config, args.out, resume_from=args.resume)
    logger.info("training done after %d steps; checkpoint: %s",
                len(result.losses), result.checkpoint_path)
    return 0


def _iter_videos(video_path: Path):
    video_path = Path(video_path)
    if (video_path / "manifest.json").exists():
        yield video_path.name, video_path
    else:
        for sub in video_dirs(video_path):
            yield sub.name, sub


def cmd_infer(args) -> int:
    model, config = load_model_for_inference(args.checkpoint)
    out_root = Path(args.out)
    count = 0
    for name, video_dir in _iter_videos(args.video):
        sample = read_video(video_dir)
        tracks = infer_video(model, sample, config)
        height, width = sample.frame_size
        write_tracks(tracks, out_root / name, sample.num_frames,
                     height, width)
        count += 1
        logger.info("video %s: %d tracks kept", name, len(tracks))
    if count == 0:
        logger.warning("no videos found under %s", args.video)
    return 0


def _format_table(report: dict) -> str:
    header = f"{'pass':<10}{'AP':>8}{'AR':>8}{'HOTA':>8}{'IDF1':>8}{'IDs':>6}"
    lines = [header]
    for name in ("visible", "amodal"):
        r = report[name]
        lines.append(
            f"{name:<10}{r['ap']:>8.4f}{r['ar']:>8.4f}{r['hota']:>8.4f}"
            f"{r['idf1']:>8.4f}{r['ids']:>6d}")
    return "\n".join(lines)


def cmd_eval(args) -> int:
    predictions = read_predictions(args.pred)
    preds, gts = [], []
    for name, video_dir in _iter_videos(args.gt):
        sample = read_video(video_dir)
        gts.append(tracks_from_sample(sample))
        preds.append(predictions.get(name, []))
    report = evaluate_dataset(preds, gts, tracking_geometry=args.geometry)
    metrics_path = Path(args.metrics)
    metrics_path.parent.mkdir(parents=True, exist_ok=True)
    metrics_path.write_text(json.dumps(report, indent=2))
    print(_format_table(report))
    logger.info("report written to %s", metrics_path)
    return 0


def cmd_render(args) -> int:
    pred_root = Path(args.pred)
    out_root = Path(args.out)
    for name, video_dir in _iter_videos(args.video):
        sample = read_video(video_dir)
        if (pred_root / "manifest.json").exists():
            tracks = read_tracks(pred_root)
        else:
            tracks = read_tracks(pred_root / name)
        render_overlays(sample.frames, tracks, out_root / name)
        logger.info("rendered %d frames for %s", sample.num_frames, name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amodalvis",
        description="Amodal-aware video instance segmentation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", default=None,
                   help="checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="predict tracks for a video or dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--video", required=True,
                   help="one video directory or a dataset root")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="evaluate predictions against a dataset")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--metrics", required=True,
                   help="output path for the JSON report")
    p.add_argument("--geometry", choices=("box", "mask"), default="box",
                   help="geometry for HOTA/IDF1/IDs")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="write per-frame overlay images")
    p.add_argument("--pred", required=True)
    p.add_argument("--video", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
