"""Command-line surface: synth, train, eval, deblur, superres, calibrate.

Exit codes: 0 success, 1 validation/usage error, 2 runtime failure. All
artifacts are written under --out.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import calibrate as calib
from . import config as cfgmod
from .dataset import (SceneSpec, generate_scene, list_samples, read_frame_dir,
                      read_sample, write_sample)
from .errors import EvrestoreError, ValidationError
from .evaluate import evaluate_split, model_predictor
from .evs_io import read_evs
from .model import NetworkConfig, load_checkpoint, predict_sequence
from .simulator import SimulatorConfig
from .train import TrainConfig, train
from .viz import event_grid, frame_grid


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{message}\n{self.format_usage()}")


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def cmd_synth(args) -> int:
    cfg = cfgmod.load_config(args.config)
    spec = cfgmod.build(SceneSpec, cfg)
    sim = cfgmod.build(SimulatorConfig, cfg)
    train_n, test_n = cfgmod.sample_counts(cfg)
    out = Path(args.out)
    for split_idx, (split, count) in enumerate((("train", train_n), ("test", test_n))):
        for i in range(count):
            seed = _derived_seed(args.seed, split_idx, i)
            sample_sim = dataclasses.replace(sim, seed=seed)
            sample = generate_scene(spec, sample_sim)
            write_sample(out / split / f"sample_{i:04d}", sample,
                         seed=seed, cfg=sample_sim)
    print(f"wrote {train_n} train / {test_n} test samples under {out}")
    return 0


def cmd_train(args) -> int:
    cfg = cfgmod.load_config(args.config)
    net_cfg = cfgmod.build(NetworkConfig, cfg)
    train_cfg = cfgmod.build(TrainConfig, cfg, seed=args.seed)
    data = Path(args.data or args.out)
    dirs = list_samples(data / "train")
    if not dirs:
        raise ValidationError(f"no training samples under {data / 'train'}")
    samples = [read_sample(d) for d in dirs]
    out = Path(args.out)
    _, report = train(samples, net_cfg, train_cfg, out_dir=out / "checkpoints")
    report.write_csv(out / "train_report.csv")
    print(f"trained {train_cfg.epochs} epochs on {len(samples)} samples; "
          f"checkpoints under {out / 'checkpoints'}")
    return 0


def _load_model(args):
    ckpt = args.checkpoint or str(Path(args.out) / "checkpoints" / "final.czn")
    if not Path(ckpt).exists():
        raise ValidationError(f"checkpoint not found: {ckpt}")
    return load_checkpoint(ckpt)


def cmd_eval(args) -> int:
    model = _load_model(args)
    data = Path(args.data or args.out)
    report = evaluate_split(data / args.split, model_predictor(model),
                            delta_t_fraction=model.config.delta_t_fraction,
                            bins=model.config.voxel_bins)
    out = Path(args.out) / "eval"
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "report.csv")
    report.write_summary(out / "summary.txt")
    print(f"evaluated {args.split}: " + "  ".join(
        f"{k}={v:.3f}" for k, v in sorted(report.aggregates.items())))
    return 0


def _predict_sample(args):
    model = _load_model(args)
    sample = read_sample(args.sample)
    seq, tensors = predict_sequence(model, sample.hr_blurry, sample.lr_events,
                                    sample.hr_sharp.timestamps)
    return seq, tensors


def cmd_deblur(args) -> int:
    seq, tensors = _predict_sample(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .dataset import _write_png16
    for i, frame in enumerate(seq.frames):
        _write_png16(out / f"pred_{i:03d}.png", frame)
        np.save(out / f"event_{i:03d}.npy", tensors[i].astype(np.float32))
    if args.grid:
        frame_grid(seq.frames).save(out / "pred_grid.png")
        event_grid(tensors[len(tensors) // 2]).save(out / "event_grid.png")
    print(f"wrote {len(seq)} predicted frames and event tensors to {out}")
    return 0


def cmd_superres(args) -> int:
    _, tensors = _predict_sample(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, tensor in enumerate(tensors):
        np.save(out / f"event_{i:03d}.npy", tensor.astype(np.float32))
    if args.grid:
        event_grid(tensors[len(tensors) // 2]).save(out / "event_grid.png")
    print(f"wrote {len(tensors)} HR event tensors to {out}")
    return 0


def cmd_calibrate(args) -> int:
    stream = read_evs(args.events)
    frames = read_frame_dir(args.frames)
    result = calib.estimate_temporal_offset(stream, frames,
                                            args.search_us, args.step_us)
    homography = np.eye(3)
    if args.matches:
        pairs = np.loadtxt(args.matches, delimiter=",", ndmin=2)
        spatial = calib.estimate_homography(pairs[:, :2], pairs[:, 2:4],
                                            seed=args.seed)
        homography = spatial.homography
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "calibration.txt", "w") as f:
        f.write("homography = " + " ".join(f"{v:.9g}" for v in homography.ravel()) + "\n")
        f.write(f"offset_us = {result.temporal_offset_us}\n")
        f.write(f"score = {result.score:.6f}\n")
    print(f"offset_us={result.temporal_offset_us} score={result.score:.4f}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="evrestore",
                     description="Joint motion deblurring and event super-resolution")
    common = _Parser(add_help=False)
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--seed", type=int, default=0)

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="train a model")
    p.add_argument("--config", required=True)
    p.add_argument("--data", help="dataset root (defaults to --out)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p.add_argument("--config")
    p.add_argument("--data", help="dataset root (defaults to --out)")
    p.add_argument("--checkpoint")
    p.add_argument("--split", default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("deblur", parents=[common],
                       help="deblur one sample into latent frames + event tensors")
    p.add_argument("--sample", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--grid", action="store_true", help="also write PNG grids")
    p.set_defaults(func=cmd_deblur)

    p = sub.add_parser("superres", parents=[common],
                       help="predict HR event tensors only")
    p.add_argument("--sample", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--grid", action="store_true")
    p.set_defaults(func=cmd_superres)

    p = sub.add_parser("calibrate", parents=[common],
                       help="spatio-temporal calibration of events to frames")
    p.add_argument("--events", required=True, help=".evs event file")
    p.add_argument("--frames", required=True, help="frame directory")
    p.add_argument("--search-us", type=int, required=True)
    p.add_argument("--step-us", type=int, required=True)
    p.add_argument("--matches", help="optional CSV of x1,y1,x2,y2 point matches")
    p.set_defaults(func=cmd_calibrate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EvrestoreError, OSError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
