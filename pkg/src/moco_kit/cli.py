"""``moco`` command line: curate, synth, pretrain, train, generate, eval."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import MocoError


def _print_table(rows: dict) -> None:
    from .report import format_summary
    sys.stdout.write(format_summary(rows))


def cmd_curate(args) -> int:
    from .curation import build_manifest
    records = build_manifest(args.corpus, args.out, args.threshold)
    accepted = sum(r.accepted for r in records)
    _print_table({"clips": len(records), "accepted": accepted,
                  "rejected": len(records) - accepted, "manifest": args.out})
    return 0


def cmd_synth(args) -> int:
    from .trainkit.corpus import OVERFIT_MOTIONS, OVERFIT_SEED, make_synthetic_corpus
    motions = OVERFIT_MOTIONS if args.overfit else None
    n = len(OVERFIT_MOTIONS) if args.overfit else args.clips
    seed = args.seed if args.seed is not None else (OVERFIT_SEED if args.overfit else 0)
    manifest = make_synthetic_corpus(n, seed, args.out, motions=motions)
    _print_table({"clips": n, "manifest": manifest})
    return 0


def _load_config(path):
    from .trainkit.config import TrainConfig, desk_config
    return TrainConfig.load(path) if path else desk_config()


def cmd_pretrain(args) -> int:
    from .trainkit.loop import pretrain_base
    config = _load_config(args.config)
    pretrain_base(config, args.out, corpus_dir=args.corpus_dir)
    _print_table({"base_checkpoint": args.out})
    return 0


def cmd_train(args) -> int:
    from dataclasses import replace

    from .report import loss_reduction
    from .trainkit.loop import train
    config = _load_config(args.config)
    if args.base_checkpoint:
        config = replace(config, base_checkpoint=args.base_checkpoint)

    def progress(step, row):
        if step % args.log_every == 0:
            logging.info("step %d total %.5f l_d %.5f l_m %.4f l_track %.4f", step, row["total"],
                         row["l_d"], row["l_m"], row["l_track"])

    result = train(config, args.manifest, out_dir=args.out, progress=progress)
    rows = {"steps": len(result.metrics), "checkpoint": Path(args.out) / "checkpoint.pt"}
    if result.metrics:
        rows["final_total"] = result.metrics[-1]["total"]
        try:
            rows["loss_ratio"] = loss_reduction(result.metrics).ratio
        except ValueError:
            pass
    _print_table(rows)
    return 0


def cmd_generate(args) -> int:
    import numpy as np

    from .motion import write_keypoints
    from .pipeline import generate_from_prompt
    from .render import export_png_frames, save_array
    from .trainkit.checkpoint import load_checkpoint
    model, config, schedule, _ = load_checkpoint(args.checkpoint)
    model.eval()
    clip = generate_from_prompt(model, schedule, args.prompt, args.motion_prompt, args.seed,
                                config.fps, mode=config.sampler)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    export_png_frames(clip.video, out / "frames")
    export_png_frames(clip.skeleton, out / "skeleton")
    save_array(out / "video.npy", clip.video.astype(np.float32))
    write_keypoints(out / "keypoints.json", clip.keypoints)
    _print_table({"prompt": clip.prompt, "motion_prompt": clip.motion_prompt,
                  "motion_id": clip.motion_id, "frames": clip.video.shape[0], "out": out})
    return 0


def cmd_eval(args) -> int:
    from .report import evaluate_run
    summary = evaluate_run(args.run, seed=args.seed)
    _print_table(summary)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="moco", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("curate", help="filter a clip corpus into a JSONL manifest")
    c.add_argument("--corpus", required=True, help="directory with one subdirectory per clip")
    c.add_argument("--out", required=True, help="manifest path")
    c.add_argument("--threshold", type=float, default=0.1, help="minimum average keypoint offset")
    c.set_defaults(func=cmd_curate)

    s = sub.add_parser("synth", help="write a synthetic clip corpus and its manifest")
    s.add_argument("--out", required=True)
    s.add_argument("--clips", type=int, default=8)
    s.add_argument("--seed", type=int, help="default 0, or the fixed overfit seed with --overfit")
    s.add_argument("--overfit", action="store_true",
                   help="the fixed 8 + 2 clip overfit set (ignores --clips)")
    s.set_defaults(func=cmd_synth)

    b = sub.add_parser("pretrain", help="fit the frozen base model (autoencoder, text, backbone)")
    b.add_argument("--config")
    b.add_argument("--out", required=True, help="base checkpoint path")
    b.add_argument("--corpus-dir", help="where to write the pretraining corpus")
    b.set_defaults(func=cmd_pretrain)

    t = sub.add_parser("train", help="train the structure branch and HADC")
    t.add_argument("--config")
    t.add_argument("--manifest", required=True)
    t.add_argument("--out", required=True, help="run directory")
    t.add_argument("--base-checkpoint", help="overrides base_checkpoint from the config")
    t.add_argument("--log-every", type=int, default=50)
    t.set_defaults(func=cmd_train)

    g = sub.add_parser("generate", help="prompt → skeleton → guided video")
    g.add_argument("--checkpoint", required=True)
    g.add_argument("--prompt", required=True)
    g.add_argument("--motion-prompt")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="generated")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("eval", help="figures and metrics summary for a run directory")
    e.add_argument("--run", required=True)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (MocoError, OSError, KeyError, ValueError) as exc:
        print(f"moco {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
