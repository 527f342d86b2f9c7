"""Base-model pretraining stand-in and the guided training loop."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import torch

from ..diffusion.schedule import forward_noise, loss_noise
from ..diffusion.vae import fit_autoencoder
from ..errors import NonFiniteLoss
from ..model import MoCoModel, apply_freeze_plan
from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig
from .corpus import flat_color_clips, make_synthetic_corpus
from .data import BatchOrder, attach_gt_tracks, encode_clips, load_manifest_clips
from .losses import Batch, LossWeights, total_loss

log = logging.getLogger(__name__)

BASE_PREFIXES = ("text.", "vae.", "backbone.")


def _seed_all(seed: int) -> torch.Generator:
    torch.manual_seed(seed)
    return torch.Generator().manual_seed(seed)


def pretrain_base(config: TrainConfig, out_path, corpus_dir=None, manifest=None,
                  progress=None) -> MoCoModel:
    """Fit the parts that stay frozen later: autoencoder, text table and backbone.

    Stands in for a pretrained text-to-video base model. The backbone is
    trained on text-conditioned noise prediction over a separate synthetic
    corpus covering every motion class; the structure branch is then
    initialized as a copy of its first blocks.
    """
    gen = _seed_all(config.seed)
    if manifest is None:
        if corpus_dir is None:
            corpus_dir = Path(out_path).parent / "base_corpus"
        manifest = make_synthetic_corpus(config.pretrain_clips, config.pretrain_seed, corpus_dir,
                                         frames=config.frames, fps=config.fps,
                                         size=config.resolution)
    clips = load_manifest_clips(manifest, accepted_only=False)
    model = MoCoModel(config.model_config())
    if config.vae_mode == "learned_small":
        # only videos are ever decoded; flat clips keep uniform regions exact
        flat = flat_color_clips(len(clips) // 3, config.pretrain_seed, config.frames,
                                config.resolution)
        videos = torch.cat([torch.stack([c.video for c in clips]),
                            torch.from_numpy(flat).to(clips[0].video.dtype)])
        losses = fit_autoencoder(model.vae, videos, steps=config.vae_steps,
                                 batch_size=config.batch_size, seed=config.seed)
        log.info("autoencoder fit: final mse %.5f", losses[-1] if losses else float("nan"))
    enc = encode_clips(model, clips)
    schedule = config.schedule()
    params = list(model.text.parameters()) + list(model.backbone.parameters())
    opt = torch.optim.AdamW(params, lr=config.pretrain_learning_rate,
                            weight_decay=config.weight_decay)
    sched = torch.optim.lr_scheduler.LambdaLR(
        opt, lambda i: 0.5 * (1 + math.cos(math.pi * min(i, config.pretrain_steps)
                                           / max(config.pretrain_steps, 1))))
    order = BatchOrder(len(clips), config.batch_size, config.seed)
    for step in range(config.pretrain_steps):
        idx = order.batch(step)
        z0 = enc.latents[idx]
        t = torch.randint(1, schedule.steps + 1, (len(idx),), generator=gen)
        eps = torch.randn(z0.shape, generator=gen)
        z_t = forward_noise(z0, t.numpy(), eps, schedule)
        text = model.encode_text([enc.prompts[i] for i in idx])
        loss = loss_noise(model.backbone(z_t, t, text), eps)
        opt.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(params, config.grad_clip)
        opt.step()
        sched.step()
        if progress is not None:
            progress(step + 1, loss.item())
    model.structure_branch.copy_from(model.backbone)
    save_checkpoint(out_path, model, config, schedule, step=config.pretrain_steps,
                    extra={"stage": "base"})
    return model


def build_model(config: TrainConfig) -> MoCoModel:
    """Model for guided training, with the frozen parts taken from the base checkpoint if set."""
    _seed_all(config.seed)
    model = MoCoModel(config.model_config())
    if config.base_checkpoint:
        load_checkpoint(config.base_checkpoint, model, prefixes=BASE_PREFIXES)
        model.structure_branch.copy_from(model.backbone)
    return model


@dataclass
class TrainResult:
    model: MoCoModel
    metrics: list[dict] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)


def _dump_batch(out_dir: Path | None, step: int, batch: Batch, t, comps) -> Path | None:
    if out_dir is None:
        return None
    path = out_dir / f"nonfinite_step_{step:06d}.json"
    path.write_text(json.dumps({"step": step, "clip_ids": batch.clip_ids, "t": t.tolist(),
                                "components": comps.as_floats()}, indent=1))
    return path


def train(config: TrainConfig, manifest, model: MoCoModel | None = None, out_dir=None,
          progress=None) -> TrainResult:
    """Optimize the trainable partition (structure branch and HADC) with AdamW.

    Writes ``config.txt``, ``metrics.jsonl`` (one line per step), periodic
    ``checkpoints/step_XXXXXX.pt`` and a final ``checkpoint.pt`` when
    ``out_dir`` is given.
    """
    gen = _seed_all(config.seed)
    clips = load_manifest_clips(manifest)
    if model is None:
        model = build_model(config)
    plan = apply_freeze_plan(model)
    params = dict(model.named_parameters())
    trainable = [params[n] for n in plan["trainable"]]
    out = None
    metrics_file = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        config.save(out / "config.txt")
        (out / "manifest.txt").write_text(str(Path(manifest).resolve()) + "\n")
        metrics_file = (out / "metrics.jsonl").open("w")
    weights = LossWeights(config.lambda_m if config.hadc_enabled else 0.0,
                          config.lambda_track if config.track_loss_enabled else 0.0)
    schedule = config.schedule()
    enc = encode_clips(model, clips)
    if weights.lambda_track:
        attach_gt_tracks(clips)
    opt = torch.optim.AdamW(trainable, lr=config.learning_rate, weight_decay=config.weight_decay)
    order = BatchOrder(len(clips), config.batch_size, config.seed)
    result = TrainResult(model)
    try:
        for step in range(1, config.steps + 1):
            idx = order.batch(step - 1)
            batch = Batch(
                clip_ids=[clips[i].clip_id for i in idx],
                prompts=[enc.prompts[i] for i in idx],
                latents=enc.latents[idx],
                structure_latents=enc.structure_latents[idx] if config.structure_enabled else None,
                mask_latents=enc.mask_latents[idx],
                videos=torch.stack([clips[i].video for i in idx]),
                queries=[clips[i].queries for i in idx],
                gt_tracks=[clips[i].gt_tracks for i in idx],
            )
            t = torch.randint(1, schedule.steps + 1, (len(idx),), generator=gen)
            eps = torch.randn(batch.latents.shape, generator=gen)
            loss, comps = total_loss(batch, model, weights, schedule, t, eps,
                                     hadc=config.hadc_enabled, track_items=config.track_items,
                                     min_alpha_bar=config.track_min_alpha_bar)
            if not torch.isfinite(loss):
                dump = _dump_batch(out, step, batch, t, comps)
                raise NonFiniteLoss(f"non-finite loss at step {step} (clips {batch.clip_ids})",
                                    batch_id=step, dump_path=dump)
            if loss.requires_grad:
                opt.zero_grad()
                loss.backward()
                if config.grad_clip > 0:
                    torch.nn.utils.clip_grad_norm_(trainable, config.grad_clip)
                opt.step()
            row = {"step": step, "total": loss.item(), **comps.as_floats(), "t": t.tolist()}
            result.metrics.append(row)
            if metrics_file is not None:
                metrics_file.write(json.dumps(row) + "\n")
            if progress is not None:
                progress(step, row)
            if out is not None and config.checkpoint_every > 0 \
                    and step % config.checkpoint_every == 0:
                result.checkpoints.append(save_checkpoint(
                    out / "checkpoints" / f"step_{step:06d}.pt", model, config, schedule, step))
    finally:
        if metrics_file is not None:
            metrics_file.close()
    if out is not None:
        result.checkpoints.append(save_checkpoint(out / "checkpoint.pt", model, config,
                                                  schedule, config.steps))
    return result
