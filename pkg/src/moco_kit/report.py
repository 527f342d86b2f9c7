"""Run evaluation: loss-curve and adherence figures plus a tab-separated metrics summary."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

EARLY_STEP = 10
WINDOW = 10


def load_metrics(run_dir) -> list[dict]:
    path = Path(run_dir) / "metrics.jsonl"
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


@dataclass
class LossReduction:
    early: float   # mean total loss over the window centred on EARLY_STEP
    final: float   # mean total loss over the last WINDOW * 10 steps

    @property
    def ratio(self) -> float:
        return self.final / self.early


def loss_reduction(metrics: list[dict], early_step: int = EARLY_STEP,
                   window: int = WINDOW) -> LossReduction:
    """Final vs. early total loss, each averaged over a window of steps.

    Single-step losses swing by the sampled timestep, so both ends are
    window means: ``window`` steps around ``early_step`` and the last
    ``10 * window`` steps.
    """
    total = np.array([m["total"] for m in metrics])
    if len(total) < early_step + window:
        raise ValueError(f"need at least {early_step + window} logged steps")
    lo = max(early_step - window // 2, 1) - 1
    early = float(total[lo:lo + window].mean())
    final = float(total[-10 * window:].mean())
    return LossReduction(early, final)


def moving_average(x: np.ndarray, n: int) -> np.ndarray:
    n = max(1, min(n, len(x)))
    c = np.cumsum(np.insert(np.asarray(x, float), 0, 0.0))
    return (c[n:] - c[:-n]) / n


def plot_loss_curve(metrics: list[dict], path, smooth: int = 50) -> Path:
    steps = np.array([m["step"] for m in metrics])
    fig, ax = plt.subplots(figsize=(7, 4))
    for key, label in (("total", "total"), ("l_d", "noise"), ("l_m", "mask"),
                       ("l_track", "tracking")):
        y = np.array([m[key] for m in metrics])
        if not np.any(y > 0):
            continue
        ma = moving_average(y, smooth)
        ax.plot(steps[len(steps) - len(ma):], ma, label=label)
    ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel(f"loss ({smooth}-step mean)")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)


def plot_adherence(report, path) -> Path:
    """Scatter of root vs. tracked displacement, plus per-clip curves."""
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
    for cid, r, t in zip(report.clip_ids, report.root, report.tracked):
        ax0.scatter(r[1:], t[1:], s=10, label=cid)
        line, = ax1.plot(r, "--")
        ax1.plot(t, color=line.get_color())
    ax0.set_xlabel("skeleton root displacement (px)")
    ax0.set_ylabel("generated tracked displacement (px)")
    ax0.set_title(f"Pearson r = {report.pearson_r:.3f}")
    ax0.legend(fontsize=6)
    ax1.set_xlabel("frame")
    ax1.set_ylabel("displacement (px); dashed = skeleton root")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)


def format_summary(summary: dict) -> str:
    lines = ["metric\tvalue"]
    for k, v in summary.items():
        lines.append(f"{k}\t{v:.6g}" if isinstance(v, float) else f"{k}\t{v}")
    return "\n".join(lines) + "\n"


def evaluate_run(run_dir, seed: int = 0) -> dict:
    """Write loss_curve.png, adherence.png and summary.tsv into ``run_dir``; return the summary."""
    from .trainkit.checkpoint import load_checkpoint
    from .trainkit.data import encode_clips, load_manifest_clips
    from .trainkit.evaluate import gate_statistics, skeleton_adherence, skeleton_swap

    run = Path(run_dir)
    metrics = load_metrics(run)
    summary: dict = {"steps": len(metrics)}
    plot_loss_curve(metrics, run / "loss_curve.png")
    try:
        red = loss_reduction(metrics)
        summary.update(loss_early=red.early, loss_final=red.final, loss_ratio=red.ratio)
    except ValueError:
        pass
    model, config, schedule, _ = load_checkpoint(run / "checkpoint.pt")
    model.eval()
    manifest = (run / "manifest.txt").read_text().strip()
    clips = load_manifest_clips(manifest)
    if config.hadc_enabled and config.structure_enabled:
        gates = gate_statistics(model, encode_clips(model, clips), schedule, seed=seed)
        summary.update(gate_inside=gates.inside, gate_outside=gates.outside,
                       gate_ratio=gates.ratio)
    adherence = skeleton_adherence(model, clips, schedule, seed, config.sampler)
    summary["adherence_r"] = adherence.pearson_r
    plot_adherence(adherence, run / "adherence.png")
    everything = load_manifest_clips(manifest, accepted_only=False)
    walk = next((c for c in clips if c.motion_id == "walk"), None)
    wave = next((c for c in everything if c.motion_id == "wave"), None)
    if walk is not None and wave is not None:
        swap = skeleton_swap(model, walk, wave, schedule, seed, config.sampler)
        summary.update(swap_walk_motion=swap.moving_motion, swap_wave_motion=swap.still_motion,
                       swap_ratio=swap.ratio)
    (run / "summary.tsv").write_text(format_summary(summary))
    return summary
