"""Training configuration with a flat ``key=value`` text form."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import get_type_hints

from ..diffusion.dit import BackboneConfig
from ..diffusion.schedule import NoiseSchedule, build_schedule
from ..model import ModelConfig


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 4
    steps: int = 2000
    seed: int = 0
    resolution: tuple[int, int] = (64, 48)  # (W, H)
    frames: int = 16
    fps: int = 16
    # noise schedule
    diffusion_steps: int = 50
    beta_min: float = 0.002
    beta_max: float = 0.3
    # model
    structure_blocks: int = 4
    block_count: int = 4
    model_width: int = 192
    heads: int = 4
    vae_mode: str = "learned_small"
    latent_channels: int = 192
    gate_bias: float = -2.0
    # objective
    lambda_m: float = 0.001
    lambda_track: float = 0.01
    track_loss_enabled: bool = True
    hadc_enabled: bool = True
    structure_enabled: bool = True
    track_items: int = 1
    track_min_alpha_bar: float = 1e-6
    # optimizer and bookkeeping
    weight_decay: float = 0.0
    grad_clip: float = 1.0
    checkpoint_every: int = 500
    sampler: str = "deterministic"
    # base-model stand-in (pretraining of the frozen parts)
    base_checkpoint: str = ""
    pretrain_clips: int = 48
    pretrain_seed: int = 1000
    pretrain_steps: int = 1500
    pretrain_learning_rate: float = 1e-3
    vae_steps: int = 600

    def __post_init__(self):
        w, h = self.resolution
        if w % 8 or h % 8 or self.frames % 4:
            raise ValueError(f"resolution {w}x{h} and {self.frames} frames must be divisible "
                             "by the (4, 8, 8) autoencoder patch")
        if self.batch_size < 1 or self.steps < 0:
            raise ValueError("batch_size must be >= 1 and steps >= 0")
        if self.lambda_m < 0 or self.lambda_track < 0:
            raise ValueError("loss weights must be non-negative")
        if not 1 <= self.structure_blocks <= self.block_count:
            raise ValueError("structure_blocks must lie in 1..block_count")

    def model_config(self) -> ModelConfig:
        w, h = self.resolution
        backbone = BackboneConfig(block_count=self.block_count, width=self.model_width,
                                  heads=self.heads, vae_mode=self.vae_mode)
        return ModelConfig(backbone=backbone, structure_blocks=self.structure_blocks,
                           frames=self.frames, height=h, width=w,
                           latent_channels=self.latent_channels, gate_bias=self.gate_bias)

    def schedule(self) -> NoiseSchedule:
        return build_schedule(self.diffusion_steps, self.beta_min, self.beta_max)

    # -- text form --------------------------------------------------------------
    def to_text(self) -> str:
        return "".join(f"{f.name}={_format(getattr(self, f.name))}\n" for f in fields(self))

    @classmethod
    def from_text(cls, text: str) -> "TrainConfig":
        hints = get_type_hints(cls)
        known = {f.name for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
            key, value = (p.strip() for p in line.split("=", 1))
            if key not in known:
                raise ValueError(f"line {lineno}: unknown config key {key!r}")
            values[key] = _parse(value, hints[key])
        return cls(**values)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_text(Path(path).read_text())

    def to_dict(self) -> dict:
        return {f.name: _format(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls.from_text("".join(f"{k}={v}\n" for k, v in d.items()))


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return "x".join(str(v) for v in value)
    return str(value)


def _parse(text: str, kind):
    if kind is bool:
        if text.lower() not in ("true", "false"):
            raise ValueError(f"expected true/false, got {text!r}")
        return text.lower() == "true"
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if kind is str:
        return text
    # tuple[int, int]
    return tuple(int(p) for p in text.lower().split("x"))


def desk_config(**overrides) -> TrainConfig:
    """CPU-sized defaults."""
    return replace(TrainConfig(), **overrides)


def paper_config(**overrides) -> TrainConfig:
    """Full-scale settings: 720x480, 8 guided blocks, lr 1e-5, 20k iterations."""
    base = TrainConfig(learning_rate=1e-5, steps=20000, resolution=(720, 480), frames=48,
                       diffusion_steps=1000, beta_min=1e-4, beta_max=0.02,
                       structure_blocks=8, block_count=42, model_width=3072, heads=48,
                       latent_channels=16, checkpoint_every=1000)
    return replace(base, **overrides)
