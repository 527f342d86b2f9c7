"""Single-file checkpoints holding named parameters, the config echo and the noise schedule."""
from __future__ import annotations

import re
from pathlib import Path

import torch

from ..diffusion.schedule import NoiseSchedule
from ..model import MoCoModel
from .config import TrainConfig

VERSION = "moco-kit/1"

_HADC = re.compile(r"^hadc\.(\d+)\.(predictor|mask_head)\.(.+)$")


def checkpoint_name(param_name: str) -> str:
    """Module path → checkpoint key, e.g. ``hadc.0.predictor.fc1.weight`` → ``hadc/P_k/0/fc1.weight``."""
    m = _HADC.match(param_name)
    if m:
        k, part, rest = m.groups()
        return f"hadc/{'P_k' if part == 'predictor' else 'U_k'}/{k}/{rest}"
    head, _, rest = param_name.partition(".")
    return f"{head}/{rest}"


def param_name(key: str) -> str:
    if key.startswith("hadc/"):
        _, part, k, rest = key.split("/", 3)
        return f"hadc.{k}.{'predictor' if part == 'P_k' else 'mask_head'}.{rest}"
    head, _, rest = key.partition("/")
    return f"{head}.{rest}"


def save_checkpoint(path, model: MoCoModel, config: TrainConfig, schedule: NoiseSchedule,
                    step: int = 0, extra: dict | None = None) -> Path:
    params = {checkpoint_name(n): p.detach().clone() for n, p in model.state_dict().items()}
    doc = {
        "version": VERSION,
        "params": params,
        "config": config.to_dict(),
        "schedule": schedule.to_dict(),
        "step": int(step),
        "extra": extra or {},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(doc, tmp)
    tmp.replace(path)
    return path


def read_checkpoint(path) -> dict:
    doc = torch.load(path, map_location="cpu", weights_only=True)
    if doc.get("version") != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    return doc


def load_checkpoint(path, model: MoCoModel | None = None, prefixes: tuple[str, ...] | None = None):
    """Restore parameters into ``model`` (built from the config echo when omitted).

    ``prefixes`` restricts loading to matching module paths, e.g.
    ``("text.", "vae.", "backbone.")`` to take only the base model.
    Returns (model, config, schedule, step).
    """
    doc = read_checkpoint(path)
    config = TrainConfig.from_dict(doc["config"])
    if model is None:
        model = MoCoModel(config.model_config())
    state = {param_name(k): v for k, v in doc["params"].items()}
    if prefixes is not None:
        state = {k: v for k, v in state.items() if k.startswith(prefixes)}
        missing = [k for k in model.state_dict() if k.startswith(prefixes) and k not in state]
        if missing:
            raise KeyError(f"checkpoint lacks {missing[:3]}...")
        model.load_state_dict(state, strict=False)
    else:
        model.load_state_dict(state)
    return model, config, NoiseSchedule.from_dict(doc["schedule"]), doc["step"]
