from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig, desk_config, paper_config
from .corpus import make_synthetic_corpus
from .losses import LossWeights, combine_losses, total_loss, tracking_grad_path
from .loop import pretrain_base, train

__all__ = [
    "load_checkpoint", "save_checkpoint", "TrainConfig", "desk_config", "paper_config",
    "make_synthetic_corpus", "LossWeights", "combine_losses", "total_loss",
    "tracking_grad_path", "pretrain_base", "train",
]
