import pytest
import torch

from moco_kit.diffusion.dit import BackboneConfig
from moco_kit.model import MoCoModel, ModelConfig


def tiny_model(seed=0, dtype=torch.float32, structure_blocks=2, gate_bias=0.0,
               vae_mode="identity_patchify", frames=4, size=16):
    """A 2-block, width-32 model on 4x16x16 clips (latent 1x768x2x2 in patchify mode)."""
    torch.manual_seed(seed)
    cfg = ModelConfig(backbone=BackboneConfig(block_count=2, width=32, heads=4, vae_mode=vae_mode),
                      structure_blocks=structure_blocks, frames=frames, height=size, width=size,
                      latent_channels=16, gate_bias=gate_bias)
    return MoCoModel(cfg).to(dtype)


def randomize_injections(model, seed=1, std=0.05):
    """Give the zero-initialized branch injections nonzero weights (for gradient checks)."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for lin in model.structure_branch.inject:
            lin.weight.copy_(torch.randn(lin.weight.shape, generator=gen, dtype=lin.weight.dtype)
                             * std)


@pytest.fixture(scope="session")
def desk_base(tmp_path_factory):
    """Base model fitted with the desk config: (checkpoint path, pretraining corpus dir)."""
    from moco_kit.trainkit.config import desk_config
    from moco_kit.trainkit.loop import pretrain_base

    root = tmp_path_factory.mktemp("base")
    path = root / "base.pt"
    pretrain_base(desk_config(), path, corpus_dir=root / "corpus")
    return path, root / "corpus"
