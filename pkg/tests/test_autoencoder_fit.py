import pytest
import torch

from moco_kit.diffusion.vae import psnr
from moco_kit.trainkit.checkpoint import load_checkpoint
from moco_kit.trainkit.data import load_manifest_clips


@pytest.mark.slow
def test_fitted_autoencoder_reconstruction_quality(desk_base):
    path, corpus = desk_base
    model, _, _, _ = load_checkpoint(path)
    vae = model.vae
    clips = load_manifest_clips(corpus / "manifest.jsonl", accepted_only=False)
    videos = torch.stack([c.video for c in clips])
    with torch.no_grad():
        assert psnr(videos, vae.decode(vae.encode(videos))) >= 30.0
        for color in ([0.2, 0.5, 0.8], [1.0, 0.0, 0.3], [0.05, 0.05, 0.05]):
            flat = torch.tensor(color).expand(1, 16, 48, 64, 3).clone()
            assert psnr(flat, vae.decode(vae.encode(flat))) >= 40.0, color
