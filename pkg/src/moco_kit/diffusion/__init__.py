from .dit import BackboneConfig, NoisePredictor
from .sampling import reverse_step, sample_loop
from .schedule import NoiseSchedule, build_schedule, forward_noise, loss_noise
from .text import TextEmbedding, TextEncoder, encode_text, tokenize
from .vae import IdentityPatchify, LearnedSmallVAE, build_vae, vae_decode, vae_encode

__all__ = [
    "BackboneConfig", "NoisePredictor", "reverse_step", "sample_loop", "NoiseSchedule",
    "build_schedule", "forward_noise", "loss_noise", "TextEmbedding", "TextEncoder",
    "encode_text", "tokenize", "IdentityPatchify", "LearnedSmallVAE", "build_vae",
    "vae_decode", "vae_encode",
]
