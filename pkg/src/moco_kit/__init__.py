"""Structure-guided human video generation at desk scale.

Subpackages and modules:

- ``motion``: skeleton topology, 3D keypoint sequences, procedural motion generator
- ``render``: projection and skeleton / mask rasterization
- ``diffusion``: noise schedule, samplers, text encoder, autoencoders, DiT backbone
- ``structure`` and ``hadc``: the guidance branch and its gated fusion
- ``tracking``: temporally weighted tracking loss and a soft correlation tracker
- ``curation``: motion-prompt extraction, clip filters and manifests
- ``trainkit``: objective, training loop, checkpoints, synthetic corpus
"""

__version__ = "0.1.0"
