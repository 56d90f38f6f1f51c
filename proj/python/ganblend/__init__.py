"""Band-wise blending of style-based generator checkpoints."""

from ._core import (
    Checkpoint,
    Error,
    activations,
    blend,
    classify,
    decode_png,
    describe_schedule,
    encode_png,
    forward,
    init_random,
    project,
    sample_grid_png,
    sample_latent,
    synth_transfer,
    synthesize,
    toonify,
)

__all__ = [
    "Checkpoint",
    "Error",
    "activations",
    "blend",
    "classify",
    "decode_png",
    "describe_schedule",
    "encode_png",
    "forward",
    "init_random",
    "project",
    "sample_grid_png",
    "sample_latent",
    "synth_transfer",
    "synthesize",
    "toonify",
]
