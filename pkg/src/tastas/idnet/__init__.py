"""Speaker identity network: training, freezing, embedding extraction."""

from .model import IdNet, IdNetConfig, SpeakerEmbedding, slice_segments
from .train import IdNetTrainReport, load_idnet, save_idnet, train_idnet

__all__ = [
    "IdNet",
    "IdNetConfig",
    "SpeakerEmbedding",
    "slice_segments",
    "IdNetTrainReport",
    "load_idnet",
    "save_idnet",
    "train_idnet",
]
