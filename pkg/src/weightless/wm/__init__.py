"""Recurrent predictor of per-joint relaxation levels."""

from .checkpoint import load_checkpoint, save_checkpoint
from .network import WMNetwork, backward, forward, forward_sequence, init_network
from .train import OnlineWM, TrainConfig, build_input, evaluate, infer_online, train

__all__ = ["WMNetwork", "backward", "forward", "forward_sequence", "init_network", "OnlineWM",
           "TrainConfig", "build_input", "evaluate", "infer_online", "train",
           "load_checkpoint", "save_checkpoint"]
