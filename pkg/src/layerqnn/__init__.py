"""Layered dissipative quantum neural network: model, tensor-network engine, sampler and training."""

from .data import BlochSample, Dataset, generate_dataset, read_dataset, write_dataset
from .estimator import QNNClassifier
from .model import NetworkConfig, ParamSet, Slot
from .mps import LayerMpo, LayerMps, apply_mpo, build_layer_mpo, evolve_trajectory, sweep_evolve
from .presets import initial_params, trained_params
from .sampler import estimate_magnetization
from .tensor import NumericalError, SvdTruncation
from .training import classify, contrastive_loss, nadam_step, train

__version__ = "0.1.0"

__all__ = [
    "BlochSample",
    "Dataset",
    "generate_dataset",
    "read_dataset",
    "write_dataset",
    "QNNClassifier",
    "NetworkConfig",
    "ParamSet",
    "Slot",
    "LayerMpo",
    "LayerMps",
    "apply_mpo",
    "build_layer_mpo",
    "evolve_trajectory",
    "sweep_evolve",
    "initial_params",
    "trained_params",
    "estimate_magnetization",
    "NumericalError",
    "SvdTruncation",
    "classify",
    "contrastive_loss",
    "nadam_step",
    "train",
]
