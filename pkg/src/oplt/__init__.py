"""Probabilistic label trees trained online, with the tree grown from the stream."""

from __future__ import annotations

from .data import DataFormatError, Example, SparseVector, read_dataset, stream_dataset, write_dataset
from .iplt import build_balanced_tree, build_kmeans_tree_from_data, iplt_train
from .learner import Classifier, InverseClassifier, LearnerConfig, inverse_of, new_classifier
from .metrics import PropensityModel, entropy_reduction, precision_at_k, progressive_validate, psp_at_k
from .model_io import ModelFormatError, load_model, save_model
from .online import AuxRetention, OpltModel, PolicyConfig, PolicyKind, init_model, warm_start
from .predict import predict_topk
from .properness import check_properness
from .tree import LabelTree, assign_to_nodes

__version__ = "0.1.0"

__all__ = [
    "AuxRetention",
    "Classifier",
    "DataFormatError",
    "Example",
    "InverseClassifier",
    "LabelTree",
    "LearnerConfig",
    "ModelFormatError",
    "OpltModel",
    "PolicyConfig",
    "PolicyKind",
    "PropensityModel",
    "SparseVector",
    "assign_to_nodes",
    "build_balanced_tree",
    "build_kmeans_tree_from_data",
    "check_properness",
    "entropy_reduction",
    "init_model",
    "inverse_of",
    "iplt_train",
    "load_model",
    "new_classifier",
    "precision_at_k",
    "predict_topk",
    "progressive_validate",
    "psp_at_k",
    "read_dataset",
    "save_model",
    "stream_dataset",
    "warm_start",
    "write_dataset",
]
