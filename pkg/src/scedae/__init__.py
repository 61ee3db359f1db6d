"""Spectral clustering over an ensemble of deep autoencoder encodings.

Pipeline: train ``m`` autoencoders, build a sparse landmark affinity per
encoding, concatenate them, take the leading left singular vectors of the
concatenation and run k-means on them.
"""
from .anchor import AnchorConfig, LandmarkSet, SparseAffinity, build_z, normalize_z, select_landmarks
from .autoencoder import LayerSpec, TrainConfig, encode, train
from .core import SparseRowMatrix, derive_rng
from .ensemble import EnsembleAffinity, SpectralEmbedding, StageError, concat_ensemble, sc_edae, topk_left_singular
from .kmeans import KMeansConfig, Partition, kmeans
from .metrics import accuracy, ari, nmi

__version__ = "0.1.0"

__all__ = [
    "AnchorConfig", "LandmarkSet", "SparseAffinity", "build_z", "normalize_z", "select_landmarks",
    "LayerSpec", "TrainConfig", "encode", "train", "SparseRowMatrix", "derive_rng",
    "EnsembleAffinity", "SpectralEmbedding", "StageError", "concat_ensemble", "sc_edae",
    "topk_left_singular", "KMeansConfig", "Partition", "kmeans", "accuracy", "ari", "nmi",
]
