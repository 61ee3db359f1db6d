"""Experiment configuration (JSON) with strict validation."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .autoencoder import structure_permutations

MODES = ("ens_init", "ens_epochs", "ens_struct", "ens_landmarks",
         "baseline_kmeanspp", "baseline_lsc", "baseline_dae_kmeans", "baseline_dae_lsc")
ENSEMBLE_MODES = MODES[:4]
DAE_MODES = ("ens_init", "ens_epochs", "ens_struct", "ens_landmarks", "baseline_dae_kmeans", "baseline_dae_lsc")

DEFAULT_EPOCH_GRID = [50, 100, 150, 200, 250]


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DatasetSource(_Strict):
    generator: Optional[Literal["tetra", "chainlink", "lsun", "gaussian_classes"]] = None
    seed: int = Field(0, ge=0)
    path: Optional[str] = None
    lift: Literal["none", "sigmoid_stack", "sigmoid_squared", "tan_sigmoid"] = "none"
    lift_seed: Optional[int] = Field(None, ge=0)
    n: Optional[int] = Field(None, ge=2)  # gaussian_classes only
    classes: Optional[int] = Field(None, ge=2)  # gaussian_classes only

    @model_validator(mode="after")
    def _one_source(self):
        if (self.generator is None) == (self.path is None):
            raise ValueError("dataset needs exactly one of 'generator' or 'path'")
        if self.generator != "gaussian_classes" and (self.n is not None or self.classes is not None):
            raise ValueError("'n' and 'classes' only apply to the gaussian_classes generator")
        return self


class Preprocessing(_Strict):
    divisor: float = Field(1.0, gt=0)
    l2: bool = True


class AnchorSettings(_Strict):
    r: int = Field(5, ge=1)
    bandwidth_mode: Literal["per_point_mean", "global_fixed"] = "per_point_mean"
    sigma: Optional[float] = Field(None, gt=0)


class KMeansSettings(_Strict):
    n_init: int = Field(10, ge=1)
    max_iter: int = Field(300, ge=1)
    tol: float = Field(1e-4, ge=0)


class AutoencoderSettings(_Strict):
    encoding_dim: int = Field(10, ge=1)
    encoding_activation: Literal["relu", "linear"] = "linear"
    batch_size: int = Field(8, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    adam_beta1: float = Field(0.9, gt=0, lt=1)
    adam_beta2: float = Field(0.999, gt=0, lt=1)
    adam_epsilon: float = Field(1e-7, gt=0)


class ExperimentConfig(_Strict):
    dataset: DatasetSource
    preprocessing: Preprocessing = Preprocessing()
    mode: Literal[MODES]
    m: Optional[int] = Field(None, ge=1)
    widths: list[int] = [50, 75, 100]
    structures: Optional[list[list[int]]] = None
    epochs: Optional[list[int]] = None
    landmarks: Optional[list[int]] = None
    init_seeds: Optional[list[int]] = None
    anchor: AnchorSettings = AnchorSettings()
    kmeans: KMeansSettings = KMeansSettings()
    autoencoder: AutoencoderSettings = AutoencoderSettings()
    k: Optional[int] = Field(None, ge=2)
    replicates: int = Field(5, ge=1)
    seed: int = Field(0, ge=0)
    renormalize_rows: bool = False
    n_jobs: Optional[int] = Field(None, ge=1)
    output: Optional[str] = None
    embedding_out: Optional[str] = None
    labels_out: Optional[str] = None

    @model_validator(mode="after")
    def _resolve(self):
        mode = self.mode
        if self.structures is None:
            self.structures = [list(s) for s in structure_permutations(self.widths)] if mode == "ens_struct" else [list(self.widths)]
        if self.epochs is None:
            self.epochs = list(DEFAULT_EPOCH_GRID) if mode == "ens_epochs" else [200]
        if self.landmarks is None:
            self.landmarks = [100 * (j + 1) for j in range(self.m or 5)] if mode == "ens_landmarks" else [100]
        if mode == "ens_init" and self.init_seeds is None:
            self.init_seeds = list(range(self.m or 5))
        if self.init_seeds is None:
            self.init_seeds = [0]

        sizes = {"ens_init": len(self.init_seeds), "ens_epochs": len(self.epochs),
                 "ens_struct": len(self.structures), "ens_landmarks": len(self.landmarks)}
        if mode in sizes:
            if self.m is None:
                self.m = sizes[mode]
            if sizes[mode] != self.m:
                raise ValueError(f"{mode} needs {self.m} entries in its varied list, got {sizes[mode]}")
            for name, vals in (("init_seeds", self.init_seeds), ("epochs", self.epochs),
                               ("structures", self.structures), ("landmarks", self.landmarks)):
                if len(set(map(str, vals))) != len(vals):
                    raise ValueError(f"{name} has duplicate entries")
        else:
            if self.m not in (None, 1):
                raise ValueError(f"{mode} is a single-member baseline; m must be 1")
            self.m = 1
        if any(e < 1 for e in self.epochs):
            raise ValueError("epochs must be >= 1")
        if any(p < 1 for p in self.landmarks):
            raise ValueError("landmark counts must be >= 1")
        if any(not s or any(w < 1 for w in s) for s in self.structures):
            raise ValueError("structures must be non-empty lists of positive widths")
        if any(self.anchor.r > p for p in self.landmarks):
            raise ValueError("anchor.r exceeds a landmark count")
        if self.anchor.bandwidth_mode == "global_fixed" and self.anchor.sigma is None:
            raise ValueError("global_fixed bandwidth needs anchor.sigma")
        return self


def load_config(path) -> ExperimentConfig:
    """Parse a JSON config file; every problem surfaces as ConfigError."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw)


def parse_config(raw) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
