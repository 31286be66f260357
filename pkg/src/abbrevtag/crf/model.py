"""Trained CRF parameters and their on-disk container."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..corpus import LabelVocabulary
from ..features import FeatureIndex, FeatureTemplate

MODEL_FORMAT = "abbrevtag-crf"
MODEL_VERSION = 1


@dataclass
class CrfModel:
    """Linear-chain CRF with sparse emission weights and dense transitions.

    Emission weights exist only for the ``(feature, label)`` pairs listed in
    ``emission_features`` / ``emission_labels``; every other pair scores 0.
    """

    labels: LabelVocabulary
    template: FeatureTemplate
    feature_index: FeatureIndex
    emission_features: np.ndarray
    emission_labels: np.ndarray
    emission_weights: np.ndarray
    transitions: np.ndarray
    _w: sp.csr_matrix | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.emission_features = np.asarray(self.emission_features, dtype=np.int64)
        self.emission_labels = np.asarray(self.emission_labels, dtype=np.int64)
        self.emission_weights = np.asarray(self.emission_weights, dtype=np.float64)
        self.transitions = np.asarray(self.transitions, dtype=np.float64)
        L = self.n_labels
        if self.transitions.shape != (L, L):
            raise ValueError(f"transitions must be {L}x{L}, got {self.transitions.shape}")
        if not (len(self.emission_features) == len(self.emission_labels) == len(self.emission_weights)):
            raise ValueError("emission pair arrays differ in length")
        if not (np.all(np.isfinite(self.emission_weights)) and np.all(np.isfinite(self.transitions))):
            raise ValueError("model weights must be finite")

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return len(self.feature_index)

    @classmethod
    def from_dense(
        cls,
        emission: np.ndarray,
        transitions: np.ndarray,
        labels: LabelVocabulary | None = None,
        template: FeatureTemplate | None = None,
        feature_index: FeatureIndex | None = None,
    ) -> "CrfModel":
        """Model whose emission table is a full ``F x L`` array (all pairs active)."""
        emission = np.asarray(emission, dtype=np.float64)
        F, L = emission.shape
        if labels is None:
            labels = LabelVocabulary(tuple(f"y{i}" for i in range(1, L)))
        if feature_index is None:
            feature_index = FeatureIndex((f"f{i}" for i in range(F)), frozen=True)
        rows, cols = np.divmod(np.arange(F * L), L)
        return cls(
            labels, template or FeatureTemplate(), feature_index, rows, cols, emission.ravel(), transitions
        )

    def emission_matrix(self) -> sp.csr_matrix:
        """Emission weights as a sparse ``F x L`` matrix."""
        if self._w is None:
            self._w = sp.csr_matrix(
                (self.emission_weights, (self.emission_features, self.emission_labels)),
                shape=(self.n_features, self.n_labels),
            )
        return self._w

    def parameters(self) -> np.ndarray:
        """Flat parameter vector ``[emission pair weights, transitions]``."""
        return np.concatenate([self.emission_weights, self.transitions.ravel()])

    def with_parameters(self, theta: np.ndarray) -> "CrfModel":
        P = len(self.emission_weights)
        L = self.n_labels
        return CrfModel(
            self.labels,
            self.template,
            self.feature_index,
            self.emission_features,
            self.emission_labels,
            np.array(theta[:P]),
            np.array(theta[P:]).reshape(L, L),
        )

    def save(self, path: str | Path) -> None:
        meta = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "labels": list(self.labels.labels),
            "template": self.template.to_dict(),
            "features": self.feature_index.names,
        }
        with open(path, "wb") as fh:
            np.savez_compressed(
                fh,
                meta=np.frombuffer(json.dumps(meta, ensure_ascii=False).encode("utf-8"), dtype=np.uint8),
                emission_features=self.emission_features,
                emission_labels=self.emission_labels,
                emission_weights=self.emission_weights,
                transitions=self.transitions,
            )

    @classmethod
    def load(cls, path: str | Path) -> "CrfModel":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(z["meta"].tobytes().decode("utf-8"))
            if meta.get("format") != MODEL_FORMAT:
                raise ValueError(f"{path} is not a CRF model file")
            if meta.get("version") != MODEL_VERSION:
                raise ValueError(f"unsupported model version {meta.get('version')}")
            return cls(
                LabelVocabulary(tuple(meta["labels"])),
                FeatureTemplate.from_dict(meta["template"]),
                FeatureIndex(meta["features"], frozen=True),
                z["emission_features"],
                z["emission_labels"],
                z["emission_weights"],
                z["transitions"],
            )
