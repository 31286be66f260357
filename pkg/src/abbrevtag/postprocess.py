"""Restrict predicted distributions to the senses an abbreviation had in training.

For each occurrence the probability mass of labels never seen with that
abbreviation surface in the training split is removed and the rest is
renormalized. ``NA_word`` is never a candidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import NA_WORD_ID, AbbrevInventory, build_inventory
from .pipeline import OccurrencePrediction, PredictionSet
from .validation import check_documents, check_is_fitted

FALLBACKS = ("freq", "raw")


@dataclass(frozen=True)
class PostprocessConfig:
    """``fallback`` applies when no candidate mass is left or the abbreviation is unseen.

    ``"freq"`` puts all mass on the most frequent training sense, ``"raw"``
    keeps the input distribution.
    """

    fallback: str = "freq"

    def __post_init__(self):
        if self.fallback not in FALLBACKS:
            raise ValueError(f"fallback must be one of {FALLBACKS}")


def filter_distribution(
    pred: OccurrencePrediction,
    inventory: AbbrevInventory,
    config: PostprocessConfig | None = None,
) -> OccurrencePrediction:
    config = config or PostprocessConfig()
    candidates = inventory.senses(pred.abbrev) - {NA_WORD_ID}
    if not candidates:
        return pred
    kept = {lab: p for lab, p in pred.distribution.items() if lab in candidates and p > 0.0}
    mass = math.fsum(kept.values())
    if mass <= 0.0:
        if config.fallback == "raw":
            return pred
        return replace(pred, distribution={inventory.most_frequent(pred.abbrev): 1.0}, label=None)
    if len(kept) == len(pred.distribution):
        return pred
    return replace(pred, distribution={lab: p / mass for lab, p in sorted(kept.items())}, label=None)


def resolve_prediction(pred: OccurrencePrediction, inventory: AbbrevInventory | None = None) -> int:
    """Argmax label; ties go to the higher training frequency, then the lower id."""
    def key(lab):
        freq = inventory.count(pred.abbrev, lab) if inventory is not None else 0
        return (-pred.distribution[lab], -freq, lab)

    return min(pred.distribution, key=key)


class CandidateFilter(TransformerMixin, BaseEstimator):
    """Learns the per-abbreviation sense inventory from training documents.

    ``transform`` filters a :class:`PredictionSet`; ``predict`` also
    resolves each occurrence to a label id.
    """

    def __init__(self, fallback="freq"):
        self.fallback = fallback

    def fit(self, X, y=None):
        self.inventory_ = build_inventory(check_documents(X, allow_empty=True))
        return self

    @classmethod
    def from_inventory(cls, inventory: AbbrevInventory, fallback="freq") -> "CandidateFilter":
        est = cls(fallback)
        est.inventory_ = inventory
        return est

    def transform(self, X: PredictionSet) -> PredictionSet:
        check_is_fitted(self, "inventory_")
        config = PostprocessConfig(self.fallback)
        return PredictionSet(
            [filter_distribution(p, self.inventory_, config) for p in X], X.provenance, dict(X.tags)
        )

    def predict(self, X: PredictionSet) -> list[int]:
        return [resolve_prediction(p, self.inventory_) for p in self.transform(X)]
