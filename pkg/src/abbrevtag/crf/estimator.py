"""scikit-learn style front end for CRF training and decoding."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ..corpus import Document, LabelVocabulary
from ..features import FeatureIndex, FeatureTemplate, vectorize_sequence
from ..validation import check_documents, check_gold, check_is_fitted
from .inference import decode_corpus
from .model import CrfModel
from .objective import CrfObjective
from .owlqn import OptimizationError, minimize_owlqn

logger = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    """Training failed; ``model`` holds the last good iterate when available."""

    def __init__(self, message: str, model: CrfModel | None = None):
        self.model = model
        super().__init__(message)


@dataclass(frozen=True)
class TrainConfig:
    c1: float = 0.1
    c2: float = 0.1
    max_iterations: int = 100
    tol: float = 1e-5
    epsilon: float = 1e-5
    num_memories: int = 6

    def __post_init__(self):
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("c1 and c2 must be nonnegative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def _active_pairs(sequences, gold, n_labels: int) -> tuple[np.ndarray, np.ndarray]:
    keys = np.unique(
        np.fromiter(
            (f * n_labels + y for seq, ys in zip(sequences, gold) for v, y in zip(seq, ys) for f in v),
            dtype=np.int64,
        )
    )
    return keys // n_labels, keys % n_labels


def train(
    docs: list[Document],
    labels: LabelVocabulary,
    template: FeatureTemplate | None = None,
    config: TrainConfig | None = None,
    gold=None,
) -> tuple[CrfModel, list[float]]:
    """Fit CRF weights on ``docs``; returns the model and the objective per iteration.

    Emission weights are created for every ``(feature, label)`` pair seen in
    the training data. Optimization starts from zero weights.
    """
    template = template or FeatureTemplate()
    config = config or TrainConfig()
    docs = [d for d in check_documents(docs) if len(d)]
    if not docs:
        raise ValueError("no nonempty training documents")
    gold = check_gold(docs, gold, len(labels))
    index = FeatureIndex()
    sequences = [vectorize_sequence(doc, template, index, freeze=False) for doc in docs]
    index.freeze()
    L = len(labels)
    rows, cols = _active_pairs(sequences, gold, L)
    objective = CrfObjective(sequences, gold, len(index), L, rows, cols, c2=config.c2)
    logger.info(
        "training CRF: %d sequences, %d features, %d labels, %d parameters",
        len(sequences), len(index), L, objective.n_params,
    )

    def as_model(theta):
        return CrfModel(labels, template, index, rows, cols, theta[: len(rows)], theta[len(rows):].reshape(L, L))

    try:
        result = minimize_owlqn(
            objective,
            np.zeros(objective.n_params),
            c1=config.c1,
            max_iterations=config.max_iterations,
            tol=config.tol,
            epsilon=config.epsilon,
            num_memories=config.num_memories,
            callback=lambda it, f: logger.info("iteration %d objective %.4f", it, f),
        )
    except OptimizationError as exc:
        raise TrainingError(str(exc), as_model(exc.x)) from exc
    logger.info("training stopped after %d iterations (%s)", result.n_iter, result.status)
    return as_model(result.x), result.history


class LinearChainCRF(BaseEstimator):
    """Linear-chain CRF token classifier trained with OWL-QN.

    Parameters
    ----------
    labels : LabelVocabulary, optional
        Sense inventory. When omitted, ``max(label id) + 1`` generic labels
        are assumed.
    template : FeatureTemplate, optional
    c1, c2 : float
        L1 and L2 regularization coefficients.
    max_iterations : int
    tol : float
        Relative objective decrease below which training stops.
    num_memories : int
        L-BFGS history length.

    ``fit`` takes a sequence of :class:`~abbrevtag.corpus.Document`; labels
    come from ``Document.token_labels`` unless ``y`` is given.
    """

    def __init__(
        self,
        labels=None,
        template=None,
        c1=0.1,
        c2=0.1,
        max_iterations=100,
        tol=1e-5,
        epsilon=1e-5,
        num_memories=6,
    ):
        self.labels = labels
        self.template = template
        self.c1 = c1
        self.c2 = c2
        self.max_iterations = max_iterations
        self.tol = tol
        self.epsilon = epsilon
        self.num_memories = num_memories

    def _config(self) -> TrainConfig:
        return TrainConfig(self.c1, self.c2, self.max_iterations, self.tol, self.epsilon, self.num_memories)

    def fit(self, X, y=None):
        docs = check_documents(X)
        labels = self.labels
        if labels is None:
            seqs = y if y is not None else [d.token_labels for d in docs]
            n = max((max(s) for s in seqs if len(s)), default=0) + 1
            labels = LabelVocabulary(tuple(f"label_{i}" for i in range(1, max(n, 2))))
        self.model_, self.training_log_ = train(docs, labels, self.template, self._config(), y)
        self.n_iter_ = len(self.training_log_) - 1
        return self

    @classmethod
    def from_model(cls, model: CrfModel, **params) -> "LinearChainCRF":
        est = cls(labels=model.labels, template=model.template, **params)
        est.model_ = model
        est.training_log_ = []
        est.n_iter_ = 0
        return est

    @property
    def classes_(self) -> np.ndarray:
        check_is_fitted(self, "model_")
        return np.arange(self.model_.n_labels)

    def _vectorize(self, X):
        check_is_fitted(self, "model_")
        docs = check_documents(X, allow_empty=True)
        m = self.model_
        return [vectorize_sequence(d, m.template, m.feature_index, freeze=True) for d in docs]

    def predict(self, X) -> list[np.ndarray]:
        """Viterbi label ids for every token of every document."""
        seqs = self._vectorize(X)
        return decode_corpus(self.model_, seqs)

    def predict_marginals(self, X) -> list[np.ndarray]:
        """Per-token label distributions, ``T x L`` per document."""
        seqs = self._vectorize(X)
        return decode_corpus(self.model_, seqs, with_marginals=True)[1]

    def predict_with_marginals(self, X) -> tuple[list[np.ndarray], list[np.ndarray]]:
        seqs = self._vectorize(X)
        return decode_corpus(self.model_, seqs, with_marginals=True)
