"""Input checks shared by the estimators."""

from __future__ import annotations

from typing import Sequence

from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from .corpus import Document, LabelVocabulary

__all__ = ["NotFittedError", "check_documents", "check_gold", "check_is_fitted", "check_vocabulary"]


def check_documents(X, allow_empty: bool = False) -> list[Document]:
    """Return ``X`` as a list of :class:`Document`, or raise ``TypeError``/``ValueError``."""
    if isinstance(X, Document):
        raise TypeError("expected a sequence of Documents, got a single Document")
    docs = list(X)
    if not docs and not allow_empty:
        raise ValueError("expected at least one document")
    for i, doc in enumerate(docs):
        if not isinstance(doc, Document):
            raise TypeError(f"item {i} is {type(doc).__name__}, not Document")
    return docs


def check_gold(docs: Sequence[Document], y, n_labels: int) -> list[tuple[int, ...]]:
    """Gold label sequences: ``y`` when given, else each document's token labels."""
    if y is None:
        gold = [doc.token_labels for doc in docs]
    else:
        gold = [tuple(int(v) for v in seq) for seq in y]
        if len(gold) != len(docs):
            raise ValueError(f"y has {len(gold)} sequences for {len(docs)} documents")
    for doc, seq in zip(docs, gold):
        if len(seq) != len(doc):
            raise ValueError(f"document {doc.source_id}: {len(seq)} labels for {len(doc)} tokens")
        if seq and (min(seq) < 0 or max(seq) >= n_labels):
            raise ValueError(f"document {doc.source_id}: label id outside [0, {n_labels})")
    return gold


def check_vocabulary(expected: LabelVocabulary, actual: LabelVocabulary) -> None:
    if tuple(expected.labels) != tuple(actual.labels):
        raise ValueError("label vocabulary of the corpus does not match the model's")
