"""Exact inference on a linear-chain lattice, in the log domain.

The lattice of a sequence of length ``T`` over ``L`` labels is a ``T x L``
array of emission scores plus an ``L x L`` transition table. Batched
functions take ``(B, T, L)`` emissions for ``B`` sequences of equal length.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from ..features import FeatureVector, vectors_to_csr
from .model import CrfModel


@dataclass(frozen=True)
class Lattice:
    emissions: np.ndarray  # T x L
    transitions: np.ndarray  # L x L

    def __post_init__(self):
        T, L = self.emissions.shape
        if self.transitions.shape != (L, L):
            raise ValueError("transition table does not match emission width")


def emission_scores(model: CrfModel, vectors: Sequence[FeatureVector]) -> np.ndarray:
    """``T x L`` emission scores of a vectorized sequence."""
    X = vectors_to_csr(vectors, model.n_features)
    return np.asarray((X @ model.emission_matrix()).todense())


def build_lattice(model: CrfModel, vectors: Sequence[FeatureVector]) -> Lattice:
    return Lattice(emission_scores(model, vectors), model.transitions)


# -- batched kernels --------------------------------------------------------


def forward_backward_batch(emissions: np.ndarray, transitions: np.ndarray):
    """Log forward/backward tables for a batch of equal-length sequences.

    Returns ``(log_alpha, log_beta, log_z)`` with shapes ``(B, T, L)``,
    ``(B, T, L)`` and ``(B,)``.
    """
    B, T, L = emissions.shape
    la = np.empty_like(emissions)
    lb = np.empty_like(emissions)
    la[:, 0] = emissions[:, 0]
    for t in range(1, T):
        la[:, t] = logsumexp(la[:, t - 1, :, None] + transitions[None], axis=1) + emissions[:, t]
    lb[:, T - 1] = 0.0
    for t in range(T - 2, -1, -1):
        lb[:, t] = logsumexp(transitions[None] + (emissions[:, t + 1] + lb[:, t + 1])[:, None, :], axis=2)
    log_z = logsumexp(la[:, T - 1], axis=1)
    return la, lb, log_z


def marginals_batch(emissions: np.ndarray, transitions: np.ndarray):
    """Unary ``(B, T, L)`` and pairwise ``(B, T-1, L, L)`` marginals plus ``log Z``."""
    la, lb, log_z = forward_backward_batch(emissions, transitions)
    unary = np.exp(la + lb - log_z[:, None, None])
    pair = np.exp(
        la[:, :-1, :, None]
        + transitions[None, None]
        + (emissions[:, 1:] + lb[:, 1:])[:, :, None, :]
        - log_z[:, None, None, None]
    )
    return unary, pair, log_z


def viterbi_batch(emissions: np.ndarray, transitions: np.ndarray):
    """Best label paths ``(B, T)`` and their scores ``(B,)``.

    Ties go to the lower label id, both at backpointers and at the final step.
    """
    B, T, L = emissions.shape
    delta = emissions[:, 0].copy()
    back = np.zeros((B, T, L), dtype=np.int64)
    for t in range(1, T):
        cand = delta[:, :, None] + transitions[None]
        back[:, t] = np.argmax(cand, axis=1)
        delta = np.take_along_axis(cand, back[:, t][:, None, :], axis=1)[:, 0] + emissions[:, t]
    path = np.empty((B, T), dtype=np.int64)
    path[:, T - 1] = np.argmax(delta, axis=1)
    best = delta[np.arange(B), path[:, T - 1]]
    for t in range(T - 1, 0, -1):
        path[:, t - 1] = back[np.arange(B), t, path[:, t]]
    return path, best


# -- single-sequence API ----------------------------------------------------


def _lattice(model_or_lattice, vectors) -> Lattice:
    if isinstance(model_or_lattice, Lattice):
        return model_or_lattice
    if not len(vectors):
        raise ValueError("sequence must contain at least one token")
    return build_lattice(model_or_lattice, vectors)


def score_sequence(model: CrfModel, vectors: Sequence[FeatureVector], label_ids: Sequence[int]) -> float:
    """Unnormalized log score: emissions along the path plus its transitions."""
    if len(vectors) != len(label_ids) or not len(vectors):
        raise ValueError("vectors and label_ids must be nonempty and of equal length")
    y = np.asarray(label_ids, dtype=np.int64)
    if y.min() < 0 or y.max() >= model.n_labels:
        raise ValueError(f"label id out of range [0, {model.n_labels})")
    lat = build_lattice(model, vectors)
    return float(lat.emissions[np.arange(len(y)), y].sum() + lat.transitions[y[:-1], y[1:]].sum())


def log_partition(model: CrfModel, vectors: Sequence[FeatureVector]) -> float:
    """``log Z``: log-sum-exp of the scores of all ``L**T`` label paths."""
    lat = _lattice(model, vectors)
    return float(forward_backward_batch(lat.emissions[None], lat.transitions)[2][0])


def marginals(model: CrfModel, vectors: Sequence[FeatureVector]) -> tuple[np.ndarray, np.ndarray]:
    """Per-position label distributions ``T x L`` and edge marginals ``(T-1) x L x L``."""
    lat = _lattice(model, vectors)
    unary, pair, _ = marginals_batch(lat.emissions[None], lat.transitions)
    return unary[0], pair[0]


def viterbi(model: CrfModel, vectors: Sequence[FeatureVector]) -> tuple[np.ndarray, float]:
    lat = _lattice(model, vectors)
    path, best = viterbi_batch(lat.emissions[None], lat.transitions)
    return path[0], float(best[0])


# -- corpus-level helpers ---------------------------------------------------


def length_buckets(lengths: Sequence[int], max_size: int | None = None) -> list[np.ndarray]:
    """Group sequence indices by length, in ascending length and index order.

    ``max_size`` caps the number of sequences per bucket.
    """
    lengths = np.asarray(lengths, dtype=np.int64)
    if not len(lengths):
        return []
    order = np.argsort(lengths, kind="stable")
    splits = np.flatnonzero(np.diff(lengths[order])) + 1
    buckets = [b for b in np.split(order, splits) if len(b)]
    if max_size is None:
        return buckets
    return [b[i : i + max_size] for b in buckets for i in range(0, len(b), max_size)]


def batch_cap(n_labels: int, budget: int = 1 << 24) -> int:
    """Sequences per batch so that ``B * L * L`` stays within ``budget`` cells."""
    return max(1, budget // (n_labels * n_labels))


def decode_corpus(model: CrfModel, sequences: Sequence[Sequence[FeatureVector]], with_marginals: bool = False):
    """Viterbi paths (and optionally unary marginals) for many sequences.

    Returns lists aligned with ``sequences``; empty sequences yield empty arrays.
    """
    n = len(sequences)
    paths: list = [np.zeros(0, dtype=np.int64)] * n
    margs: list = [np.zeros((0, model.n_labels))] * n
    lengths = [len(s) for s in sequences]
    W = model.emission_matrix()
    for bucket in length_buckets(lengths, batch_cap(model.n_labels)):
        T = lengths[bucket[0]]
        if T == 0:
            continue
        flat = [v for i in bucket for v in sequences[i]]
        E = np.asarray((vectors_to_csr(flat, model.n_features) @ W).todense()).reshape(len(bucket), T, -1)
        best, _ = viterbi_batch(E, model.transitions)
        if with_marginals:
            unary, _, _ = marginals_batch_unary(E, model.transitions)
        for k, i in enumerate(bucket):
            paths[i] = best[k]
            if with_marginals:
                margs[i] = unary[k]
    return (paths, margs) if with_marginals else paths


def marginals_batch_unary(emissions: np.ndarray, transitions: np.ndarray):
    """Like :func:`marginals_batch` but skips the pairwise tables."""
    la, lb, log_z = forward_backward_batch(emissions, transitions)
    return np.exp(la + lb - log_z[:, None, None]), None, log_z
