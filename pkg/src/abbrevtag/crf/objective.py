"""Regularized negative log-likelihood of a linear-chain CRF and its gradient.

The training path runs forward-backward with per-step rescaling: emission
and transition potentials are shifted by their maxima before
exponentiation, so the recursions become small matrix products while the
accumulated log scale keeps ``log Z`` exact. Any batch whose scaled
recursion underflows is recomputed with the log-domain kernels.
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..features import FeatureVector, vectors_to_csr
from .inference import batch_cap, forward_backward_batch, length_buckets
from .model import CrfModel

logger = logging.getLogger(__name__)

_LABEL_BLOCK = 64
_DENSE_CELLS = 1 << 25


class NonFiniteObjectiveError(FloatingPointError):
    def __init__(self, message: str, sequence: int | None = None):
        self.sequence = sequence
        super().__init__(message)


def _scaled_forward_backward(E: np.ndarray, trans: np.ndarray):
    """Return ``(log_z, unary, pair_sum)`` for a ``(B, T, L)`` batch, or ``None`` on underflow."""
    B, T, L = E.shape
    shift = E.max(axis=2, keepdims=True)
    P = np.exp(E - shift)
    tmax = trans.max()
    G = np.exp(trans - tmax)
    alpha = np.empty_like(P)
    scale = np.empty((B, T))
    a = P[:, 0]
    for t in range(T):
        if t:
            a = (alpha[:, t - 1] @ G) * P[:, t]
        c = a.sum(axis=1)
        scale[:, t] = c
        alpha[:, t] = a / c[:, None]
    if not np.all(np.isfinite(scale)) or np.any(scale <= 0.0):
        return None
    beta = np.empty_like(P)
    beta[:, T - 1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[:, t] = ((P[:, t + 1] * beta[:, t + 1]) @ G.T) / scale[:, t + 1, None]
    unary = alpha * beta
    log_z = np.log(scale).sum(axis=1) + shift[:, :, 0].sum(axis=1) + (T - 1) * tmax
    if T > 1:
        left = alpha[:, :-1].reshape(-1, L)
        right = (P[:, 1:] * beta[:, 1:] / scale[:, 1:, None]).reshape(-1, L)
        pair_sum = (left.T @ right) * G
    else:
        pair_sum = np.zeros((L, L))
    return log_z, unary, pair_sum


def _log_forward_backward(E: np.ndarray, trans: np.ndarray):
    la, lb, log_z = forward_backward_batch(E, trans)
    unary = np.exp(la + lb - log_z[:, None, None])
    pair_sum = np.zeros_like(trans)
    for t in range(1, E.shape[1]):
        pair_sum += np.exp(
            la[:, t - 1, :, None] + trans[None] + (E[:, t] + lb[:, t])[:, None, :] - log_z[:, None, None]
        ).sum(axis=0)
    return log_z, unary, pair_sum


class CrfObjective:
    """Smooth training objective over a fixed corpus.

    ``theta`` is laid out as ``[emission pair weights, transitions.ravel()]``
    where the emission pairs are ``(pair_features[p], pair_labels[p])``.
    Calling the object returns ``(objective, gradient)`` of
    ``sum_i (log Z_i - score_i) + c2 * ||theta||^2``.
    """

    def __init__(
        self,
        sequences: Sequence[Sequence[FeatureVector]],
        gold: Sequence[Sequence[int]],
        n_features: int,
        n_labels: int,
        pair_features: np.ndarray,
        pair_labels: np.ndarray,
        c2: float = 0.0,
    ):
        if len(sequences) != len(gold) or not len(sequences):
            raise ValueError("need a nonempty batch with one gold sequence per input")
        self.n_features = n_features
        self.n_labels = L = n_labels
        self.pair_features = np.asarray(pair_features, dtype=np.int64)
        self.pair_labels = np.asarray(pair_labels, dtype=np.int64)
        self.n_pairs = len(self.pair_features)
        self.c2 = float(c2)
        self.n_evals = 0

        lengths = [len(s) for s in sequences]
        if min(lengths) < 1:
            raise ValueError("every training sequence needs at least one token")
        self.buckets = length_buckets(lengths, batch_cap(L))
        self._bucket_shapes = [(len(b), lengths[b[0]]) for b in self.buckets]
        order = np.concatenate(self.buckets)
        flat_vectors = [v for i in order for v in sequences[i]]
        flat_gold = np.fromiter((y for i in order for y in gold[i]), dtype=np.int64)
        if flat_gold.min() < 0 or flat_gold.max() >= L:
            raise ValueError(f"gold label outside [0, {L})")
        self.X = vectors_to_csr(flat_vectors, n_features)
        self.XT = self.X.T.tocsr()
        self._offsets = np.concatenate([[0], np.cumsum([B * T for B, T in self._bucket_shapes])])

        # observed feature counts, fixed for the corpus
        Y = sp.csr_matrix(
            (np.ones(len(flat_gold)), (np.arange(len(flat_gold)), flat_gold)), shape=(len(flat_gold), L)
        )
        emp = (self.XT @ Y).tocsr()
        emp_pairs = np.asarray(emp[self.pair_features, self.pair_labels]).ravel()
        emp_trans = np.zeros((L, L))
        for i in range(len(sequences)):
            y = np.asarray(gold[i], dtype=np.int64)
            np.add.at(emp_trans, (y[:-1], y[1:]), 1.0)
        self.empirical = np.concatenate([emp_pairs, emp_trans.ravel()])
        self._seq_order = order

    @property
    def n_params(self) -> int:
        return self.n_pairs + self.n_labels**2

    def _emission_matrix(self, w: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix(
            (w, (self.pair_features, self.pair_labels)), shape=(self.n_features, self.n_labels)
        )

    def _expected_pairs(self, M: np.ndarray) -> np.ndarray:
        """``sum_t x_t[f] * M[t, l]`` for every active pair, in label blocks."""
        out = np.empty(self.n_pairs)
        for lo in range(0, self.n_labels, _LABEL_BLOCK):
            hi = min(lo + _LABEL_BLOCK, self.n_labels)
            sel = np.flatnonzero((self.pair_labels >= lo) & (self.pair_labels < hi))
            if not len(sel):
                continue
            block = self.XT @ M[:, lo:hi]
            out[sel] = block[self.pair_features[sel], self.pair_labels[sel] - lo]
        return out

    def nll_terms(self, theta: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        """``(sum log Z, expected counts, per-sequence log Z)``."""
        theta = np.asarray(theta, dtype=np.float64)
        L = self.n_labels
        w, trans = theta[: self.n_pairs], theta[self.n_pairs :].reshape(L, L)
        W = self._emission_matrix(w)
        if self.n_features * L <= _DENSE_CELLS:
            E_all = self.X @ W.toarray()
        else:
            E_all = (self.X @ W).toarray()
        E_all = np.asarray(E_all)
        M = np.empty_like(E_all)
        pair_total = np.zeros((L, L))
        log_z_all = np.empty(len(self._seq_order))
        pos = 0
        for (B, T), lo, hi in zip(self._bucket_shapes, self._offsets[:-1], self._offsets[1:]):
            E = E_all[lo:hi].reshape(B, T, L)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                res = _scaled_forward_backward(E, trans)
            if res is None:
                res = _log_forward_backward(E, trans)
            log_z, unary, pair_sum = res
            bad = ~np.isfinite(log_z)
            if bad.any():
                seq = int(self._seq_order[pos + int(np.flatnonzero(bad)[0])])
                raise NonFiniteObjectiveError(f"non-finite log partition for sequence {seq}", seq)
            M[lo:hi] = unary.reshape(B * T, L)
            pair_total += pair_sum
            log_z_all[pos : pos + B] = log_z
            pos += B
        expected = np.concatenate([self._expected_pairs(M), pair_total.ravel()])
        per_seq = np.empty_like(log_z_all)
        per_seq[self._seq_order] = log_z_all
        return float(log_z_all.sum()), expected, per_seq

    def __call__(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        self.n_evals += 1
        theta = np.asarray(theta, dtype=np.float64)
        total_log_z, expected, _ = self.nll_terms(theta)
        value = total_log_z - float(theta @ self.empirical) + self.c2 * float(theta @ theta)
        grad = expected - self.empirical + 2.0 * self.c2 * theta
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise NonFiniteObjectiveError("non-finite objective or gradient")
        return value, grad


def objective_for_model(
    model: CrfModel,
    batch: Sequence[tuple[Sequence[FeatureVector], Sequence[int]]],
    c2: float = 0.0,
) -> CrfObjective:
    seqs = [v for v, _ in batch]
    gold = [y for _, y in batch]
    return CrfObjective(
        seqs, gold, model.n_features, model.n_labels, model.emission_features, model.emission_labels, c2
    )


def nll_and_gradient(
    model: CrfModel,
    batch: Sequence[tuple[Sequence[FeatureVector], Sequence[int]]],
    c1: float = 0.0,
    c2: float = 0.0,
) -> tuple[float, np.ndarray]:
    """Training objective of ``model`` on ``batch`` and its smooth gradient.

    The returned value is ``sum (log Z - gold score) + c2 ||w||^2 + c1 ||w||_1``.
    The gradient covers the differentiable part only; the L1 term enters
    training through the optimizer's pseudo-gradient.
    """
    if not batch:
        raise ValueError("batch must be nonempty")
    theta = model.parameters()
    value, grad = objective_for_model(model, batch, c2)(theta)
    return value + c1 * float(np.abs(theta).sum()), grad
