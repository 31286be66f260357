"""Precision/recall/F1 with the NA_word asymmetry, and k-fold cross-validation.

Macro averages include ``NA_word`` (one vote per label); weighted averages
leave it out and weight sense labels by their gold support. Divisions by zero
yield 0.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import clone

from .corpus import NA_WORD_ID, Document, LabelVocabulary, build_inventory, make_folds
from .pipeline import PredictionSet, run_token_classifier
from .postprocess import PostprocessConfig, filter_distribution, resolve_prediction

logger = logging.getLogger(__name__)

METRICS = (
    "macro_f1",
    "macro_precision",
    "macro_recall",
    "weighted_f1",
    "weighted_precision",
    "weighted_recall",
)


class FoldError(RuntimeError):
    def __init__(self, fold: int, cause: Exception):
        self.fold = fold
        super().__init__(f"fold {fold} failed: {cause}")


@dataclass
class ConfusionStats:
    tp: Counter = field(default_factory=Counter)
    fp: Counter = field(default_factory=Counter)
    fn: Counter = field(default_factory=Counter)
    support: Counter = field(default_factory=Counter)
    n_units: int = 0

    @property
    def labels(self) -> set[int]:
        """Labels present in gold or predictions."""
        return {lab for c in (self.support, self.tp, self.fp) for lab, n in c.items() if n}


def confusion(gold: Sequence[int], pred: Sequence[int]) -> ConfusionStats:
    if len(gold) != len(pred):
        raise ValueError(f"gold has {len(gold)} units but pred has {len(pred)}")
    stats = ConfusionStats(n_units=len(gold))
    for g, p in zip(gold, pred):
        stats.support[g] += 1
        if g == p:
            stats.tp[g] += 1
        else:
            stats.fp[p] += 1
            stats.fn[g] += 1
    return stats


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def label_scores(stats: ConfusionStats, label: int) -> tuple[float, float, float]:
    """``(precision, recall, F1)`` of one label."""
    tp, fp, fn = stats.tp[label], stats.fp[label], stats.fn[label]
    p = _ratio(tp, tp + fp)
    r = _ratio(tp, tp + fn)
    return p, r, _ratio(2 * p * r, p + r)


def macro_metrics(stats: ConfusionStats, label_set: Iterable[int] | None = None) -> tuple[float, float, float]:
    """Unweighted mean of per-label scores; default universe is gold ∪ predicted ∪ {NA_word}."""
    labels = sorted(stats.labels | {NA_WORD_ID} if label_set is None else set(label_set))
    if not labels:
        raise ValueError("empty label set")
    scores = np.array([label_scores(stats, lab) for lab in labels])
    p, r, f = scores.mean(axis=0)
    return float(p), float(r), float(f)


def weighted_metrics(stats: ConfusionStats, label_set: Iterable[int] | None = None) -> tuple[float, float, float]:
    """Gold-support weighted mean over sense labels (``NA_word`` excluded by default)."""
    labels = sorted(set(stats.labels) - {NA_WORD_ID} if label_set is None else set(label_set))
    weights = np.array([stats.support[lab] for lab in labels], dtype=float)
    if not labels or weights.sum() == 0:
        raise ValueError("zero total support for weighted metrics")
    scores = np.array([label_scores(stats, lab) for lab in labels])
    p, r, f = weights @ scores / weights.sum()
    return float(p), float(r), float(f)


@dataclass
class EvalReport:
    macro: tuple[float, float, float]
    weighted: tuple[float, float, float]
    per_label: dict[int, tuple[float, float, float, int]]
    unit: str = "token"
    fold: int | None = None
    n_units: int = 0

    @property
    def metrics(self) -> dict[str, float]:
        (mp, mr, mf), (wp, wr, wf) = self.macro, self.weighted
        return {
            "macro_f1": mf,
            "macro_precision": mp,
            "macro_recall": mr,
            "weighted_f1": wf,
            "weighted_precision": wp,
            "weighted_recall": wr,
        }

    def to_dict(self, vocab: LabelVocabulary | None = None) -> dict:
        name = vocab.name if vocab is not None else str
        return {
            "fold": self.fold,
            "unit": self.unit,
            "n_units": self.n_units,
            **self.metrics,
            "per_label": {
                name(lab): {"precision": p, "recall": r, "f1": f, "support": s}
                for lab, (p, r, f, s) in sorted(self.per_label.items())
            },
        }


def _report(stats: ConfusionStats, macro_labels, unit: str, fold: int | None) -> EvalReport:
    per_label = {lab: (*label_scores(stats, lab), stats.support[lab]) for lab in sorted(stats.labels)}
    try:
        weighted = weighted_metrics(stats)
    except ValueError:
        weighted = (0.0, 0.0, 0.0)
    return EvalReport(macro_metrics(stats, macro_labels), weighted, per_label, unit, fold, stats.n_units)


def evaluate_tokens(
    gold: Sequence[Sequence[int]], pred: Sequence[Sequence[int]], fold: int | None = None
) -> EvalReport:
    """Token-level report over all positions of all documents."""
    if len(gold) != len(pred):
        raise ValueError("gold and pred contain different numbers of documents")
    flat_g, flat_p = [], []
    for g, p in zip(gold, pred):
        if len(g) != len(p):
            raise ValueError("document length mismatch between gold and pred")
        flat_g.extend(int(v) for v in g)
        flat_p.extend(int(v) for v in p)
    stats = confusion(flat_g, flat_p)
    return _report(stats, stats.labels | {NA_WORD_ID}, "token", fold)


def evaluate_occurrences(
    pset: PredictionSet,
    docs: Sequence[Document],
    inventory=None,
    postprocess: PostprocessConfig | None = None,
    fold: int | None = None,
    use_hard_labels: bool = False,
) -> EvalReport:
    """Occurrence-level report for a prediction set.

    With ``postprocess`` the distributions are first filtered against
    ``inventory``. ``use_hard_labels`` scores the stored hard labels (e.g.
    Viterbi) instead of the distribution argmax.
    """
    by_id = {d.source_id: d for d in docs}
    pset.validate(docs)
    gold, pred = [], []
    for p in pset:
        gold.append(by_id[p.source_id].token_labels[p.position])
        if postprocess is not None:
            if inventory is None:
                raise ValueError("postprocessing needs a training inventory")
            pred.append(resolve_prediction(filter_distribution(p, inventory, postprocess), inventory))
        elif use_hard_labels and p.label is not None:
            pred.append(p.label)
        else:
            pred.append(resolve_prediction(p, inventory))
    stats = confusion(gold, pred)
    unit = "occurrence+pp" if postprocess is not None else "occurrence"
    return _report(stats, stats.labels, unit, fold)


@dataclass
class CvSummary:
    reports: list[EvalReport]
    mean: dict[str, float]
    std: dict[str, float]
    unit: str = "token"

    @classmethod
    def from_reports(cls, reports: Sequence[EvalReport]) -> "CvSummary":
        if not reports:
            raise ValueError("no fold reports")
        table = np.array([[r.metrics[m] for m in METRICS] for r in reports])
        std = table.std(axis=0, ddof=1) if len(reports) > 1 else np.zeros(len(METRICS))
        return cls(
            list(reports),
            dict(zip(METRICS, map(float, table.mean(axis=0)))),
            dict(zip(METRICS, map(float, std))),
            reports[0].unit,
        )


_HEADERS = ("Macro F1", "Macro P", "Macro R", "Weighted F1", "Weighted P", "Weighted R")


def format_table(summaries: Sequence[CvSummary]) -> str:
    """Mean ± sample std in percent, two decimals, one row per summary."""
    cells = [["unit", *_HEADERS]]
    for s in summaries:
        cells.append(
            [s.unit] + [f"{100 * s.mean[m]:.2f} ± {100 * s.std[m]:.2f}" for m in METRICS]
        )
    widths = [max(len(row[i]) for row in cells) for i in range(len(cells[0]))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_report(path, summaries: Sequence[CvSummary], vocab: LabelVocabulary | None = None) -> None:
    """Line-delimited report: one record per fold report, then one per summary."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in summaries:
            for r in s.reports:
                fh.write(json.dumps({"kind": "fold", **r.to_dict(vocab)}, ensure_ascii=False) + "\n")
        for s in summaries:
            fh.write(
                json.dumps({"kind": "summary", "unit": s.unit, "mean": s.mean, "std": s.std}) + "\n"
            )


def cross_validate(
    docs: Sequence[Document],
    estimator,
    k: int = 3,
    seed: int = 0,
    postprocess: PostprocessConfig | None = None,
) -> list[CvSummary]:
    """Train and evaluate on ``k`` folds.

    Each fold clones ``estimator``, fits it on the other folds and scores raw
    Viterbi labels at the token level. With ``postprocess`` an additional
    occurrence-level summary scores the filtered marginals, using a sense
    inventory built from the training folds only.
    """
    plan = make_folds(docs, k, seed)
    token_reports, pp_reports = [], []
    for fold in range(k):
        train_docs, test_docs = plan.split(docs, fold)
        try:
            est = clone(estimator).fit(train_docs)
            pset = run_token_classifier(est, test_docs)
        except Exception as exc:
            raise FoldError(fold, exc) from exc
        token_reports.append(
            evaluate_tokens([d.token_labels for d in test_docs], [pset.tags[d.source_id] for d in test_docs], fold)
        )
        logger.info("fold %d: %s", fold, token_reports[-1].metrics)
        if postprocess is not None:
            inventory = build_inventory(train_docs)
            pp_reports.append(evaluate_occurrences(pset, test_docs, inventory, postprocess, fold))
    out = [CvSummary.from_reports(token_reports)]
    if pp_reports:
        out.append(CvSummary.from_reports(pp_reports))
    return out
