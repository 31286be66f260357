"""Per-occurrence predictions: CRF token classification, context windows and
the prediction interchange file used to bring in externally trained models.

Interchange files are UTF-8 JSON lines. The first line is a header
``{"format": "abbrevtag-predictions", "version": 1, "provenance": ...}``;
every other line is one abbreviation occurrence::

    {"source_id": 17, "position": 3, "abbrev": "PA",
     "probs": {"Pulmonary Artery": 0.91, "Physician Assistant": 0.09}}

``label`` (the hard prediction, a label name) may also be present. Files
written by other tools may omit the header.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Document, LabelVocabulary
from .validation import check_vocabulary

PREDICTIONS_FORMAT_TAG = "abbrevtag-predictions"
PROVENANCES = ("internal-crf", "external")

_SUM_EXACT = 1e-12
_SUM_TOLERANCE = 1e-3


class PredictionFormatError(ValueError):
    pass


@dataclass(frozen=True)
class WindowConfig:
    m: int = 40

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("window size must be >= 0")


@dataclass(frozen=True)
class OccurrencePrediction:
    """Label distribution for one abbreviation occurrence."""

    source_id: int
    position: int
    abbrev: str
    distribution: dict[int, float]
    label: int | None = None

    def argmax(self) -> int:
        """Highest-probability label; ties go to the lower id."""
        return min(self.distribution, key=lambda lab: (-self.distribution[lab], lab))


@dataclass
class PredictionSet:
    predictions: list[OccurrencePrediction]
    provenance: str = "external"
    tags: dict[int, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}")
        self.predictions = sorted(self.predictions, key=lambda p: (p.source_id, p.position))
        keys = [(p.source_id, p.position) for p in self.predictions]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (source_id, position) in prediction set")

    def __len__(self) -> int:
        return len(self.predictions)

    def __iter__(self):
        return iter(self.predictions)

    def validate(self, docs: Iterable[Document]) -> None:
        """Check every prediction points at a gold abbreviation position."""
        by_id = {d.source_id: d for d in docs}
        for p in self.predictions:
            doc = by_id.get(p.source_id)
            if doc is None:
                raise PredictionFormatError(f"unknown source_id {p.source_id}")
            if not 0 <= p.position < len(doc) or not doc.abbrev_mask[p.position]:
                raise PredictionFormatError(
                    f"source_id {p.source_id}: position {p.position} is not an abbreviation"
                )


def run_token_classifier(model, docs: Sequence[Document], vocab: LabelVocabulary | None = None) -> PredictionSet:
    """Predict every gold abbreviation occurrence with a fitted CRF.

    ``model`` is a fitted :class:`~abbrevtag.crf.LinearChainCRF` or a
    :class:`~abbrevtag.crf.CrfModel`. Each occurrence gets the full marginal
    distribution at its position and the Viterbi label; the Viterbi path of
    every document is kept in ``PredictionSet.tags``.
    """
    from .crf import CrfModel, LinearChainCRF

    est = LinearChainCRF.from_model(model) if isinstance(model, CrfModel) else model
    if vocab is not None:
        check_vocabulary(est.model_.labels, vocab)
    docs = list(docs)
    paths, margs = est.predict_with_marginals(docs)
    preds = []
    tags = {}
    for doc, path, marg in zip(docs, paths, margs):
        tags[doc.source_id] = tuple(int(v) for v in path)
        for pos in doc.abbrev_positions:
            dist = {lab: float(p) for lab, p in enumerate(marg[pos])}
            preds.append(OccurrencePrediction(doc.source_id, pos, doc.tokens[pos], dist, int(path[pos])))
    return PredictionSet(preds, "internal-crf", tags)


def extract_window(tokens: Sequence[str], position: int, config: WindowConfig | None = None) -> list[str]:
    """Up to ``m`` tokens on each side of ``tokens[position]``, the token included."""
    m = (config or WindowConfig()).m
    if not 0 <= position < len(tokens):
        raise IndexError(f"position {position} outside sequence of length {len(tokens)}")
    return list(tokens[max(0, position - m) : min(len(tokens), position + m + 1)])


def text_classification_inputs(
    docs: Iterable[Document], vocab: LabelVocabulary, config: WindowConfig | None = None
) -> list[dict]:
    """One windowed text-classification example per abbreviation occurrence."""
    rows = []
    for doc in docs:
        for pos in doc.abbrev_positions:
            rows.append(
                {
                    "source_id": doc.source_id,
                    "position": pos,
                    "abbrev": doc.tokens[pos],
                    "text": " ".join(extract_window(doc.tokens, pos, config)),
                    "label": vocab.name(doc.token_labels[pos]),
                }
            )
    return rows


def export_predictions(pset: PredictionSet, path: str | Path, vocab: LabelVocabulary) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        header = {"format": PREDICTIONS_FORMAT_TAG, "version": 1, "provenance": pset.provenance}
        fh.write(json.dumps(header) + "\n")
        for p in pset.predictions:
            rec = {
                "source_id": p.source_id,
                "position": p.position,
                "abbrev": p.abbrev,
                "probs": {vocab.name(lab): p.distribution[lab] for lab in sorted(p.distribution)},
            }
            if p.label is not None:
                rec["label"] = vocab.name(p.label)
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def _check_probs(raw, line: int) -> dict[str, float]:
    if not isinstance(raw, dict) or not raw:
        raise PredictionFormatError(f"line {line}: probs must be a nonempty object")
    out = {}
    for name, value in raw.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise PredictionFormatError(f"line {line}: probability for {name!r} is not a number")
        value = float(value)
        if not math.isfinite(value) or value < 0:
            raise PredictionFormatError(f"line {line}: invalid probability {value!r} for {name!r}")
        out[name] = value
    return out


def import_predictions(path: str | Path, docs: Sequence[Document], vocab: LabelVocabulary) -> PredictionSet:
    """Read and validate an interchange file against a processed corpus.

    Distributions summing to within 1e-3 of one are renormalized; others
    are rejected.
    """
    provenance = "external"
    preds = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    for line_no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PredictionFormatError(f"line {line_no}: {exc}") from exc
        if line_no == 1 and obj.get("format") == PREDICTIONS_FORMAT_TAG:
            provenance = obj.get("provenance", "external")
            continue
        try:
            sid, pos, abbrev = int(obj["source_id"]), int(obj["position"]), str(obj["abbrev"])
            raw = obj["probs"]
        except (KeyError, TypeError, ValueError) as exc:
            raise PredictionFormatError(f"line {line_no}: missing or invalid field ({exc})") from exc
        probs = _check_probs(raw, line_no)
        try:
            dist = {vocab.lookup(name): value for name, value in probs.items()}
            label = vocab.lookup(obj["label"]) if obj.get("label") is not None else None
        except KeyError as exc:
            raise PredictionFormatError(f"line {line_no}: {exc.args[0]}") from None
        total = math.fsum(dist.values())
        if abs(total - 1.0) > _SUM_TOLERANCE:
            raise PredictionFormatError(f"line {line_no}: probabilities sum to {total:.6g}, not 1")
        if abs(total - 1.0) > _SUM_EXACT:
            dist = {lab: v / total for lab, v in dist.items()}
        preds.append(OccurrencePrediction(sid, pos, abbrev, dist, label))
    pset = PredictionSet(preds, provenance)
    pset.validate(docs)
    by_id = {d.source_id: d for d in docs}
    for p in pset.predictions:
        if by_id[p.source_id].tokens[p.position] != p.abbrev:
            raise PredictionFormatError(
                f"source_id {p.source_id}: abbrev {p.abbrev!r} does not match token "
                f"{by_id[p.source_id].tokens[p.position]!r}"
            )
    return pset


def write_tags(path: str | Path, tags: dict[int, Sequence[int]]) -> None:
    """Per-document Viterbi label ids as JSON lines ``{source_id, token_labels}``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sid in sorted(tags):
            fh.write(json.dumps({"source_id": sid, "token_labels": list(map(int, tags[sid]))}) + "\n")


def read_tags(path: str | Path) -> dict[int, tuple[int, ...]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out[int(obj["source_id"])] = tuple(int(v) for v in obj["token_labels"])
    return out


def distribution_array(pred: OccurrencePrediction, n_labels: int) -> np.ndarray:
    arr = np.zeros(n_labels)
    for lab, p in pred.distribution.items():
        arr[lab] = p
    return arr
