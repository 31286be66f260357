"""Corpus ingestion, preprocessing, subsampling and fold assignment.

Raw corpora (MeDAL and UMN style) arrive as rows of free text with the word
indices of the target abbreviations and their gold senses. This module turns
those rows into token-level :class:`Document` objects where every token
carries a label id (``NA_word`` for ordinary words), and implements the
row-level filters used to build the experimental subsets.
"""

from __future__ import annotations

import ast
import csv
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

NA_WORD = "NA_word"
NA_WORD_ID = 0

FORMATS = ("medal-csv", "umn-csv")
CORPUS_FORMAT_TAG = "abbrevtag-corpus"
RECORDS_FORMAT_TAG = "abbrevtag-records"

_NON_ALNUM = re.compile(r"[\W_]+")
_DIGIT = re.compile(r"\d")


class CorpusFormatError(ValueError):
    """Raised when an input file cannot be parsed under its declared format."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NormalizationError(ValueError):
    """Raised when normalization would silently lose a labeled token."""


def load_stopwords() -> frozenset[str]:
    """Return the frozen stopword list shipped in ``data/stopwords.txt``."""
    text = resources.files("abbrevtag").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


STOPWORDS = load_stopwords()


def abbrev_surface(word: str) -> str:
    """Surface key of an abbreviation word: punctuation dropped, case kept.

    >>> abbrev_surface("PA,")
    'PA'
    >>> abbrev_surface("b.i.d.")
    'bid'
    """
    return _NON_ALNUM.sub("", word)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RawRecord:
    """One corpus row.

    Attributes:
        source_id: Stable identifier (0-based row number in the source file).
        text: Free text.
        locations: Word indices (into ``text.split()``) of the abbreviations.
        labels: Gold senses, parallel to ``locations``.
    """

    source_id: int
    text: str
    locations: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "locations", tuple(int(i) for i in self.locations))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.locations) != len(self.labels):
            raise ValueError(
                f"record {self.source_id}: {len(self.locations)} locations "
                f"but {len(self.labels)} labels"
            )
        n_words = len(self.text.split())
        prev = -1
        for loc in self.locations:
            if loc <= prev:
                raise ValueError(f"record {self.source_id}: locations not strictly increasing")
            if loc >= n_words:
                raise ValueError(
                    f"record {self.source_id}: location {loc} outside text of {n_words} words"
                )
            prev = loc

    def occurrences(self) -> list[tuple[int, str, str]]:
        """``(location, abbreviation surface, label)`` for every gold occurrence."""
        words = self.text.split()
        return [(loc, abbrev_surface(words[loc]), lab) for loc, lab in zip(self.locations, self.labels)]


@dataclass(frozen=True)
class LabelVocabulary:
    """Ordered sense inventory; id 0 is always the ``NA_word`` sentinel."""

    labels: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = tuple(self.labels)
        if not labels or labels[0] != NA_WORD:
            labels = (NA_WORD,) + tuple(l for l in labels if l != NA_WORD)
        if len(set(labels)) != len(labels):
            raise ValueError("label vocabulary contains duplicates")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(labels)})

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> "LabelVocabulary":
        return cls(tuple(sorted(set(labels) - {NA_WORD})))

    @classmethod
    def from_records(cls, records: Iterable[RawRecord]) -> "LabelVocabulary":
        return cls.from_labels(lab for rec in records for lab in rec.labels)

    @property
    def na_word_id(self) -> int:
        return NA_WORD_ID

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def lookup(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown label {name!r}") from None

    def name(self, label_id: int) -> str:
        if not 0 <= label_id < len(self.labels):
            raise IndexError(f"label id {label_id} out of range")
        return self.labels[label_id]


@dataclass(frozen=True)
class Document:
    """Preprocessed token sequence with per-token labels."""

    source_id: int
    tokens: tuple[str, ...]
    token_labels: tuple[int, ...]
    abbrev_mask: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "token_labels", tuple(int(l) for l in self.token_labels))
        object.__setattr__(self, "abbrev_mask", tuple(bool(m) for m in self.abbrev_mask))
        if not len(self.tokens) == len(self.token_labels) == len(self.abbrev_mask):
            raise ValueError(f"document {self.source_id}: parallel fields differ in length")
        for lab, is_abv in zip(self.token_labels, self.abbrev_mask):
            if (lab == NA_WORD_ID) == is_abv:
                raise ValueError(
                    f"document {self.source_id}: NA_word must label exactly the non-abbreviation tokens"
                )

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def abbrev_positions(self) -> list[int]:
        return [i for i, m in enumerate(self.abbrev_mask) if m]


@dataclass(frozen=True)
class PreprocessConfig:
    """Tokenization and length rules applied by :func:`normalize`."""

    max_length: int = 115
    max_abbrev_index: int = 110
    lowercase: bool = False
    remove_stopwords: bool = True
    stopwords: frozenset = STOPWORDS

    def __post_init__(self):
        if self.max_length < 1 or self.max_abbrev_index < 0:
            raise ValueError("max_length must be >= 1 and max_abbrev_index >= 0")


@dataclass
class AbbrevInventory:
    """Senses seen with each abbreviation surface form in training data."""

    candidates: dict[str, frozenset[int]] = field(default_factory=dict)
    frequency: dict[tuple[str, int], int] = field(default_factory=dict)

    def __contains__(self, abbrev: str) -> bool:
        return abbrev in self.candidates

    def senses(self, abbrev: str) -> frozenset[int]:
        return self.candidates.get(abbrev, frozenset())

    def count(self, abbrev: str, label_id: int) -> int:
        return self.frequency.get((abbrev, label_id), 0)

    def most_frequent(self, abbrev: str) -> int | None:
        """Most frequent training sense; ties go to the lower label id."""
        senses = self.candidates.get(abbrev)
        if not senses:
            return None
        return min(senses, key=lambda lab: (-self.count(abbrev, lab), lab))


@dataclass(frozen=True)
class SplitPlan:
    """Deterministic assignment of documents to ``k`` folds."""

    k: int
    assignments: dict[int, int]
    seed: int

    def fold_sizes(self) -> list[int]:
        counts = Counter(self.assignments.values())
        return [counts.get(i, 0) for i in range(self.k)]

    def split(self, docs: Sequence[Document], fold: int) -> tuple[list[Document], list[Document]]:
        """Return ``(train, test)`` where ``test`` is fold ``fold``."""
        if not 0 <= fold < self.k:
            raise ValueError(f"fold {fold} out of range for k={self.k}")
        train, test = [], []
        for doc in docs:
            (test if self.assignments[doc.source_id] == fold else train).append(doc)
        return train, test


@dataclass
class CorpusStats:
    word_count_histogram: dict[int, int]
    abbrev_count_histogram: dict[int, int]
    labels_per_abbrev: dict[str, int]
    labels_per_abbrev_mean: float
    labels_per_abbrev_min: int
    labels_per_abbrev_max: int
    top_bigrams: list[tuple[tuple[str, ...], int]]
    top_trigrams: list[tuple[tuple[str, ...], int]]
    label_support: dict[int, int]
    most_ambiguous: list[tuple[str, int, int]]

    @property
    def total_occurrences(self) -> int:
        return sum(self.label_support.values())


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def _parse_list(value: str, line: int, what: str) -> list:
    value = value.strip()
    if not value:
        return []
    if not value.startswith("["):
        return [value]
    for parser in (json.loads, ast.literal_eval):
        try:
            parsed = parser(value)
        except (ValueError, SyntaxError):
            continue
        if isinstance(parsed, (list, tuple)):
            return list(parsed)
    inner = value[1:-1] if value.endswith("]") else None
    if inner is None:
        raise CorpusFormatError(f"unterminated {what} list {value!r}", line)
    return [part.strip().strip("'\"") for part in inner.split(",") if part.strip()]


def load_raw(
    path: str | Path,
    format: str = "medal-csv",
    rejected: list[str] | None = None,
) -> list[RawRecord]:
    """Read a corpus file into :class:`RawRecord` objects, preserving row order.

    Both supported formats share the header ``TEXT,LOCATION,LABEL`` (extra
    columns are ignored). ``LOCATION`` and ``LABEL`` hold bracketed lists; a
    bare scalar is read as a one-element list.

    Args:
        path: CSV file.
        format: ``"medal-csv"`` or ``"umn-csv"``.
        rejected: If given, arity/ordering rejections are appended here as
            messages instead of only being logged.

    Raises:
        CorpusFormatError: bad header or an unparsable row (carries the line).
    """
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")
    records: list[RawRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return records
        except csv.Error as exc:
            raise CorpusFormatError(str(exc), 1) from exc
        columns = {name.strip().upper(): i for i, name in enumerate(header)}
        missing = {"TEXT", "LOCATION", "LABEL"} - columns.keys()
        if missing:
            raise CorpusFormatError(f"header lacks columns {sorted(missing)}", 1)
        i_text, i_loc, i_lab = columns["TEXT"], columns["LOCATION"], columns["LABEL"]
        row_no = 0
        while True:
            try:
                row = next(reader)
            except StopIteration:
                break
            except csv.Error as exc:
                raise CorpusFormatError(str(exc), reader.line_num) from exc
            line = reader.line_num
            if not row:
                continue
            if len(row) < len(header):
                raise CorpusFormatError(f"expected {len(header)} fields, got {len(row)}", line)
            try:
                locations = [int(x) for x in _parse_list(row[i_loc], line, "location")]
            except (TypeError, ValueError) as exc:
                if isinstance(exc, CorpusFormatError):
                    raise
                raise CorpusFormatError(f"non-integer location in {row[i_loc]!r}", line) from exc
            labels = [str(x) for x in _parse_list(row[i_lab], line, "label")]
            source_id = row_no
            row_no += 1
            if len(locations) != len(labels):
                _reject(rejected, f"line {line}: {len(locations)} locations vs {len(labels)} labels")
                continue
            pairs = sorted(zip(locations, labels))
            try:
                records.append(
                    RawRecord(source_id, row[i_text], [p[0] for p in pairs], [p[1] for p in pairs])
                )
            except ValueError as exc:
                _reject(rejected, f"line {line}: {exc}")
    return records


def _reject(sink: list[str] | None, message: str) -> None:
    logger.warning("rejected row: %s", message)
    if sink is not None:
        sink.append(message)


def read_umn_release(path: str | Path) -> list[RawRecord]:
    """Convert the pipe-delimited UMN clinical abbreviation release.

    Each release line reads ``ABV|SENSE|REPRESENTATION|START|END|SECTION|SAMPLE``
    with character offsets into ``SAMPLE``. The word index of the occurrence is
    the number of whitespace-separated words before ``START``.
    """
    records = []
    with open(path, encoding="latin-1") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("|")
            if len(parts) < 7:
                raise CorpusFormatError("expected 7 pipe-separated fields", line_no)
            sense, start, sample = parts[1], parts[3], "|".join(parts[6:])
            try:
                loc = len(sample[: int(start)].split())
            except ValueError as exc:
                raise CorpusFormatError(f"bad start offset {start!r}", line_no) from exc
            if sample[: int(start)] and not sample[int(start) - 1].isspace():
                loc -= 1
            records.append(RawRecord(len(records), sample, [loc], [sense]))
    return records


def write_records(path: str | Path, records: Iterable[RawRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"format": RECORDS_FORMAT_TAG, "version": 1}) + "\n")
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "source_id": rec.source_id,
                        "text": rec.text,
                        "locations": list(rec.locations),
                        "labels": list(rec.labels),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_records(path: str | Path) -> list[RawRecord]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or json.loads(lines[0]).get("format") != RECORDS_FORMAT_TAG:
        raise CorpusFormatError("not a raw record file", 1)
    out = []
    for line_no, line in enumerate(lines[1:], 2):
        obj = json.loads(line)
        try:
            out.append(RawRecord(obj["source_id"], obj["text"], obj["locations"], obj["labels"]))
        except (KeyError, ValueError) as exc:
            raise CorpusFormatError(str(exc), line_no) from exc
    return out


def write_documents(path: str | Path, docs: Iterable[Document], vocab: LabelVocabulary) -> None:
    """Persist a processed corpus as line-delimited JSON.

    The first line is a header holding the label vocabulary; each following
    line is ``{source_id, tokens, token_labels, abbrev_mask}``.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            json.dumps(
                {"format": CORPUS_FORMAT_TAG, "version": 1, "labels": list(vocab.labels)},
                ensure_ascii=False,
            )
            + "\n"
        )
        for doc in docs:
            fh.write(
                json.dumps(
                    {
                        "source_id": doc.source_id,
                        "tokens": list(doc.tokens),
                        "token_labels": list(doc.token_labels),
                        "abbrev_mask": list(doc.abbrev_mask),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_documents(path: str | Path) -> tuple[list[Document], LabelVocabulary]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CorpusFormatError("empty corpus file", 1)
    header = json.loads(lines[0])
    if header.get("format") != CORPUS_FORMAT_TAG:
        raise CorpusFormatError("not a processed corpus file", 1)
    vocab = LabelVocabulary(tuple(header["labels"]))
    docs = []
    for line_no, line in enumerate(lines[1:], 2):
        obj = json.loads(line)
        try:
            doc = Document(obj["source_id"], obj["tokens"], obj["token_labels"], obj["abbrev_mask"])
        except (KeyError, ValueError) as exc:
            raise CorpusFormatError(str(exc), line_no) from exc
        if any(lab >= len(vocab) for lab in doc.token_labels):
            raise CorpusFormatError("label id outside vocabulary", line_no)
        docs.append(doc)
    return docs, vocab


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


def normalize(
    record: RawRecord,
    vocab: LabelVocabulary,
    config: PreprocessConfig | None = None,
) -> Document | None:
    """Tokenize a record and align its labels; ``None`` means the row is dropped.

    Non-alphanumeric characters become spaces, stopwords are removed (gold
    abbreviation words are exempt), abbreviation locations are remapped onto
    the surviving tokens, the row is dropped if any abbreviation now sits
    past ``config.max_abbrev_index``, and the result is truncated to
    ``config.max_length`` tokens.

    Raises:
        NormalizationError: an abbreviation word has no alphanumeric content.
    """
    config = config or PreprocessConfig()
    gold = dict(zip(record.locations, record.labels))
    tokens: list[str] = []
    labels: list[int] = []
    mask: list[bool] = []
    for i, word in enumerate(record.text.split()):
        if i in gold:
            surface = abbrev_surface(word)
            if not surface:
                raise NormalizationError(
                    f"record {record.source_id}: abbreviation {word!r} at word {i} "
                    "is removed by normalization"
                )
            tokens.append(surface.lower() if config.lowercase else surface)
            labels.append(vocab.lookup(gold[i]))
            mask.append(True)
            continue
        for piece in _NON_ALNUM.sub(" ", word).split():
            if config.remove_stopwords and piece.lower() in config.stopwords:
                continue
            tokens.append(piece.lower() if config.lowercase else piece)
            labels.append(NA_WORD_ID)
            mask.append(False)
    positions = [j for j, m in enumerate(mask) if m]
    if positions and positions[-1] > config.max_abbrev_index:
        return None
    n = config.max_length
    return Document(record.source_id, tokens[:n], labels[:n], mask[:n])


def normalize_corpus(
    records: Iterable[RawRecord],
    vocab: LabelVocabulary,
    config: PreprocessConfig | None = None,
) -> list[Document]:
    docs = []
    dropped = 0
    for rec in records:
        doc = normalize(rec, vocab, config)
        if doc is None:
            dropped += 1
        else:
            docs.append(doc)
    logger.info("normalized %d records, dropped %d by the abbreviation index rule", len(docs), dropped)
    return docs


def document_to_record(doc: Document, vocab: LabelVocabulary) -> RawRecord:
    """Inverse view of a document as a raw record (used for re-normalization)."""
    positions = doc.abbrev_positions
    return RawRecord(
        doc.source_id,
        " ".join(doc.tokens),
        positions,
        [vocab.name(doc.token_labels[i]) for i in positions],
    )


# ---------------------------------------------------------------------------
# Row-level filters
# ---------------------------------------------------------------------------


def label_row_support(records: Iterable[RawRecord]) -> Counter:
    """Number of records in which each label occurs at least once."""
    return Counter(lab for rec in records for lab in set(rec.labels))


def summarize(records: Sequence[RawRecord]) -> dict[str, int]:
    """``{"labels", "abbrevs", "rows"}`` counts for before/after reporting."""
    labels, abbrevs = set(), set()
    for rec in records:
        for _, surface, lab in rec.occurrences():
            labels.add(lab)
            abbrevs.add(surface)
    return {"labels": len(labels), "abbrevs": len(abbrevs), "rows": len(records)}


def _keep_occurrences(
    records: Iterable[RawRecord], keep: Callable[[str, str], bool]
) -> list[RawRecord]:
    out = []
    for rec in records:
        kept = [(loc, lab) for loc, surface, lab in rec.occurrences() if keep(surface, lab)]
        if not kept:
            continue
        if len(kept) == len(rec.locations):
            out.append(rec)
        else:
            out.append(RawRecord(rec.source_id, rec.text, [k[0] for k in kept], [k[1] for k in kept]))
    return out


def prune_rare_labels(records: Sequence[RawRecord], min_support: int = 5) -> list[RawRecord]:
    """Remove labels seen in fewer than ``min_support`` rows.

    Occurrences of removed labels are dropped from their rows; rows left with
    no labeled occurrence are dropped.
    """
    if min_support < 1:
        raise ValueError("min_support must be >= 1")
    support = label_row_support(records)
    before = summarize(records)
    out = _keep_occurrences(records, lambda _s, lab: support[lab] >= min_support)
    logger.info("prune_rare_labels(%d): %s -> %s", min_support, before, summarize(out))
    return out


def reduce_overrepresented(records: Sequence[RawRecord], threshold: int = 500) -> list[RawRecord]:
    """Drop rows whose every label still has ``threshold`` other rows.

    One pass in ascending ``source_id``; supports are decremented after each
    drop, so later rows see the reduced counts.
    """
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    support = label_row_support(records)
    dropped = set()
    for rec in sorted(records, key=lambda r: r.source_id):
        labs = set(rec.labels)
        if labs and all(support[lab] - 1 >= threshold for lab in labs):
            dropped.add(rec.source_id)
            for lab in labs:
                support[lab] -= 1
    logger.info("reduce_overrepresented(%d): dropped %d of %d rows", threshold, len(dropped), len(records))
    return [rec for rec in records if rec.source_id not in dropped]


def subsample_top(records: Sequence[RawRecord], top_abbrevs: int, top_labels: int) -> list[RawRecord]:
    """Keep occurrences of the most frequent abbreviations and their top labels.

    Frequency is row support. Abbreviations are ranked first; labels are then
    ranked over the occurrences of the kept abbreviations only. Ties go to the
    lexicographically smaller string.
    """
    if top_abbrevs < 1 or top_labels < 1:
        raise ValueError("top_abbrevs and top_labels must be >= 1")
    abv_support: Counter = Counter()
    for rec in records:
        abv_support.update({surface for _, surface, _ in rec.occurrences()})
    kept_abvs = {a for a, _ in sorted(abv_support.items(), key=lambda kv: (-kv[1], kv[0]))[:top_abbrevs]}
    lab_support: Counter = Counter()
    for rec in records:
        lab_support.update({lab for _, surface, lab in rec.occurrences() if surface in kept_abvs})
    kept_labels = {l for l, _ in sorted(lab_support.items(), key=lambda kv: (-kv[1], kv[0]))[:top_labels]}
    out = _keep_occurrences(records, lambda s, lab: s in kept_abvs and lab in kept_labels)
    logger.info("subsample_top(%d, %d): %s -> %s", top_abbrevs, top_labels, summarize(records), summarize(out))
    return out


# ---------------------------------------------------------------------------
# Inventory, folds, statistics
# ---------------------------------------------------------------------------


def build_inventory(training_docs: Iterable[Document]) -> AbbrevInventory:
    """Collect the senses attached to each abbreviation surface in training docs."""
    freq: Counter = Counter()
    for doc in training_docs:
        for i in doc.abbrev_positions:
            freq[(doc.tokens[i], doc.token_labels[i])] += 1
    candidates: dict[str, set[int]] = {}
    for abv, lab in freq:
        candidates.setdefault(abv, set()).add(lab)
    return AbbrevInventory({a: frozenset(s) for a, s in candidates.items()}, dict(freq))


def make_folds(docs: Sequence[Document], k: int = 3, seed: int = 0) -> SplitPlan:
    """Shuffle source ids with ``seed`` and deal them round-robin into ``k`` folds."""
    if k < 2:
        raise ValueError("k must be >= 2")
    ids = sorted(doc.source_id for doc in docs)
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate source_id in corpus")
    if len(ids) < k:
        raise ValueError(f"cannot make {k} folds from {len(ids)} documents")
    order = np.random.default_rng(seed).permutation(len(ids))
    return SplitPlan(k, {ids[j]: pos % k for pos, j in enumerate(order)}, seed)


def _ngrams(tokens: Sequence[str], n: int) -> Iterable[tuple[str, ...]]:
    return zip(*(tokens[i:] for i in range(n)))


def corpus_stats(docs: Sequence[Document], top_k: int = 20, exclude_digits: bool = False) -> CorpusStats:
    """Histograms, ambiguity summary and top bi/tri-grams of a processed corpus.

    N-grams are computed on lowercased tokens; with ``exclude_digits`` any
    n-gram containing a digit is skipped.
    """
    if not docs:
        raise ValueError("corpus_stats needs at least one document")
    words = Counter(len(doc) for doc in docs)
    abvs = Counter(sum(doc.abbrev_mask) for doc in docs)
    support: Counter = Counter()
    pair_freq: Counter = Counter()
    grams = {2: Counter(), 3: Counter()}
    for doc in docs:
        for i in doc.abbrev_positions:
            support[doc.token_labels[i]] += 1
            pair_freq[(doc.tokens[i], doc.token_labels[i])] += 1
        lowered = [t.lower() for t in doc.tokens]
        for n, counter in grams.items():
            for gram in _ngrams(lowered, n):
                if exclude_digits and any(_DIGIT.search(t) for t in gram):
                    continue
                counter[gram] += 1
    senses: dict[str, set[int]] = {}
    for abv, lab in pair_freq:
        senses.setdefault(abv, set()).add(lab)
    per_abv = {a: len(s) for a, s in sorted(senses.items())}
    counts = list(per_abv.values())
    ambiguous = sorted(per_abv.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
    most_ambiguous = [
        (a, n, min(senses[a], key=lambda lab: (-pair_freq[(a, lab)], lab))) for a, n in ambiguous
    ]

    def top(counter: Counter) -> list[tuple[tuple[str, ...], int]]:
        return sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]

    return CorpusStats(
        word_count_histogram=dict(sorted(words.items())),
        abbrev_count_histogram=dict(sorted(abvs.items())),
        labels_per_abbrev=per_abv,
        labels_per_abbrev_mean=float(np.mean(counts)) if counts else 0.0,
        labels_per_abbrev_min=min(counts, default=0),
        labels_per_abbrev_max=max(counts, default=0),
        top_bigrams=top(grams[2]),
        top_trigrams=top(grams[3]),
        label_support=dict(sorted(support.items())),
        most_ambiguous=most_ambiguous,
    )
