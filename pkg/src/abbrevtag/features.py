"""Handcrafted token features for the CRF.

Every feature is a binary indicator named by a string such as ``w=pa`` or
``-1:isupper=true``. :class:`FeatureIndex` maps those strings to integer
columns; once frozen, unseen strings are silently ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import Document


@dataclass(frozen=True)
class FeatureTemplate:
    """Which feature groups to emit for each token.

    ``window`` lists the neighbor offsets whose identity and capitalization
    features are added; the default looks one token to either side.
    """

    prefix_lengths: tuple[int, ...] = (1, 2, 3)
    suffix_lengths: tuple[int, ...] = (1, 2, 3)
    use_capitalization: bool = True
    use_abbrev_flag: bool = True
    window: tuple[int, ...] = (-1, 1)
    use_bos_eos: bool = True

    def __post_init__(self):
        object.__setattr__(self, "prefix_lengths", tuple(self.prefix_lengths))
        object.__setattr__(self, "suffix_lengths", tuple(self.suffix_lengths))
        object.__setattr__(self, "window", tuple(sorted(self.window)))
        if any(n < 1 for n in self.prefix_lengths + self.suffix_lengths):
            raise ValueError("prefix/suffix lengths must be positive")
        if 0 in self.window:
            raise ValueError("window offsets must be nonzero")

    def to_dict(self) -> dict:
        return {
            "prefix_lengths": list(self.prefix_lengths),
            "suffix_lengths": list(self.suffix_lengths),
            "use_capitalization": self.use_capitalization,
            "use_abbrev_flag": self.use_abbrev_flag,
            "window": list(self.window),
            "use_bos_eos": self.use_bos_eos,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureTemplate":
        return cls(
            tuple(d["prefix_lengths"]),
            tuple(d["suffix_lengths"]),
            bool(d["use_capitalization"]),
            bool(d["use_abbrev_flag"]),
            tuple(d["window"]),
            bool(d["use_bos_eos"]),
        )


def _flag(value: bool) -> str:
    return "true" if value else "false"


def _shape_features(token: str, prefix: str = "") -> list[str]:
    return [
        f"{prefix}istitle={_flag(token.istitle())}",
        f"{prefix}isupper={_flag(token.isupper())}",
    ]


def extract_token_features(
    tokens: Sequence[str],
    position: int,
    template: FeatureTemplate | None = None,
    abbrev_mask: Sequence[bool] | None = None,
) -> list[str]:
    """Feature strings for ``tokens[position]``.

    ``abbrev_mask`` supplies the gold abbreviation flag; without it the flag
    is reported false for every token.

    >>> feats = extract_token_features(["her", "PA", "pressures"], 1, abbrev_mask=[False, True, False])
    >>> [f for f in feats if f in ("w=pa", "isupper=true", "abv=true", "-1:w=her", "+1:w=pressures")]
    ['w=pa', 'isupper=true', 'abv=true', '-1:w=her', '+1:w=pressures']
    """
    template = template or FeatureTemplate()
    if not 0 <= position < len(tokens):
        raise IndexError(f"position {position} outside sequence of length {len(tokens)}")
    token = tokens[position]
    low = token.lower()
    feats = ["bias", f"w={low}"]
    feats += [f"p{n}={low[:n]}" for n in template.prefix_lengths if len(low) >= n]
    feats += [f"s{n}={low[-n:]}" for n in template.suffix_lengths if len(low) >= n]
    if template.use_capitalization:
        feats += _shape_features(token)
    feats.append(f"isdigit={_flag(token.isdigit())}")
    if template.use_abbrev_flag:
        is_abv = bool(abbrev_mask[position]) if abbrev_mask is not None else False
        feats.append(f"abv={_flag(is_abv)}")
    for off in template.window:
        j = position + off
        if not 0 <= j < len(tokens):
            continue
        tag = f"{off:+d}:"
        feats.append(f"{tag}w={tokens[j].lower()}")
        if template.use_capitalization:
            feats += _shape_features(tokens[j], tag)
    if template.use_bos_eos:
        if position == 0:
            feats.append("BOS")
        if position == len(tokens) - 1:
            feats.append("EOS")
    return feats


class FeatureIndex:
    """Injective map from feature strings to consecutive integer ids."""

    def __init__(self, names: Iterable[str] = (), frozen: bool = False):
        self._ids: dict[str, int] = {}
        self.names: list[str] = []
        self.frozen = False
        for name in names:
            self.add(name)
        self.frozen = frozen

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    def get(self, name: str) -> int | None:
        return self._ids.get(name)

    def add(self, name: str) -> int | None:
        """Id of ``name``, assigning a fresh one unless the index is frozen."""
        idx = self._ids.get(name)
        if idx is None and not self.frozen:
            idx = len(self.names)
            self._ids[name] = idx
            self.names.append(name)
        return idx

    def freeze(self) -> "FeatureIndex":
        self.frozen = True
        return self


FeatureVector = tuple  # ascending tuple of active feature ids


def vectorize_sequence(
    doc: Document,
    template: FeatureTemplate,
    index: FeatureIndex,
    freeze: bool | None = None,
) -> list[FeatureVector]:
    """One sorted feature-id tuple per token of ``doc``.

    With ``freeze=False`` unseen features are added to ``index``; with
    ``freeze=True`` (or a frozen index) they are dropped.
    """
    frozen = index.frozen if freeze is None else freeze
    vectors = []
    for pos in range(len(doc)):
        ids = set()
        for name in extract_token_features(doc.tokens, pos, template, doc.abbrev_mask):
            idx = index.get(name) if frozen else index.add(name)
            if idx is not None:
                ids.add(idx)
        vectors.append(tuple(sorted(ids)))
    return vectors


def vectors_to_csr(vectors: Sequence[FeatureVector], n_features: int) -> sp.csr_matrix:
    """Stack feature vectors into a binary ``T x n_features`` CSR matrix."""
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(v) for v in vectors])
    indices = np.fromiter((i for v in vectors for i in v), dtype=np.int64, count=int(indptr[-1]))
    data = np.ones(len(indices), dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), n_features))
