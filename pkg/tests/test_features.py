import doctest

import pytest

import abbrevtag.features as features_mod
from abbrevtag.corpus import Document
from abbrevtag.features import (
    FeatureIndex,
    FeatureTemplate,
    extract_token_features,
    vectorize_sequence,
    vectors_to_csr,
)


def test_doctests():
    assert doctest.testmod(features_mod).failed == 0


def test_full_feature_set():
    feats = extract_token_features(["Her", "PA", "pressures"], 1, abbrev_mask=[False, True, False])
    assert feats == [
        "bias",
        "w=pa",
        "p1=p",
        "p2=pa",
        "s1=a",
        "s2=pa",
        "istitle=false",
        "isupper=true",
        "isdigit=false",
        "abv=true",
        "-1:w=her",
        "-1:istitle=true",
        "-1:isupper=false",
        "+1:w=pressures",
        "+1:istitle=false",
        "+1:isupper=false",
    ]


def test_boundaries():
    first = extract_token_features(["44", "x"], 0)
    assert "BOS" in first and "EOS" not in first
    assert "isdigit=true" in first and "abv=false" in first
    assert not any(f.startswith("-1:") for f in first)
    only = extract_token_features(["a"], 0)
    assert "BOS" in only and "EOS" in only
    with pytest.raises(IndexError):
        extract_token_features(["a"], 1)


def test_template_round_trip_and_validation():
    tmpl = FeatureTemplate(prefix_lengths=(2,), window=(2, -2))
    assert tmpl.window == (-2, 2)
    assert FeatureTemplate.from_dict(tmpl.to_dict()) == tmpl
    with pytest.raises(ValueError):
        FeatureTemplate(window=(0,))
    with pytest.raises(ValueError):
        FeatureTemplate(prefix_lengths=(0,))


def test_index_freeze():
    index = FeatureIndex(["a", "b"])
    assert index.add("c") == 2
    index.freeze()
    assert index.add("d") is None and "d" not in index
    assert FeatureIndex(["x"], frozen=True).frozen


def test_vectorize_and_csr():
    doc = Document(0, ("Her", "PA"), (0, 1), (False, True))
    index = FeatureIndex()
    vecs = vectorize_sequence(doc, FeatureTemplate(), index)
    assert all(list(v) == sorted(set(v)) for v in vecs)
    n = len(index)
    X = vectors_to_csr(vecs, n)
    assert X.shape == (2, n) and X.sum() == sum(len(v) for v in vecs)
    other = Document(1, ("zzz",), (0,), (False,))
    frozen_vecs = vectorize_sequence(other, FeatureTemplate(), index, freeze=True)
    assert len(index) == n
    assert index.get("bias") in frozen_vecs[0]
