import json

import pytest

from abbrevtag.corpus import (
    NA_WORD,
    NA_WORD_ID,
    STOPWORDS,
    CorpusFormatError,
    Document,
    LabelVocabulary,
    NormalizationError,
    PreprocessConfig,
    RawRecord,
    abbrev_surface,
    build_inventory,
    corpus_stats,
    document_to_record,
    label_row_support,
    load_raw,
    make_folds,
    normalize,
    normalize_corpus,
    prune_rare_labels,
    read_documents,
    read_records,
    read_umn_release,
    reduce_overrepresented,
    subsample_top,
    summarize,
    write_documents,
    write_records,
)
from helpers import MEDAL_TEXT, UMN_TEXT, toy_records, write_csv


def test_stopword_list():
    assert len(STOPWORDS) == 179
    assert {"the", "her", "was", "of"} <= STOPWORDS
    assert "pa" not in STOPWORDS


def test_load_medal_example(tmp_path):
    path = write_csv(tmp_path / "m.csv", [(MEDAL_TEXT, "[76, 90]", "['Biogenic Amines', 'Histamine Release']")])
    (rec,) = load_raw(path, "medal-csv")
    assert rec.locations == (76, 90)
    assert rec.labels == ("Biogenic Amines", "Histamine Release")
    assert [s for _, s, _ in rec.occurrences()] == ["BA", "HR"]


def test_load_umn_example(tmp_path):
    path = write_csv(
        tmp_path / "u.csv",
        [("PA", UMN_TEXT, "[1, 35]", '["Pulmonary Artery", "Pulmonary Artery"]')],
        header=("ABV", "TEXT", "LOCATION", "LABEL"),
    )
    (rec,) = load_raw(path, "umn-csv")
    assert rec.locations == (1, 35)
    assert rec.source_id == 0


def test_load_scalar_and_unsorted(tmp_path):
    path = write_csv(tmp_path / "s.csv", [("a PA b HR", "3", "heart rate"), ("a PA b HR", "[3, 1]", "['hr', 'pa']")])
    recs = load_raw(path, "medal-csv")
    assert recs[0].locations == (3,) and recs[0].labels == ("heart rate",)
    assert recs[1].locations == (1, 3) and recs[1].labels == ("pa", "hr")


def test_load_rejects_arity_mismatch(tmp_path):
    path = write_csv(tmp_path / "r.csv", [("a PA b", "[1]", "['x', 'y']"), ("a PA b", "[1]", "['x']"), ("a b", "[9]", "['x']")])
    rejected = []
    recs = load_raw(path, "medal-csv", rejected)
    assert [r.source_id for r in recs] == [1]
    assert len(rejected) == 2


def test_load_bad_header(tmp_path):
    path = write_csv(tmp_path / "h.csv", [("a",)], header=("TEXT",))
    with pytest.raises(CorpusFormatError) as err:
        load_raw(path)
    assert err.value.line == 1


def test_load_bad_location_has_line(tmp_path):
    path = write_csv(tmp_path / "b.csv", [("a PA", "[1]", "['x']"), ("a PA", "[one]", "['x']")])
    with pytest.raises(CorpusFormatError) as err:
        load_raw(path)
    assert err.value.line == 3


def test_load_empty_file(tmp_path):
    path = tmp_path / "e.csv"
    path.write_text("")
    assert load_raw(path) == []


def test_load_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        load_raw(tmp_path / "x.csv", "tsv")


def test_umn_release_converter(tmp_path):
    path = tmp_path / "release.txt"
    sample = "Her PA pressures were high."
    path.write_text(f"PA|pulmonary artery|PA|4|5|HPI|{sample}\n", encoding="latin-1")
    (rec,) = read_umn_release(path)
    assert rec.locations == (1,) and rec.labels == ("pulmonary artery",)


def test_raw_record_validation():
    with pytest.raises(ValueError):
        RawRecord(0, "a b", [2], ["x"])
    with pytest.raises(ValueError):
        RawRecord(0, "a b c", [2, 1], ["x", "y"])


def test_vocabulary():
    vocab = LabelVocabulary.from_labels(["b", "a", "b"])
    assert vocab.labels == (NA_WORD, "a", "b")
    assert vocab.lookup("b") == 2 and vocab.name(0) == NA_WORD
    with pytest.raises(KeyError):
        vocab.lookup("zzz")
    with pytest.raises(IndexError):
        vocab.name(7)


def test_normalize_umn_example(umn_record):
    vocab = LabelVocabulary.from_records([umn_record])
    doc = normalize(umn_record, vocab)
    assert doc.tokens[:4] == ("PA", "pressures", "44", "26")
    assert [doc.tokens[i] for i in doc.abbrev_positions] == ["PA", "PA"]
    assert all(vocab.name(doc.token_labels[i]) == "Pulmonary Artery" for i in doc.abbrev_positions)
    assert not any(t.lower() in STOPWORDS for i, t in enumerate(doc.tokens) if not doc.abbrev_mask[i])
    assert sum(doc.abbrev_mask) == 2


def test_normalize_medal_example(medal_record):
    vocab = LabelVocabulary.from_records([medal_record])
    doc = normalize(medal_record, vocab)
    names = {doc.tokens[i]: vocab.name(doc.token_labels[i]) for i in doc.abbrev_positions}
    assert names == {"BA": "Biogenic Amines", "HR": "Histamine Release"}
    assert len(doc) < 94


def test_stopword_abbreviation_is_kept():
    vocab = LabelVocabulary.from_labels(["as"])
    doc = normalize(RawRecord(0, "the AS was", [1], ["as"]), vocab)
    assert doc.tokens == ("AS",)


def test_abbrev_punctuation():
    assert abbrev_surface("b.i.d.") == "bid"
    vocab = LabelVocabulary.from_labels(["x"])
    with pytest.raises(NormalizationError):
        normalize(RawRecord(0, "a -- b", [1], ["x"]), vocab)


def test_normalize_index_rule_and_truncation():
    vocab = LabelVocabulary.from_labels(["x"])
    words = [f"w{i}" for i in range(200)]
    late = RawRecord(0, " ".join(words[:111] + ["AB"] + words[111:]), [111], ["x"])
    assert normalize(late, vocab) is None
    edge = RawRecord(1, " ".join(words[:110] + ["AB"] + words[110:]), [110], ["x"])
    doc = normalize(edge, vocab)
    assert len(doc) == 115 and doc.abbrev_positions == [110]
    # stopwords removed before the index rule
    shifted = RawRecord(2, " ".join(["the"] * 20 + words[:111] + ["AB"]), [131], ["x"])
    assert normalize(shifted, vocab) is None
    shifted = RawRecord(3, " ".join(["the"] * 20 + words[:110] + ["AB"]), [130], ["x"])
    assert normalize(shifted, vocab).abbrev_positions == [110]


def test_lowercase_option():
    vocab = LabelVocabulary.from_labels(["x"])
    doc = normalize(RawRecord(0, "Her PA Pressures", [1], ["x"]), vocab, PreprocessConfig(lowercase=True))
    assert doc.tokens == ("pa", "pressures")


def test_document_invariant():
    with pytest.raises(ValueError):
        Document(0, ("a", "b"), (0, 0), (False, True))
    with pytest.raises(ValueError):
        Document(0, ("a",), (1, 0), (True, False))


def test_prune_by_row_support():
    recs = [RawRecord(i, "x AB y CD", [1, 3], ["ab1", "cd1" if i < 2 else "cd2"]) for i in range(5)]
    out = prune_rare_labels(recs, 3)
    assert all(r.labels == ("ab1", "cd2") or r.labels == ("ab1",) for r in out)
    assert summarize(out) == {"labels": 2, "abbrevs": 2, "rows": 5}
    assert prune_rare_labels(recs, 1) == recs
    assert prune_rare_labels(recs, 6) == []


def test_prune_counts_rows_not_occurrences():
    recs = [RawRecord(0, "AB AB AB", [0, 1, 2], ["a", "a", "a"]), RawRecord(1, "AB", [0], ["b"])]
    assert label_row_support(recs) == {"a": 1, "b": 1}
    assert prune_rare_labels(recs, 2) == []


def test_reduce_overrepresented():
    recs = [RawRecord(i, "AB", [0], ["a"]) for i in range(6)] + [RawRecord(6, "AB CD", [0, 1], ["a", "c"])]
    out = reduce_overrepresented(recs, 3)
    # rows 0-3 each leave at least 3 other "a" rows; row 6 protects rare "c"
    assert [r.source_id for r in out] == [4, 5, 6]
    assert label_row_support(out)["a"] == 3
    assert reduce_overrepresented(recs, 100) == recs


def test_subsample_top_ranks_and_ties():
    recs = (
        [RawRecord(i, "AB", [0], ["a1" if i % 2 else "a2"]) for i in range(6)]
        + [RawRecord(10 + i, "CD", [0], ["c1"]) for i in range(3)]
        + [RawRecord(20 + i, "EF", [0], ["e1"]) for i in range(3)]
    )
    out = subsample_top(recs, 2, 2)
    kept = {lab for r in out for lab in r.labels}
    # AB first (6 rows); CD beats EF lexicographically; labels ranked among AB/CD
    assert kept == {"a1", "a2"}
    assert {s for r in out for _, s, _ in r.occurrences()} == {"AB"}
    out = subsample_top(recs, 2, 3)
    assert {lab for r in out for lab in r.labels} == {"a1", "a2", "c1"}


def test_records_round_trip(tmp_path):
    recs = toy_records(10)
    write_records(tmp_path / "r.jsonl", recs)
    assert read_records(tmp_path / "r.jsonl") == recs


def test_documents_round_trip(tmp_path, toy_corpus):
    docs, vocab = toy_corpus
    write_documents(tmp_path / "d.jsonl", docs, vocab)
    docs2, vocab2 = read_documents(tmp_path / "d.jsonl")
    assert docs2 == docs and vocab2 == vocab
    text = (tmp_path / "d.jsonl").read_text()
    write_documents(tmp_path / "e.jsonl", docs2, vocab2)
    assert (tmp_path / "e.jsonl").read_text() == text


def test_documents_bad_label(tmp_path, toy_corpus):
    docs, vocab = toy_corpus
    path = tmp_path / "d.jsonl"
    write_documents(path, docs[:1], LabelVocabulary(("x",)))
    with pytest.raises(CorpusFormatError):
        read_documents(path)


def test_renormalization_is_idempotent(toy_corpus):
    docs, vocab = toy_corpus
    again = normalize_corpus([document_to_record(d, vocab) for d in docs], vocab)
    assert again == docs


def test_inventory(toy_corpus):
    docs, vocab = toy_corpus
    inv = build_inventory(docs)
    assert inv.senses("HR") == {vocab.lookup("heart rate")}
    assert len(inv.senses("PA")) == 2
    assert inv.senses("XYZ") == frozenset()
    assert inv.most_frequent("XYZ") is None
    assert NA_WORD_ID not in inv.senses("PA")


def test_most_frequent_tie_goes_to_lower_id():
    docs = [Document(0, ("AB",), (2,), (True,)), Document(1, ("AB",), (1,), (True,))]
    assert build_inventory(docs).most_frequent("AB") == 1


def test_folds(toy_corpus):
    docs, _ = toy_corpus
    plan = make_folds(docs, 3, seed=0)
    assert plan.fold_sizes() == [30, 30, 30]
    assert make_folds(docs, 3, seed=0) == plan
    assert make_folds(list(reversed(docs)), 3, seed=0) == plan
    assert make_folds(docs, 3, seed=1) != plan
    train, test = plan.split(docs, 1)
    assert len(train) + len(test) == len(docs)
    assert not {d.source_id for d in train} & {d.source_id for d in test}
    with pytest.raises(ValueError):
        make_folds(docs, 1)
    with pytest.raises(ValueError):
        make_folds(docs[:2], 3)


def test_corpus_stats(toy_corpus):
    docs, vocab = toy_corpus
    stats = corpus_stats(docs, top_k=2)
    assert stats.labels_per_abbrev == {"BA": 2, "HR": 1, "PA": 2}
    assert stats.labels_per_abbrev_mean == pytest.approx(5 / 3)
    assert (stats.labels_per_abbrev_min, stats.labels_per_abbrev_max) == (1, 2)
    assert stats.abbrev_count_histogram == {1: 90}
    assert len(stats.top_bigrams) == 2
    assert stats.total_occurrences == 90
    assert [a for a, _, _ in stats.most_ambiguous] == ["BA", "PA"]


def test_single_document_stats():
    doc = Document(0, ("AB", "x", "1", "y"), (1, 0, 0, 0), (True, False, False, False))
    stats = corpus_stats([doc], exclude_digits=True)
    assert len(stats.word_count_histogram) == 1 and len(stats.abbrev_count_histogram) == 1
    assert stats.top_bigrams == [(("ab", "x"), 1)]
    assert stats.top_trigrams == []


def test_records_header_required(tmp_path):
    path = tmp_path / "r.jsonl"
    path.write_text(json.dumps({"source_id": 0}) + "\n")
    with pytest.raises(CorpusFormatError):
        read_records(path)


def test_doctests():
    import doctest

    import abbrevtag.corpus as corpus_mod

    assert doctest.testmod(corpus_mod).failed == 0
