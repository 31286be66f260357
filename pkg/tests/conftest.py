import pytest

from abbrevtag.corpus import LabelVocabulary, RawRecord, normalize_corpus
from helpers import ACCEPTANCE_LINES, MEDAL_LABELS, MEDAL_LOCATIONS, MEDAL_TEXT, UMN_LABELS, UMN_LOCATIONS, UMN_TEXT, toy_records, write_csv


@pytest.fixture
def medal_record():
    return RawRecord(0, MEDAL_TEXT, MEDAL_LOCATIONS, MEDAL_LABELS)


@pytest.fixture
def umn_record():
    return RawRecord(0, UMN_TEXT, UMN_LOCATIONS, UMN_LABELS)


@pytest.fixture
def toy_corpus():
    records = toy_records()
    vocab = LabelVocabulary.from_records(records)
    return normalize_corpus(records, vocab), vocab


@pytest.fixture
def toy_csv(tmp_path):
    rows = [(r.text, str(list(r.locations)), str(list(r.labels))) for r in toy_records()]
    return write_csv(tmp_path / "toy.csv", rows)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
