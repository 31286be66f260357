import json

import pytest

from abbrevtag import cli
from abbrevtag.corpus import read_documents, read_records
from helpers import UMN_TEXT, write_csv


@pytest.fixture
def corpus(tmp_path, toy_csv):
    rec, docs = tmp_path / "rec.jsonl", tmp_path / "docs.jsonl"
    assert cli.main(["ingest", "--format", "medal-csv", "--input", str(toy_csv), "--output", str(rec)]) == 0
    assert cli.main(["preprocess", "--input", str(rec), "--output", str(docs)]) == 0
    return docs


def run(*args):
    return cli.main([str(a) for a in args])


def fold_metrics(path, unit):
    for line in open(path):
        obj = json.loads(line)
        if obj["kind"] == "fold" and obj["unit"] == unit and obj["fold"] == 0:
            return {k: obj[k] for k in ("macro_f1", "weighted_f1", "macro_precision", "weighted_recall")}
    raise AssertionError(f"no fold-0 {unit} record in {path}")


def test_ingest_umn_row(tmp_path):
    src = write_csv(
        tmp_path / "u.csv", [("PA", UMN_TEXT, "[1, 35]", "['Pulmonary Artery', 'Pulmonary Artery']")],
        header=("ABV", "TEXT", "LOCATION", "LABEL"),
    )
    out = tmp_path / "r.jsonl"
    assert run("ingest", "--format", "umn-csv", "--input", src, "--output", out) == 0
    assert len(read_records(out)) == 1
    manifest = json.loads((tmp_path / "r.jsonl.manifest.jsonl").read_text())
    assert manifest["command"] == "ingest" and str(src) in manifest["inputs"]


def test_ingest_empty_and_bad_header(tmp_path, capsys):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    assert run("ingest", "--format", "medal-csv", "--input", empty, "--output", tmp_path / "o.jsonl") == 0
    assert read_records(tmp_path / "o.jsonl") == []
    bad = write_csv(tmp_path / "b.csv", [("x",)], header=("WORDS",))
    assert run("ingest", "--format", "medal-csv", "--input", bad, "--output", tmp_path / "o.jsonl") == 2
    assert "header" in capsys.readouterr().err


def test_preprocess_identity_counts(tmp_path, toy_csv, capsys):
    out = tmp_path / "d.jsonl"
    assert run("preprocess", "--input", toy_csv, "--format", "medal-csv", "--output", out, "--min-support", 1) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if "rows=" in l]
    counts = {l.split()[0]: l.split("labels=")[1] for l in lines}
    assert counts["input"] == counts["min-support"] == counts["normalized"]
    assert len(read_documents(out)[0]) == 90


def test_preprocess_invalid_threshold(tmp_path, toy_csv):
    assert run("preprocess", "--input", toy_csv, "--output", tmp_path / "d", "--min-support", 0) == 2


def test_stats(corpus, tmp_path, capsys):
    out = tmp_path / "s.json"
    assert run("stats", "--corpus", corpus, "--top-k", 2, "--output", out) == 0
    assert "labels per abbreviation: mean 1.67 min 1 max 2" in capsys.readouterr().out
    assert json.loads(out.read_text())["labels_per_abbrev"]["max"] == 2


def test_folds_one_is_usage_error(corpus):
    assert run("cv", "--corpus", corpus, "--folds", 1) == 2


def test_missing_corpus(tmp_path):
    assert run("cv", "--corpus", tmp_path / "nope.jsonl") == 2


def test_predict_evaluate_equals_cv(corpus, tmp_path):
    common = ["--folds", 3, "--seed", 4]
    flags = ["--max-iter", 25]
    model, preds = tmp_path / "m.npz", tmp_path / "p.jsonl"
    assert run("cv", "--corpus", corpus, *common, *flags, "--postprocess", "on", "--output", tmp_path / "cv.jsonl") == 0
    assert run("train", "--corpus", corpus, *common, "--fold", 0, *flags, "--output", model) == 0
    assert run("predict", "--model", model, "--corpus", corpus, *common, "--fold", 0, "--output", preds) == 0
    ev_tok, ev_occ = tmp_path / "tok.jsonl", tmp_path / "occ.jsonl"
    tags = str(preds) + ".tags.jsonl"
    assert run("evaluate", "--corpus", corpus, *common, "--fold", 0, "--tags", tags, "--output", ev_tok) == 0
    assert fold_metrics(ev_tok, "token") == fold_metrics(tmp_path / "cv.jsonl", "token")
    filtered = tmp_path / "pp.jsonl"
    assert run("postprocess", "--predictions", preds, "--corpus", corpus, *common, "--fold", 0, "--output", filtered) == 0
    assert run("evaluate", "--corpus", corpus, *common, "--fold", 0, "--predictions", filtered, "--unit", "occurrence", "--output", ev_occ) == 0
    assert fold_metrics(ev_occ, "occurrence")["macro_f1"] == fold_metrics(tmp_path / "cv.jsonl", "occurrence+pp")["macro_f1"]
    assert run("evaluate", "--corpus", corpus, *common, "--fold", 0, "--predictions", preds, "--postprocess", "on", "--output", ev_occ) == 0
    assert fold_metrics(ev_occ, "occurrence+pp") == fold_metrics(tmp_path / "cv.jsonl", "occurrence+pp")


def test_cv_deterministic(corpus, tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run("cv", "--corpus", corpus, "--max-iter", 10, "--output", a) == 0
    table = capsys.readouterr().out
    assert "±" in table and "Macro F1" in table
    assert run("cv", "--corpus", corpus, "--max-iter", 10, "--output", b) == 0
    assert a.read_bytes() == b.read_bytes()
    ma = json.loads((tmp_path / "a.jsonl.manifest.jsonl").read_text())
    mb = json.loads((tmp_path / "b.jsonl.manifest.jsonl").read_text())
    for m in (ma, mb):
        del m["started_at"], m["finished_at"], m["config"]["output"]
    assert ma == mb


def test_config_precedence(corpus, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nmax-iter = 2\nc1 = 0.5\n")
    out = tmp_path / "cv.jsonl"
    assert run("cv", "--corpus", corpus, "--config", cfg, "--c1", "0.25", "--output", out) == 0
    config = json.loads((tmp_path / "cv.jsonl.manifest.jsonl").read_text())["config"]
    assert config["max_iter"] == 2 and config["c1"] == 0.25 and config["c2"] == 0.1


def test_config_errors(corpus, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("no_such_key = 1\n")
    assert run("cv", "--corpus", corpus, "--config", cfg) == 2
    cfg.write_text("max-iter = zero\n")
    assert run("cv", "--corpus", corpus, "--config", cfg) == 2
    cfg.write_text("just text\n")
    assert run("cv", "--corpus", corpus, "--config", cfg) == 2


def test_training_failure_exit_code(corpus, tmp_path, monkeypatch):
    from abbrevtag.crf import LinearChainCRF, TrainingError

    def boom(self, X, y=None):
        raise TrainingError("diverged")

    monkeypatch.setattr(LinearChainCRF, "fit", boom)
    assert run("train", "--corpus", corpus, "--output", tmp_path / "m.npz") == 3
    assert run("cv", "--corpus", corpus) == 3


def test_windows_and_threads(corpus, tmp_path):
    out = tmp_path / "w.jsonl"
    assert run("windows", "--corpus", corpus, "--output", out, "--window", 1, "--threads", 1) == 0
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(rows) == 90 and all(len(r["text"].split()) <= 3 for r in rows)


def test_usage_errors():
    assert cli.main([]) == 2
    assert cli.main(["train"]) == 2
