"""Command-line entry point: ``abbrevtag <command> [options]``.

Exit codes: 0 success, 2 usage/configuration/input errors, 3 runtime
failures (training or a cross-validation fold).
"""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .corpus import (
    FORMATS,
    CorpusFormatError,
    LabelVocabulary,
    NormalizationError,
    PreprocessConfig,
    build_inventory,
    corpus_stats,
    load_raw,
    make_folds,
    normalize_corpus,
    prune_rare_labels,
    read_documents,
    read_records,
    reduce_overrepresented,
    subsample_top,
    summarize,
    write_documents,
    write_records,
)
from .eval import CvSummary, FoldError, cross_validate, evaluate_occurrences, evaluate_tokens, format_table, write_report
from .pipeline import (
    PredictionFormatError,
    WindowConfig,
    export_predictions,
    import_predictions,
    read_tags,
    run_token_classifier,
    text_classification_inputs,
    write_tags,
)
from .postprocess import CandidateFilter, PostprocessConfig

logger = logging.getLogger("abbrevtag")

EXIT_USAGE = 2
EXIT_RUNTIME = 3

PRESETS = {
    "umn": {"min_support": 5},
    "umn-40": {"min_support": 5, "top_abvs": 12, "top_labels": 40},
    "medal": {"min_support": 5, "top_abvs": 300, "top_labels": 1005, "reduce_threshold": 500},
    "medal-40": {
        "min_support": 5,
        "top_abvs": 300,
        "top_labels": 1005,
        "reduce_threshold": 500,
        "subset_abvs": 12,
        "subset_labels": 40,
    },
}


class UsageError(Exception):
    pass


def _positive(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return n


def _nonneg_float(value: str) -> float:
    x = float(value)
    if not x >= 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {value}")
    return x


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(output: str | Path, args: argparse.Namespace, inputs: list, started: float) -> Path:
    """One-line JSON manifest next to ``output``."""
    config = {
        k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config", "inputs", "outputs")
    }
    manifest = {
        "command": args.command,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs if p},
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(started)),
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    }
    path = Path(str(output) + ".manifest.jsonl")
    path.write_text(json.dumps(manifest, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path


def _load_corpus(path):
    try:
        return read_documents(path)
    except FileNotFoundError as exc:
        raise UsageError(f"corpus not found: {path}") from exc


def _split(args, docs):
    """Return ``(train, eval)`` documents for the requested fold (all docs if no fold)."""
    if args.fold is None:
        return docs, docs
    if args.fold >= args.folds:
        raise UsageError(f"--fold {args.fold} out of range for --folds {args.folds}")
    return make_folds(docs, args.folds, args.seed).split(docs, args.fold)


def _estimator(args, vocab):
    from .crf import LinearChainCRF

    return LinearChainCRF(labels=vocab, c1=args.c1, c2=args.c2, max_iterations=args.max_iter, tol=args.tol)


# -- commands ---------------------------------------------------------------


def cmd_ingest(args) -> int:
    rejected: list[str] = []
    records = load_raw(args.input, args.format, rejected)
    write_records(args.output, records)
    print(f"ingested {len(records)} records from {args.input}")
    if rejected:
        print(f"rejected {len(rejected)} rows:")
        for msg in rejected:
            print(f"  {msg}")
    return 0


def cmd_preprocess(args) -> int:
    preset = PRESETS.get(args.preset, {}) if args.preset else {}
    for key, value in preset.items():
        if getattr(args, key) is None:
            setattr(args, key, value)
    if args.min_support is None:
        args.min_support = 5
    if args.input.endswith(".csv"):
        records = load_raw(args.input, args.format)
    else:
        records = read_records(args.input)

    def report(stage, recs):
        s = summarize(recs)
        print(f"{stage:<22} labels={s['labels']:>6} abbrevs={s['abbrevs']:>6} rows={s['rows']:>8}")

    report("input", records)
    records = prune_rare_labels(records, args.min_support)
    report(f"min-support {args.min_support}", records)
    if args.top_abvs or args.top_labels:
        records = subsample_top(records, args.top_abvs or 10**9, args.top_labels or 10**9)
        report(f"top {args.top_abvs}/{args.top_labels}", records)
    if args.reduce_threshold:
        records = reduce_overrepresented(records, args.reduce_threshold)
        report(f"reduce {args.reduce_threshold}", records)
    if args.subset_abvs or args.subset_labels:
        records = subsample_top(records, args.subset_abvs or 10**9, args.subset_labels or 10**9)
        report(f"subset {args.subset_abvs}/{args.subset_labels}", records)
    config = PreprocessConfig(max_length=args.max_len, max_abbrev_index=args.max_abv_index, lowercase=args.lowercase)
    vocab = LabelVocabulary.from_records(records)
    docs = normalize_corpus(records, vocab, config)
    kept = {d.source_id for d in docs}
    report("normalized", [r for r in records if r.source_id in kept])
    write_documents(args.output, docs, vocab)
    return 0


def _stats_dict(stats, vocab) -> dict:
    return {
        "documents": sum(stats.word_count_histogram.values()),
        "word_count_histogram": stats.word_count_histogram,
        "abbrev_count_histogram": stats.abbrev_count_histogram,
        "labels_per_abbrev": {
            "mean": stats.labels_per_abbrev_mean,
            "min": stats.labels_per_abbrev_min,
            "max": stats.labels_per_abbrev_max,
            "by_abbrev": stats.labels_per_abbrev,
        },
        "most_ambiguous": [
            {"abbrev": a, "labels": n, "most_frequent_label": vocab.name(lab)} for a, n, lab in stats.most_ambiguous
        ],
        "top_bigrams": [[" ".join(g), n] for g, n in stats.top_bigrams],
        "top_trigrams": [[" ".join(g), n] for g, n in stats.top_trigrams],
        "label_support": {vocab.name(lab): n for lab, n in stats.label_support.items()},
    }


def cmd_stats(args) -> int:
    docs, vocab = _load_corpus(args.corpus)
    if not docs:
        raise UsageError("corpus has no documents")
    stats = corpus_stats(docs, args.top_k, args.exclude_digits)
    words = [n for n, c in stats.word_count_histogram.items() for _ in range(c)]
    print(f"documents: {len(docs)}")
    print(f"mean words per document: {sum(words) / len(words):.2f}")
    print(f"word count histogram buckets: {len(stats.word_count_histogram)}")
    abvs = sum(n * c for n, c in stats.abbrev_count_histogram.items())
    print(f"mean abbreviations per document: {abvs / len(docs):.2f}")
    print(
        "labels per abbreviation: mean {:.2f} min {} max {}".format(
            stats.labels_per_abbrev_mean, stats.labels_per_abbrev_min, stats.labels_per_abbrev_max
        )
    )
    print(f"\nmost ambiguous abbreviations (top {args.top_k}):")
    for a, n, lab in stats.most_ambiguous:
        print(f"  {a:<12} {n:>3}  {vocab.name(lab)}")
    for title, grams in (("bi-grams", stats.top_bigrams), ("tri-grams", stats.top_trigrams)):
        print(f"\ntop {args.top_k} {title}:")
        for g, n in grams:
            print(f"  {' '.join(g):<40} {n}")
    if args.output:
        Path(args.output).write_text(
            json.dumps(_stats_dict(stats, vocab), ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
        )
    return 0


def cmd_train(args) -> int:
    docs, vocab = _load_corpus(args.corpus)
    train_docs, _ = _split(args, docs)
    est = _estimator(args, vocab).fit(train_docs)
    est.model_.save(args.output)
    print(f"trained on {len(train_docs)} documents, {est.n_iter_} iterations, final objective {est.training_log_[-1]:.4f}")
    return 0


def cmd_predict(args) -> int:
    from .crf import CrfModel

    docs, vocab = _load_corpus(args.corpus)
    _, eval_docs = _split(args, docs)
    model = CrfModel.load(args.model)
    pset = run_token_classifier(model, eval_docs, vocab)
    if args.postprocess == "on":
        train_docs, _ = _split(args, docs)
        pset = CandidateFilter.from_inventory(build_inventory(train_docs), args.fallback).transform(pset)
    export_predictions(pset, args.output, vocab)
    tags = args.tags or args.output + ".tags.jsonl"
    write_tags(tags, pset.tags)
    print(f"predicted {len(pset)} occurrences in {len(eval_docs)} documents")
    return 0


def cmd_postprocess(args) -> int:
    docs, vocab = _load_corpus(args.corpus)
    train_docs, eval_docs = _split(args, docs)
    pset = import_predictions(args.predictions, eval_docs, vocab)
    filtered = CandidateFilter(args.fallback).fit(train_docs).transform(pset)
    export_predictions(filtered, args.output, vocab)
    print(f"filtered {len(filtered)} occurrences")
    return 0


def cmd_evaluate(args) -> int:
    docs, vocab = _load_corpus(args.corpus)
    train_docs, eval_docs = _split(args, docs)
    unit = args.unit or ("token" if args.tags else "occurrence")
    if unit == "token":
        if not args.tags:
            raise UsageError("token-level evaluation needs --tags")
        tags = read_tags(args.tags)
        missing = [d.source_id for d in eval_docs if d.source_id not in tags]
        if missing:
            raise UsageError(f"no tags for {len(missing)} documents (first: {missing[0]})")
        report = evaluate_tokens([d.token_labels for d in eval_docs], [tags[d.source_id] for d in eval_docs], args.fold)
    else:
        pset = import_predictions(args.predictions, eval_docs, vocab)
        inventory = build_inventory(train_docs)
        pp = PostprocessConfig(args.fallback) if args.postprocess == "on" else None
        report = evaluate_occurrences(pset, eval_docs, inventory, pp, args.fold)
    summary = CvSummary.from_reports([report])
    print(format_table([summary]))
    if args.output:
        write_report(args.output, [summary], vocab)
    return 0


def cmd_cv(args) -> int:
    docs, vocab = _load_corpus(args.corpus)
    pp = PostprocessConfig(args.fallback) if args.postprocess == "on" else None
    summaries = cross_validate(docs, _estimator(args, vocab), args.folds, args.seed, pp)
    print(format_table(summaries))
    if args.output:
        write_report(args.output, summaries, vocab)
    return 0


def cmd_windows(args) -> int:
    docs, vocab = _load_corpus(args.corpus)
    rows = text_classification_inputs(docs, vocab, WindowConfig(args.window))
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    print(f"wrote {len(rows)} windowed examples")
    return 0


# -- parser -----------------------------------------------------------------


def _add_split(p):
    p.add_argument("--folds", type=int, default=3, help="number of folds (k >= 2)")
    p.add_argument("--fold", type=int, default=None, help="held-out fold index; omit to use the whole corpus")
    p.add_argument("--seed", type=int, default=0)


def _add_train(p):
    p.add_argument("--c1", type=_nonneg_float, default=0.1)
    p.add_argument("--c2", type=_nonneg_float, default=0.1)
    p.add_argument("--max-iter", type=_positive, default=100)
    p.add_argument("--tol", type=_nonneg_float, default=1e-5)


def _add_pp(p, default="off"):
    p.add_argument("--postprocess", choices=("on", "off"), default=default)
    p.add_argument("--fallback", choices=("freq", "raw"), default="freq")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abbrevtag", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value defaults file (flags take precedence)")
    common.add_argument("--threads", type=_positive, default=None, help="cap numeric worker threads")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse a raw corpus CSV")
    p.add_argument("--format", choices=FORMATS, required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_ingest, outputs=("output",), inputs=("input",))

    p = sub.add_parser("preprocess", parents=[common], help="filter, subsample and tokenize records")
    p.add_argument("--input", required=True, help="records file from ingest, or a CSV")
    p.add_argument("--format", choices=FORMATS, default="medal-csv", help="format when --input is a CSV")
    p.add_argument("--output", required=True)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--min-support", type=_positive, default=None)
    p.add_argument("--top-abvs", type=_positive, default=None)
    p.add_argument("--top-labels", type=_positive, default=None)
    p.add_argument("--reduce-threshold", type=_positive, default=None)
    p.add_argument("--subset-abvs", type=_positive, default=None)
    p.add_argument("--subset-labels", type=_positive, default=None)
    p.add_argument("--max-len", type=_positive, default=115)
    p.add_argument("--max-abv-index", type=int, default=110)
    p.add_argument("--lowercase", action="store_true")
    p.set_defaults(func=cmd_preprocess, outputs=("output",), inputs=("input",))

    p = sub.add_parser("stats", parents=[common], help="corpus statistics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--top-k", type=_positive, default=20)
    p.add_argument("--exclude-digits", action="store_true", help="skip n-grams containing digits")
    p.add_argument("--output")
    p.set_defaults(func=cmd_stats, outputs=("output",), inputs=("corpus",))

    p = sub.add_parser("train", parents=[common], help="train a CRF")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True)
    _add_train(p)
    _add_split(p)
    p.set_defaults(func=cmd_train, outputs=("output",), inputs=("corpus",))

    p = sub.add_parser("predict", parents=[common], help="predict abbreviation senses with a CRF")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--tags", help="Viterbi tag file (default: OUTPUT.tags.jsonl)")
    _add_split(p)
    _add_pp(p)
    p.set_defaults(func=cmd_predict, outputs=("output",), inputs=("model", "corpus"))

    p = sub.add_parser("postprocess", parents=[common], help="filter predictions to training senses")
    p.add_argument("--predictions", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--fallback", choices=("freq", "raw"), default="freq")
    _add_split(p)
    p.set_defaults(func=cmd_postprocess, outputs=("output",), inputs=("predictions", "corpus"))

    p = sub.add_parser("evaluate", parents=[common], help="score predictions")
    p.add_argument("--corpus", required=True)
    p.add_argument("--predictions")
    p.add_argument("--tags")
    p.add_argument("--unit", choices=("token", "occurrence"))
    p.add_argument("--output")
    _add_split(p)
    _add_pp(p)
    p.set_defaults(func=cmd_evaluate, outputs=("output",), inputs=("corpus", "predictions", "tags"))

    p = sub.add_parser("cv", parents=[common], help="k-fold cross-validation of the CRF")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output")
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=40, help=argparse.SUPPRESS)
    _add_train(p)
    _add_pp(p)
    p.set_defaults(func=cmd_cv, outputs=("output",), inputs=("corpus",))

    p = sub.add_parser("windows", parents=[common], help="export text-classification windows")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--window", type=int, default=40, help="tokens on each side of the abbreviation")
    p.set_defaults(func=cmd_windows, outputs=("output",), inputs=("corpus",))
    return parser


def read_config(path: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _apply_config(parser, argv):
    """Re-parse with config-file values as defaults of the chosen subcommand."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    config = read_config(args.config)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, raw in config.items():
        action = actions.get(key)
        if action is None:
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        if action.nargs == 0:
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
            continue
        try:
            value = action.type(raw) if action.type else raw
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"config key {key}: {exc}") from exc
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"config key {key}: {value!r} not in {list(action.choices)}")
        defaults[key] = value
    subparser.set_defaults(**defaults)
    for action in subparser._actions:
        if action.dest in defaults:
            action.required = False
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    if getattr(args, "folds", 3) < 2:
        print("error: --folds must be >= 2", file=sys.stderr)
        return EXIT_USAGE
    limits = contextlib.nullcontext()
    if args.threads:
        from threadpoolctl import threadpool_limits

        limits = threadpool_limits(args.threads)
    started = time.time()
    from .crf import TrainingError

    try:
        with limits:
            code = args.func(args)
    except (UsageError, CorpusFormatError, PredictionFormatError, NormalizationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingError, FoldError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for attr in args.outputs:
        out = getattr(args, attr, None)
        if out:
            write_manifest(out, args, [getattr(args, a, None) for a in args.inputs], started)
    return code


if __name__ == "__main__":
    sys.exit(main())
