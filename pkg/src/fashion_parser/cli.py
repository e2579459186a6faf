"""Command-line entry point: ``fashion-parser <subcommand> ...``.

Exit codes: 0 on success, 1 for domain errors (bad corpus, missing model,
failed stage), 2 for usage errors such as unknown flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .corpus import (generate_corpus, load_corpus, load_lexicon, load_templates, normalize_tokenize, save_corpus,
                     split_dataset)
from .dep import DpConfig, eval_dp, parse_deps, train_dp
from .embeddings import build_vocab, load_embeddings, nearest, save_embeddings, train_skipgram
from .ner import NerConfig, eval_ner, recognize, train_ner
from .pipeline import (Bundle, PipelineConfig, PipelineError, PipelineReport, evaluate_bundle, export_report,
                       format_table, load_report, parse_query, train_pipeline)
from .pos import PosConfig, eval_pos, tag, train_pos
from .tagger import SequenceLabeler
from .transitions import format_trace, run_transition_executor


class CliError(Exception):
    pass


def _read_config(path) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON config ({exc})") from None
    if not isinstance(data, dict):
        raise CliError(f"{path}: config must be a JSON object")
    return data


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def _emit(args, payload, text: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text)


# ----------------------------------------------------------------- commands

def cmd_generate(args) -> None:
    lexicon = load_lexicon(args.lexicon)
    templates = load_templates(args.templates)
    sentences = generate_corpus(lexicon, templates, args.n, args.seed)
    save_corpus(sentences, args.out)
    _emit(args, {"sentences": len(sentences), "out": str(args.out)}, f"wrote {len(sentences)} sentences to {args.out}")


def cmd_train_embeddings(args) -> None:
    cfg = _merge({"dim": args.dim, "window": args.window, "negatives": args.negatives, "epochs": args.epochs,
                  "lr": args.lr, "min_count": args.min_count, "seed": args.seed}, _read_config(args.config))
    sentences = load_corpus(args.corpus)
    vocab = build_vocab(sentences, cfg["min_count"])
    table = train_skipgram(sentences, vocab, d=cfg["dim"], window=cfg["window"], negatives=cfg["negatives"],
                           epochs=cfg["epochs"], lr=cfg["lr"], seed=cfg["seed"])
    save_embeddings(table, vocab, args.out)
    _emit(args, {"vocabulary": len(vocab), "dim": table.dim, "out": str(args.out)},
          f"wrote {len(vocab)} x {table.dim} vectors to {args.out}")


def cmd_nearest(args) -> None:
    table, vocab = load_embeddings(args.embeddings)
    if args.word not in vocab:
        raise CliError(f"word {args.word!r} is not in the vocabulary")
    rows = nearest(table, vocab, args.word, args.k)
    _emit(args, [{"word": w, "similarity": s} for w, s in rows], "\n".join(f"{w}\t{s:.4f}" for w, s in rows))


def _stage_config(args, defaults: dict) -> dict:
    train = {"seed": args.seed}
    for key in ("epochs", "lr", "batch_size", "patience", "dropout"):
        value = getattr(args, key)
        if value is not None:
            train[key] = value
    base = {**defaults, "train": train}
    if args.hidden is not None:
        base["hidden"] = args.hidden
    if args.encoder is not None:
        base["encoder"] = args.encoder
    return _merge(base, _read_config(args.config))


def _stage_data(args):
    sentences = load_corpus(args.corpus)
    fit, dev = split_dataset(sentences, args.dev_ratio, args.seed)
    table, vocab = load_embeddings(args.embeddings)
    return fit, dev, table, vocab


def _train_summary(args, model: SequenceLabeler, report) -> None:
    model.save(args.out)
    payload = {"out": str(args.out), "best_epoch": report.best_epoch, "dev_accuracy": report.best_dev_accuracy,
               "epochs": [asdict(e) for e in report.epochs]}
    dev = "n/a" if report.best_dev_accuracy is None else f"{report.best_dev_accuracy:.4f}"
    _emit(args, payload, f"saved {model.kind} model to {args.out} (best epoch {report.best_epoch}, dev accuracy {dev})")


def cmd_train_pos(args) -> None:
    cfg = PosConfig.from_dict(_stage_config(args, {}))
    fit, dev, table, vocab = _stage_data(args)
    model, report = train_pos(fit, dev, vocab, table, cfg)
    _train_summary(args, model, report)


def cmd_train_dp(args) -> None:
    extra = {"use_pos": not args.no_pos}
    cfg = DpConfig.from_dict(_stage_config(args, extra))
    fit, dev, table, vocab = _stage_data(args)
    model, report = train_dp(fit, dev, vocab, table, cfg)
    _train_summary(args, model, report)


def cmd_train_ner(args) -> None:
    cfg = NerConfig.from_dict(_stage_config(args, {"features": args.features}))
    fit, dev, table, vocab = _stage_data(args)
    model, report = train_ner(fit, dev, vocab, table, cfg)
    _train_summary(args, model, report)


def cmd_train_all(args) -> None:
    base = {"n_sentences": args.n, "corpus_seed": args.seed, "split_seed": args.seed,
            "embeddings": {"seed": args.seed}, "pos": {"train": {"seed": args.seed}},
            "dp": {"train": {"seed": args.seed}}, "ner": {"train": {"seed": args.seed}}}
    if args.corpus:
        base["corpus_path"] = str(args.corpus)
    config = PipelineConfig.from_dict(_merge(base, _read_config(args.config)))
    _, report = train_pipeline(config, args.out)
    export_report(report, Path(args.out) / "report.json")
    _emit(args, report.metrics(), format_table(report).rstrip())


def cmd_tag(args) -> None:
    model = SequenceLabeler.load(args.model)
    tokens = normalize_tokenize(args.query)
    rows = tag(model, tokens)
    _emit(args, [asdict(r) for r in rows], "\n".join(f"{r.token}\t{r.label}\t{r.confidence:.4f}" for r in rows))


def cmd_recognize(args) -> None:
    if args.bundle:
        bundle = Bundle.load(args.bundle, args.features)
        pos_model, dp_model, ner_model = bundle.pos, bundle.dp, bundle.ner
    else:
        if not args.model:
            raise CliError("recognize needs --bundle or --model")
        ner_model = SequenceLabeler.load(args.model)
        pos_model = SequenceLabeler.load(args.pos_model) if args.pos_model else None
        dp_model = SequenceLabeler.load(args.dp_model) if args.dp_model else None
    tokens = normalize_tokenize(args.query)
    pos = ops = None
    if tokens and pos_model is not None:
        pos = [t.label for t in tag(pos_model, tokens)]
    if tokens and dp_model is not None:
        ops = parse_deps(dp_model, tokens, pos).ops
    rows = recognize(ner_model, tokens, pos, ops)
    _emit(args, [asdict(r) for r in rows], "\n".join(f"{r.token}\t{r.label}\t{r.confidence:.4f}" for r in rows))


def cmd_parse(args) -> None:
    bundle = Bundle.load(args.bundle, args.features)
    analysis = parse_query(bundle, args.query)
    payload = analysis.to_dict()
    if args.trace and len(analysis):
        result = run_transition_executor([t.op.label for t in analysis.tokens])
        payload["trace"] = [{"op": s.op, "stack": s.stack, "buffer": s.buffer, "arcs": s.arcs} for s in result.trace]
    if args.json:
        print(json.dumps(payload, sort_keys=True))
        return
    lines = []
    for i, t in enumerate(analysis.tokens):
        cols = [str(i), t.surface, t.pos.label, f"{t.pos.confidence:.2f}"]
        if args.deps:
            cols += [t.op.label, f"{t.op.confidence:.2f}", str(t.head)]
        cols += [t.ner.label, f"{t.ner.confidence:.2f}"]
        lines.append("\t".join(cols))
    if args.trace and len(analysis):
        lines.append(format_trace(result, [t.surface for t in analysis.tokens]))
    print("\n".join(lines))


def _bundle_report(args) -> PipelineReport:
    bundle = Bundle.load(args.bundle)
    test_path = args.corpus or Path(args.bundle) / "test.jsonl"
    return PipelineReport(rows=evaluate_bundle(bundle, load_corpus(test_path)))


def cmd_eval(args) -> None:
    if args.bundle:
        report = _bundle_report(args)
        _emit(args, report.metrics(), format_table(report).rstrip())
        return
    if not (args.model and args.corpus):
        raise CliError("eval needs --bundle, or --model together with --corpus")
    model = SequenceLabeler.load(args.model)
    test = load_corpus(args.corpus)
    if model.kind == "pos":
        metrics = eval_pos(model, test)
    elif model.kind == "dp":
        metrics = eval_dp(model, test)
    else:
        metrics = eval_ner(model, test)
    text = f"accuracy {metrics['accuracy']:.4f}  f1 {metrics['f1_weighted']:.4f}  f1_macro {metrics['f1_macro']:.4f}"
    if "uas" in metrics:
        text += f"  uas {metrics['uas']:.4f}"
    _emit(args, metrics, text)


def cmd_export_report(args) -> None:
    if args.report:
        report = load_report(args.report)
    elif args.bundle:
        report = _bundle_report(args)
    else:
        raise CliError("export-report needs --bundle or --report")
    json_path, table_path = export_report(report, args.out)
    _emit(args, {"json": str(json_path), "table": str(table_path), "rows": len(report.rows)},
          format_table(report).rstrip())


# ----------------------------------------------------------------- parser

def _add_stage_flags(p) -> None:
    p.add_argument("--corpus", required=True, help="training corpus (JSONL)")
    p.add_argument("--embeddings", required=True, help="embedding text file")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--dev-ratio", type=float, default=0.9, help="share of the corpus used for fitting (default 0.9)")
    p.add_argument("--hidden", type=int, default=None, help="LSTM units per direction (default: stage default)")
    p.add_argument("--encoder", choices=("lstm", "bilstm"), default=None, help="encoder type (default: stage default)")
    p.add_argument("--epochs", type=int, default=None, help="maximum epochs (default 30)")
    p.add_argument("--lr", type=float, default=None, help="RMSprop learning rate (default 1e-3)")
    p.add_argument("--batch-size", type=int, default=None, help="sentences per batch (default 32)")
    p.add_argument("--patience", type=int, default=None, help="early-stopping patience (default 3)")
    p.add_argument("--dropout", type=float, default=None, help="dropout rate (default 0.5)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fashion-parser", description="Hierarchical fashion query parser.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text, seed=True, config=True):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=fn)
        p.add_argument("--json", action="store_true", help="machine-readable output")
        if seed:
            p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        if config:
            p.add_argument("--config", default=None, help="JSON config file; its values override flags")
        return p

    p = add("generate", cmd_generate, "generate an annotated corpus", config=False)
    p.add_argument("--n", type=int, default=10000, help="number of sentences (default 10000)")
    p.add_argument("--out", required=True, help="output JSONL file")
    p.add_argument("--lexicon", default=None, help="lexicon file (default: bundled)")
    p.add_argument("--templates", default=None, help="template file (default: bundled)")

    p = add("train-embeddings", cmd_train_embeddings, "train skip-gram word vectors")
    p.add_argument("--corpus", required=True, help="corpus JSONL")
    p.add_argument("--out", required=True, help="embedding text file to write")
    p.add_argument("--dim", type=int, default=300, help="vector size (default 300)")
    p.add_argument("--window", type=int, default=5, help="max context window (default 5)")
    p.add_argument("--negatives", type=int, default=5, help="negative samples per pair (default 5)")
    p.add_argument("--epochs", type=int, default=5, help="passes over the corpus (default 5)")
    p.add_argument("--lr", type=float, default=0.1, help="initial learning rate (default 0.1)")
    p.add_argument("--min-count", type=int, default=2, help="minimum word frequency (default 2)")

    p = add("nearest", cmd_nearest, "cosine nearest neighbours of a word", seed=False, config=False)
    p.add_argument("--embeddings", required=True, help="embedding text file")
    p.add_argument("--word", required=True, help="query word")
    p.add_argument("--k", type=int, default=5, help="number of neighbours (default 5)")

    p = add("train-pos", cmd_train_pos, "train the PoS tagger")
    _add_stage_flags(p)
    p = add("train-dp", cmd_train_dp, "train the dependency operation labeler")
    _add_stage_flags(p)
    p.add_argument("--no-pos", action="store_true", help="word features only (ablation)")
    p = add("train-ner", cmd_train_ner, "train the entity recognizer")
    _add_stage_flags(p)
    p.add_argument("--features", default="word+pos+dp", choices=("word", "word+pos", "word+pos+dp"),
                   help="input features (default word+pos+dp)")

    p = add("train-all", cmd_train_all, "train every stage in order and write a bundle")
    p.add_argument("--out", required=True, help="bundle directory")
    p.add_argument("--n", type=int, default=10000, help="sentences to generate (default 10000)")
    p.add_argument("--corpus", default=None, help="use this JSONL corpus instead of generating one")

    p = add("tag", cmd_tag, "PoS-tag a query", seed=False, config=False)
    p.add_argument("--model", required=True, help="PoS model file")
    p.add_argument("query", help="query text")

    p = add("recognize", cmd_recognize, "tag entities in a query", seed=False, config=False)
    p.add_argument("--bundle", default=None, help="bundle directory (supplies all three models)")
    p.add_argument("--model", default=None, help="NER model file")
    p.add_argument("--pos-model", default=None, help="PoS model feeding the pos feature")
    p.add_argument("--dp-model", default=None, help="DP model feeding the op feature")
    p.add_argument("--features", default=None, help="NER variant inside the bundle (default: manifest default)")
    p.add_argument("query", help="query text")

    p = add("parse", cmd_parse, "full analysis of a query", seed=False, config=False)
    p.add_argument("--bundle", required=True, help="bundle directory")
    p.add_argument("--deps", action="store_true", help="show operation labels and heads")
    p.add_argument("--trace", action="store_true", help="dump the transition executor trace")
    p.add_argument("--features", default=None, help="NER variant inside the bundle (default: manifest default)")
    p.add_argument("query", help="query text")

    p = add("eval", cmd_eval, "evaluate a bundle or a single model", seed=False, config=False)
    p.add_argument("--bundle", default=None, help="bundle directory")
    p.add_argument("--model", default=None, help="single model file")
    p.add_argument("--corpus", default=None, help="test corpus (default: the bundle's test.jsonl)")

    p = add("export-report", cmd_export_report, "write the metrics table", seed=False, config=False)
    p.add_argument("--bundle", default=None, help="bundle directory to evaluate")
    p.add_argument("--corpus", default=None, help="test corpus (default: the bundle's test.jsonl)")
    p.add_argument("--report", default=None, help="existing report JSON to re-export")
    p.add_argument("--out", required=True, help="report JSON path; the table goes next to it as .txt")
    return parser


DOMAIN_ERRORS = (ValueError, OSError, KeyError, PipelineError, CliError)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except DOMAIN_ERRORS as exc:
        message = str(exc) or exc.__class__.__name__
        print(f"error: {message}".replace("\n", " "), file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
