"""Sequential training of the four stages with freeze checks, the on-disk
model bundle, consolidated metrics, and end-to-end query analysis."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .corpus import (generate_corpus, load_corpus, load_lexicon, load_templates, normalize_tokenize, save_corpus,
                     split_dataset)
from .dep import DpConfig, dp_scores, parse_deps, parse_many, train_dp
from .embeddings import build_vocab, load_embeddings, save_embeddings, train_skipgram
from .ner import NerConfig, eval_ner, recognize, train_ner
from .nn.serialize import file_sha256
from .pos import PosConfig, eval_pos, tag, tag_many, train_pos
from .tagger import SequenceLabeler

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
STAGE_ORDER = ("embeddings", "pos", "dp", "ner")


class PipelineError(RuntimeError):
    """A stage failed; the message names the stage."""


class FreezeViolation(AssertionError):
    """An upstream parameter changed while a downstream stage trained."""


@dataclass
class EmbeddingConfig:
    dim: int = 300
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.1
    min_count: int = 2
    seed: int = 0


@dataclass
class PipelineConfig:
    n_sentences: int = 10000
    corpus_seed: int = 0
    corpus_path: str | None = None       # use an existing JSONL corpus instead of generating
    lexicon_path: str | None = None
    templates_path: str | None = None
    split_ratio: float = 0.9
    split_seed: int = 0
    dev_ratio: float = 0.9               # share of the training split kept for fitting
    dev_seed: int = 1
    embeddings: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    pos: PosConfig = field(default_factory=PosConfig)
    dp: DpConfig = field(default_factory=DpConfig)
    ner: NerConfig = field(default_factory=NerConfig)
    ner_features: tuple[str, ...] = ("word", "word+pos", "word+pos+dp")

    @classmethod
    def from_dict(cls, d: dict | None) -> "PipelineConfig":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise PipelineError(f"config: unknown options {sorted(unknown)}")
        emb = EmbeddingConfig(**d.pop("embeddings", {}) or {})
        pos = PosConfig.from_dict(d.pop("pos", None))
        dp = DpConfig.from_dict(d.pop("dp", None))
        ner = NerConfig.from_dict(d.pop("ner", None))
        if "ner_features" in d:
            d["ner_features"] = tuple(d["ner_features"])
        return cls(embeddings=emb, pos=pos, dp=dp, ner=ner, **d)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ner_features"] = list(self.ner_features)
        return out

    @property
    def headline_ner(self) -> str:
        return self.ner_features[-1]


# ----------------------------------------------------------------- report

@dataclass
class ReportRow:
    task: str
    model: str
    features: str
    accuracy: float
    f1: float
    f1_macro: float
    extra: dict = field(default_factory=dict)


@dataclass
class PipelineReport:
    rows: list[ReportRow] = field(default_factory=list)
    training: dict = field(default_factory=dict)
    freeze_checks: list[dict] = field(default_factory=list)
    corpus: dict = field(default_factory=dict)

    def row(self, task: str, features: str | None = None) -> ReportRow | None:
        for r in self.rows:
            if r.task == task and (features is None or r.features == features):
                return r
        return None

    def metrics(self) -> dict:
        """Flat {task/features: {accuracy, f1}} view used for determinism comparisons."""
        return {f"{r.task}/{r.features}": {"accuracy": r.accuracy, "f1": r.f1, "f1_macro": r.f1_macro, **r.extra}
                for r in self.rows}

    def to_dict(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows], "training": self.training,
                "freeze_checks": self.freeze_checks, "corpus": self.corpus}

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineReport":
        return cls([ReportRow(**r) for r in d.get("rows", [])], d.get("training", {}),
                   d.get("freeze_checks", []), d.get("corpus", {}))


def format_table(report: PipelineReport) -> str:
    header = f"{'Task':<5} {'Model':<16} {'Features':<12} {'Accuracy':>8} {'F1':>8}"
    lines = [header, "-" * len(header)]
    for r in report.rows:
        lines.append(f"{r.task:<5} {r.model:<16} {r.features.upper():<12} {r.accuracy:8.4f} {r.f1:8.4f}")
    return "\n".join(lines) + "\n"


def export_report(report: PipelineReport, path) -> tuple[Path, Path]:
    """Write the JSON metrics file and a plain-text table next to it."""
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    table = path.with_suffix(".txt")
    table.write_text(format_table(report), encoding="utf-8")
    return path, table


def load_report(path) -> PipelineReport:
    return PipelineReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ----------------------------------------------------------------- bundle

def _model_label(model: SequenceLabeler) -> str:
    return ("BI-LSTM" if model.encoder == "bilstm" else "LSTM") + "+CRF"


def ner_filename(features: str) -> str:
    return f"ner.{features.replace('+', '_')}.model"


@dataclass
class Bundle:
    directory: Path
    manifest: dict
    pos: SequenceLabeler
    dp: SequenceLabeler
    ner: SequenceLabeler
    ner_variants: dict[str, SequenceLabeler] = field(default_factory=dict)

    @classmethod
    def load(cls, directory, ner_features: str | None = None) -> "Bundle":
        directory = Path(directory)
        path = directory / MANIFEST
        if not path.exists():
            raise PipelineError(f"{directory}: no {MANIFEST}; not a model bundle")
        manifest = json.loads(path.read_text(encoding="utf-8"))
        stages = manifest["stages"]
        for name in ("pos", "dp"):
            if name not in stages:
                raise PipelineError(f"bundle has no {name} stage")
        pos = SequenceLabeler.load(directory / stages["pos"]["file"])
        dp = SequenceLabeler.load(directory / stages["dp"]["file"])
        variants = {}
        for feats, entry in stages.get("ner", {}).items():
            variants[feats] = SequenceLabeler.load(directory / entry["file"])
        chosen = ner_features or manifest.get("ner_default")
        if chosen not in variants:
            raise PipelineError(f"bundle has no NER model for features {chosen!r}")
        return cls(directory, manifest, pos, dp, variants[chosen], variants)


def verify_bundle(directory) -> list[str]:
    """Files whose current hash differs from the manifest (empty when intact)."""
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST).read_text(encoding="utf-8"))
    bad = []
    for name, entry in _manifest_files(manifest):
        if file_sha256(directory / entry["file"]) != entry["sha256"]:
            bad.append(entry["file"])
    return bad


def _manifest_files(manifest):
    for name, entry in manifest["stages"].items():
        if name == "ner":
            for feats, sub in entry.items():
                yield f"ner/{feats}", sub
        else:
            yield name, entry


# ----------------------------------------------------------------- training

class _FreezeGuard:
    """Records file hashes and parameter digests of finished stages."""

    def __init__(self, directory: Path, report: PipelineReport):
        self.directory = directory
        self.report = report
        self.files: dict[str, str] = {}
        self.models: dict[str, SequenceLabeler] = {}

    def snapshot(self) -> dict:
        snap = {f: file_sha256(self.directory / f) for f in self.files}
        # model digests cover the shared word matrix as well as the stage's own arrays
        snap.update({f"{n}:params": m.digest() for n, m in self.models.items()})
        return snap

    def check(self, stage: str, before: dict) -> None:
        after = self.snapshot()
        changed = sorted(k for k in before if before[k] != after.get(k))
        self.report.freeze_checks.append({"stage": stage, "upstream": sorted(before), "identical": not changed})
        if changed:
            raise FreezeViolation(f"stage {stage} modified frozen upstream parameters: {changed}")


def _run_stage(name: str, fn):
    t0 = time.perf_counter()
    try:
        result = fn()
    except FreezeViolation:
        raise
    except Exception as exc:  # re-raised with the stage name attached
        raise PipelineError(f"stage {name} failed: {exc}") from exc
    log.info("stage %s finished in %.1fs", name, time.perf_counter() - t0)
    return result, time.perf_counter() - t0


def prepare_corpus(config: PipelineConfig):
    """(fit, dev, test) splits; the test split is the 1/10 held out by ``split_ratio``."""
    if config.corpus_path:
        sentences = load_corpus(config.corpus_path)
    else:
        lexicon = load_lexicon(config.lexicon_path)
        templates = load_templates(config.templates_path)
        sentences = generate_corpus(lexicon, templates, config.n_sentences, config.corpus_seed)
    train, test = split_dataset(sentences, config.split_ratio, config.split_seed)
    fit, dev = split_dataset(train, config.dev_ratio, config.dev_seed)
    return fit, dev, test


def train_pipeline(config: PipelineConfig, out_dir) -> tuple[Bundle, PipelineReport]:
    """Train embeddings, PoS, DP and NER in order, freezing each finished stage.

    Every stage's model file is written as soon as it is trained; before and
    after each later stage the hashes of all earlier files and the digests of
    all earlier parameter arrays are compared.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = PipelineReport()
    guard = _FreezeGuard(out, report)
    stages: dict = {}

    (fit, dev, test), _ = _run_stage("corpus", lambda: prepare_corpus(config))
    save_corpus(fit + dev, out / "train.jsonl")
    save_corpus(test, out / "test.jsonl")
    report.corpus = {"fit": len(fit), "dev": len(dev), "test": len(test)}

    ec = config.embeddings

    def embeddings_stage():
        vocab = build_vocab(fit + dev, ec.min_count)
        table = train_skipgram(fit + dev, vocab, d=ec.dim, window=ec.window, negatives=ec.negatives,
                               epochs=ec.epochs, lr=ec.lr, seed=ec.seed)
        save_embeddings(table, vocab, out / "embeddings.txt")
        # downstream stages use exactly what a later reload would see
        return load_embeddings(out / "embeddings.txt")

    (table, vocab), secs = _run_stage("embeddings", embeddings_stage)
    report.corpus["vocabulary"] = len(vocab)
    report.training["embeddings"] = {"seconds": secs}
    stages["embeddings"] = {"file": "embeddings.txt", "sha256": file_sha256(out / "embeddings.txt"),
                            "config": asdict(ec)}
    guard.files["embeddings.txt"] = stages["embeddings"]["sha256"]

    before = guard.snapshot()
    (pos_model, pos_report), secs = _run_stage("pos", lambda: train_pos(fit, dev, vocab, table, config.pos))
    guard.check("pos", before)
    pos_model.save(out / "pos.model")
    report.training["pos"] = {"seconds": secs, **pos_report.to_dict()}
    stages["pos"] = {"file": "pos.model", "sha256": file_sha256(out / "pos.model"), "config": asdict(config.pos)}
    guard.files["pos.model"] = stages["pos"]["sha256"]
    guard.models["pos"] = pos_model

    before = guard.snapshot()
    (dp_model, dp_report), secs = _run_stage("dp", lambda: train_dp(fit, dev, vocab, table, config.dp))
    guard.check("dp", before)
    dp_model.save(out / "dp.model")
    report.training["dp"] = {"seconds": secs, **dp_report.to_dict()}
    stages["dp"] = {"file": "dp.model", "sha256": file_sha256(out / "dp.model"), "config": asdict(config.dp)}
    guard.files["dp.model"] = stages["dp"]["sha256"]
    guard.models["dp"] = dp_model

    ner_models = {}
    stages["ner"] = {}
    for feats in config.ner_features:
        cfg = NerConfig.from_dict({**asdict(config.ner), "features": feats})
        before = guard.snapshot()
        (model, rep), secs = _run_stage(f"ner[{feats}]", lambda: train_ner(fit, dev, vocab, table, cfg))
        guard.check(f"ner[{feats}]", before)
        name = ner_filename(feats)
        model.save(out / name)
        ner_models[feats] = model
        report.training[f"ner[{feats}]"] = {"seconds": secs, **rep.to_dict()}
        stages["ner"][feats] = {"file": name, "sha256": file_sha256(out / name), "config": asdict(cfg)}

    manifest = {"stage_order": list(STAGE_ORDER), "stages": stages, "ner_default": config.headline_ner,
                "config": config.to_dict()}
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    bundle = Bundle(out, manifest, pos_model, dp_model, ner_models[config.headline_ner], ner_models)
    report.rows = evaluate_bundle(bundle, test)
    return bundle, report


def evaluate_bundle(bundle: Bundle, test) -> list[ReportRow]:
    """Test metrics with every stage fed by the predictions of the stages above it."""
    tokens = [s.tokens for s in test]
    rows = []
    pos_m = eval_pos(bundle.pos, test)
    rows.append(ReportRow("POS", _model_label(bundle.pos), "word", pos_m["accuracy"], pos_m["f1_weighted"],
                          pos_m["f1_macro"]))
    pred_pos = tag_many(bundle.pos, tokens)
    feats = "word+pos" if "pos" in bundle.dp.feature_names else "word"
    parses = parse_many(bundle.dp, tokens, pred_pos if feats == "word+pos" else None)
    dp_m = dp_scores([s.op for s in test], [p.ops for p in parses], [s.head for s in test], [p.heads for p in parses])
    rows.append(ReportRow("DP", _model_label(bundle.dp), feats, dp_m["accuracy"], dp_m["f1_weighted"],
                          dp_m["f1_macro"], {"uas": dp_m["uas"]}))
    pred_ops = [p.ops for p in parses]
    for name, model in bundle.ner_variants.items():
        m = eval_ner(model, test, pred_pos, pred_ops)
        per_tag = {k: {"precision": v["precision"], "recall": v["recall"]} for k, v in m["per_label"].items()}
        rows.append(ReportRow("NER", _model_label(model), name, m["accuracy"], m["f1_weighted"], m["f1_macro"],
                              {"per_tag": per_tag}))
    return rows


# ----------------------------------------------------------------- parsing

@dataclass
class Scored:
    label: str
    confidence: float


@dataclass
class TokenAnalysis:
    surface: str
    pos: Scored
    op: Scored
    head: int
    ner: Scored


@dataclass
class QueryAnalysis:
    tokens: list[TokenAnalysis]
    repaired: bool = False

    def __len__(self) -> int:
        return len(self.tokens)

    def to_dict(self) -> dict:
        return {"tokens": [asdict(t) for t in self.tokens], "repaired": self.repaired}


def parse_query(bundle: Bundle, text: str) -> QueryAnalysis:
    """Tokenize, tag, parse and recognise one query."""
    tokens = normalize_tokenize(text)
    if not tokens:
        return QueryAnalysis([])
    tagged = tag(bundle.pos, tokens)
    pos = [t.label for t in tagged]
    deps = parse_deps(bundle.dp, tokens, pos)
    ents = recognize(bundle.ner, tokens, pos, deps.ops)
    out = [
        TokenAnalysis(tok, Scored(p.label, p.confidence), Scored(op, oc), head, Scored(e.label, e.confidence))
        for tok, p, op, oc, head, e in zip(tokens, tagged, deps.ops, deps.confidences, deps.heads, ents)
    ]
    return QueryAnalysis(out, deps.repaired)
