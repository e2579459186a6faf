"""Dependency stage: a BiLSTM-CRF that predicts one transition operation per
token from word and PoS features, decoded into a tree by the executor."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .embeddings import EmbeddingTable, Vocabulary
from .metrics import classification_report
from .tagger import Example, SequenceLabeler, TrainConfig, TrainReport, stage_config, train_labeler
from .tagsets import OP_TAGS, POS_TAGS, TagSet
from .transitions import reconstruct


@dataclass
class DpConfig:
    hidden: int = 200              # per direction
    encoder: str = "bilstm"
    use_pos: bool = True           # False gives the word-only ablation
    d_pos: int = 25
    train: TrainConfig = field(default_factory=TrainConfig)

    @classmethod
    def from_dict(cls, d: dict | None) -> "DpConfig":
        return stage_config(cls, d)


@dataclass
class DepParse:
    tokens: list[str]
    ops: list[str]
    confidences: list[float]
    heads: list[int]
    repaired: bool          # True when the op sequence needed a forced repair


def dp_examples(sentences, pos: Sequence[Sequence[str]] | None = None, use_pos: bool = True) -> list[Example]:
    """Examples with gold PoS features unless ``pos`` supplies predicted tags."""
    out = []
    for i, s in enumerate(sentences):
        feats = {}
        if use_pos:
            feats["pos"] = list(pos[i]) if pos is not None else list(s.pos)
        out.append(Example(list(s.tokens), feats, list(s.op)))
    return out


def build_dp_model(vocab: Vocabulary, words: EmbeddingTable, config: DpConfig | None = None,
                   pos_tags: TagSet = POS_TAGS) -> SequenceLabeler:
    config = config or DpConfig()
    features = [("pos", pos_tags, config.d_pos)] if config.use_pos else []
    return SequenceLabeler("dp", OP_TAGS, vocab, words, features, encoder=config.encoder,
                           hidden=config.hidden, dropout=config.train.dropout, seed=config.train.seed)


def train_dp(train, dev, vocab: Vocabulary, words: EmbeddingTable,
             config: DpConfig | None = None) -> tuple[SequenceLabeler, TrainReport]:
    """Train on gold PoS features; inference later uses the PoS model's output."""
    config = config or DpConfig()
    model = build_dp_model(vocab, words, config)
    report = train_labeler(model, dp_examples(train, use_pos=config.use_pos),
                           dp_examples(dev, use_pos=config.use_pos), config.train)
    return model, report


def _features(model: SequenceLabeler, pos_tags):
    if "pos" not in model.feature_names:
        return {}
    if pos_tags is None:
        raise ValueError("this dependency model needs PoS tags")
    return {"pos": list(pos_tags)}


def parse_deps(model: SequenceLabeler, tokens: Sequence[str], pos_tags: Sequence[str] | None = None) -> DepParse:
    tokens = list(tokens)
    if not tokens:
        return DepParse([], [], [], [], False)
    out = model.predict(tokens, _features(model, pos_tags))
    rec = reconstruct(out.labels)
    return DepParse(tokens, out.labels, out.confidences, rec.heads, rec.repaired)


def parse_many(model: SequenceLabeler, token_lists, pos_lists=None) -> list[DepParse]:
    items = []
    for i, toks in enumerate(token_lists):
        items.append((list(toks), _features(model, None if pos_lists is None else pos_lists[i])))
    results = []
    for (toks, _), out in zip(items, model.predict_many(items)):
        rec = reconstruct(out.labels)
        results.append(DepParse(toks, out.labels, out.confidences, rec.heads, rec.repaired))
    return results


def dp_scores(gold_ops, pred_ops, gold_heads, pred_heads) -> dict:
    """Operation-label metrics plus unlabeled attachment score."""
    flat_g = [o for seq in gold_ops for o in seq]
    flat_p = [o for seq in pred_ops for o in seq]
    report = classification_report(flat_g, flat_p)
    hits = sum(g == p for gh, ph in zip(gold_heads, pred_heads) for g, p in zip(gh, ph))
    total = sum(len(h) for h in gold_heads)
    report["uas"] = hits / total if total else 0.0
    return report


def eval_dp(model: SequenceLabeler, test, pos: Sequence[Sequence[str]] | None = None) -> dict:
    """Scores against gold ops and heads; ``pos`` defaults to the gold tags."""
    pos_lists = pos if pos is not None else [s.pos for s in test]
    parses = parse_many(model, [s.tokens for s in test], pos_lists)
    return dp_scores([s.op for s in test], [p.ops for p in parses],
                     [s.head for s in test], [p.heads for p in parses])
