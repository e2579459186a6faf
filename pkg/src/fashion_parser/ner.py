"""Entity stage: an LSTM-CRF over word vectors optionally concatenated with
learned PoS and operation-label embeddings."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .embeddings import EmbeddingTable, Vocabulary
from .tagger import (Example, SequenceLabeler, TrainConfig, TrainingError, TrainReport, evaluate,
                     stage_config, train_labeler)
from .tagsets import NER_TAGS, OP_TAGS, POS_TAGS

FEATURE_CONFIGS = {
    "word": (),
    "word+pos": ("pos",),
    "word+pos+dp": ("pos", "op"),
}


def feature_names(config: str) -> tuple[str, ...]:
    key = config.lower()
    if key not in FEATURE_CONFIGS:
        raise TrainingError(f"unknown NER feature config {config!r}; choose from {sorted(FEATURE_CONFIGS)}")
    return FEATURE_CONFIGS[key]


@dataclass
class NerConfig:
    features: str = "word+pos+dp"
    hidden: int = 100
    encoder: str = "lstm"
    d_pos: int = 25
    d_op: int = 8
    train: TrainConfig = field(default_factory=TrainConfig)

    @classmethod
    def from_dict(cls, d: dict | None) -> "NerConfig":
        return stage_config(cls, d)


@dataclass
class EntityResult:
    token: str
    label: str
    confidence: float


def _select(names, pos, ops) -> dict:
    supplied = {"pos": pos, "op": ops}
    feats = {}
    for name in names:
        if supplied[name] is None:
            raise TrainingError(f"feature config needs {name!r} labels but none were supplied")
        feats[name] = list(supplied[name])
    return feats


def ner_examples(sentences, names: Sequence[str], pos=None, ops=None) -> list[Example]:
    """Examples with gold upstream features unless predicted ``pos``/``ops`` lists are given."""
    out = []
    for i, s in enumerate(sentences):
        p = pos[i] if pos is not None else s.pos
        o = ops[i] if ops is not None else s.op
        out.append(Example(list(s.tokens), _select(names, p, o), list(s.ner)))
    return out


def build_ner_model(vocab: Vocabulary, words: EmbeddingTable, config: NerConfig | None = None) -> SequenceLabeler:
    config = config or NerConfig()
    dims = {"pos": (POS_TAGS, config.d_pos), "op": (OP_TAGS, config.d_op)}
    features = [(name, *dims[name]) for name in feature_names(config.features)]
    return SequenceLabeler("ner", NER_TAGS, vocab, words, features, encoder=config.encoder,
                           hidden=config.hidden, dropout=config.train.dropout, seed=config.train.seed)


def build_features(model: SequenceLabeler, tokens: Sequence[str], pos=None, ops=None) -> np.ndarray:
    """Per-token input vectors word || pos || op, omitting what the config leaves out."""
    feats = _select(model.feature_names, pos, ops)
    return model.build_inputs(model.encode_features(list(tokens), feats))


def train_ner(train, dev, vocab: Vocabulary, words: EmbeddingTable,
              config: NerConfig | None = None) -> tuple[SequenceLabeler, TrainReport]:
    config = config or NerConfig()
    model = build_ner_model(vocab, words, config)
    names = model.feature_names
    report = train_labeler(model, ner_examples(train, names), ner_examples(dev, names), config.train)
    return model, report


def recognize(model: SequenceLabeler, tokens: Sequence[str], pos=None, ops=None) -> list[EntityResult]:
    if not tokens:
        return []
    out = model.predict(list(tokens), _select(model.feature_names, pos, ops))
    return [EntityResult(t, l, c) for t, l, c in zip(tokens, out.labels, out.confidences)]


def eval_ner(model: SequenceLabeler, test, pos=None, ops=None) -> dict:
    """Token metrics over the five tags; upstream features default to gold."""
    return evaluate(model, ner_examples(test, model.feature_names, pos, ops))
