"""Part-of-speech stage: an LSTM-CRF over frozen word vectors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .embeddings import EmbeddingTable, Vocabulary
from .tagger import Example, SequenceLabeler, stage_config, TrainConfig, TrainReport, evaluate, train_labeler
from .tagsets import POS_TAGS, TagSet


@dataclass
class PosConfig:
    hidden: int = 100
    encoder: str = "lstm"          # "bilstm" is available but not the default
    train_words: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)

    @classmethod
    def from_dict(cls, d: dict | None) -> "PosConfig":
        return stage_config(cls, d)


@dataclass
class TaggedToken:
    token: str
    label: str
    confidence: float


def pos_examples(sentences) -> list[Example]:
    return [Example(list(s.tokens), {}, list(s.pos)) for s in sentences]


def build_pos_model(vocab: Vocabulary, words: EmbeddingTable, config: PosConfig | None = None,
                    tagset: TagSet = POS_TAGS) -> SequenceLabeler:
    config = config or PosConfig()
    return SequenceLabeler("pos", tagset, vocab, words, encoder=config.encoder, hidden=config.hidden,
                           dropout=config.train.dropout, seed=config.train.seed,
                           train_words=config.train_words)


def train_pos(train, dev, vocab: Vocabulary, words: EmbeddingTable,
              config: PosConfig | None = None) -> tuple[SequenceLabeler, TrainReport]:
    config = config or PosConfig()
    model = build_pos_model(vocab, words, config)
    report = train_labeler(model, pos_examples(train), pos_examples(dev), config.train)
    return model, report


def tag(model: SequenceLabeler, tokens: Sequence[str]) -> list[TaggedToken]:
    """Viterbi PoS labels, each with the marginal probability of that label."""
    if not tokens:
        return []
    out = model.predict(list(tokens))
    return [TaggedToken(t, l, c) for t, l, c in zip(tokens, out.labels, out.confidences)]


def tag_many(model: SequenceLabeler, token_lists: Sequence[Sequence[str]]) -> list[list[str]]:
    return [r.labels for r in model.predict_many([(list(t), {}) for t in token_lists])]


def eval_pos(model: SequenceLabeler, test) -> dict:
    return evaluate(model, pos_examples(test))
