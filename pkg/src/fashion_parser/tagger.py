"""Generic LSTM-CRF / BiLSTM-CRF sequence labeler shared by the three stages.

Input for each token is the concatenation, in a fixed order, of its word
vector and one learned embedding per extra categorical feature (PoS tag,
transition operation).  The encoder output goes through dropout and a
linear projection to per-label emission scores scored by a linear-chain CRF.
"""

from __future__ import annotations

import logging
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .embeddings import EmbeddingTable, Vocabulary
from .metrics import classification_report
from .nn.crf import CrfParams, crf_marginals, crf_nll_grad, crf_viterbi
from .nn.layers import Linear, dropout
from .nn.lstm import LstmParams, bilstm_backward, bilstm_forward, bptt_backward, lstm_forward
from .nn.optim import RMSprop
from .nn.serialize import arrays_digest, load_model_file, save_model_file
from .tagsets import TagSet

log = logging.getLogger(__name__)


class TrainingError(ValueError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8
    clip_norm: float | None = 5.0
    dropout: float = 0.5
    patience: int = 3
    seed: int = 0
    # large-scale settings (elements per batch, steps per epoch); None = full pass
    steps_per_epoch: int | None = None
    target_accuracy: float | None = None  # stop once dev accuracy reaches this

    @classmethod
    def from_dict(cls, d: dict | None) -> "TrainConfig":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise TrainingError(f"unknown training options: {sorted(unknown)}")
        return cls(**d)


def stage_config(cls, d: dict | None):
    """Build a stage config dataclass from a plain dict with a nested ``train`` section."""
    d = dict(d or {})
    train = TrainConfig.from_dict(d.pop("train", None))
    unknown = set(d) - set(cls.__dataclass_fields__)
    if unknown:
        raise TrainingError(f"unknown {cls.__name__} options: {sorted(unknown)}")
    return cls(train=train, **d)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_accuracy: float | None
    seconds: float


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_dev_accuracy: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Labeled:
    """Sequence prediction: label indices plus the marginal of each chosen label."""
    labels: list[str]
    confidences: list[float]
    marginals: np.ndarray


class SequenceLabeler:
    def __init__(self, kind: str, labels: TagSet, vocab: Vocabulary, words: EmbeddingTable,
                 features: Sequence[tuple[str, TagSet, int]] = (), encoder: str = "lstm",
                 hidden: int = 100, dropout: float = 0.5, seed: int = 0, train_words: bool = False):
        if encoder not in ("lstm", "bilstm"):
            raise TrainingError(f"unknown encoder {encoder!r}")
        if len(words) != len(vocab):
            raise TrainingError("embedding table and vocabulary differ in size")
        self.kind = kind
        self.labels = labels
        self.vocab = vocab
        self.words = words if train_words else words.frozen()
        self.train_words = train_words
        self.features = [(name, tags, int(dim)) for name, tags, dim in features]
        self.encoder = encoder
        self.hidden = hidden
        self.dropout = dropout
        rng = np.random.default_rng(seed)
        self.params: dict[str, np.ndarray] = {}
        for name, tags, dim in self.features:
            self.params[f"feat.{name}"] = rng.uniform(-0.05, 0.05, size=(len(tags), dim))
        d_in = self.input_size
        fwd = LstmParams.init(d_in, hidden, rng)
        self.params.update({f"enc.fwd.{k}": v for k, v in fwd.arrays().items()})
        if encoder == "bilstm":
            bwd = LstmParams.init(d_in, hidden, rng)
            self.params.update({f"enc.bwd.{k}": v for k, v in bwd.arrays().items()})
        proj = Linear.init(self.encoder_size, len(labels), rng)
        self.params["proj.W"], self.params["proj.b"] = proj.W, proj.b
        for k, v in CrfParams.zeros(len(labels)).arrays().items():
            self.params[f"crf.{k}"] = v
        if train_words:
            self.params["word"] = self.words.matrix

    # ----------------------------------------------------------- structure
    @property
    def input_size(self) -> int:
        return self.words.dim + sum(dim for _, _, dim in self.features)

    @property
    def encoder_size(self) -> int:
        return self.hidden * (2 if self.encoder == "bilstm" else 1)

    @property
    def feature_names(self) -> list[str]:
        return [name for name, _, _ in self.features]

    def _lstm(self, direction: str) -> LstmParams:
        p = self.params
        return LstmParams(p[f"enc.{direction}.W"], p[f"enc.{direction}.U"], p[f"enc.{direction}.b"])

    @property
    def crf(self) -> CrfParams:
        p = self.params
        return CrfParams(p["crf.transitions"], p["crf.start"], p["crf.stop"])

    # ----------------------------------------------------------- features
    def encode_features(self, tokens: Sequence[str], features: dict[str, Sequence[str]]) -> dict[str, np.ndarray]:
        ids = {"word": self.vocab.encode(tokens)}
        for name, tags, _ in self.features:
            if name not in features or features[name] is None:
                raise TrainingError(f"{self.kind} model needs the {name!r} feature")
            seq = features[name]
            if len(seq) != len(tokens):
                raise TrainingError(f"{name} feature has {len(seq)} entries for {len(tokens)} tokens")
            ids[name] = np.array(tags.encode(seq), dtype=np.int64)
        return ids

    def build_inputs(self, ids: dict[str, np.ndarray]) -> np.ndarray:
        """Concatenated word || feature vectors; works for (T,) or (B, T) id arrays."""
        parts = [self.words.matrix[ids["word"]]]
        for name, _, _ in self.features:
            parts.append(self.params[f"feat.{name}"][ids[name]])
        return np.concatenate(parts, axis=-1)

    # ----------------------------------------------------------- forward/backward
    def _encode(self, x: np.ndarray):
        if self.encoder == "bilstm":
            return bilstm_forward(self._lstm("fwd"), self._lstm("bwd"), x)
        return lstm_forward(self._lstm("fwd"), x)

    def emissions(self, ids: dict[str, np.ndarray]) -> np.ndarray:
        x = self.build_inputs(ids)
        h, _ = self._encode(x)
        return h @ self.params["proj.W"] + self.params["proj.b"]

    def loss_and_grads(self, ids: dict[str, np.ndarray], gold: np.ndarray, rng=None, training=True):
        """Mean CRF negative log-likelihood over a batch of equal-length sequences."""
        p = self.params
        x = self.build_inputs(ids)
        h, cache = self._encode(x)
        h_drop, mask = dropout(h, self.dropout, seed=rng, training=training)
        proj = Linear(p["proj.W"], p["proj.b"])
        e = proj.forward(h_drop)
        loss, cg = crf_nll_grad(e, gold, self.crf)
        bsz = gold.shape[0]
        scale = 1.0 / bsz
        grads = {
            "crf.transitions": cg.transitions * scale,
            "crf.start": cg.start * scale,
            "crf.stop": cg.stop * scale,
        }
        d_e = cg.emissions * scale
        dW, db, dh = proj.backward(h_drop, d_e)
        grads["proj.W"], grads["proj.b"] = dW, db
        if mask is not None:
            dh = dh * mask
        if self.encoder == "bilstm":
            gf, gb, dx = bilstm_backward(cache, dh)
            grads.update({f"enc.bwd.{k}": v for k, v in asdict(gb).items()})
        else:
            gf, dx = bptt_backward(cache, dh)
        grads.update({f"enc.fwd.{k}": v for k, v in asdict(gf).items()})
        offset = self.words.dim
        for name, _, dim in self.features:
            g = np.zeros_like(p[f"feat.{name}"])
            np.add.at(g, ids[name].ravel(), dx[..., offset:offset + dim].reshape(-1, dim))
            grads[f"feat.{name}"] = g
            offset += dim
        if self.train_words:
            g = np.zeros_like(p["word"])
            np.add.at(g, ids["word"].ravel(), dx[..., :self.words.dim].reshape(-1, self.words.dim))
            grads["word"] = g
        return loss * scale, grads

    # ----------------------------------------------------------- inference
    def predict_ids(self, batch_ids: dict[str, np.ndarray]):
        """Viterbi labels and the marginals for a (B, T) batch."""
        e = self.emissions(batch_ids)
        paths, _ = crf_viterbi(e, self.crf)
        marg = crf_marginals(e, self.crf)
        return paths, marg

    def predict(self, tokens: Sequence[str], features: dict[str, Sequence[str]] | None = None) -> Labeled:
        if len(tokens) == 0:
            raise TrainingError("cannot label an empty token sequence")
        ids = self.encode_features(tokens, features or {})
        paths, marg = self.predict_ids({k: v[None] for k, v in ids.items()})
        path, m = paths[0], marg[0]
        return Labeled(self.labels.decode(path), [float(m[t, y]) for t, y in enumerate(path)], m)

    def predict_many(self, items: Sequence[tuple[Sequence[str], dict]], batch_size: int = 256) -> list[Labeled]:
        """Batched prediction; sequences are grouped by length internally."""
        out: list[Labeled | None] = [None] * len(items)
        encoded = [self.encode_features(toks, feats) for toks, feats in items]
        by_len = defaultdict(list)
        for i, (toks, _) in enumerate(items):
            by_len[len(toks)].append(i)
        for length in sorted(by_len):
            idx = by_len[length]
            for s in range(0, len(idx), batch_size):
                chunk = idx[s:s + batch_size]
                batch = {k: np.stack([encoded[i][k] for i in chunk]) for k in encoded[chunk[0]]}
                paths, marg = self.predict_ids(batch)
                for row, i in enumerate(chunk):
                    path = paths[row]
                    out[i] = Labeled(self.labels.decode(path),
                                     [float(marg[row, t, y]) for t, y in enumerate(path)], marg[row])
        return out

    # ----------------------------------------------------------- persistence
    def spec(self) -> dict:
        return {
            "kind": self.kind,
            "labels": list(self.labels),
            "labels_name": self.labels.name,
            "vocab": self.vocab.words,
            "word_dim": self.words.dim,
            "features": [[name, list(tags), tags.name, dim] for name, tags, dim in self.features],
            "encoder": self.encoder,
            "hidden": self.hidden,
            "dropout": self.dropout,
            "train_words": self.train_words,
        }

    def parameter_arrays(self) -> dict[str, np.ndarray]:
        """Every array the model depends on, in file order."""
        arrays = {"word.matrix": self.words.matrix}
        for name in self.feature_names:
            arrays[f"feat.{name}"] = self.params[f"feat.{name}"]
        for direction in ("fwd", "bwd"):
            for k in ("W", "U", "b"):
                key = f"enc.{direction}.{k}"
                if key in self.params:
                    arrays[key] = self.params[key]
        for key in ("proj.W", "proj.b", "crf.transitions", "crf.start", "crf.stop"):
            arrays[key] = self.params[key]
        return arrays

    def digest(self) -> str:
        return arrays_digest(self.parameter_arrays())

    def save(self, path) -> None:
        save_model_file(path, self.spec(), self.parameter_arrays())

    @classmethod
    def load(cls, path) -> "SequenceLabeler":
        spec, arrays = load_model_file(path)
        return cls.from_arrays(spec, arrays)

    @classmethod
    def from_arrays(cls, spec: dict, arrays: dict[str, np.ndarray]) -> "SequenceLabeler":
        vocab = Vocabulary(spec["vocab"])
        words = EmbeddingTable(arrays["word.matrix"], trainable=spec["train_words"])
        features = [(name, TagSet(labels, tname), dim) for name, labels, tname, dim in spec["features"]]
        model = cls(spec["kind"], TagSet(spec["labels"], spec["labels_name"]), vocab, words, features,
                    encoder=spec["encoder"], hidden=spec["hidden"], dropout=spec["dropout"],
                    train_words=spec["train_words"])
        for key, value in arrays.items():
            if key == "word.matrix":
                continue
            if key not in model.params or model.params[key].shape != value.shape:
                raise TrainingError(f"model file array {key} does not fit the declared architecture")
            model.params[key] = value.copy()
        if spec["train_words"]:
            model.params["word"] = model.words.matrix
        return model


# --------------------------------------------------------------------------
# training

@dataclass
class Example:
    tokens: list[str]
    features: dict[str, list[str]]
    gold: list[str]


def _batches(lengths: Sequence[int], batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    by_len = defaultdict(list)
    for i, n in enumerate(lengths):
        by_len[n].append(i)
    batches = []
    for n in sorted(by_len):
        idx = np.array(by_len[n])
        idx = idx[rng.permutation(len(idx))]
        batches.extend(idx[s:s + batch_size] for s in range(0, len(idx), batch_size))
    order = rng.permutation(len(batches))
    return [batches[i] for i in order]


def accuracy_on(model: SequenceLabeler, examples: Sequence[Example]) -> float:
    if not examples:
        return float("nan")
    preds = model.predict_many([(ex.tokens, ex.features) for ex in examples])
    correct = sum(p == g for pr, ex in zip(preds, examples) for p, g in zip(pr.labels, ex.gold))
    total = sum(len(ex.gold) for ex in examples)
    return correct / total


def evaluate(model: SequenceLabeler, examples: Sequence[Example]) -> dict:
    preds = model.predict_many([(ex.tokens, ex.features) for ex in examples])
    gold = [g for ex in examples for g in ex.gold]
    pred = [p for pr in preds for p in pr.labels]
    return classification_report(gold, pred)


def train_labeler(model: SequenceLabeler, train: Sequence[Example], dev: Sequence[Example],
                  config: TrainConfig) -> TrainReport:
    """Minimise CRF NLL with RMSprop; keeps the parameters of the best dev epoch.

    Only arrays in ``model.params`` are updated; the word table is untouched
    unless the model was built with ``train_words=True``.
    """
    if not train:
        raise TrainingError("empty training set")
    for i, ex in enumerate(list(train) + list(dev)):
        bad = [g for g in ex.gold if g not in model.labels]
        if bad:
            raise TrainingError(f"sentence {i}: label {bad[0]!r} is not in the {model.labels.name} tagset")
    rng = np.random.default_rng(config.seed)
    model.dropout = config.dropout
    opt = RMSprop(lr=config.lr, rho=config.rho, eps=config.eps, clip_norm=config.clip_norm)
    encoded = [model.encode_features(ex.tokens, ex.features) for ex in train]
    gold = [np.array(model.labels.encode(ex.gold), dtype=np.int64) for ex in train]
    report = TrainReport()
    best = None
    stale = 0
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        batches = _batches([len(ex.tokens) for ex in train], config.batch_size, rng)
        if config.steps_per_epoch is not None:
            batches = batches[:config.steps_per_epoch]
        total, count = 0.0, 0
        for idx in batches:
            ids = {k: np.stack([encoded[i][k] for i in idx]) for k in encoded[idx[0]]}
            y = np.stack([gold[i] for i in idx])
            loss, grads = model.loss_and_grads(ids, y, rng=rng, training=True)
            opt.step(model.params, grads)
            total += loss * len(idx)
            count += len(idx)
        dev_acc = accuracy_on(model, dev) if dev else None
        rec = EpochRecord(epoch, total / count, dev_acc, time.perf_counter() - t0)
        report.epochs.append(rec)
        log.info("%s epoch %d: loss %.4f dev acc %s (%.1fs)", model.kind, epoch, rec.train_loss,
                 "n/a" if dev_acc is None else f"{dev_acc:.4f}", rec.seconds)
        score = dev_acc if dev_acc is not None else -rec.train_loss
        if best is None or score > best[0]:
            best = (score, epoch, {k: v.copy() for k, v in model.params.items()})
            stale = 0
        else:
            stale += 1
        if dev_acc is not None and config.target_accuracy is not None and dev_acc >= config.target_accuracy:
            break
        if stale >= config.patience:
            break
    _, report.best_epoch, params = best
    for k, v in params.items():
        model.params[k][...] = v
    report.best_dev_accuracy = best[0] if dev else None
    return report
