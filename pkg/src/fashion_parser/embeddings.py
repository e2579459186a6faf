"""Word vectors: vocabulary building, skip-gram negative-sampling training,
cosine neighbours and the word-per-line text format."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

UNK = "<unk>"


class EmbeddingError(ValueError):
    pass


def _token_lists(sentences) -> list[list[str]]:
    return [list(getattr(s, "tokens", s)) for s in sentences]


@dataclass
class Vocabulary:
    words: list[str]                       # index -> word, words[0] == UNK
    counts: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.words or self.words[0] != UNK:
            raise EmbeddingError("vocabulary index 0 must be the UNK entry")
        self.index = {w: i for i, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise EmbeddingError("duplicate words in vocabulary")

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def lookup(self, word: str) -> int:
        return self.index.get(word, 0)

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.index.get(t, 0) for t in tokens], dtype=np.int64)


def build_vocab(sentences, min_count: int = 2) -> Vocabulary:
    """Words seen at least ``min_count`` times, most frequent first.

    Ties keep first-occurrence order; everything rarer folds into UNK.
    """
    if min_count < 1:
        raise EmbeddingError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    for toks in _token_lists(sentences):
        counts.update(toks)
    if not counts:
        raise EmbeddingError("cannot build a vocabulary from an empty corpus")
    # Counter preserves insertion order, and sorted() is stable
    kept = sorted((w for w, c in counts.items() if c >= min_count), key=lambda w: -counts[w])
    unk_count = sum(c for w, c in counts.items() if c < min_count)
    return Vocabulary([UNK] + kept, [unk_count] + [counts[w] for w in kept])


@dataclass
class EmbeddingTable:
    matrix: np.ndarray
    trainable: bool = True

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise EmbeddingError("embedding matrix must be 2-D")
        if not np.all(np.isfinite(self.matrix)):
            raise EmbeddingError("embedding matrix has non-finite entries")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def lookup(self, ids) -> np.ndarray:
        return self.matrix[ids]

    def frozen(self) -> "EmbeddingTable":
        return EmbeddingTable(self.matrix, trainable=False)


@dataclass
class SkipGramReport:
    epoch_loss: list[float]
    pairs_per_epoch: int


def _context_pairs(flat: np.ndarray, sent_id: np.ndarray, window: int, rng: np.random.Generator):
    """(centre, context) id pairs; each centre position draws its window from 1..window."""
    n = len(flat)
    spans = rng.integers(1, window + 1, size=n)
    pos = np.arange(n)
    centers, contexts = [], []
    for off in range(1, window + 1):
        for sign in (-1, 1):
            j = pos + sign * off
            ok = (j >= 0) & (j < n) & (spans >= off)
            ok[ok] &= sent_id[j[ok]] == sent_id[ok]
            centers.append(pos[ok])
            contexts.append(j[ok])
    c = np.concatenate(centers)
    o = np.concatenate(contexts)
    # canonical order (by centre position, then context position) before shuffling
    order = np.lexsort((o, c))
    return flat[c[order]], flat[o[order]]


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def train_skipgram(sentences, vocab: Vocabulary, d: int = 300, window: int = 5, negatives: int = 5,
                   epochs: int = 5, lr: float = 0.1, seed: int = 0, batch_pairs: int = 32,
                   min_lr_fraction: float = 1e-4, report: list | None = None) -> EmbeddingTable:
    """Skip-gram with negative sampling; returns the centre-word vectors.

    Each centre word uses a window drawn uniformly from 1..``window``.
    Negatives follow the unigram distribution raised to 3/4.  The learning
    rate decays linearly to ``lr * min_lr_fraction``.  Updates are applied
    in small mini-batches of ``batch_pairs`` pairs; the whole run is a
    deterministic function of ``seed``.
    """
    if d < 1:
        raise EmbeddingError("embedding dimension must be >= 1")
    rng = np.random.default_rng(seed)
    seqs = [vocab.encode(t) for t in _token_lists(sentences)]
    counts = np.zeros(len(vocab))
    for s in seqs:
        np.add.at(counts, s, 1)
    if counts.sum() == 0:
        raise EmbeddingError("empty corpus")
    noise = counts ** 0.75
    noise /= noise.sum()
    noise_cdf = np.cumsum(noise)

    flat = np.concatenate(seqs) if seqs else np.zeros(0, dtype=np.int64)
    sent_id = np.repeat(np.arange(len(seqs)), [len(x) for x in seqs])

    w_in = (rng.random((len(vocab), d)) - 0.5) / d
    w_out = np.zeros((len(vocab), d))

    # estimate total pairs for the lr schedule (expected window is (window+1)/2)
    approx_pairs = max(1, int(sum(len(s) for s in seqs) * (window + 1) * epochs))
    seen = 0
    epoch_loss = []
    pairs_in_epoch = 0
    for epoch in range(epochs):
        centers, contexts = _context_pairs(flat, sent_id, window, rng)
        order = rng.permutation(len(centers))
        centers, contexts = centers[order], contexts[order]
        pairs_in_epoch = len(centers)
        total = 0.0
        for start in range(0, len(centers), batch_pairs):
            c = centers[start:start + batch_pairs]
            o = contexts[start:start + batch_pairs]
            b = len(c)
            neg = np.searchsorted(noise_cdf, rng.random((b, negatives)) * noise_cdf[-1], side="right")
            neg = np.minimum(neg, len(vocab) - 1)
            alpha = lr * max(min_lr_fraction, 1.0 - seen / approx_pairs)
            seen += b

            v = w_in[c]
            u_pos = w_out[o]
            u_neg = w_out[neg]
            s_pos = np.einsum("bd,bd->b", v, u_pos)
            s_neg = np.einsum("bd,bkd->bk", v, u_neg)
            total += float(np.logaddexp(0, -s_pos).sum() + np.logaddexp(0, s_neg).sum())
            g_pos = _sigmoid(s_pos) - 1.0
            g_neg = _sigmoid(s_neg)
            d_v = g_pos[:, None] * u_pos + np.einsum("bk,bkd->bd", g_neg, u_neg)
            np.add.at(w_out, o, -alpha * g_pos[:, None] * v)
            np.add.at(w_out, neg, -alpha * g_neg[:, :, None] * v[:, None, :])
            np.add.at(w_in, c, -alpha * d_v)
        epoch_loss.append(total / max(1, pairs_in_epoch))
        log.info("skip-gram epoch %d: loss %.4f over %d pairs", epoch + 1, epoch_loss[-1], pairs_in_epoch)
    if report is not None:
        report.append(SkipGramReport(epoch_loss, pairs_in_epoch))
    return EmbeddingTable(w_in, trainable=True)


def cosine_similarities(matrix: np.ndarray, row: int) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1)
    q = matrix[row]
    denom = norms * norms[row]
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(denom > 0, matrix @ q / np.where(denom > 0, denom, 1.0), 0.0)
    return np.clip(sims, -1.0, 1.0)


def nearest(table: EmbeddingTable, vocab: Vocabulary, word: str, k: int = 5) -> list[tuple[str, float]]:
    """Top-``k`` cosine neighbours, best first, never including the query or UNK."""
    row = vocab.lookup(word)
    sims = cosine_similarities(table.matrix, row)
    order = np.argsort(-sims, kind="stable")
    out = []
    for i in order:
        if i == row or i == 0:
            continue
        out.append((vocab.words[i], float(sims[i])))
        if len(out) == k:
            break
    return out


def save_embeddings(table: EmbeddingTable, vocab: Vocabulary, path) -> None:
    if len(table) != len(vocab):
        raise EmbeddingError(f"table has {len(table)} rows but vocabulary has {len(vocab)} words")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vocab)} {table.dim}\n")
        for word, vec in zip(vocab.words, table.matrix):
            fh.write(word + " " + " ".join(f"{v:.8f}" for v in vec) + "\n")


def load_embeddings(path) -> tuple[EmbeddingTable, Vocabulary]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbeddingError(f"{path}: header must be '<vocab size> <dim>'")
        size, dim = int(header[0]), int(header[1])
        words, rows = [], []
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").split(" ")
            if not parts or parts == [""]:
                continue
            word, values = parts[0], parts[1:]
            if len(values) != dim:
                raise EmbeddingError(f"{path}:{lineno}: word {word!r} has {len(values)} values, expected {dim}")
            words.append(word)
            rows.append([float(v) for v in values])
    if len(words) != size:
        raise EmbeddingError(f"{path}: header promises {size} words, found {len(words)}")
    matrix = np.array(rows, dtype=np.float64).reshape(size, dim)
    return EmbeddingTable(matrix, trainable=False), Vocabulary(words, [])
