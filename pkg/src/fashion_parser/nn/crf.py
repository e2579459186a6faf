"""Linear-chain CRF with exact inference in log space.

Path score for labels ``y`` over emissions ``E`` (T x K)::

    start[y0] + sum_t E[t, y_t] + sum_t trans[y_{t-1}, y_t] + stop[y_{T-1}]

Every function accepts a single sequence (T x K) or a batch of equal-length
sequences (B x T x K) and returns results of matching rank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class CrfParams:
    transitions: np.ndarray  # (K, K), row = previous label
    start: np.ndarray        # (K,)
    stop: np.ndarray         # (K,)

    @classmethod
    def zeros(cls, num_labels: int) -> "CrfParams":
        k = num_labels
        return cls(np.zeros((k, k)), np.zeros(k), np.zeros(k))

    @property
    def num_labels(self) -> int:
        return self.transitions.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {"transitions": self.transitions, "start": self.start, "stop": self.stop}


@dataclass
class CrfGrads:
    emissions: np.ndarray
    transitions: np.ndarray
    start: np.ndarray
    stop: np.ndarray


def _lse(x: np.ndarray, axis: int) -> np.ndarray:
    m = x.max(axis=axis, keepdims=True)
    return np.squeeze(m, axis) + np.log(np.exp(x - m).sum(axis=axis))


def _step_normalise(log_scores: np.ndarray) -> np.ndarray:
    # alpha + beta sums to Z at every step; normalising per step keeps each
    # entry <= 1 exactly instead of 1 + rounding error
    p = np.exp(log_scores - log_scores.max(axis=-1, keepdims=True))
    return p / p.sum(axis=-1, keepdims=True)


def _batched(emissions):
    e = np.asarray(emissions, dtype=np.float64)
    if e.ndim == 2:
        return e[None], True
    if e.ndim != 3:
        raise ValueError(f"emissions must be T x K or B x T x K, got shape {e.shape}")
    if e.shape[1] < 1:
        raise ValueError("empty sequence")
    return e, False


def _forward(e: np.ndarray, crf: CrfParams) -> np.ndarray:
    b, t, k = e.shape
    alpha = np.empty_like(e)
    alpha[:, 0] = crf.start + e[:, 0]
    trans = crf.transitions[None]
    for i in range(1, t):
        alpha[:, i] = _lse(alpha[:, i - 1, :, None] + trans, axis=1) + e[:, i]
    return alpha


def _backward(e: np.ndarray, crf: CrfParams) -> np.ndarray:
    b, t, k = e.shape
    beta = np.empty_like(e)
    beta[:, t - 1] = crf.stop
    trans = crf.transitions[None]
    for i in range(t - 2, -1, -1):
        beta[:, i] = _lse(trans + (e[:, i + 1] + beta[:, i + 1])[:, None, :], axis=2)
    return beta


def crf_log_partition(emissions, crf: CrfParams):
    e, single = _batched(emissions)
    alpha = _forward(e, crf)
    log_z = _lse(alpha[:, -1] + crf.stop, axis=1)
    return float(log_z[0]) if single else log_z


def crf_marginals(emissions, crf: CrfParams) -> np.ndarray:
    """Per-step label marginals P(y_t = k | x) by forward-backward."""
    e, single = _batched(emissions)
    alpha = _forward(e, crf)
    beta = _backward(e, crf)
    marg = _step_normalise(alpha + beta)
    return marg[0] if single else marg


def crf_path_score(emissions, labels, crf: CrfParams):
    e, single = _batched(emissions)
    y = np.asarray(labels)
    if single:
        y = y[None]
    b, t, _ = e.shape
    rows = np.arange(b)
    score = crf.start[y[:, 0]] + crf.stop[y[:, -1]]
    score = score + e[rows[:, None], np.arange(t)[None], y].sum(axis=1)
    if t > 1:
        score = score + crf.transitions[y[:, :-1], y[:, 1:]].sum(axis=1)
    return float(score[0]) if single else score


def crf_viterbi(emissions, crf: CrfParams):
    """Highest-scoring label path and its score.

    Ties are broken toward the lower label index at every step.
    """
    e, single = _batched(emissions)
    b, t, k = e.shape
    delta = crf.start + e[:, 0]
    back = np.zeros((b, t, k), dtype=np.int64)
    trans = crf.transitions[None]
    for i in range(1, t):
        cand = delta[:, :, None] + trans
        back[:, i] = cand.argmax(axis=1)
        delta = np.take_along_axis(cand, back[:, i][:, None, :], axis=1)[:, 0] + e[:, i]
    final = delta + crf.stop
    last = final.argmax(axis=1)
    scores = final[np.arange(b), last]
    paths = np.empty((b, t), dtype=np.int64)
    paths[:, -1] = last
    for i in range(t - 1, 0, -1):
        paths[:, i - 1] = back[np.arange(b), i, paths[:, i]]
    if single:
        return paths[0].tolist(), float(scores[0])
    return paths, scores


def crf_nll_grad(emissions, gold, crf: CrfParams):
    """Negative log-likelihood of the gold path and its gradients.

    For a batch the loss and the parameter gradients are summed over
    sequences; the emission gradient keeps the batch axis.
    """
    e, single = _batched(emissions)
    y = np.asarray(gold, dtype=np.int64)
    if single:
        y = y[None]
    b, t, k = e.shape
    if y.shape != (b, t):
        raise ValueError(f"gold labels shape {y.shape} does not match emissions {e.shape[:2]}")
    if y.size and (y.min() < 0 or y.max() >= k):
        raise ValueError(f"gold label out of range [0, {k})")

    alpha = _forward(e, crf)
    beta = _backward(e, crf)
    log_z = _lse(alpha[:, -1] + crf.stop, axis=1)
    loss = log_z - crf_path_score(e, y, crf)

    marg = _step_normalise(alpha + beta)
    onehot = np.zeros_like(e)
    np.put_along_axis(onehot, y[:, :, None], 1.0, axis=2)
    d_e = marg - onehot

    d_trans = np.zeros((k, k))
    if t > 1:
        # pairwise marginals xi[b, t, i, j] for the transition between t-1 and t
        log_xi = (alpha[:, :-1, :, None] + crf.transitions[None, None]
                  + (e[:, 1:] + beta[:, 1:])[:, :, None, :] - log_z[:, None, None, None])
        d_trans = np.exp(log_xi).sum(axis=(0, 1))
        np.add.at(d_trans, (y[:, :-1].ravel(), y[:, 1:].ravel()), -1.0)
    d_start = marg[:, 0].sum(axis=0) - np.bincount(y[:, 0], minlength=k)
    d_stop = marg[:, -1].sum(axis=0) - np.bincount(y[:, -1], minlength=k)

    if single:
        return float(loss[0]), CrfGrads(d_e[0], d_trans, d_start, d_stop)
    return float(loss.sum()), CrfGrads(d_e, d_trans, d_start, d_stop)
