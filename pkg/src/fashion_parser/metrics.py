"""Token-level classification metrics."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def confusion_matrix(gold: Sequence[str], pred: Sequence[str]) -> tuple[list[str], np.ndarray]:
    """Labels seen in either sequence (sorted) and the gold x pred count matrix."""
    if len(gold) != len(pred):
        raise ValueError("gold and predicted sequences differ in length")
    labels = sorted(set(gold) | set(pred))
    index = {l: i for i, l in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for g, p in zip(gold, pred):
        cm[index[g], index[p]] += 1
    return labels, cm


def classification_report(gold: Sequence[str], pred: Sequence[str]) -> dict:
    """Accuracy, weighted and macro F1, and per-label precision/recall/F1.

    Macro F1 averages over every label present in gold or predictions;
    weighted F1 weights each label by its gold support.  Undefined ratios
    (0/0) count as 0.
    """
    labels, cm = confusion_matrix(gold, pred)
    total = cm.sum()
    tp = np.diag(cm).astype(float)
    support = cm.sum(axis=1).astype(float)
    predicted = cm.sum(axis=0).astype(float)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    return {
        "accuracy": float(tp.sum() / total) if total else 0.0,
        "f1_weighted": float((f1 * support).sum() / support.sum()) if total else 0.0,
        "f1_macro": float(f1.mean()) if len(labels) else 0.0,
        "tokens": int(total),
        "per_label": {
            label: {"precision": float(precision[i]), "recall": float(recall[i]), "f1": float(f1[i]),
                    "support": int(support[i])}
            for i, label in enumerate(labels)
        },
    }
