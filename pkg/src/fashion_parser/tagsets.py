"""Label inventories shared by the corpus and the three tagging stages."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence


class TagSet:
    """An ordered, duplicate-free list of labels with index lookup."""

    def __init__(self, labels: Iterable[str], name: str = "tagset"):
        self.labels = list(labels)
        self.name = name
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"{name}: duplicate label names")
        self._index = {label: i for i, label in enumerate(self.labels)}

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: object) -> bool:
        return label in self._index

    def __iter__(self):
        return iter(self.labels)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TagSet) and self.labels == other.labels

    def __repr__(self) -> str:
        return f"TagSet({self.name}, {len(self)} labels)"

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"label {label!r} not in {self.name}") from None

    def encode(self, labels: Sequence[str]) -> list[int]:
        return [self.index(label) for label in labels]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.labels[int(i)] for i in ids]


# Universal Dependencies core tags plus three model-side classes.
UD_TAGS = (
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART",
    "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
)
POS_LABELS = UD_TAGS + ("UNKNOWN", "BOS", "EOS")
POS_REQUIRED = ("ADJ", "NOUN", "PROPN", "ADP", "VERB", "DET", "UNKNOWN")
POS_SIZE = 20

NER_LABELS = ("BRAND", "CATEGORY", "COLOUR", "ATTRIBUTE", "UNKNOWN")

# Per-token transition operations; UNKNOWN is a model-side class only.
OP_LABELS = ("SHIFT", "LEFT_ARC", "RIGHT_ARC", "UNKNOWN")


def pos_tagset(labels: Iterable[str] = POS_LABELS) -> TagSet:
    tagset = TagSet(labels, name="pos")
    if len(tagset) != POS_SIZE:
        raise ValueError(f"PoS tagset must have exactly {POS_SIZE} labels, got {len(tagset)}")
    missing = [t for t in POS_REQUIRED if t not in tagset]
    if missing:
        raise ValueError(f"PoS tagset is missing required labels: {', '.join(missing)}")
    return tagset


def load_pos_tagset(path: str | Path) -> TagSet:
    """Read a PoS tagset file: one label per line, '#' comments allowed."""
    labels = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            labels.append(line)
    return pos_tagset(labels)


POS_TAGS = pos_tagset()
NER_TAGS = TagSet(NER_LABELS, name="ner")
OP_TAGS = TagSet(OP_LABELS, name="op")
