"""Query normalisation, fashion lexicons and template-based corpus generation.

Generated sentences carry every annotation layer the downstream stages need:
PoS tags, dependency heads, per-token transition operations and entity tags.
"""

from __future__ import annotations

import json
import re
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .tagsets import NER_TAGS, POS_TAGS, TagSet
from .transitions import ROOT, TreeError, check_tree, tree_to_oplabels

ENTITY_ROLES = ("BRAND", "COLOUR", "CATEGORY", "ATTRIBUTE", "MATERIAL")
DEFAULT_POS = {
    "BRAND": "PROPN",
    "COLOUR": "ADJ",
    "CATEGORY": "NOUN",
    "ATTRIBUTE": "ADJ",
    "MATERIAL": "NOUN",
}
# Materials have no entity class of their own in the five-tag scheme.
ROLE_TO_NER = {
    "BRAND": "BRAND",
    "COLOUR": "COLOUR",
    "CATEGORY": "CATEGORY",
    "ATTRIBUTE": "ATTRIBUTE",
    "MATERIAL": "ATTRIBUTE",
}
PREMODIFIER_ROLES = frozenset({"COLOUR", "ATTRIBUTE", "MATERIAL"})

_PUNCT = string.punctuation + "“”‘’«»…–—"


class CorpusError(ValueError):
    """Malformed lexicon, template or corpus file."""


def normalize_tokenize(text: str) -> list[str]:
    """Split on whitespace, lowercase, strip edge punctuation, drop empties.

    >>> normalize_tokenize("I want red dresses")
    ['i', 'want', 'red', 'dresses']
    """
    tokens = []
    for piece in text.split():
        piece = piece.lower().strip(_PUNCT)
        if piece:
            tokens.append(piece)
    return tokens


def is_token(surface: str) -> bool:
    return bool(surface) and not any(ch.isspace() for ch in surface) and normalize_tokenize(surface) == [surface]


# --------------------------------------------------------------------------
# lexicon

@dataclass
class Lexicon:
    brands: list[tuple[str, ...]]
    colours: list[str]
    categories: list[str]
    attributes: list[str]
    materials: list[str]
    function_words: dict[str, list[str]]
    function_pos: dict[str, str] = field(default_factory=dict)
    ambiguous: set[str] = field(default_factory=set)

    def __post_init__(self):
        self.validate()

    def entries(self, role: str) -> list[tuple[str, ...]]:
        """Lexicon entries for a template role, each as a token tuple."""
        if role == "BRAND":
            return self.brands
        if role.startswith("FUNCTION:"):
            name = role.split(":", 1)[1]
            if name not in self.function_words:
                raise CorpusError(f"template role {role} has no lexicon section")
            return [(w,) for w in self.function_words[name]]
        single = {"COLOUR": self.colours, "CATEGORY": self.categories,
                  "ATTRIBUTE": self.attributes, "MATERIAL": self.materials}
        if role not in single:
            raise CorpusError(f"unknown template role {role}")
        return [(w,) for w in single[role]]

    def token_sets(self) -> dict[str, set[str]]:
        sets = {
            "brands": {t for b in self.brands for t in b},
            "colours": set(self.colours),
            "categories": set(self.categories),
            "attributes": set(self.attributes),
            "materials": set(self.materials),
        }
        for name, words in self.function_words.items():
            sets["function:" + name] = set(words)
        return sets

    def validate(self) -> None:
        for name, words in self.token_sets().items():
            for w in words:
                if not is_token(w):
                    raise CorpusError(f"lexicon entry {w!r} in {name} is not a normalised token")
        if not self.ambiguous:
            raise CorpusError("lexicon must declare a non-empty ambiguous set")
        sets = list(self.token_sets().items())
        for i, (a, sa) in enumerate(sets):
            for b, sb in sets[i + 1:]:
                clash = (sa & sb) - self.ambiguous
                if clash:
                    raise CorpusError(f"lexicon sections {a} and {b} overlap on undeclared tokens: {sorted(clash)}")
        used = set().union(*(s for _, s in sets))
        stray = self.ambiguous - used
        if stray:
            raise CorpusError(f"ambiguous tokens not present in the lexicon: {sorted(stray)}")

    @property
    def vocabulary(self) -> set[str]:
        return set().union(*self.token_sets().values())


_SECTION = re.compile(r"^\[(?P<name>[^\]\s]+)(?:\s+(?P<pos>[A-Z]+))?\]$")


def _sections(text: str, source: str) -> list[tuple[str, str | None, list[tuple[int, str]]]]:
    sections: list[tuple[str, str | None, list[tuple[int, str]]]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            sections.append((m["name"], m["pos"], []))
        elif not sections:
            raise CorpusError(f"{source}:{lineno}: entry outside of any [section]")
        else:
            sections[-1][2].append((lineno, line))
    return sections


def parse_lexicon(text: str, source: str = "<lexicon>") -> Lexicon:
    parts: dict[str, list] = {k: [] for k in ("brands", "colours", "categories", "attributes", "materials")}
    function_words: dict[str, list[str]] = {}
    function_pos: dict[str, str] = {}
    ambiguous: set[str] = set()
    for name, pos, entries in _sections(text, source):
        if name in parts:
            for lineno, line in entries:
                toks = normalize_tokenize(line)
                if not toks:
                    raise CorpusError(f"{source}:{lineno}: entry normalises to nothing")
                if name == "brands":
                    parts[name].append(tuple(toks))
                elif len(toks) != 1:
                    raise CorpusError(f"{source}:{lineno}: {name} entries must be single tokens")
                else:
                    parts[name].append(toks[0])
        elif name.startswith("function:"):
            role = name.split(":", 1)[1]
            if pos is None:
                raise CorpusError(f"{source}: section [{name}] needs a PoS label, e.g. [{name} ADP]")
            function_pos[role] = pos
            words = []
            for lineno, line in entries:
                toks = normalize_tokenize(line)
                if len(toks) != 1:
                    raise CorpusError(f"{source}:{lineno}: function words must be single tokens")
                words.append(toks[0])
            function_words[role] = words
        elif name == "ambiguous":
            ambiguous.update(t for _, line in entries for t in normalize_tokenize(line))
        else:
            raise CorpusError(f"{source}: unknown lexicon section [{name}]")
    return Lexicon(function_words=function_words, function_pos=function_pos, ambiguous=ambiguous, **parts)


def load_lexicon(path: str | Path | None = None) -> Lexicon:
    if path is None:
        text = resources.files("fashion_parser").joinpath("data/lexicon.txt").read_text(encoding="utf-8")
        return parse_lexicon(text, "lexicon.txt")
    return parse_lexicon(Path(path).read_text(encoding="utf-8"), str(path))


# --------------------------------------------------------------------------
# templates

@dataclass(frozen=True)
class Slot:
    role: str | None          # None for a literal token
    text: str = ""            # literal surface
    pos: str | None = None    # explicit PoS (literal, or override for a role)
    premodifier: bool = False


@dataclass
class Template:
    slots: list[Slot]
    pos_map: dict[str, str] = field(default_factory=dict)
    head_rule: str = "nearest"
    weight: float = 1.0
    kind: str = "queries"

    def __post_init__(self):
        if not any(s.role == "CATEGORY" for s in self.slots):
            raise CorpusError(f"template {self} has no CATEGORY slot")
        if self.head_rule != "nearest":
            raise CorpusError(f"unknown head rule {self.head_rule!r}")
        last = self.slots[-1]
        if last.premodifier or last.role in PREMODIFIER_ROLES:
            raise CorpusError(f"template {self} ends with a modifier that has nothing to attach to")

    def roles(self) -> set[str]:
        return {s.role for s in self.slots if s.role}

    def __str__(self) -> str:
        out = []
        for s in self.slots:
            if s.role:
                out.append(f"<{s.role}{'/' + s.pos if s.pos else ''}>" + ("+" if s.premodifier else ""))
            else:
                out.append(f"{s.text}/{s.pos}" + ("+" if s.premodifier else ""))
        return " ".join(out)


_SLOT = re.compile(r"^<(?P<role>[A-Z]+(?::[a-z_]+)?)(?:/(?P<pos>[A-Z]+))?>(?P<plus>\+?)$")
_LITERAL = re.compile(r"^(?P<text>[^/\s]+)/(?P<pos>[A-Z]+)(?P<plus>\+?)$")


def parse_template(line: str, kind: str = "queries") -> Template:
    weight = 1.0
    if "@" in line:
        line, w = line.rsplit("@", 1)
        weight = float(w)
    slots = []
    for item in line.split():
        m = _SLOT.match(item)
        if m:
            role = m["role"]
            if role not in ENTITY_ROLES and not role.startswith("FUNCTION:"):
                raise CorpusError(f"unknown template role {role}")
            slots.append(Slot(role=role, pos=m["pos"], premodifier=bool(m["plus"])))
            continue
        m = _LITERAL.match(item)
        if not m:
            raise CorpusError(f"cannot parse template item {item!r}")
        text = normalize_tokenize(m["text"])
        if len(text) != 1:
            raise CorpusError(f"literal {item!r} is not a single token")
        slots.append(Slot(role=None, text=text[0], pos=m["pos"], premodifier=bool(m["plus"])))
    if not slots:
        raise CorpusError("empty template")
    pos_map = {s.role: s.pos for s in slots if s.role and s.pos}
    return Template(slots=slots, pos_map=pos_map, weight=weight, kind=kind)


def parse_templates(text: str, source: str = "<templates>") -> list[Template]:
    templates = []
    for name, _, entries in _sections(text, source):
        for lineno, line in entries:
            try:
                templates.append(parse_template(line, kind=name))
            except CorpusError as exc:
                raise CorpusError(f"{source}:{lineno}: {exc}") from None
    if not templates:
        raise CorpusError(f"{source}: no templates")
    return templates


def load_templates(path: str | Path | None = None) -> list[Template]:
    if path is None:
        text = resources.files("fashion_parser").joinpath("data/templates.txt").read_text(encoding="utf-8")
        return parse_templates(text, "templates.txt")
    return parse_templates(Path(path).read_text(encoding="utf-8"), str(path))


# --------------------------------------------------------------------------
# annotated sentences

@dataclass
class AnnotatedSentence:
    tokens: list[str]
    pos: list[str]
    head: list[int]
    op: list[str]
    ner: list[str]

    def __len__(self) -> int:
        return len(self.tokens)

    def validate(self, pos_tags: TagSet = POS_TAGS) -> None:
        n = len(self.tokens)
        if n == 0:
            raise CorpusError("sentence has no tokens")
        for name in ("pos", "head", "op", "ner"):
            if len(getattr(self, name)) != n:
                raise CorpusError(f"length invariant: |{name}| = {len(getattr(self, name))} but |tokens| = {n}")
        for t in self.tokens:
            if not is_token(t):
                raise CorpusError(f"token invariant: {t!r} is not a normalised token")
        for label in self.pos:
            if label not in pos_tags:
                raise CorpusError(f"tagset invariant: unknown PoS label {label!r}")
        for label in self.ner:
            if label not in NER_TAGS:
                raise CorpusError(f"tagset invariant: unknown NER label {label!r}")
        try:
            check_tree(self.head)
        except TreeError as exc:
            raise CorpusError(f"tree invariant: {exc}") from None
        if tree_to_oplabels(self.head) != list(self.op):
            raise CorpusError("op invariant: op labels are not derivable from heads")

    def to_dict(self) -> dict:
        return {"tokens": self.tokens, "pos": self.pos, "head": self.head, "op": self.op, "ner": self.ner}


def nearest_heads(premodifier: Sequence[bool], root: int) -> list[int]:
    """Head rule used by every template.

    Tokens before the root, and modifiers after it, attach to the next token.
    Remaining tokens after the root are phrase heads and attach to the
    closest preceding phrase head (the root counts as one).
    """
    heads = []
    last_head = root
    for i, pre in enumerate(premodifier):
        if i == root:
            heads.append(ROOT)
        elif i < root or pre:
            heads.append(i + 1)
        else:
            heads.append(last_head)
            last_head = i
    return heads


def _fill(template: Template, lexicon: Lexicon, rng: np.random.Generator) -> AnnotatedSentence:
    tokens, pos, ner, pre = [], [], [], []
    root = None
    for slot in template.slots:
        if slot.role is None:
            words = (slot.text,)
            tag = slot.pos
            ent = "UNKNOWN"
        else:
            entries = lexicon.entries(slot.role)
            words = entries[int(rng.integers(len(entries)))]
            if slot.role.startswith("FUNCTION:"):
                tag = template.pos_map.get(slot.role) or lexicon.function_pos[slot.role.split(":", 1)[1]]
                ent = "UNKNOWN"
            else:
                tag = template.pos_map.get(slot.role) or DEFAULT_POS[slot.role]
                ent = ROLE_TO_NER[slot.role]
        if slot.role == "CATEGORY" and root is None:
            root = len(tokens)
        for k, w in enumerate(words):
            tokens.append(w)
            pos.append(tag)
            ner.append(ent)
            last = k == len(words) - 1
            pre.append(not last or slot.premodifier or slot.role in PREMODIFIER_ROLES)
    heads = nearest_heads(pre, root)
    return AnnotatedSentence(tokens=tokens, pos=pos, head=heads, op=tree_to_oplabels(heads), ner=ner)


def generate_corpus(lexicon: Lexicon, templates: Sequence[Template], n: int, seed: int) -> list[AnnotatedSentence]:
    """Draw ``n`` annotated sentences from weighted templates.

    Templates are picked in proportion to their weight; every slot is filled
    uniformly from its lexicon section.  Multi-token brands expand into one
    PROPN/BRAND token per word.  Output depends only on the inputs and seed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not templates:
        raise CorpusError("no templates given")
    for t in templates:
        for role in t.roles():
            if not lexicon.entries(role):
                raise CorpusError(f"template role {role} has an empty lexicon section")
    weights = np.array([t.weight for t in templates], dtype=float)
    weights /= weights.sum()
    rng = np.random.default_rng(seed)
    choice = rng.choice(len(templates), size=n, p=weights)
    return [_fill(templates[int(k)], lexicon, rng) for k in choice]


def split_dataset(sentences: Sequence, ratio: float = 0.9, seed: int = 0) -> tuple[list, list]:
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie strictly between 0 and 1")
    order = np.random.default_rng(seed).permutation(len(sentences))
    cut = int(round(ratio * len(sentences)))
    return [sentences[i] for i in order[:cut]], [sentences[i] for i in order[cut:]]


# --------------------------------------------------------------------------
# JSONL I/O

def save_corpus(sentences: Iterable[AnnotatedSentence], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(json.dumps(s.to_dict(), ensure_ascii=False) + "\n")


def load_corpus(path: str | Path, pos_tags: TagSet = POS_TAGS) -> list[AnnotatedSentence]:
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                sent = AnnotatedSentence(**{k: obj[k] for k in ("tokens", "pos", "head", "op", "ner")})
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}:{lineno}: malformed line ({exc})") from None
            try:
                sent.validate(pos_tags)
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from None
            sentences.append(sent)
    return sentences
