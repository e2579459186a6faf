"""Stack/buffer transition machinery behind the dependency stage.

A dependency tree is a list of head indices (``-1`` marks the root).  Each
token is summarised by one operation label describing where its head lies:

* ``SHIFT``     -- the token is the root,
* ``LEFT_ARC``  -- the head is to the right (the token is reduced by a
  left-arc once its head is pushed),
* ``RIGHT_ARC`` -- the head is to the left.

Direction alone does not pin down *which* token is the head.  The executor
resolves this greedily: a ``LEFT_ARC`` token attaches to the token pushed
right after it, and ``RIGHT_ARC`` tokens are reduced only once the buffer is
exhausted, so each attaches to the nearest preceding token still on the
stack.  Trees built by the corpus grammar follow exactly this convention,
which makes the tree -> labels -> tree round trip exact on them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

ROOT = -1
SHIFT, LEFT_ARC, RIGHT_ARC, UNKNOWN = "SHIFT", "LEFT_ARC", "RIGHT_ARC", "UNKNOWN"


class TreeError(ValueError):
    pass


def check_tree(heads: Sequence[int]) -> None:
    """Raise TreeError unless ``heads`` is a single-rooted projective tree."""
    n = len(heads)
    if n == 0:
        raise TreeError("empty head list")
    roots = [i for i, h in enumerate(heads) if h == ROOT]
    if len(roots) != 1:
        raise TreeError(f"expected exactly one root, found {len(roots)}")
    for i, h in enumerate(heads):
        if h != ROOT and not (0 <= h < n):
            raise TreeError(f"head index {h} of token {i} out of range")
        if h == i:
            raise TreeError(f"token {i} is its own head")
    for i in range(n):
        seen = set()
        j = i
        while heads[j] != ROOT:
            if j in seen:
                raise TreeError(f"cycle through token {i}")
            seen.add(j)
            j = heads[j]
    for d, h in enumerate(heads):
        if h == ROOT:
            continue
        lo, hi = min(d, h), max(d, h)
        for k in range(lo + 1, hi):
            # every token strictly inside an arc must be dominated by its head
            j = k
            while j != h and j != ROOT:
                j = heads[j]
            if j != h:
                raise TreeError(f"arc {h}->{d} is non-projective")


def is_tree(heads: Sequence[int]) -> bool:
    try:
        check_tree(heads)
    except TreeError:
        return False
    return True


def tree_to_oplabels(heads: Sequence[int]) -> list[str]:
    check_tree(heads)
    labels = []
    for i, h in enumerate(heads):
        if h == ROOT:
            labels.append(SHIFT)
        elif h > i:
            labels.append(LEFT_ARC)
        else:
            labels.append(RIGHT_ARC)
    return labels


@dataclass
class TransitionState:
    stack: list[int]
    buffer: list[int]
    arcs: list[tuple[int, int]]
    op: str | None = None

    def copy(self, op: str | None) -> "TransitionState":
        return TransitionState(list(self.stack), list(self.buffer), list(self.arcs), op)


@dataclass
class Reconstruction:
    heads: list[int]
    repaired: bool
    trace: list[TransitionState] = field(default_factory=list)


def _execute(labels: Sequence[str], keep_trace: bool) -> Reconstruction:
    n = len(labels)
    if n == 0:
        raise ValueError("label sequence must be non-empty")
    heads = [ROOT] * n
    state = TransitionState(stack=[], buffer=list(range(n)), arcs=[])
    trace = [state.copy(None)] if keep_trace else []

    def record(op):
        if keep_trace:
            trace.append(state.copy(op))

    stack = state.stack
    while state.buffer:
        stack.append(state.buffer.pop(0))
        record(SHIFT)
        while len(stack) >= 2 and labels[stack[-2]] == LEFT_ARC:
            dep = stack.pop(-2)
            heads[dep] = stack[-1]
            state.arcs.append((stack[-1], dep))
            record(LEFT_ARC)
    while len(stack) >= 2 and labels[stack[-1]] == RIGHT_ARC:
        dep = stack.pop()
        heads[dep] = stack[-1]
        state.arcs.append((stack[-1], dep))
        record(RIGHT_ARC)

    repaired = len(stack) != 1 or labels[stack[0]] != SHIFT
    if len(stack) > 1:
        shifts = [i for i in stack if labels[i] == SHIFT]
        root = shifts[0] if shifts else stack[-1]
        for i in list(stack):
            if i != root:
                heads[i] = root
                state.arcs.append((root, i))
                stack.remove(i)
                record("ATTACH")
    heads[stack[0]] = ROOT
    return Reconstruction(heads=heads, repaired=repaired, trace=trace)


def labels_to_tree(labels: Sequence[str]) -> list[int]:
    """Rebuild head indices from per-token operation labels.

    Total on non-empty input: inconsistent sequences (no SHIFT, several SHIFTs,
    dangling arcs, UNKNOWN) are repaired by attaching every token left on the
    stack to the first SHIFT token, or to the last stack token if there is none.
    """
    return _execute(labels, keep_trace=False).heads


def reconstruct(labels: Sequence[str]) -> Reconstruction:
    """Like labels_to_tree but also reports whether a repair was needed."""
    return _execute(labels, keep_trace=False)


def run_transition_executor(labels: Sequence[str], tokens: Sequence[str] | None = None) -> Reconstruction:
    """Step-by-step trace of labels_to_tree.

    ``trace[0]`` is the initial configuration; each later entry is the state
    after one action (``SHIFT`` push, ``LEFT_ARC``/``RIGHT_ARC`` reduction, or
    ``ATTACH`` for a forced root attachment).
    """
    if tokens is not None and len(tokens) != len(labels):
        raise ValueError("tokens and labels differ in length")
    return _execute(labels, keep_trace=True)


def format_trace(result: Reconstruction, tokens: Sequence[str]) -> str:
    def names(ids):
        return "[" + " ".join(tokens[i] for i in ids) + "]"

    lines = []
    for step, st in enumerate(result.trace):
        arcs = " ".join(f"{tokens[h]}->{tokens[d]}" for h, d in st.arcs)
        lines.append(f"{step:3d} {st.op or 'INIT':9s} stack={names(st.stack)} buffer={names(st.buffer)} arcs={arcs}")
    return "\n".join(lines)
