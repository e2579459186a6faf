import numpy as np
import pytest

from fashion_parser.corpus import generate_corpus, load_lexicon, load_templates
from fashion_parser.transitions import (TreeError, check_tree, format_trace, is_tree, labels_to_tree, reconstruct,
                                        run_transition_executor, tree_to_oplabels)
from oracles import all_head_lists, is_projective_tree

OPS = ["SHIFT", "LEFT_ARC", "RIGHT_ARC", "UNKNOWN"]


def canonical(heads):
    """True when each head is the one the nearest-eligible decoder would pick.

    LEFT_ARC tokens must attach to the very next token; RIGHT_ARC tokens to
    the closest preceding token that is not itself a LEFT_ARC dependent.
    """
    labels = tree_to_oplabels(heads)
    for i, h in enumerate(heads):
        if labels[i] == "LEFT_ARC" and h != i + 1:
            return False
        if labels[i] == "RIGHT_ARC":
            j = i - 1
            while labels[j] == "LEFT_ARC":
                j -= 1
            if h != j:
                return False
    return True


def test_tree_to_oplabels_examples():
    assert tree_to_oplabels([1, -1]) == ["LEFT_ARC", "SHIFT"]
    assert tree_to_oplabels([-1, 0, 1]) == ["SHIFT", "RIGHT_ARC", "RIGHT_ARC"]


def test_labels_to_tree_examples():
    assert labels_to_tree(["LEFT_ARC", "SHIFT"]) == [1, -1]
    assert labels_to_tree(["SHIFT"]) == [-1]
    assert labels_to_tree(["SHIFT", "RIGHT_ARC", "RIGHT_ARC"]) == [-1, 0, 1]


@pytest.mark.parametrize("heads", [[0], [1, 0], [-1, -1], [1, 2, 0], [5, -1]])
def test_non_trees_are_rejected(heads):
    assert not is_tree(heads)
    with pytest.raises(TreeError):
        tree_to_oplabels(heads)


def test_non_projective_tree_is_rejected():
    # arcs 0->2 and 1->3 cross
    heads = [-1, 3, 0, 0]
    assert not is_projective_tree(heads)
    with pytest.raises(TreeError):
        check_tree(heads)


def test_validator_agrees_with_oracle_on_all_small_head_lists():
    for n in range(1, 5):
        for heads in all_head_lists(n):
            assert is_tree(list(heads)) == is_projective_tree(list(heads)), heads


def test_exhaustive_round_trip_on_canonical_trees():
    checked = 0
    for n in range(1, 7):
        for heads in all_head_lists(n):
            heads = list(heads)
            if not is_projective_tree(heads):
                continue
            labels = tree_to_oplabels(heads)
            assert len(labels) == n and labels.count("SHIFT") == 1
            if canonical(heads):
                assert labels_to_tree(labels) == heads, heads
                checked += 1
    assert checked == 63  # canonical projective trees with up to 6 tokens


def test_round_trip_on_generated_corpus():
    corpus = generate_corpus(load_lexicon(), load_templates(), 3000, 21)
    for s in corpus:
        assert tree_to_oplabels(s.head) == s.op
        assert labels_to_tree(s.op) == s.head


def test_random_labels_always_give_projective_trees():
    rng = np.random.default_rng(0)
    for _ in range(3000):
        n = int(rng.integers(1, 12))
        labels = [OPS[i] for i in rng.integers(0, 4, size=n)]
        heads = labels_to_tree(labels)
        assert is_projective_tree(heads), (labels, heads)


def test_repair_flag():
    assert not reconstruct(["LEFT_ARC", "SHIFT"]).repaired
    assert reconstruct(["LEFT_ARC", "LEFT_ARC"]).repaired
    assert reconstruct(["SHIFT", "SHIFT"]).repaired
    assert reconstruct(["UNKNOWN"]).repaired


def test_force_attach_goes_to_first_shift():
    assert labels_to_tree(["SHIFT", "SHIFT", "SHIFT"]) == [-1, 0, 0]
    # no SHIFT at all: the last open token becomes root
    assert labels_to_tree(["RIGHT_ARC"]) == [-1]


def test_empty_labels_raise():
    with pytest.raises(ValueError):
        labels_to_tree([])


def test_trace_length_bound_and_final_arcs():
    rng = np.random.default_rng(1)
    for _ in range(500):
        n = int(rng.integers(1, 10))
        labels = [OPS[i] for i in rng.integers(0, 4, size=n)]
        result = run_transition_executor(labels)
        assert len(result.trace) <= 2 * n + 1
        final = result.trace[-1]
        heads = [-1] * n
        for h, d in final.arcs:
            heads[d] = h
        assert heads == labels_to_tree(labels)


def test_stack_holds_only_root_before_repair():
    labels = tree_to_oplabels([1, 2, -1, 2, 5, 3])
    result = run_transition_executor(labels)
    assert result.trace[-1].stack == [2]
    assert all(step.op != "ATTACH" for step in result.trace)


def test_white_shoes_dolce_gabbana_trace():
    tokens = ["white", "shoes", "dolce", "gabbana"]
    gold = [1, -1, 3, 1]
    labels = tree_to_oplabels(gold)
    assert labels == ["LEFT_ARC", "SHIFT", "LEFT_ARC", "RIGHT_ARC"]
    result = run_transition_executor(labels, tokens)
    assert result.heads == gold
    assert set(result.trace[-1].arcs) == {(1, 0), (3, 2), (1, 3)}
    text = format_trace(result, tokens)
    assert "shoes->white" in text and "gabbana->dolce" in text and "shoes->gabbana" in text
    assert text.splitlines()[0].split()[1] == "INIT"


def test_executor_rejects_misaligned_tokens():
    with pytest.raises(ValueError):
        run_transition_executor(["SHIFT"], ["a", "b"])
