import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fashion_parser.nn.crf import (CrfParams, crf_log_partition, crf_marginals, crf_nll_grad,
                                   crf_path_score, crf_viterbi)
from oracles import brute_force_crf, central_difference, rel_error


def random_crf(rng, k, scale=1.0):
    return CrfParams(rng.normal(0, scale, (k, k)), rng.normal(0, scale, k), rng.normal(0, scale, k))


def test_single_step_log_partition_is_logsumexp():
    e = np.array([[0.3, -1.2, 2.0]])
    expected = math.log(sum(math.exp(v) for v in e[0]))
    assert crf_log_partition(e, CrfParams.zeros(3)) == pytest.approx(expected, rel=1e-12)


def test_uniform_scores_partition_is_t_log_k():
    for t, k in [(1, 2), (3, 4), (5, 3)]:
        assert crf_log_partition(np.zeros((t, k)), CrfParams.zeros(k)) == pytest.approx(t * math.log(k))


def test_log_partition_matches_enumeration_4x3():
    rng = np.random.default_rng(7)
    e = rng.normal(size=(4, 3))
    crf = random_crf(rng, 3)
    log_z, *_ = brute_force_crf(e, crf.transitions, crf.start, crf.stop)
    assert abs(crf_log_partition(e, crf) - log_z) <= 1e-10 * abs(log_z)


def test_marginals_single_step_is_softmax():
    e = np.array([[1.0, 2.0, 0.5, -1.0]])
    p = np.exp(e[0]) / np.exp(e[0]).sum()
    np.testing.assert_allclose(crf_marginals(e, CrfParams.zeros(4))[0], p, rtol=1e-12)


def test_zero_transitions_factorise():
    rng = np.random.default_rng(3)
    e = rng.normal(size=(5, 4))
    marg = crf_marginals(e, CrfParams.zeros(4))
    soft = np.exp(e) / np.exp(e).sum(axis=1, keepdims=True)
    np.testing.assert_allclose(marg, soft, rtol=1e-12)
    path, _ = crf_viterbi(e, CrfParams.zeros(4))
    assert path == list(e.argmax(axis=1))


def test_viterbi_single_step():
    path, score = crf_viterbi(np.array([[0.1, 0.9, 0.3]]), CrfParams.zeros(3))
    assert path == [1] and score == pytest.approx(0.9)


def test_viterbi_tie_goes_to_lower_label():
    path, _ = crf_viterbi(np.zeros((3, 3)), CrfParams.zeros(3))
    assert path == [0, 0, 0]


@pytest.mark.parametrize("seed", range(12))
def test_against_enumeration(seed):
    rng = np.random.default_rng(seed)
    t, k = int(rng.integers(1, 7)), int(rng.integers(1, 6))
    e = rng.normal(0, 2, size=(t, k))
    crf = random_crf(rng, k)
    log_z, marg, best, argmaxes = brute_force_crf(e, crf.transitions, crf.start, crf.stop)
    assert abs(crf_log_partition(e, crf) - log_z) <= 1e-10 * max(1.0, abs(log_z))
    np.testing.assert_allclose(crf_marginals(e, crf), marg, rtol=1e-10, atol=1e-14)
    path, score = crf_viterbi(e, crf)
    assert abs(score - best) <= 1e-10 * max(1.0, abs(best))
    if len(argmaxes) == 1:
        assert tuple(path) == argmaxes[0]


def test_batch_equals_individual():
    rng = np.random.default_rng(11)
    e = rng.normal(size=(6, 4, 5))
    crf = random_crf(rng, 5)
    gold = rng.integers(0, 5, size=(6, 4))
    np.testing.assert_allclose(crf_log_partition(e, crf), [crf_log_partition(x, crf) for x in e])
    paths, scores = crf_viterbi(e, crf)
    for i in range(6):
        p, s = crf_viterbi(e[i], crf)
        assert list(paths[i]) == p and scores[i] == pytest.approx(s)
    loss, g = crf_nll_grad(e, gold, crf)
    singles = [crf_nll_grad(e[i], gold[i], crf) for i in range(6)]
    assert loss == pytest.approx(sum(l for l, _ in singles))
    np.testing.assert_allclose(g.transitions, sum(s.transitions for _, s in singles), atol=1e-12)
    np.testing.assert_allclose(g.emissions[2], singles[2][1].emissions, atol=1e-12)


def test_nll_uniform():
    loss, _ = crf_nll_grad(np.zeros((2, 4)), [1, 3], CrfParams.zeros(4))
    assert loss == pytest.approx(2 * math.log(4))


def test_nll_peaked_goes_to_zero():
    e = np.full((3, 3), -50.0)
    e[[0, 1, 2], [2, 0, 1]] = 50.0
    loss, _ = crf_nll_grad(e, [2, 0, 1], CrfParams.zeros(3))
    assert 0 <= loss < 1e-12


def test_gold_out_of_range():
    with pytest.raises(ValueError):
        crf_nll_grad(np.zeros((2, 3)), [0, 3], CrfParams.zeros(3))


def test_nll_is_logz_minus_path_score():
    rng = np.random.default_rng(5)
    e = rng.normal(size=(4, 3))
    crf = random_crf(rng, 3)
    gold = [0, 2, 2, 1]
    loss, _ = crf_nll_grad(e, gold, crf)
    assert loss == pytest.approx(crf_log_partition(e, crf) - crf_path_score(e, gold, crf))


@pytest.mark.parametrize("seed", range(5))
def test_nll_gradient_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    t, k = int(rng.integers(1, 6)), int(rng.integers(2, 5))
    e = rng.normal(size=(t, k))
    crf = random_crf(rng, k)
    gold = rng.integers(0, k, size=t)
    _, g = crf_nll_grad(e, gold, crf)

    def f():
        return crf_nll_grad(e, gold, crf)[0]

    for analytic, arr in [(g.emissions, e), (g.transitions, crf.transitions), (g.start, crf.start), (g.stop, crf.stop)]:
        assert rel_error(analytic, central_difference(f, arr)) < 1e-4


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 2**32 - 1), st.floats(-5, 5))
def test_shift_invariance(t, k, seed, c):
    rng = np.random.default_rng(seed)
    e = rng.normal(0, 3, size=(t, k))
    crf = random_crf(rng, k)
    path, _ = crf_viterbi(e, crf)
    path2, _ = crf_viterbi(e + c, crf)
    np.testing.assert_allclose(crf_marginals(e, crf), crf_marginals(e + c, crf), atol=1e-10)
    # argmax may only differ if it was tied to begin with
    assert path == path2 or abs(crf_path_score(e, path, crf) - crf_path_score(e, path2, crf)) < 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_marginals_are_distributions(t, k, seed):
    rng = np.random.default_rng(seed)
    e = rng.uniform(-10, 10, size=(t, k))
    crf = CrfParams(rng.uniform(-10, 10, (k, k)), rng.uniform(-10, 10, k), rng.uniform(-10, 10, k))
    marg = crf_marginals(e, crf)
    assert np.all(np.isfinite(marg))
    assert np.all((marg >= 0) & (marg <= 1))
    np.testing.assert_allclose(marg.sum(axis=1), 1.0, atol=1e-9)
    loss, g = crf_nll_grad(e, rng.integers(0, k, size=t), crf)
    assert np.isfinite(loss) and all(np.all(np.isfinite(a)) for a in (g.emissions, g.transitions))
