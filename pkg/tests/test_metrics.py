"""DA metric, squashing function, classification, stratified k-fold."""

import numpy as np
import pytest

from qgm import (Hmm, Hqmm, accuracy, classify, da_score, da_scores, da_summary,
                 encode_hmm, kfold_splits, random_hqmm, squash_f)
from qgm.errors import DimensionError


def iid_uniform_hqmm(n, s):
    kraus = np.stack([np.eye(n, dtype=complex)[None] / np.sqrt(s)
                      for _ in range(s)])
    return Hqmm(kraus, np.eye(n, dtype=complex) / n)


def test_squash_endpoints():
    assert squash_f(1.0) == 1.0
    assert squash_f(0.0) == 0.0


def test_squash_identity_on_unit_interval():
    for x in (0.1, 0.5, 0.99):
        assert squash_f(x) == x


def test_squash_negative_branch_value():
    # direct evaluation of (1 - e^(-x/4)) / (1 + e^(-x/4)) at x = -20
    assert squash_f(-20.0) == pytest.approx(-0.9866142981514303, abs=1e-12)


def test_squash_monotone_and_bounded():
    # Strictly increasing where float64 can resolve the increments near -1.
    xs = np.linspace(-100, 1, 4001)
    ys = np.array([squash_f(x) for x in xs])
    assert (np.diff(ys) > 0).all()
    assert ys.min() > -1.0 and ys.max() == 1.0
    wide = np.array([squash_f(x) for x in np.linspace(-300, 1, 1001)])
    assert (np.diff(wide) >= 0).all() and wide.min() > -1.0
    # Deeply negative arguments saturate but never reach -1 exactly.
    for x in (-200.0, -1e4, -1e6):
        assert -1.0 < squash_f(x) == pytest.approx(-1.0, abs=1e-12)


def test_squash_continuous_at_zero():
    assert squash_f(-1e-9) == pytest.approx(0.0, abs=1e-9)


def test_squash_domain_error():
    with pytest.raises(ValueError):
        squash_f(1.0001)


def test_da_perfect_prediction():
    assert da_score(0.0, s=4, effective_length=10) == 1.0


def test_da_uniform_random_model_is_zero():
    for s, length in ((2, 5), (6, 300)):
        assert da_score(-length * np.log(s), s, length) == pytest.approx(0.0, abs=1e-12)


def test_da_worked_example():
    # x = 1 - 450 / (300 ln 6) through the positive branch
    expected = 1.0 - 450.0 / (300.0 * np.log(6))
    assert da_score(-450.0, s=6, effective_length=300) == pytest.approx(expected,
                                                                        rel=1e-12)
    assert expected == pytest.approx(0.16283406017312907, abs=1e-12)


def test_da_stays_in_range():
    rng = np.random.default_rng(0)
    for _ in range(200):
        ll = -np.exp(rng.uniform(0, 12))
        da = da_score(ll, s=3, effective_length=7)
        assert -1.0 < da <= 1.0
    # Pathologically bad likelihoods hug but never hit the lower bound.
    assert -1.0 < da_score(-1e9, s=3, effective_length=7) < -0.999


def test_da_parameter_validation():
    with pytest.raises(ValueError):
        da_score(-1.0, s=1, effective_length=5)
    with pytest.raises(ValueError):
        da_score(-1.0, s=3, effective_length=0)


def test_da_scores_uniform_model_mean_zero():
    model = iid_uniform_hqmm(2, 4)
    rng = np.random.default_rng(1)
    seqs = [rng.integers(0, 4, size=30) for _ in range(5)]
    scores = da_scores(model, seqs)
    np.testing.assert_allclose(scores, 0.0, atol=1e-12)
    summary = da_summary(model, seqs)
    assert summary["mean"] == pytest.approx(0.0, abs=1e-12)
    assert summary["count"] == 5


def test_classify_tie_breaks_to_lowest_label():
    model = random_hqmm(2, 3, 1, seed=2)
    seq = np.array([0, 1, 2, 1])
    assert classify([model, model, model], seq) == 0


def test_classify_prefers_matching_model():
    # two deterministic-emission HMMs: one emits only 0s, the other only 1s
    silent = 1e-12
    c0 = np.array([[1 - silent, 1 - silent], [silent, silent]])
    c1 = c0[::-1].copy()
    a = np.full((2, 2), 0.5)
    m0 = encode_hmm(Hmm(a, c0, [0.5, 0.5]))
    m1 = encode_hmm(Hmm(a, c1, [0.5, 0.5]))
    assert classify([m0, m1], np.zeros(10, dtype=int)) == 0
    assert classify([m0, m1], np.ones(10, dtype=int)) == 1


def test_classify_mixed_model_kinds_and_underflow():
    # an HMM that cannot emit symbol 1 underflows and loses to the other model
    dead = Hmm(np.eye(2), np.array([[1.0, 1.0], [0.0, 0.0]]), [1.0, 0.0])
    alive = iid_uniform_hqmm(2, 2)
    assert classify([dead, alive], np.array([0, 1, 0])) == 1


def test_classify_rejects_mismatched_alphabets():
    with pytest.raises(DimensionError):
        classify([iid_uniform_hqmm(2, 2), iid_uniform_hqmm(2, 3)], np.array([0]))


def test_accuracy():
    assert accuracy([0, 1, 2], [0, 1, 2]) == 1.0
    assert accuracy([0, 1, 2, 0], [0, 1, 0, 1]) == 0.5
    with pytest.raises(DimensionError):
        accuracy([0, 1], [0, 1, 2])


def test_uniform_classifier_is_chance_level():
    # identical uniform models predict label 0 always; balanced 3-class data
    # then scores exactly 1/3
    model = iid_uniform_hqmm(2, 4)
    rng = np.random.default_rng(3)
    seqs = [rng.integers(0, 4, size=20) for _ in range(30)]
    truths = np.arange(30) % 3
    preds = [classify([model, model, model], seq) for seq in seqs]
    assert accuracy(preds, truths) == pytest.approx(1 / 3, abs=1e-12)


def test_kfold_small_exact():
    labels = np.array([0, 0, 0, 0, 0, 1, 1, 1, 1, 1])
    splits = kfold_splits(labels, 5, seed=4)
    assert len(splits) == 5
    all_test = np.sort(np.concatenate([test for _, test in splits]))
    assert np.array_equal(all_test, np.arange(10))
    for train, test in splits:
        assert test.size == 2
        assert np.intersect1d(train, test).size == 0
        assert np.array_equal(np.sort(np.concatenate([train, test])), np.arange(10))
        # stratification: one item of each class per fold
        assert labels[test].sum() == 1


def test_kfold_proportions_at_splice_scale():
    rng = np.random.default_rng(5)
    labels = np.repeat([0, 1, 2], [762, 765, 1648])
    labels = labels[rng.permutation(labels.size)]
    splits = kfold_splits(labels, 5, seed=6)
    for _, test in splits:
        counts = np.bincount(labels[test], minlength=3)
        for cls, total in zip(range(3), (762, 765, 1648)):
            assert abs(counts[cls] - total / 5) <= 1


def test_kfold_deterministic_and_validated():
    labels = np.array([0, 1] * 6)
    a = kfold_splits(labels, 3, seed=7)
    b = kfold_splits(labels, 3, seed=7)
    for (tr_a, te_a), (tr_b, te_b) in zip(a, b):
        assert np.array_equal(tr_a, tr_b) and np.array_equal(te_a, te_b)
    with pytest.raises(ValueError):
        kfold_splits(labels, 1, seed=8)
    with pytest.raises(ValueError):
        kfold_splits(np.array([0, 0, 1]), 2, seed=9)


def test_classify_argmax_shift_invariance():
    # adding a constant to every model's log-likelihood cannot change the
    # argmax; likelihood ratios drive the label, absolute scale does not
    m_a = random_hqmm(2, 3, 1, seed=10)
    m_b = random_hqmm(2, 3, 2, seed=11)
    rng = np.random.default_rng(12)
    from qgm.metrics import sequence_log_likelihood

    for _ in range(10):
        seq = rng.integers(0, 3, size=12)
        label = classify([m_a, m_b], seq)
        lls = [sequence_log_likelihood(m, seq) for m in (m_a, m_b)]
        assert label == int(np.argmax(lls))
