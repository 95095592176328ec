"""Hard-voting tests, including the brute-force tally oracle."""

import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pdadsv.ensemble_voting import (
    CLASSIFIER_NAMES,
    ClassifierWeights,
    compute_weights,
    hard_vote,
)
from pdadsv.errors import InvalidVote


def oracle_tally(votes, weights):
    pos = sum(w * v for w, v in zip(weights, votes))
    neg = 1.0 - pos
    return pos, neg, 1 if pos >= neg else 0


def test_classifier_name_order():
    assert CLASSIFIER_NAMES == ("classic_gb", "second_order",
                                "histogram_goss_efb", "bagging")


def test_equal_accuracies_give_uniform_weights():
    w = compute_weights([0.85, 0.85, 0.85, 0.85])
    assert np.allclose(w.values, 0.25)


def test_weight_arithmetic():
    w = compute_weights([0.9, 0.8, 0.7, 0.6])
    assert np.allclose(w.values, [0.30, 0.266667, 0.233333, 0.20], atol=1e-4)
    assert w.values.sum() == pytest.approx(1.0, abs=1e-12)


def test_zero_accuracies_fall_back_to_uniform():
    w = compute_weights([0.0, 0.0, 0.0, 0.0])
    assert np.allclose(w.values, 0.25)


def test_unanimous_positive():
    pred = hard_vote([1, 1, 1, 1], compute_weights([0.8, 0.7, 0.9, 0.6]))
    assert pred.final_label == 1
    assert pred.weighted_tally_positive == pytest.approx(1.0)


def test_exact_tie_goes_positive():
    pred = hard_vote([1, 1, 0, 0], ClassifierWeights(np.full(4, 0.25)))
    assert pred.weighted_tally_positive == pytest.approx(0.5)
    assert pred.final_label == 1


def test_single_heavy_vote_loses():
    pred = hard_vote([1, 0, 0, 0], ClassifierWeights(np.array([0.4, 0.2, 0.2, 0.2])))
    assert pred.weighted_tally_positive == pytest.approx(0.4)
    assert pred.final_label == 0


def test_all_patterns_match_oracle_over_random_weights():
    rng = np.random.default_rng(0)
    for _ in range(100):
        raw = rng.uniform(0.01, 1.0, 4)
        weights = ClassifierWeights(raw / raw.sum())
        for votes in itertools.product((0, 1), repeat=4):
            pred = hard_vote(votes, weights)
            pos, neg, final = oracle_tally(votes, weights.values)
            assert pred.weighted_tally_positive == pytest.approx(pos, abs=1e-12)
            assert pred.weighted_tally_negative == pytest.approx(neg, abs=1e-12)
            assert pred.final_label == final
            assert pred.weighted_tally_positive + pred.weighted_tally_negative \
                == pytest.approx(1.0, abs=1e-12)


def test_invalid_votes_rejected():
    w = ClassifierWeights(np.full(4, 0.25))
    with pytest.raises(InvalidVote):
        hard_vote([1, 0, 2, 0], w)
    with pytest.raises(InvalidVote):
        hard_vote([1, 0, 1], w)
    with pytest.raises(InvalidVote):
        compute_weights([0.5, 0.5, 0.5, 1.5])


@given(st.lists(st.sampled_from([0, 1]), min_size=4, max_size=4),
       st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4),
       st.permutations(range(4)))
def test_joint_permutation_invariance(votes, raw, perm):
    raw = np.asarray(raw)
    weights = ClassifierWeights(raw / raw.sum())
    base = hard_vote(votes, weights)
    pv = [votes[i] for i in perm]
    permuted = hard_vote(pv, ClassifierWeights(weights.values[list(perm)]))
    assert permuted.final_label == base.final_label
    assert permuted.weighted_tally_positive == pytest.approx(
        base.weighted_tally_positive, abs=1e-12)


@given(st.lists(st.sampled_from([0, 1]), min_size=4, max_size=4),
       st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4),
       st.integers(0, 3))
def test_flipping_vote_up_never_decreases_tally(votes, raw, pos):
    raw = np.asarray(raw)
    weights = ClassifierWeights(raw / raw.sum())
    before = hard_vote(votes, weights).weighted_tally_positive
    flipped = list(votes)
    flipped[pos] = 1
    after = hard_vote(flipped, weights).weighted_tally_positive
    assert after >= before - 1e-12


def test_agreement_forces_that_label():
    rng = np.random.default_rng(1)
    for label in (0, 1):
        for _ in range(25):
            raw = rng.uniform(0.01, 1.0, 4)
            pred = hard_vote([label] * 4, ClassifierWeights(raw / raw.sum()))
            assert pred.final_label == label
