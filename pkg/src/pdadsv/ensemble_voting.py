"""Performance-weighted hard voting over the four classifiers.

Classifier order is fixed everywhere: classic_gb, second_order,
histogram_goss_efb, bagging. Weights are validation-accuracy proportional and
an exact tie in the weighted tally goes to the positive class, which favors
sensitivity in a screening setting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidVote

CLASSIFIER_NAMES = ("classic_gb", "second_order", "histogram_goss_efb", "bagging")


@dataclass(frozen=True)
class ClassifierWeights:
    values: np.ndarray  # 4 non-negative reals summing to 1

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (4,):
            raise InvalidVote(f"expected 4 weights, got shape {v.shape}")
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-12:
            raise InvalidVote("weights must be non-negative and sum to 1")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class Prediction:
    votes: tuple           # 4 binary votes in classifier order
    weighted_tally_positive: float
    weighted_tally_negative: float
    final_label: int
    probabilities: tuple   # informational per-classifier probability


def compute_weights(validation_accuracy) -> ClassifierWeights:
    """Accuracy-proportional weights; all-zero accuracies fall back to uniform."""
    acc = np.asarray(validation_accuracy, dtype=float)
    if acc.shape != (4,):
        raise InvalidVote(f"expected 4 accuracies, got shape {acc.shape}")
    if np.any(acc < 0) or np.any(acc > 1):
        raise InvalidVote("accuracies must lie in [0, 1]")
    total = acc.sum()
    if total == 0.0:
        return ClassifierWeights(np.full(4, 0.25))
    return ClassifierWeights(acc / total)


def hard_vote(votes, weights: ClassifierWeights, probabilities=None) -> Prediction:
    """Weighted binary fusion; final label is 1 when the positive tally is at
    least the negative tally."""
    votes = list(votes)
    if len(votes) != 4 or any(v not in (0, 1) for v in votes):
        raise InvalidVote(f"votes must be 4 binary values, got {votes!r}")
    tally_pos = float(np.dot(weights.values, votes))
    tally_neg = 1.0 - tally_pos
    final = 1 if tally_pos >= tally_neg else 0
    probs = tuple(float(p) for p in probabilities) if probabilities is not None \
        else tuple(float(v) for v in votes)
    return Prediction(votes=tuple(int(v) for v in votes),
                      weighted_tally_positive=tally_pos,
                      weighted_tally_negative=tally_neg,
                      final_label=final,
                      probabilities=probs)
