"""Description accuracy, likelihood-based classification, stratified k-fold.

The description accuracy of a sequence of effective length ell over an
alphabet of size s is

    DA = f(1 + log_s P(Y) / ell),

so DA = 1 means the model predicted the sequence with certainty, DA = 0
matches a uniform-random model, and negative values approach -1 as the
model gets arbitrarily worse than random.  f is the identity on [0, 1];
the squashing of the negative axis into (-1, 0) follows the established
convention (1 - e^(-x/4)) / (1 + e^(-x/4)).
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ZeroProbabilityError
from .hmm import Hmm, forward_log_likelihood
from .hqmm import Hqmm, log_likelihood


def squash_f(x: float) -> float:
    """Monotone map (-inf, 1] -> (-1, 1]: identity on [0, 1], sigmoid-like below 0."""
    x = float(x)
    if x > 1.0:
        raise ValueError(f"squash_f domain is x <= 1, got {x}")
    if x >= 0.0:
        return x
    e = np.exp(0.25 * x)
    # (1 - e^(-x/4)) / (1 + e^(-x/4)), written to avoid overflow for large -x.
    # Below x ~ -147 the float result saturates; clamp keeps the open bound.
    return max(float((e - 1.0) / (e + 1.0)), np.nextafter(-1.0, 0.0))


def da_score(log_lik: float, s: int, effective_length: int) -> float:
    """Description accuracy of one sequence from its natural-log likelihood."""
    if s < 2:
        raise ValueError(f"alphabet size must be >= 2, got {s}")
    if effective_length < 1:
        raise ValueError(f"effective length must be >= 1, got {effective_length}")
    return squash_f(1.0 + log_lik / (effective_length * np.log(s)))


def sequence_log_likelihood(model, seq, burn_in: int = 0) -> float:
    """Log-likelihood under either model kind."""
    if isinstance(model, Hqmm):
        return log_likelihood(model, seq, burn_in)
    if isinstance(model, Hmm):
        return forward_log_likelihood(model, seq, burn_in)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def da_scores(model, sequences, burn_in: int = 0) -> np.ndarray:
    """Per-sequence DA of the post-burn-in tails."""
    out = []
    for seq in sequences:
        seq = np.asarray(seq)
        ll = sequence_log_likelihood(model, seq, burn_in)
        out.append(da_score(ll, model.s, seq.size - burn_in))
    return np.array(out)


def da_summary(model, sequences, burn_in: int = 0) -> dict:
    """Mean and one-standard-deviation spread of per-sequence DA."""
    scores = da_scores(model, sequences, burn_in)
    return {"mean": float(scores.mean()), "std": float(scores.std()),
            "count": int(scores.size)}


def classify(models, seq, burn_in: int = 0) -> int:
    """Label whose model assigns the sequence the highest log-likelihood.

    Ties break toward the lowest label index; a model that assigns the
    sequence probability below the underflow floor scores -inf.
    """
    if len(models) == 0:
        raise DimensionError("need at least one model to classify")
    sizes = {model.s for model in models}
    if len(sizes) != 1:
        raise DimensionError(f"models disagree on alphabet size: {sorted(sizes)}")
    best_label = 0
    best_ll = -np.inf
    for label, model in enumerate(models):
        try:
            ll = sequence_log_likelihood(model, seq, burn_in)
        except ZeroProbabilityError:
            ll = -np.inf
        if ll > best_ll:
            best_label = label
            best_ll = ll
    return best_label


def accuracy(predictions, truths) -> float:
    predictions = np.asarray(predictions)
    truths = np.asarray(truths)
    if predictions.shape != truths.shape or predictions.ndim != 1:
        raise DimensionError(
            f"predictions and truths must be equal-length vectors, got "
            f"{predictions.shape} vs {truths.shape}")
    if predictions.size == 0:
        raise DimensionError("cannot score an empty prediction set")
    return float((predictions == truths).mean())


def kfold_splits(labels, k: int, seed) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold indices: list of (train, test), disjoint and covering.

    Each class is shuffled under the seed and dealt round-robin, so every
    fold's class counts differ from an even split by at most one item.
    """
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise DimensionError(f"labels must be a non-empty vector, got shape {labels.shape}")
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if idx.size < k:
            raise ValueError(
                f"class {cls!r} has {idx.size} items, need at least k={k}")
        idx = rng.permutation(idx)
        for pos, item in enumerate(idx):
            folds[pos % k].append(int(item))
    splits = []
    everything = np.arange(labels.size)
    for f in range(k):
        test = np.array(sorted(folds[f]), dtype=np.int64)
        train = np.setdiff1d(everything, test)
        splits.append((train, test))
    return splits
