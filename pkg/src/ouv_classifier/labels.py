"""Label algebra: co-occurrence prior, modified softmax, soft labels.

Criteria are indexed 1-10 externally; vectors are length 11 with the
"Others" class last. All functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import NUM_CLASSES, NUM_CRITERIA
from .corpus import SiteRecord

VARIANTS = ("none", "vanilla", "uniform", "prior")
ALPHA_GRID = (0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0)


@dataclass(frozen=True)
class SmoothingConfig:
    variant: str = "none"
    alpha: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown smoothing variant {self.variant!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")


@dataclass
class CooccurrenceMatrix:
    counts: np.ndarray  # 10x10 integer counts

    def column_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)


@dataclass
class PriorWeights:
    mu: np.ndarray  # 10x11; row k-1 holds the weight vector for criterion k

    def for_criterion(self, k: int) -> np.ndarray:
        return self.mu[k - 1]


def cooccurrence(sites: list[SiteRecord]) -> CooccurrenceMatrix:
    """Count criterion co-justification over sites.

    Off-diagonal [k,l] counts sites justified under both k and l; the
    diagonal counts sites justified under that criterion alone.
    """
    counts = np.zeros((NUM_CRITERIA, NUM_CRITERIA), dtype=np.int64)
    for site in sites:
        if not site.criteria:
            raise ValueError(f"site {site.site_id} has no criteria")
        crits = sorted(site.criteria)
        if len(crits) == 1:
            k = crits[0]
            counts[k - 1, k - 1] += 1
        else:
            for a in crits:
                for b in crits:
                    if a != b:
                        counts[a - 1, b - 1] += 1
    return CooccurrenceMatrix(counts=counts)


def prior_weights(matrix: CooccurrenceMatrix) -> PriorWeights:
    """Column-normalize the co-occurrence matrix into per-criterion weights.

    mu[k][l] = counts[l, k] / sum_i counts[i, k] for the ten criteria;
    the Others entry is fixed to 1 so the Others noise passes through
    the prior variant unchanged.
    """
    counts = matrix.counts.astype(float)
    col_sums = counts.sum(axis=0)
    mu = np.ones((NUM_CRITERIA, NUM_CLASSES))
    for k in range(NUM_CRITERIA):
        if col_sums[k] <= 0:
            raise ValueError(
                f"criterion {k + 1} never occurs; cannot normalize prior")
        mu[k, :NUM_CRITERIA] = counts[:, k] / col_sums[k]
    return PriorWeights(mu=mu)


def soft_softmax(z: np.ndarray) -> np.ndarray:
    """Normalize a non-negative vector to a distribution, keeping zeros.

    f(z)_t = (e^{z_t} - 1) / (sum_l e^{z_l} - d). The denominator is
    computed as the sum of numerators so the output sums to 1 exactly up
    to rounding.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise ValueError("expected a 1-d vector")
    if np.any(z < 0):
        raise ValueError("entries must be non-negative")
    numerators = np.expm1(z)
    denom = numerators.sum()
    if denom <= 0:
        raise ValueError("all-zero input: denominator is zero")
    return numerators / denom


def smooth(one_hot: np.ndarray, parental: np.ndarray,
           mu: PriorWeights | None, config: SmoothingConfig) -> np.ndarray:
    """Combine sentence and parental labels into a soft label."""
    one_hot = np.asarray(one_hot, dtype=float)
    if config.variant == "none" or config.alpha == 0:
        return one_hot.copy()
    alpha = config.alpha
    if config.variant == "vanilla":
        combined = one_hot + alpha
    elif config.variant == "uniform":
        combined = one_hot + alpha * np.asarray(parental, dtype=float)
    else:  # prior
        if mu is None:
            raise ValueError("prior smoothing requires prior weights")
        k = int(np.argmax(one_hot)) + 1
        combined = one_hot + alpha * (mu.for_criterion(k)
                                      * np.asarray(parental, dtype=float))
    return soft_softmax(combined)


def epsilon_for_alpha(alpha: float, num_classes: int) -> float:
    """Smoothing strength of original label smoothing equivalent to the
    vanilla variant at a given alpha."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if num_classes < 2:
        raise ValueError("need at least two classes")
    k = num_classes
    num = math.expm1(alpha) * k
    denom = math.exp(1 + alpha) + (k - 1) * math.exp(alpha) - k
    return num / denom


def original_ls(one_hot: np.ndarray, epsilon: float,
                num_classes: int) -> np.ndarray:
    """Original label smoothing: (1 - eps) * y + (eps / K) * 1."""
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must be in [0, 1)")
    one_hot = np.asarray(one_hot, dtype=float)
    if one_hot.shape != (num_classes,):
        raise ValueError("one_hot length does not match num_classes")
    return (1 - epsilon) * one_hot + epsilon / num_classes
