"""Planted-rule synthetic data shared across the test suite.

The label oracle here is deliberately independent of the package's model
code: rules are evaluated by direct boolean logic over predicate signs, so
trained models can be checked against ground truth that never touched the
training path.
"""

from __future__ import annotations

import numpy as np

GROUP_SIZES = (4, 1, 1, 1, 1, 1, 1, 1)  # predicate 1 is multi-grounding
NUM_PREDICATES = len(GROUP_SIZES)
PREDICATE_IDS = tuple(range(1, NUM_PREDICATES + 1))
LABELS = ("false", "true")


def planted_two_term(preds) -> bool:
    """(P1 and not P3) or (P5 and P7), by direct evaluation."""
    return bool((preds[0] > 0 and preds[2] < 0) or (preds[4] > 0 and preds[6] > 0))


def planted_redundant(preds) -> bool:
    """Two live terms plus two absorbed specializations of them.

    (P1^P2) v (P3^P4) v (P1^P2^~P5) v (P3^P4^~P6); the last two disjuncts
    are logically redundant, so the truth table equals the first two.
    """
    t1 = preds[0] > 0 and preds[1] > 0
    t2 = preds[2] > 0 and preds[3] > 0
    t3 = t1 and preds[4] < 0
    t4 = t2 and preds[5] < 0
    return bool(t1 or t2 or t3 or t4)


def atoms_from_predicates(preds) -> list[float]:
    """Expand predicate signs into atom entries (groups filled uniformly)."""
    row: list[float] = []
    for size, value in zip(GROUP_SIZES, preds):
        row.extend([float(value)] * size)
    return row


def all_sign_patterns() -> list[np.ndarray]:
    """All 2^8 predicate sign assignments, in binary order."""
    return [
        np.array([1.0 if (k >> bit) & 1 else -1.0 for bit in range(NUM_PREDICATES)])
        for k in range(2**NUM_PREDICATES)
    ]


def two_term_dataset(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Uniform patterns labeled by the two-term rule; all 256 patterns first."""
    patterns = all_sign_patterns()
    X, y = [], []
    for i in range(n):
        preds = patterns[i] if i < len(patterns) else rng.choice((-1.0, 1.0), size=NUM_PREDICATES)
        X.append(atoms_from_predicates(preds))
        y.append(1 if planted_two_term(preds) else 0)
    return np.asarray(X), np.asarray(y)


def redundant_dataset(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Balanced data for the redundant rule, with co-firing positives.

    Positives usually satisfy both live terms at once, negatives sit at
    least two sign flips away from either term, so single-atom noise
    rarely crosses the label boundary.
    """
    X, y = [], []
    for _ in range(n):
        preds = rng.choice((-1.0, 1.0), size=NUM_PREDICATES)
        if rng.random() < 0.5:
            roll = rng.random()
            if roll < 0.7:
                preds[0] = preds[1] = preds[2] = preds[3] = 1.0
            elif roll < 0.85:
                preds[0] = preds[1] = 1.0
                preds[2], preds[3] = rng.choice(([-1, -1], [-1, 1], [1, -1]))
            else:
                preds[2] = preds[3] = 1.0
                preds[0], preds[1] = rng.choice(([-1, -1], [-1, 1], [1, -1]))
        else:
            preds[0] = preds[1] = preds[2] = preds[3] = -1.0
        X.append(atoms_from_predicates(preds))
        y.append(1 if planted_redundant(preds) else 0)
    return np.asarray(X), np.asarray(y)


def majority_vote_predicates(row: np.ndarray) -> list[float]:
    """Per-predicate sign of the mean atom value; 0 when exactly tied."""
    preds = []
    start = 0
    for size in GROUP_SIZES:
        mean = row[start : start + size].mean()
        start += size
        preds.append(1.0 if mean > 0 else (-1.0 if mean < 0 else 0.0))
    return preds


def flip_fraction(X: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Negate exactly round(fraction * size) entries, chosen without replacement."""
    noisy = X.copy()
    count = int(round(fraction * noisy.size))
    positions = rng.permutation(noisy.size)[:count]
    noisy.ravel()[positions] *= -1.0
    return noisy
