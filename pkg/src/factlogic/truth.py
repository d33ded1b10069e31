"""Truth values for logic atoms and fixed-width atom vectors.

An atom's truth value is a real in [-1, 1]: negative means false, positive
means true, zero means unknown. Two conversions are supported, one for
backends exposing token scores::

    value = 2 * e^{v_yes} / (e^{v_no} + e^{v_yes}) - 1

and one for backends exposing only sampled decodes::

    value = 2 * m_yes / (m_yes + m_no) - 1

Each predicate owns a fixed number of vector entries (its atom budget), so
samples with differing grounding counts still produce equal-length vectors:
surplus atoms are subsampled with a seeded generator, missing entries are
zero-padded (zero = unknown, which is exactly what an unasked question is).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .templates import Predicate


def truth_from_logits(v_yes: float, v_no: float) -> float:
    """Truth value from the two pre-normalization token scores.

    Computed with the max subtracted before exponentiation, which is
    algebraically identical and immune to overflow for any finite scores.
    """
    v_yes = float(v_yes)
    v_no = float(v_no)
    if not (math.isfinite(v_yes) and math.isfinite(v_no)):
        raise ValueError(f"token scores must be finite, got ({v_yes}, {v_no})")
    top = max(v_yes, v_no)
    e_yes = math.exp(v_yes - top)
    e_no = math.exp(v_no - top)
    return 2.0 * e_yes / (e_no + e_yes) - 1.0


def truth_from_samples(m_yes: int, m_no: int) -> float:
    """Truth value from decoded answer counts.

    Zero counts on both sides mean the backend never produced a usable
    answer; that is "unknown", i.e. 0.
    """
    if m_yes < 0 or m_no < 0:
        raise ValueError(f"answer counts must be non-negative, got ({m_yes}, {m_no})")
    total = m_yes + m_no
    if total == 0:
        return 0.0
    return 2.0 * m_yes / total - 1.0


@dataclass(frozen=True)
class AtomVector:
    """Concatenated truth values with per-predicate index ranges.

    ``groups[i]`` is the half-open (start, stop) range owned by the i-th
    predicate; ranges partition [0, len(values)).
    """

    values: np.ndarray
    groups: tuple[tuple[int, int], ...]
    predicate_ids: tuple[int, ...]

    def __post_init__(self):
        if self.values.ndim != 1:
            raise ValueError("values must be a 1-d vector")
        if np.any(np.abs(self.values) > 1.0):
            raise ValueError("truth values must lie in [-1, 1]")
        expected = 0
        for start, stop in self.groups:
            if start != expected or stop <= start:
                raise ValueError("group ranges must partition the vector")
            expected = stop
        if expected != self.values.shape[0]:
            raise ValueError("group ranges must cover the vector exactly")

    @property
    def group_sizes(self) -> tuple[int, ...]:
        return tuple(stop - start for start, stop in self.groups)


def sample_seed(seed: int, sample_id: str) -> int:
    """Per-sample RNG seed, independent of evaluation order."""
    digest = hashlib.sha256(f"{seed}|{sample_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def assemble_vector(
    per_predicate: list[list[float]],
    predicates: list[Predicate],
    seed: int,
) -> AtomVector:
    """Fix each predicate's value list to its atom budget and concatenate.

    ``per_predicate`` must be ordered like ``predicates`` (ascending id).
    Over-full lists are thinned to a uniformly random subset (original order
    kept, seeded, stable across runs); short lists are right-padded with 0.
    """
    if len(per_predicate) != len(predicates):
        raise ValueError("one value list per predicate is required")
    rng = np.random.default_rng(seed)
    chunks: list[np.ndarray] = []
    groups: list[tuple[int, int]] = []
    offset = 0
    for values, predicate in zip(per_predicate, predicates):
        budget = predicate.max_groundings
        arr = np.asarray(values, dtype=np.float64)
        if arr.size > budget:
            keep = np.sort(rng.choice(arr.size, size=budget, replace=False))
            arr = arr[keep]
        elif arr.size < budget:
            arr = np.concatenate([arr, np.zeros(budget - arr.size)])
        chunks.append(arr)
        groups.append((offset, offset + budget))
        offset += budget
    return AtomVector(
        values=np.concatenate(chunks) if chunks else np.zeros(0),
        groups=tuple(groups),
        predicate_ids=tuple(p.id for p in predicates),
    )
