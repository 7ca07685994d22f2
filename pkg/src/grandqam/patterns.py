"""Reliability ranking, weight-model fitting, and weight-ordered pattern streams.

A pattern is a set of candidate positions (bit flips or symbol
substitutions, depending on the decoder) identified by their rank in
the reliability ordering. Patterns are produced in nondecreasing total
integer weight; within equal weight the order is lexicographic on the
rank indices, so the stream is deterministic and duplicate-free. The
generation is an integer-partition style descent over the weight
table, which avoids priority queues entirely.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

__all__ = [
    "ReliabilityRanking",
    "WeightModel",
    "Pattern",
    "rank",
    "fit_weight_model",
    "iter_patterns",
]

# Subset-sum reachability bitmaps are only built below this total weight.
_REACH_LIMIT = 1 << 22


@dataclass
class ReliabilityRanking:
    """Stable ascending ordering of reliability values.

    ``perm[j]`` is the original index of the j-th least reliable value;
    ``values`` holds the sorted reliabilities.
    """

    perm: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return self.values.size


def rank(values) -> ReliabilityRanking:
    """Stable sort ascending; ties keep their original order."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("expected a 1-D reliability vector")
    if np.isnan(v).any():
        raise ValueError("reliabilities must not contain NaN")
    perm = np.argsort(v, kind="stable")
    return ReliabilityRanking(perm=perm, values=v[perm])


@dataclass
class WeightModel:
    """Piecewise-linear fit of a rank-ordered reliability curve.

    ``weights[i]`` is the positive integer weight of rank i+1; the array
    is nondecreasing. ``step`` is the quantization step (the slope of
    the first segment); a nonpositive first slope collapses the model to
    unit weights.
    """

    segments: int
    breakpoints: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray
    weights: np.ndarray
    step: float

    def __len__(self) -> int:
        return self.weights.size


def _segment_bounds(n: int, segments: int) -> np.ndarray:
    bounds = np.round(np.arange(segments + 1) * n / segments).astype(np.int64)
    bounds[0], bounds[-1] = 0, n
    return bounds


def fit_weight_model(ranking: ReliabilityRanking, segments: int) -> WeightModel:
    """Least-squares piecewise-linear model with quantile breakpoints.

    Ranks run 1..N. Breakpoints sit at equally spaced rank quantiles and
    each segment gets an independent least-squares line. The integer
    weight of rank r is max(1, round(fitted(r) / step)) made monotone,
    with step equal to the first segment's slope.
    """
    if segments < 1:
        raise ValueError("need at least one segment")
    values = ranking.values
    n = values.size
    if n < segments + 1:
        raise ValueError(f"need at least {segments + 1} samples for {segments} segments")

    bounds = _segment_bounds(n, segments)
    ranks = np.arange(1, n + 1, dtype=np.float64)
    slopes = np.zeros(segments)
    intercepts = np.zeros(segments)
    fitted = np.empty(n)
    for s in range(segments):
        lo, hi = bounds[s], bounds[s + 1]
        r, v = ranks[lo:hi], values[lo:hi]
        r_mean, v_mean = r.mean(), v.mean()
        var = ((r - r_mean) ** 2).sum()
        slope = ((r - r_mean) * (v - v_mean)).sum() / var if var > 0 else 0.0
        slopes[s] = slope
        intercepts[s] = v_mean - slope * r_mean
        fitted[lo:hi] = intercepts[s] + slope * r

    step = slopes[0]
    if step > 0 and np.isfinite(step):
        weights = np.maximum(1, np.round(fitted / step)).astype(np.int64)
        weights = np.maximum.accumulate(weights)
    else:
        weights = np.ones(n, dtype=np.int64)
    return WeightModel(
        segments=segments,
        breakpoints=bounds,
        slopes=slopes,
        intercepts=intercepts,
        weights=weights,
        step=step,
    )


class Pattern(NamedTuple):
    """A set of rank positions (0-based) and their total model weight."""

    indices: tuple[int, ...]
    weight: int


def _reachable_weights(weights: np.ndarray, bound: int) -> Iterator[int]:
    # subset-sum reachability bitmap; bit w set iff some subset weighs w
    mask = (1 << (bound + 1)) - 1
    reach = 1
    for w in weights:
        reach |= (reach << int(w)) & mask
    pos = 0
    while reach:
        tz = (reach & -reach).bit_length() - 1
        pos += tz
        yield pos
        reach >>= tz + 1
        pos += 1


def iter_patterns(
    model: WeightModel | np.ndarray,
    max_weight: int | None = None,
    max_patterns: int | None = None,
) -> Iterator[Pattern]:
    """Stream patterns in nondecreasing weight, lexicographic within ties.

    The empty pattern (weight 0) always comes first. Every subset with
    total weight <= max_weight is emitted exactly once; exhaustion ends
    the stream. Weights must be positive and nondecreasing, which the
    weight model guarantees.
    """
    weights = model.weights if isinstance(model, WeightModel) else np.asarray(model)
    weights = weights.astype(np.int64)
    n = weights.size
    if n and ((weights < 1).any() or (np.diff(weights) < 0).any()):
        raise ValueError("weights must be >= 1 and nondecreasing")

    total = int(weights.sum())
    bound = total if max_weight is None else min(int(max_weight), total)
    budget = max_patterns if max_patterns is not None else float("inf")
    if budget <= 0:
        return
    suffix = [int(x) for x in np.concatenate([np.cumsum(weights[::-1])[::-1], [0]])]
    wlist = [int(x) for x in weights]

    def subsets(j0: int, t: int, prefix: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
        if t == 0:
            yield prefix
            return
        for j in range(j0, n):
            wj = wlist[j]
            if wj > t or suffix[j] < t:
                break
            yield from subsets(j + 1, t - wj, prefix + (j,))

    if bound <= _REACH_LIMIT:
        levels: Iterator[int] = _reachable_weights(weights, bound)
    else:
        levels = iter(range(bound + 1))

    emitted = 0
    for w in levels:
        if w > bound:
            break
        for indices in subsets(0, w, ()):
            yield Pattern(indices=indices, weight=w)
            emitted += 1
            if emitted >= budget:
                return
