"""Correlation and agreement statistics used to evaluate predicted scores."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import ContractViolation, DegenerateInputError, InputError


@dataclass(frozen=True)
class PairedSamples:
    predictions: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.predictions, dtype=np.float64)
        q = np.asarray(self.labels, dtype=np.float64)
        if p.ndim != 1 or q.ndim != 1 or p.shape != q.shape:
            raise ContractViolation(f"predictions and labels must be equal-length 1-D, got {p.shape} and {q.shape}")
        if p.size < 2:
            raise ContractViolation(f"need at least 2 samples, got {p.size}")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise ContractViolation("samples contain NaN or Inf")
        object.__setattr__(self, "predictions", p)
        object.__setattr__(self, "labels", q)

    @property
    def n(self) -> int:
        return int(self.predictions.size)


def _samples(predictions, labels=None) -> PairedSamples:
    if isinstance(predictions, PairedSamples):
        return predictions
    return PairedSamples(predictions, labels)


def _centred(v: np.ndarray) -> np.ndarray:
    # exact power-of-two rescale first so the mean of tiny (subnormal) values is representable,
    # then normalise the deviations so squaring them cannot underflow
    v = np.ldexp(v, -int(np.frexp(np.max(np.abs(v)))[1]))
    d = v - v.mean()
    d = d - d.mean()  # second pass removes the rounding error of the first mean
    return d / np.max(np.abs(d))


def _pearson(x: np.ndarray, y: np.ndarray, what: str) -> float:
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateInputError(f"{what} undefined: a series has zero variance")
    dx, dy = _centred(x), _centred(y)
    r = float(np.sum(dx * dy) / np.sqrt(np.sum(dx * dx) * np.sum(dy * dy)))
    return min(1.0, max(-1.0, r))


def plcc(predictions, labels=None) -> float:
    """Pearson linear correlation. Accepts a PairedSamples or two sequences."""
    s = _samples(predictions, labels)
    return _pearson(s.predictions, s.labels, "PLCC")


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    return rankdata(np.asarray(values, dtype=np.float64), method="average")


def srocc(predictions, labels=None) -> float:
    """Spearman rank-order correlation (Pearson on average ranks, tie-safe)."""
    s = _samples(predictions, labels)
    return _pearson(average_ranks(s.predictions), average_ranks(s.labels), "SROCC")


def pairwise_accuracy(decisions: Sequence[str], human_choices: Sequence[str], tie_credit: float = 0.5) -> float:
    """Fraction of model decisions ("A", "B" or "tie") agreeing with human choices ("A"/"B").

    A tie earns ``tie_credit`` (0.5 by default, set 0 to count ties as misses).
    """
    if len(decisions) != len(human_choices):
        raise ContractViolation(f"{len(decisions)} decisions vs {len(human_choices)} human choices")
    if not decisions:
        raise ContractViolation("pairwise_accuracy needs at least one pair")
    total = 0.0
    for d, h in zip(decisions, human_choices):
        if h not in ("A", "B"):
            raise ContractViolation(f"human choice must be 'A' or 'B', got {h!r}")
        if d == "tie":
            total += tie_credit
        elif d in ("A", "B"):
            total += d == h
        else:
            raise ContractViolation(f"decision must be 'A', 'B' or 'tie', got {d!r}")
    return total / len(decisions)


def level_correlation(scores_by_level: Mapping[float, Sequence[float]]) -> float:
    """SROCC between degradation level and the mean score at that level."""
    if len(scores_by_level) < 2:
        raise InputError(f"need at least 2 levels, got {len(scores_by_level)}")
    levels, means = [], []
    for level, scores in scores_by_level.items():
        if len(scores) == 0:
            raise InputError(f"level {level} has no scores")
        levels.append(float(level))
        means.append(float(np.mean(scores)))
    return srocc(means, levels)
