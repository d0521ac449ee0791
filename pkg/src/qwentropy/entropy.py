"""Shannon entropies of finite distributions and classical walk rates.

All entropies are in bits. A rate is measured in bits per iteration, where one
iteration is a block of ``w`` walk steps followed by a position readout.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidDistributionError

#: Sum-to-one tolerance enforced by :func:`shannon_entropy`.
ENTROPY_SUM_TOL = 1e-6
#: Tolerance used when constructing :class:`FiniteDistribution` objects.
DISTRIBUTION_TOL = 1e-9
_LOG_SPACE_ABOVE = 60


@dataclass(frozen=True)
class FiniteDistribution:
    """Probabilities attached to a finite set of labels."""

    labels: tuple
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or len(probs) != len(self.labels):
            raise InvalidDistributionError("labels and probabilities differ in length")
        if np.any(probs < -DISTRIBUTION_TOL):
            raise InvalidDistributionError("negative probability")
        total = probs.sum()
        if abs(total - 1.0) > DISTRIBUTION_TOL:
            raise InvalidDistributionError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "probs", np.clip(probs, 0.0, None))

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "FiniteDistribution":
        items = sorted(mapping.items(), key=lambda kv: kv[0])
        return cls(tuple(k for k, _ in items), np.array([v for _, v in items], dtype=float))

    def as_dict(self) -> dict:
        return dict(zip(self.labels, self.probs.tolist()))

    def __getitem__(self, label) -> float:
        try:
            return float(self.probs[self.labels.index(label)])
        except ValueError:
            return 0.0

    def __len__(self):
        return len(self.labels)


def _as_probs(d) -> np.ndarray:
    if isinstance(d, FiniteDistribution):
        return d.probs
    if isinstance(d, Mapping):
        return np.fromiter(d.values(), dtype=float, count=len(d))
    return np.asarray(d, dtype=float).ravel()


def entropy_bits(probs: np.ndarray) -> float:
    """Plug-in entropy of a nonnegative vector, without validation."""
    p = probs[probs > 0.0]
    return float(-(p * np.log2(p)).sum())


def shannon_entropy(d: FiniteDistribution | Mapping | Sequence[float] | np.ndarray) -> float:
    """Shannon entropy in bits, using ``0 log 0 = 0``.

    Parameters
    ----------
    d : FiniteDistribution, mapping, or array-like
        Distribution to evaluate. Plain containers are validated here.

    Raises
    ------
    InvalidDistributionError
        If any probability is negative or the total deviates from 1 by more
        than ``1e-6``.
    """
    p = _as_probs(d)
    if np.any(p < -ENTROPY_SUM_TOL):
        raise InvalidDistributionError("negative probability")
    total = p.sum()
    if abs(total - 1.0) > ENTROPY_SUM_TOL:
        raise InvalidDistributionError(f"probabilities sum to {total!r}, not 1")
    h = entropy_bits(np.clip(p, 0.0, None))
    return min(max(h, 0.0), math.log2(max(len(p), 1)))


def _log2_binom(w: int, i: int) -> float:
    if w <= _LOG_SPACE_ABOVE:
        return math.log2(math.comb(w, i))
    return (math.lgamma(w + 1) - math.lgamma(i + 1) - math.lgamma(w - i + 1)) / math.log(2.0)


def cw_entropy_rate(w: int) -> float:
    """Entropy rate of the unbiased classical walk read out every ``w`` steps.

    Evaluates the closed binomial sum ``2^-w sum_i C(w,i) (w - log2 C(w,i))``.
    """
    if w < 1:
        raise ValueError("w must be >= 1")
    total = 0.0
    for i in range(w + 1):
        lb = _log2_binom(w, i)
        total += 2.0 ** (lb - w) * (w - lb)
    return total


def cw_entropy_rate_gaussian(w: int) -> float:
    """Large-``w`` Gaussian approximation ``(log2(pi e w) - 1) / 2``."""
    if w < 1:
        raise ValueError("w must be >= 1")
    return 0.5 * (-1.0 + math.log2(math.pi * math.e * w))


def cw_limit(M: int) -> float:
    """Entropy rate of the fully mixed classical walk on an ``M``-cycle.

    Even cycles only reach half the sites for a given parity of ``w``.
    """
    if M < 3:
        raise ValueError("cycle needs M >= 3")
    return math.log2(M) if M % 2 else math.log2(M) - 1.0


def cycle_shift(delta, M: int):
    """Representative of ``delta mod M`` in ``(-M/2, M/2]``."""
    r = np.mod(delta, M)
    return np.where(r > M // 2, r - M, r) if isinstance(r, np.ndarray) else (r - M if r > M // 2 else r)


def cw_shift_distribution(w: int, M: int | None = None) -> FiniteDistribution:
    """Exact shift distribution of the unbiased classical walk.

    On a line the shifts are ``2i - w`` with binomial weights; on an ``M``-cycle
    the same weights are folded onto residues.
    """
    if w < 1:
        raise ValueError("w must be >= 1")
    probs: dict[int, float] = {}
    for i in range(w + 1):
        delta = 2 * i - w
        if M is not None:
            delta = int(cycle_shift(delta, M))
        probs[delta] = probs.get(delta, 0.0) + 2.0 ** (_log2_binom(w, i) - w)
    total = sum(probs.values())
    return FiniteDistribution.from_mapping({k: v / total for k, v in probs.items()})


class MonteCarloEstimate(NamedTuple):
    value: float
    stderr: float
    counts: dict


def block_jackknife_entropy(samples: np.ndarray, n_blocks: int = 100) -> tuple[float, float, dict]:
    """Plug-in entropy of a symbol stream with a delete-one-block jackknife error.

    Contiguous blocks keep the error honest for serially correlated streams,
    such as a walk whose coin carries memory between readouts.
    """
    samples = np.asarray(samples)
    n = len(samples)
    if n == 0:
        raise ValueError("no samples")
    symbols, idx = np.unique(samples, return_inverse=True)
    k = len(symbols)
    totals = np.bincount(idx, minlength=k).astype(float)
    value = entropy_bits(totals / n)
    b = min(n_blocks, n)
    counts = {int(s): int(c) for s, c in zip(symbols, totals)}
    if b < 2:
        return value, float("nan"), counts
    block_id = (np.arange(n) * b) // n
    per_block = np.bincount(block_id * k + idx, minlength=b * k).reshape(b, k)
    left = totals[None, :] - per_block
    sizes = left.sum(axis=1, keepdims=True)
    p = left / sizes
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    h_minus = terms.sum(axis=1)
    stderr = math.sqrt((b - 1) / b * float(((h_minus - h_minus.mean()) ** 2).sum()))
    return value, stderr, counts


def cw_cycle_rate_mc(w: int, M: int, iterations: int, seed: int, n_blocks: int = 100) -> MonteCarloEstimate:
    """Monte Carlo entropy rate of the unbiased classical walk on an ``M``-cycle.

    Each iteration draws the ``w`` fair coin tosses of one readout block (as
    their binomial count of right moves) and records the shift modulo ``M``.
    """
    if w < 1 or M < 3 or iterations < 1:
        raise ValueError("need w >= 1, M >= 3 and iterations >= 1")
    rng = np.random.default_rng(seed)
    rights = rng.binomial(w, 0.5, size=iterations)
    shifts = cycle_shift(2 * rights - w, M)
    value, stderr, counts = block_jackknife_entropy(shifts, n_blocks)
    return MonteCarloEstimate(value, stderr, counts)
