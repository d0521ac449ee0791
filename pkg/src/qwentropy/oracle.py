"""Brute-force joint distributions of readout sequences.

Two independent routes to ``P(d_1, ..., d_N)``:

* :func:`joint_distribution` multiplies one-readout transition probabilities
  along each branch, reusing the canonical coin-state cache so that a branch
  step is a table lookup once the reachable states are known.
* :func:`joint_distribution_trace` evolves the full walk state, applies the
  position projector of each readout without renormalizing and takes the
  squared norm at the leaf.

They are used as ground truth for the Markov-chain rate and its bounds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .coin_graph import TransitionCache
from .entropy import entropy_bits
from .errors import CapExceededError
from .walk_core import CoinOperator, CoinState, Lattice, Line, WalkState, evolve

DEFAULT_CAP = 10_000_000
PRUNE_TOL = 1e-14
TRACE_MAX_DEPTH = 3


@dataclass
class OutcomeTree:
    """Leaves of the readout tree at depth ``N``: shift sequences and probabilities."""

    coin: CoinOperator
    w: int
    c0: CoinState
    depth: int
    sequences: np.ndarray
    probs: np.ndarray
    pruned_mass: float = 0.0

    def __len__(self):
        return len(self.probs)

    def total(self) -> float:
        return float(self.probs.sum())

    def entropy(self) -> float:
        return entropy_bits(self.probs)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(d) for d in s): float(p) for s, p in zip(self.sequences, self.probs)}

    def __getitem__(self, seq) -> float:
        return self.as_dict().get(tuple(seq), 0.0)

    def to_json(self) -> dict:
        order = np.lexsort(self.sequences.T[::-1]) if len(self) else np.arange(0)
        return {
            "w": self.w,
            "depth": self.depth,
            "c0": [[self.c0.l.real, self.c0.l.imag], [self.c0.r.real, self.c0.r.imag]],
            "pruned_mass": self.pruned_mass,
            "leaves": [
                {"shifts": [int(d) for d in self.sequences[i]], "p": float(self.probs[i])} for i in order
            ],
        }


def _check_cap(w: int, N: int, cap: int):
    size = (w + 1) ** N
    if size > cap:
        raise CapExceededError(f"(w+1)^N = {size} leaves exceeds the cap {cap}", attempted=size, cap=cap)


@dataclass
class _Layer:
    probs: np.ndarray
    ids: np.ndarray
    seqs: np.ndarray | None
    pruned: float = 0.0


def _layers(coin, w, c0, N, lattice, keep_sequences, prune, cache=None):
    """Yield the tree layer by layer, depth 1 .. N."""
    cache = TransitionCache(coin, w, lattice) if cache is None else cache
    root, _ = cache.index(c0)
    layer = _Layer(np.ones(1), np.array([root]), np.zeros((1, 0), dtype=np.int64) if keep_sequences else None)
    for _ in range(N):
        parts_p, parts_id, parts_s = [], [], []
        pruned = layer.pruned
        for node in np.unique(layer.ids):
            rows = np.nonzero(layer.ids == node)[0]
            dist, targets = cache.expand(int(node))
            shifts = np.asarray(dist.labels, dtype=np.int64)
            p = layer.probs[rows, None] * dist.probs[None, :]
            keep = p > prune
            pruned += float(p[~keep].sum())
            r, k = np.nonzero(keep)
            parts_p.append(p[r, k])
            parts_id.append(targets[k])
            if keep_sequences:
                parts_s.append(np.column_stack([layer.seqs[rows[r]], shifts[k]]))
        layer = _Layer(
            np.concatenate(parts_p),
            np.concatenate(parts_id),
            np.concatenate(parts_s) if keep_sequences else None,
            pruned,
        )
        yield layer


def joint_distribution(
    coin: CoinOperator,
    w: int,
    c0: CoinState,
    N: int,
    lattice: Lattice = Line(),
    cap: int = DEFAULT_CAP,
    prune: float = PRUNE_TOL,
) -> OutcomeTree:
    """Joint distribution of the first ``N`` shifts as a product of transitions.

    Branches below ``prune`` are dropped and their mass reported as
    ``pruned_mass``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    _check_cap(w, N, cap)
    for layer in _layers(coin, w, c0, N, lattice, True, prune):
        pass
    order = np.lexsort(layer.seqs.T[::-1])
    return OutcomeTree(coin, w, c0, N, layer.seqs[order], layer.probs[order], layer.pruned)


def tree_entropies(
    coin: CoinOperator, w: int, c0: CoinState, n: int, lattice: Lattice = Line(), cap: int = DEFAULT_CAP
) -> list[float]:
    """``H(X_1, ..., X_k)`` for ``k = 1 .. n``, without storing sequences.

    Leaves sharing a prefix are distinct outcomes, so only probabilities and
    collapsed-coin ids are carried between layers.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_cap(w, n, cap)
    return [entropy_bits(layer.probs) for layer in _layers(coin, w, c0, n, lattice, False, PRUNE_TOL)]


def partial_rate(
    coin: CoinOperator, w: int, c0: CoinState, n: int, lattice: Lattice = Line(), cap: int = DEFAULT_CAP
) -> float:
    """``H(X_1, ..., X_n) / n`` in bits per readout."""
    return tree_entropies(coin, w, c0, n, lattice, cap)[-1] / n


def conditional_entropies(
    coin: CoinOperator, w: int, c0: CoinState, n: int, lattice: Lattice = Line(), cap: int = DEFAULT_CAP
) -> list[float]:
    """Chain-rule increments ``H(X_1..X_k) - H(X_1..X_{k-1})`` for ``k = 1 .. n``."""
    h = tree_entropies(coin, w, c0, n, lattice, cap)
    return [h[0]] + [b - a for a, b in zip(h, h[1:])]


def joint_distribution_trace(
    coin: CoinOperator,
    w: int,
    c0: CoinState,
    N: int,
    cap: int = DEFAULT_CAP,
    prune: float = PRUNE_TOL,
) -> OutcomeTree:
    """Joint shift distribution from projectors on the full walk state.

    ``P(d_1..d_N) = || P_{x_N} U^w ... P_{x_1} U^w |0, c0> ||^2`` with
    ``x_k = d_1 + ... + d_k``. Limited to ``N <= 3``.
    """
    if not 1 <= N <= TRACE_MAX_DEPTH:
        raise ValueError(f"trace form supports 1 <= N <= {TRACE_MAX_DEPTH}")
    _check_cap(w, N, cap)
    lattice = Line(w * N + 1)
    pos = lattice.positions()
    seqs: list[tuple[int, ...]] = []
    probs: list[float] = []
    pruned = 0.0

    def descend(state: WalkState, x: int, prefix: tuple[int, ...]):
        nonlocal pruned
        state = evolve(state, coin, w)
        p = state.position_probabilities()
        for i in np.nonzero(p > 0.0)[0]:
            if p[i] <= prune:
                pruned += float(p[i])
                continue
            projected = WalkState(lattice, np.zeros_like(state.amplitudes))
            projected.amplitudes[i] = state.amplitudes[i]
            seq = prefix + (int(pos[i]) - x,)
            if len(seq) == N:
                seqs.append(seq)
                probs.append(projected.norm ** 2)
            else:
                descend(projected, int(pos[i]), seq)

    descend(WalkState.localized(lattice, c0), 0, ())
    seq_arr = np.array(seqs, dtype=np.int64).reshape(len(seqs), N)
    prob_arr = np.array(probs)
    order = np.lexsort(seq_arr.T[::-1])
    return OutcomeTree(coin, w, c0, N, seq_arr[order], prob_arr[order], pruned)


def trees_agree(a: OutcomeTree, b: OutcomeTree, tol: float = 1e-10) -> bool:
    """Leaf-wise agreement of two trees; a leaf missing from one side counts as zero."""
    da, db = a.as_dict(), b.as_dict()
    return all(abs(da.get(k, 0.0) - db.get(k, 0.0)) <= tol for k in set(da) | set(db))


def dump_tree(tree: OutcomeTree) -> str:
    return json.dumps(tree.to_json(), indent=2)
