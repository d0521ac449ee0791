"""Coin-state transition systems and the exact / interval entropy rates.

After every position readout the walk is localized and its only memory is
the collapsed coin state. The readout process is therefore a Markov chain on
coin states: :func:`explore` discovers that chain breadth-first,
:func:`stationary` finds its long-run occupation and :func:`entropy_rate`
averages the per-state shift entropies.

When the chain does not close (for instance the Hadamard walk with ``w = 3``)
the exploration stops expanding below depth ``budget``. Every unexpanded state, and the
sink ``?`` that stands for all undiscovered states, keeps the guaranteed mass
``b(w) = |e|^(2(w-1))`` of returning to ``L`` or ``R`` and sends the rest into
the sink. The rate then lies in an interval obtained by bounding the sink's
shift entropy with the extremes over the Bloch sphere.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.optimize
import scipy.sparse as sp

from .entropy import entropy_bits
from .errors import ConvergenceError, MissingBoundsError, StateExplosionError
from .walk_core import (
    CoinOperator,
    CoinState,
    Cycle,
    Lattice,
    Line,
    ShiftDistribution,
    propagator,
    shift_profile,
)

DEDUP_TOL = 1e-9
DEFAULT_MAX_NODES = 1_000_000
STATIONARY_TOL = 1e-12
STATIONARY_MAX_ITER = 1_000_000

FULL = "full"
REDUCED = "reduced"
CLOSED = "closed"
TRUNCATED = "truncated"

STATE = "state"
MERGED_LR = "merged-LR"
UNKNOWN = "unknown"


def lr_guarantee(coin: CoinOperator, w: int) -> float:
    """Lower bound ``b(w) = |e|^(2(w-1))`` on the one-readout return mass to ``{L, R}``.

    The extreme shifts ``-w`` and ``+w`` are reached only by paths that never
    turn, and they always leave the coin in ``L`` or ``R`` respectively.
    """
    return coin.lr_mass ** (w - 1)


class CoinRegistry:
    """Tolerance-based identification of coin states.

    States are keyed by their Bloch vector, which is phase invariant. A grid
    hash with cells much coarser than the tolerance gives O(1) lookups; cells
    adjacent to a query are probed only when the query sits near a cell face.
    With ``mirror=True`` a state and its spin-flip partner (the antipodal
    Bloch vector) share one entry, so ``L`` and ``R`` form a single class.
    """

    def __init__(self, tol: float = DEDUP_TOL, mirror: bool = False, cell: float = 1e-6):
        self.tol = tol
        self.mirror = mirror
        self.cell = cell
        self._grid: dict[tuple[int, int, int], list[int]] = {}
        self._points: list[tuple[float, float, float]] = []

    def __len__(self):
        return len(self._points)

    def _cells(self, b):
        per_axis = []
        margin = self.tol / self.cell
        for x in b:
            q = x / self.cell
            base = round(q)
            frac = q - base
            opts = [base]
            if frac > 0.5 - margin:
                opts.append(base + 1)
            elif frac < -0.5 + margin:
                opts.append(base - 1)
            per_axis.append(opts)
        return [(i, j, k) for i in per_axis[0] for j in per_axis[1] for k in per_axis[2]]

    def _find(self, b) -> int | None:
        for cell in self._cells(b):
            for idx in self._grid.get(cell, ()):
                p = self._points[idx]
                if math.dist(p, b) <= self.tol:
                    return idx
        return None

    def lookup(self, state: CoinState) -> int | None:
        b = state.bloch
        idx = self._find(b)
        if idx is None and self.mirror:
            idx = self._find(tuple(-x for x in b))
        return idx

    def add(self, state: CoinState) -> int:
        b = state.bloch
        idx = len(self._points)
        self._points.append(b)
        self._grid.setdefault(tuple(round(x / self.cell) for x in b), []).append(idx)
        return idx

    def index(self, state: CoinState) -> tuple[int, bool]:
        """Return ``(index, is_new)``, registering the state if unseen."""
        idx = self.lookup(state)
        if idx is not None:
            return idx, False
        return self.add(state), True


class TransitionCache:
    """Registry plus memoized one-readout transitions of each registered state."""

    def __init__(self, coin: CoinOperator, w: int, lattice: Lattice = Line(), mirror: bool = False):
        self.coin = coin
        self.w = w
        self.lattice = lattice
        self.registry = CoinRegistry(mirror=mirror)
        self.states: list[CoinState] = []
        self._dists: dict[int, tuple[ShiftDistribution, dict]] = {}
        self._targets: dict[int, np.ndarray] = {}

    def index(self, state: CoinState) -> tuple[int, bool]:
        idx, new = self.registry.index(state)
        if new:
            self.states.append(state)
        return idx, new

    def profile(self, idx: int) -> ShiftDistribution:
        """Shift distribution of state ``idx``; does not register its successors."""
        hit = self._dists.get(idx)
        if hit is None:
            hit = shift_profile(self.coin, self.w, self.states[idx], self.lattice)
            self._dists[idx] = hit
        return hit[0]

    def expand(self, idx: int) -> tuple[ShiftDistribution, np.ndarray]:
        """Shift distribution of state ``idx`` and the registry index of each collapsed state."""
        targets = self._targets.get(idx)
        dist = self.profile(idx)
        if targets is None:
            collapsed = self._dists[idx][1]
            targets = np.array([self.index(collapsed[d])[0] for d in dist.labels], dtype=np.int64)
            self._targets[idx] = targets
        return dist, targets

    def entropy(self, idx: int) -> float:
        return entropy_bits(self.profile(idx).probs)


@dataclass(frozen=True)
class CoinNode:
    kind: str
    state: CoinState | None = None
    shifts: ShiftDistribution | None = None
    entropy: float | None = None
    depth: int | None = None

    @property
    def label(self) -> str:
        if self.kind == UNKNOWN:
            return "?"
        if self.kind == MERGED_LR:
            return "LR"
        return _state_label(self.state)


def _state_label(s: CoinState) -> str:
    def fmt(z: complex) -> str:
        if abs(z.imag) < 1e-12:
            return f"{z.real:.6g}"
        return f"({z.real:.6g}{z.imag:+.6g}i)"

    return f"{fmt(s.l)}L{'+' if not fmt(s.r).startswith('-') else ''}{fmt(s.r)}R"


@dataclass
class CoinTransitionSystem:
    """Discovered coin states and the row-stochastic matrix between them."""

    nodes: list[CoinNode]
    matrix: sp.csr_matrix
    status: str
    mode: str
    coin: CoinOperator
    w: int
    initial: int = 0
    budget: int | None = None
    lattice: Lattice = field(default_factory=Line)

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def sink(self) -> int | None:
        for i, n in enumerate(self.nodes):
            if n.kind == UNKNOWN:
                return i
        return None

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def entropies(self) -> np.ndarray:
        return np.array([np.nan if n.entropy is None else n.entropy for n in self.nodes])

    def labels(self) -> list[str]:
        return [n.label for n in self.nodes]

    def to_json(self) -> dict:
        """Plain-JSON form: complex numbers as ``[re, im]``, matrix row-major."""
        def cpx(z):
            return [float(z.real), float(z.imag)]

        nodes = []
        for n in self.nodes:
            item = {"kind": n.kind, "label": n.label, "depth": n.depth}
            if n.state is not None:
                item["state"] = [cpx(n.state.l), cpx(n.state.r)]
            if n.shifts is not None:
                item["shifts"] = {"deltas": list(n.shifts.labels), "probs": n.shifts.probs.tolist()}
                item["entropy_bits"] = n.entropy
            nodes.append(item)
        return {
            "format": "coin-transition-system/1",
            "coin": {"e": cpx(self.coin.e), "f": cpx(self.coin.f)},
            "w": self.w,
            "lattice": self.lattice.describe(),
            "mode": self.mode,
            "status": self.status,
            "budget": self.budget,
            "initial": self.initial,
            "nodes": nodes,
            "matrix": self.dense().tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "CoinTransitionSystem":
        def cpx(pair):
            return complex(pair[0], pair[1])

        lattice = _parse_lattice(data.get("lattice", "line"))
        w = int(data["w"])
        nodes = []
        for item in data["nodes"]:
            state = None
            if "state" in item:
                state = CoinState(cpx(item["state"][0]), cpx(item["state"][1]))
            shifts = None
            if "shifts" in item:
                shifts = ShiftDistribution(
                    tuple(item["shifts"]["deltas"]), np.array(item["shifts"]["probs"]), w=w, lattice=lattice
                )
            nodes.append(CoinNode(item["kind"], state, shifts, item.get("entropy_bits"), item.get("depth")))
        return cls(
            nodes=nodes,
            matrix=sp.csr_matrix(np.array(data["matrix"], dtype=float)),
            status=data["status"],
            mode=data["mode"],
            coin=CoinOperator(cpx(data["coin"]["e"]), cpx(data["coin"]["f"])),
            w=w,
            initial=int(data["initial"]),
            budget=data.get("budget"),
            lattice=lattice,
        )


def _parse_lattice(text: str) -> Lattice:
    if text.startswith("cycle:"):
        return Cycle(int(text.split(":", 1)[1]))
    if text.startswith("line:"):
        return Line(int(text.split(":", 1)[1]))
    return Line()


def explore(
    coin: CoinOperator,
    w: int,
    c0: CoinState | None = None,
    mode: str = FULL,
    budget: int | None = None,
    lattice: Lattice = Line(),
    max_nodes: int = DEFAULT_MAX_NODES,
) -> CoinTransitionSystem:
    """Breadth-first discovery of the coin-state transition system.

    Parameters
    ----------
    coin : CoinOperator
        Mixing coin.
    w : int
        Waiting time (steps between readouts).
    c0 : CoinState, optional
        Initial coin, default ``L``.
    mode : {"full", "reduced"}
        ``"reduced"`` identifies every state with its spin-flip partner, which
        merges ``L`` and ``R`` into the node ``LR``.
    budget : int, optional
        Expansion depth: states at breadth-first depth ``<= budget`` are
        expanded (``0`` expands only ``c0``). ``None`` explores until no new
        state appears. Only reduced mode can be truncated.
    max_nodes : int
        Raise :class:`StateExplosionError` beyond this many states.

    Nodes are numbered in discovery order; within one node the targets are
    visited by increasing shift.
    """
    if mode not in (FULL, REDUCED):
        raise ValueError(f"unknown mode {mode!r}")
    if w < 1:
        raise ValueError("w must be >= 1")
    if budget is not None and budget < 0:
        raise ValueError("budget must be >= 0")
    c0 = CoinState.L() if c0 is None else c0

    cache = TransitionCache(coin, w, lattice, mirror=(mode == REDUCED))
    start, _ = cache.index(c0)
    depth = {start: 0}
    rows: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    unexpanded: list[int] = []
    queue = deque([start])
    while queue:
        i = queue.popleft()
        if budget is not None and depth[i] > budget:
            unexpanded.append(i)
            continue
        dist, targets = cache.expand(i)
        for t in targets:
            t = int(t)
            if t not in depth:
                depth[t] = depth[i] + 1
                queue.append(t)
        if len(cache.states) > max_nodes:
            raise StateExplosionError(
                f"more than {max_nodes} coin states discovered", nodes=len(cache.states), w=w
            )
        rows[i] = (dist.probs, targets)

    lr_index = None
    if mode == REDUCED:
        lr_index = cache.registry.lookup(CoinState.L())
    truncated = bool(unexpanded)
    if truncated and mode != REDUCED:
        raise ValueError("truncated exploration is only defined in reduced mode")
    if truncated and lr_index is None:
        lr_index, _ = cache.index(CoinState.L())
        depth[lr_index] = None
        unexpanded.append(lr_index)

    n = len(cache.states)
    size = n + (1 if truncated else 0)
    r_idx, c_idx, vals = [], [], []
    for i, (probs, targets) in rows.items():
        r_idx.extend([i] * len(probs))
        c_idx.extend(targets.tolist())
        vals.extend(probs.tolist())
    if truncated:
        b = lr_guarantee(coin, w)
        sink = n
        for i in unexpanded + [sink]:
            r_idx += [i, i]
            c_idx += [lr_index, sink]
            vals += [b, 1.0 - b]
    matrix = sp.csr_matrix((vals, (r_idx, c_idx)), shape=(size, size))
    matrix.sum_duplicates()

    nodes = []
    for i, state in enumerate(cache.states[:n]):
        kind = MERGED_LR if i == lr_index else STATE
        dist = cache.profile(i)
        nodes.append(CoinNode(kind, state, dist, entropy_bits(dist.probs), depth.get(i)))
    if truncated:
        nodes.append(CoinNode(UNKNOWN))
    return CoinTransitionSystem(
        nodes=nodes,
        matrix=matrix,
        status=TRUNCATED if truncated else CLOSED,
        mode=mode,
        coin=coin,
        w=w,
        initial=start,
        budget=budget,
        lattice=lattice,
    )


@dataclass(frozen=True)
class StationaryCoinDistribution:
    weights: np.ndarray
    iterations: int
    residual: float

    def __getitem__(self, i):
        return self.weights[i]


def stationary(
    system: CoinTransitionSystem, tol: float = STATIONARY_TOL, max_iter: int = STATIONARY_MAX_ITER
) -> StationaryCoinDistribution:
    """Long-run coin occupation started from the system's initial node.

    Returns the limit of the time averages ``(1/N) sum_{i<N} nu_i`` with
    ``nu_0`` the indicator of the initial node. That limit is reached by
    iterating the lazy chain ``(I + P) / 2``: it has the same jumps as ``P``
    (hence the same absorption probabilities and stationary vectors) but no
    periodicity, so ``nu (I + P)^n / 2^n`` converges geometrically to it even
    when ``P`` itself oscillates.
    """
    pt = system.matrix.T.tocsr()
    nu = np.zeros(system.size)
    nu[system.initial] = 1.0
    residual = math.inf
    for it in range(1, max_iter + 1):
        moved = pt @ nu
        residual = float(np.abs(moved - nu).sum())
        nu = 0.5 * (nu + moved)
        if residual < tol:
            break
    else:
        raise ConvergenceError("stationary distribution did not converge", residual=residual, iterations=max_iter)
    nu = np.clip(nu, 0.0, None)
    nu /= nu.sum()
    residual = float(np.abs(pt @ nu - nu).sum())
    return StationaryCoinDistribution(nu, it, residual)


@dataclass(frozen=True)
class EntropyRateResult:
    """Entropy rate in bits per iteration; exact results have zero width."""

    lower: float
    upper: float
    provenance: str
    budget: int | None = None
    mu_unknown: float = 0.0

    @property
    def value(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.upper - self.lower)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def exact(self) -> bool:
        return self.provenance == "exact"

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= x <= self.upper + tol


def entropy_rate(
    system: CoinTransitionSystem,
    mu: StationaryCoinDistribution | np.ndarray | None = None,
    bounds: tuple[float, float] | None = None,
) -> EntropyRateResult:
    """Average shift entropy under the stationary coin distribution.

    For truncated systems the sink's entropy is unknown; ``bounds`` gives the
    ``(H_min, H_max)`` range it is replaced by.
    """
    if mu is None:
        mu = stationary(system)
    weights = mu.weights if isinstance(mu, StationaryCoinDistribution) else np.asarray(mu)
    known = 0.0
    sink_mass = 0.0
    for node, m in zip(system.nodes, weights):
        if node.kind == UNKNOWN:
            sink_mass += float(m)
        else:
            known += float(m) * node.entropy
    if system.status == CLOSED:
        return EntropyRateResult(known, known, "exact")
    if bounds is None:
        raise MissingBoundsError("truncated system needs (H_min, H_max) for the sink")
    h_min, h_max = bounds
    return EntropyRateResult(
        known + sink_mass * h_min, known + sink_mass * h_max, "bounded", system.budget, sink_mass
    )


def _bloch_entropy_fn(coin: CoinOperator, w: int, lattice: Lattice):
    _, amps = propagator(coin, w, lattice)
    a_l, a_r = amps[:, 0, :], amps[:, 1, :]

    def grid(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        l = np.cos(theta / 2)[:, None, None]
        r = (np.exp(1j * phi) * np.sin(theta / 2))[:, None, None]
        p = (np.abs(l * a_l + r * a_r) ** 2).sum(axis=2)
        safe = np.where(p > 0, p, 1.0)
        return -(p * np.log2(safe)).sum(axis=1)

    def single(x) -> float:
        return float(grid(np.array([x[0]]), np.array([x[1]]))[0])

    return grid, single


def bloch_entropy_grid(coin: CoinOperator, w: int, n_theta: int, n_phi: int, lattice: Lattice = Line(), chunk: int = 65536):
    """Shift entropy on the grid ``theta = linspace(0, pi, n_theta)`` x ``phi = 2 pi j / n_phi``.

    Returns ``(theta, phi, H)`` as flat arrays.
    """
    grid, _ = _bloch_entropy_fn(coin, w, lattice)
    th, ph = np.meshgrid(np.linspace(0.0, math.pi, n_theta), np.arange(n_phi) * (2 * math.pi / n_phi), indexing="ij")
    th, ph = th.ravel(), ph.ravel()
    h = np.empty(th.shape)
    for s in range(0, len(th), chunk):
        h[s : s + chunk] = grid(th[s : s + chunk], ph[s : s + chunk])
    return th, ph, h


@lru_cache(maxsize=64)
def extremal_entropies(
    coin: CoinOperator, w: int, lattice: Lattice = Line(), grid: int = 256, tol: float = 1e-10
) -> tuple[float, float]:
    """``(H_min, H_max)`` of the one-readout shift entropy over all coin states.

    A ``grid x grid`` scan of the Bloch sphere seeds Nelder-Mead refinements
    of the best few candidates for each extreme.
    """
    if w < 1:
        raise ValueError("w must be >= 1")
    th, ph, h = bloch_entropy_grid(coin, w, grid, grid, lattice)
    _, single = _bloch_entropy_fn(coin, w, lattice)
    opts = {"xatol": 1e-10, "fatol": tol, "maxiter": 4000}

    def refine(sign: float) -> float:
        order = np.argsort(sign * h)[:4]
        best = sign * h[order[0]]
        for k in order:
            res = scipy.optimize.minimize(
                lambda x: sign * single(x), np.array([th[k], ph[k]]), method="Nelder-Mead", options=opts
            )
            best = min(best, float(res.fun))
        return sign * best

    h_min, h_max = refine(1.0), refine(-1.0)
    return float(min(h_min, h_max)), float(max(h_min, h_max))


class TruncationEstimate(NamedTuple):
    nodes: float
    mu_unknown: float


def truncation_diagnostics(coin: CoinOperator, w: int, k: int) -> TruncationEstimate:
    """Worst-case matrix size and sink mass after ``k`` expansion levels.

    ``k`` counts expanded levels, so it pairs with ``explore(budget=k - 1)``.
    Node count ``((w-1)^(k+1) - 1) / (w-2) + 1`` (``k + 2`` for ``w = 2``) and
    sink mass ``(1 - b(w))^(k+1)``.
    """
    if w < 2 or k < 0:
        raise ValueError("need w >= 2 and k >= 0")
    if w == 2:
        nodes = float(k + 2)
    else:
        nodes = ((w - 1) ** (k + 1) - 1) / (w - 2) + 1
    return TruncationEstimate(nodes, (1.0 - lr_guarantee(coin, w)) ** (k + 1))


def lr_transition_mass(coin: CoinOperator, w: int, alpha: CoinState, lattice: Lattice = Line()) -> float:
    """``P(alpha -> L) + P(alpha -> R)`` for one readout."""
    dist, collapsed = shift_profile(coin, w, alpha, lattice)
    total = 0.0
    for d, p in zip(dist.labels, dist.probs):
        if abs(abs(collapsed[d].bloch[0]) - 1.0) <= DEDUP_TOL:
            total += p
    return total


def solve(
    coin: CoinOperator,
    w: int,
    c0: CoinState | None = None,
    mode: str = FULL,
    budget: int | None = None,
    lattice: Lattice = Line(),
    max_nodes: int = DEFAULT_MAX_NODES,
) -> tuple[CoinTransitionSystem, StationaryCoinDistribution, EntropyRateResult]:
    """Explore, find the stationary distribution and evaluate the rate in one call."""
    system = explore(coin, w, c0, mode, budget, lattice, max_nodes)
    mu = stationary(system)
    bounds = extremal_entropies(coin, w, lattice) if system.status == TRUNCATED else None
    return system, mu, entropy_rate(system, mu, bounds)
