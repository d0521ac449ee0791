"""Coin-ignoring upper bound, w-scans and the independent-walk scenario.

An observer who ignores the coin sees only the shift sequence and estimates
its entropy as if the shifts were i.i.d. Because the readout process is a
function of the coin Markov chain, that estimate is an upper bound on the true
rate. It converges to the shift entropy of a walk started from the completely
mixed coin, which :func:`qw_bound_exact` evaluates directly;
:func:`qw_bound_mc` runs the measurement protocol itself.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from . import entropy as _entropy
from . import weak_limit
from .entropy import block_jackknife_entropy, cycle_shift, entropy_bits, shannon_entropy
from .errors import ComputationError
from .walk_core import (
    CoinOperator,
    CoinState,
    Cycle,
    Lattice,
    Line,
    WalkState,
    evolve,
    measure_position,
    propagator,
)

DEFAULT_BURN_IN = 1000
DEFAULT_BLOCKS = 100

ESTIMATORS = ("mc-bound", "exact-bound", "cw-exact", "cw-mc", "weak-limit")


@dataclass
class ProtocolRun:
    coin: CoinOperator
    w: int
    lattice: Lattice
    iterations: int
    seed: int
    counts: dict[int, int]
    estimate: float
    stderr: float
    burn_in: int = 0

    def distribution(self) -> dict[int, float]:
        return {d: c / self.iterations for d, c in sorted(self.counts.items())}


@dataclass
class ScanRow:
    w: int
    estimator: str
    rate_bits: float | None
    err_bits: float | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _protocol_shifts(coin, w, lattice, n, rng, c0: CoinState):
    """Shift stream of the measure-every-``w``-steps protocol.

    After a readout the walk is a single site times a coin vector, and
    translation invariance makes the next block ``l A_L + r A_R`` shifted to
    that site, so each iteration only touches the ``O(w)`` reachable shifts.
    Outcomes are selected exactly as :func:`measure_position` does: the first
    shift, in ascending order, whose cumulative probability exceeds a uniform.
    """
    deltas, amps = propagator(coin, w, lattice)
    a = [(int(d), complex(amps[k, 0, 0]), complex(amps[k, 0, 1]), complex(amps[k, 1, 0]), complex(amps[k, 1, 1]))
         for k, d in enumerate(deltas)]
    uniforms = rng.random(n)
    out = np.empty(n, dtype=np.int64)
    l, r = complex(c0.l), complex(c0.r)
    for i in range(n):
        u = uniforms[i]
        acc = 0.0
        last = None
        for d, ll, lr, rl, rr in a:
            x0 = l * ll + r * rl
            x1 = l * lr + r * rr
            p = x0.real * x0.real + x0.imag * x0.imag + x1.real * x1.real + x1.imag * x1.imag
            if p <= 0.0:
                continue
            last = (d, x0, x1, p)
            acc += p
            if acc > u:
                break
        d, x0, x1, p = last
        s = math.sqrt(p)
        l, r = x0 / s, x1 / s
        out[i] = d
    return out


def run_protocol_statevector(coin, w, lattice, n, rng, c0: CoinState | None = None) -> np.ndarray:
    """Reference implementation of the protocol on explicit walk states.

    Evolves the full state ``w`` steps, measures the position, records the
    shift and continues from the collapsed state. Much slower than
    :func:`qw_bound_mc`; kept to validate it.
    """
    c0 = CoinState.L() if c0 is None else c0
    if isinstance(lattice, Line):
        lattice = Line(w + 1) if lattice.radius is None else lattice
    state = WalkState.localized(lattice, c0)
    x = 0
    shifts = np.empty(n, dtype=np.int64)
    for i in range(n):
        state = evolve(state, coin, w)
        y, state = measure_position(state, rng)
        shifts[i] = y - x if isinstance(lattice, Line) else int(cycle_shift(y - x, lattice.M))
        if isinstance(lattice, Line):
            # recentre so the window never runs out
            state = WalkState.localized(lattice, state.amplitudes[lattice.index(y)])
            x = 0
        else:
            x = y
    return shifts


def qw_bound_mc(
    coin: CoinOperator,
    w: int,
    lattice: Lattice = Line(),
    iterations: int = 1_000_000,
    seed: int = 0,
    c0: CoinState | None = None,
    burn_in: int = DEFAULT_BURN_IN,
    n_blocks: int = DEFAULT_BLOCKS,
) -> ProtocolRun:
    """Monte Carlo estimate of the coin-ignoring upper bound.

    The first ``burn_in`` readouts are discarded; the error is a
    delete-one-block jackknife over ``n_blocks`` contiguous blocks.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if w < 1:
        raise ValueError("w must be >= 1")
    rng = np.random.default_rng(seed)
    c0 = CoinState.L() if c0 is None else c0
    shifts = _protocol_shifts(coin, w, lattice, burn_in + iterations, rng, c0)[burn_in:]
    value, stderr, counts = block_jackknife_entropy(shifts, n_blocks)
    return ProtocolRun(coin, w, lattice, iterations, seed, counts, value, stderr, burn_in)


def mixed_coin_distribution(coin: CoinOperator, w: int, lattice: Lattice = Line()) -> dict[int, float]:
    """Shift distribution after ``w`` steps from ``|0>`` with a completely mixed coin."""
    deltas, amps = propagator(coin, w, lattice)
    p = 0.5 * (np.abs(amps) ** 2).sum(axis=(1, 2))
    return {int(d): float(q) for d, q in zip(deltas, p)}


def qw_bound_exact(coin: CoinOperator, w: int, lattice: Lattice = Line()) -> float:
    """Coin-ignoring upper bound: entropy of the mixed-coin shift distribution."""
    if w < 1:
        raise ValueError("w must be >= 1")
    return shannon_entropy(mixed_coin_distribution(coin, w, lattice))


def _row(w, estimator, coin, lattice, iterations, seed, burn_in) -> ScanRow:
    try:
        if estimator == "exact-bound":
            return ScanRow(w, estimator, qw_bound_exact(coin, w, lattice))
        if estimator == "mc-bound":
            run = qw_bound_mc(coin, w, lattice, iterations, seed, burn_in=burn_in)
            return ScanRow(w, estimator, run.estimate, run.stderr)
        if estimator == "cw-exact":
            if isinstance(lattice, Cycle):
                return ScanRow(w, estimator, shannon_entropy(_entropy.cw_shift_distribution(w, lattice.M)))
            return ScanRow(w, estimator, _entropy.cw_entropy_rate(w))
        if estimator == "cw-mc":
            M = lattice.M if isinstance(lattice, Cycle) else 2 * w + 3
            est = _entropy.cw_cycle_rate_mc(w, M, iterations, seed)
            return ScanRow(w, estimator, est.value, est.stderr)
        if estimator == "weak-limit":
            return ScanRow(w, estimator, weak_limit.closed_form(w))
        raise ValueError(f"unknown estimator {estimator!r}")
    except (ComputationError, ValueError) as exc:
        return ScanRow(w, estimator, None, None, f"{type(exc).__name__}: {exc}")


def _row_task(args):
    return _row(*args)


def scan_w(
    coin: CoinOperator,
    lattice: Lattice,
    ws: Iterable[int],
    estimators: Sequence[str] = ("exact-bound",),
    seed: int = 0,
    iterations: int = 100_000,
    burn_in: int = DEFAULT_BURN_IN,
    jobs: int = 1,
) -> list[ScanRow]:
    """Evaluate each estimator at each waiting time, in ascending ``w``.

    Row ``i`` of the output uses the random seed ``seed ^ i``, so rows are
    reproducible regardless of ``jobs``. A failing row carries an ``error``
    message instead of aborting the scan.
    """
    ws = sorted(set(int(w) for w in ws))
    if not ws:
        raise ValueError("empty w range")
    tasks = []
    for w in ws:
        for est in estimators:
            tasks.append((w, est, coin, lattice, iterations, seed ^ len(tasks), burn_in))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_row_task, tasks))
    return [_row(*t) for t in tasks]


def fit_log_exponent(ws: Sequence[int], rates: Sequence[float]) -> tuple[float, float]:
    """Least-squares ``rate = s log2(w) + c``; returns ``(s, c)``."""
    x = np.log2(np.asarray(ws, dtype=float))
    s, c = np.polyfit(x, np.asarray(rates, dtype=float), 1)
    return float(s), float(c)


def independent_entropy(
    coin: CoinOperator, w: int, k: int, lattice: Lattice = Line(), c0: CoinState | None = None
) -> float:
    """Entropy of the ``k``-th readout when every readout uses a fresh walk.

    The ``k``-th walk evolves ``w k`` steps undisturbed from ``|0, c0>``.
    """
    if w < 1 or k < 1:
        raise ValueError("need w >= 1 and k >= 1")
    c0 = CoinState.L() if c0 is None else c0
    state = evolve(WalkState.localized(lattice.sized(w * k), c0), coin, w * k)
    return entropy_bits(state.position_probabilities())


def independent_entropy_series(
    coin: CoinOperator, w: int, k_max: int, lattice: Lattice = Line(), c0: CoinState | None = None
) -> list[float]:
    """``independent_entropy`` for ``k = 1 .. k_max`` from a single evolution."""
    c0 = CoinState.L() if c0 is None else c0
    state = WalkState.localized(lattice.sized(w * k_max), c0)
    out = []
    for _ in range(k_max):
        state = evolve(state, coin, w)
        out.append(entropy_bits(state.position_probabilities()))
    return out


CSV_COLUMNS = ("w", "estimator", "rate_bits", "err_bits")


def rows_to_csv(rows: Sequence[ScanRow], fmt=lambda v: f"{v:.9f}") -> str:
    buf = io.StringIO()
    cols = list(CSV_COLUMNS) + (["error"] if any(r.error for r in rows) else [])
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for r in rows:
        d = r.to_dict()
        writer.writerow(["" if d[c] is None else (fmt(d[c]) if isinstance(d[c], float) else d[c]) for c in cols])
    return buf.getvalue()


def rows_to_json(rows: Sequence[ScanRow]) -> str:
    return json.dumps([r.to_dict() for r in rows], indent=2)
