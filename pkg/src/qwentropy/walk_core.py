"""State-vector engine for 1D coined quantum walks.

Conventions used throughout the package:

* coin basis order is ``(L, R)``; a coin amplitude is a column ``(l, r)``;
* one step applies the coin at every site, then moves ``L`` one site to the
  left and ``R`` one site to the right;
* the coin matrix is ``[[e, -f], [conj(f), conj(e)]]``, so ``e = f = 1/sqrt(2)``
  is the Hadamard coin ``[[1, -1], [1, 1]] / sqrt(2)``.

With these conventions ``U^2 |0, L>`` equals
``(|-2,L> - |0,L> + |0,R> + |2,R>) / 2``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from .entropy import FiniteDistribution, cycle_shift
from .errors import BoundaryOverflowError, DegenerateStateError, NonMixingCoinError

#: Probabilities below this are treated as exact zeros (parity, round-off).
PROB_THRESHOLD = 1e-12
_UNITARY_TOL = 1e-12
_NORM_TOL = 1e-9
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class CoinOperator:
    """A 2x2 SU(2) coin ``[[e, -f], [conj(f), conj(e)]]``."""

    e: complex
    f: complex

    def __post_init__(self):
        e, f = complex(self.e), complex(self.f)
        if abs(abs(e) ** 2 + abs(f) ** 2 - 1.0) > _UNITARY_TOL:
            raise ValueError(f"|e|^2 + |f|^2 = {abs(e) ** 2 + abs(f) ** 2!r}, expected 1")
        if abs(e) < _UNITARY_TOL or abs(f) < _UNITARY_TOL:
            raise NonMixingCoinError("coins with e == 0 or f == 0 do not mix")
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "f", f)

    @classmethod
    def hadamard(cls) -> "CoinOperator":
        s = 1.0 / math.sqrt(2.0)
        return cls(s, s)

    @classmethod
    def from_angle(cls, theta: float, phi_e: float = 0.0, phi_f: float = 0.0) -> "CoinOperator":
        """``e = cos(theta) exp(i phi_e)``, ``f = sin(theta) exp(i phi_f)``."""
        return cls(math.cos(theta) * cmath.exp(1j * phi_e), math.sin(theta) * cmath.exp(1j * phi_f))

    @property
    def matrix(self) -> np.ndarray:
        e, f = self.e, self.f
        return np.array([[e, -f], [f.conjugate(), e.conjugate()]], dtype=complex)

    @property
    def lr_mass(self) -> float:
        """``|e|^2``, the per-step weight of continuing in the same direction."""
        return abs(self.e) ** 2

    def is_hadamard(self) -> bool:
        s = 1.0 / math.sqrt(2.0)
        return abs(self.e - s) < 1e-12 and abs(self.f - s) < 1e-12


@dataclass(frozen=True)
class Line:
    """Window ``[-radius, radius]`` of the infinite line.

    ``radius=None`` lets each operation size the window from its step count.
    """

    radius: int | None = None

    def __post_init__(self):
        if self.radius is not None and self.radius < 0:
            raise ValueError("radius must be nonnegative")

    def sized(self, steps: int) -> "Line":
        return self if self.radius is not None else Line(steps + 1)

    @property
    def size(self) -> int:
        if self.radius is None:
            raise ValueError("unsized line window")
        return 2 * self.radius + 1

    def index(self, x: int) -> int:
        if abs(x) > self.radius:
            raise BoundaryOverflowError(f"position {x} outside line window", radius=self.radius)
        return x + self.radius

    def positions(self) -> np.ndarray:
        return np.arange(-self.radius, self.radius + 1)

    def describe(self) -> str:
        return "line" if self.radius is None else f"line:{self.radius}"


@dataclass(frozen=True)
class Cycle:
    """Cycle graph with ``M`` vertices; positions are residues mod ``M``."""

    M: int

    def __post_init__(self):
        if self.M < 3:
            raise ValueError("cycle needs M >= 3")

    def sized(self, steps: int) -> "Cycle":
        return self

    @property
    def size(self) -> int:
        return self.M

    def index(self, x: int) -> int:
        return x % self.M

    def positions(self) -> np.ndarray:
        return np.arange(self.M)

    def describe(self) -> str:
        return f"cycle:{self.M}"


Lattice = Union[Line, Cycle]


@dataclass(frozen=True)
class CoinState:
    """Normalized coin vector ``l|L> + r|R>`` in canonical phase.

    The larger-modulus component is real and nonnegative (ties go to ``l``),
    so two states are the same ray exactly when their components agree.
    """

    l: complex
    r: complex

    @classmethod
    def from_vector(cls, l: complex, r: complex) -> "CoinState":
        l, r = complex(l), complex(r)
        norm = math.sqrt(abs(l) ** 2 + abs(r) ** 2)
        if norm < _NORM_TOL:
            raise DegenerateStateError("zero coin vector")
        l, r = l / norm, r / norm
        pivot_is_l = abs(l) >= abs(r) - _TIE_TOL
        pivot = l if pivot_is_l else r
        phase = pivot / abs(pivot)
        l, r = l / phase, r / phase
        # the pivot component is now real up to round-off
        if pivot_is_l:
            l = complex(abs(l), 0.0)
        else:
            r = complex(abs(r), 0.0)
        return cls(l, r)

    @classmethod
    def L(cls) -> "CoinState":
        return cls(1.0 + 0j, 0j)

    @classmethod
    def R(cls) -> "CoinState":
        return cls(0j, 1.0 + 0j)

    @classmethod
    def from_bloch_angles(cls, theta: float, phi: float) -> "CoinState":
        return cls.from_vector(math.cos(theta / 2), cmath.exp(1j * phi) * math.sin(theta / 2))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.l, self.r], dtype=complex)

    @property
    def bloch(self) -> tuple[float, float, float]:
        """Phase-invariant Bloch vector, used as the identity key of a ray."""
        c = self.l.conjugate() * self.r
        return (abs(self.l) ** 2 - abs(self.r) ** 2, 2.0 * c.real, 2.0 * c.imag)

    def mirror(self) -> "CoinState":
        """Spin-flip partner ``conj(r)|L> - conj(l)|R>``; it yields mirrored shifts."""
        return CoinState.from_vector(self.r.conjugate(), -self.l.conjugate())

    def distance(self, other: "CoinState") -> float:
        a, b = self.bloch, other.bloch
        return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))

    def is_close(self, other: "CoinState", tol: float = 1e-9) -> bool:
        return self.distance(other) <= tol

    def __repr__(self):
        return f"CoinState(l={self.l:.6g}, r={self.r:.6g})"


@dataclass(frozen=True)
class ShiftDistribution(FiniteDistribution):
    """Distribution of the shift between consecutive readouts."""

    w: int = 0
    lattice: Lattice = field(default_factory=Line)


@dataclass
class WalkState:
    """Complex amplitudes over ``(position, coin)`` on a finite window."""

    lattice: Lattice
    amplitudes: np.ndarray

    @classmethod
    def localized(cls, lattice: Lattice, coin: CoinState | tuple = (1.0, 0.0), position: int = 0) -> "WalkState":
        amps = np.zeros((lattice.size, 2), dtype=complex)
        vec = coin.vector if isinstance(coin, CoinState) else np.asarray(coin, dtype=complex)
        amps[lattice.index(position)] = vec / np.linalg.norm(vec)
        return cls(lattice, amps)

    @property
    def norm(self) -> float:
        return float(np.sqrt((np.abs(self.amplitudes) ** 2).sum()))

    def position_probabilities(self) -> np.ndarray:
        return (np.abs(self.amplitudes) ** 2).sum(axis=1)

    def amplitude(self, x: int, c: str) -> complex:
        return complex(self.amplitudes[self.lattice.index(x), "LR".index(c)])

    def copy(self) -> "WalkState":
        return WalkState(self.lattice, self.amplitudes.copy())


def build_step_operator(coin: CoinOperator, lattice: Lattice) -> Callable[[WalkState], WalkState]:
    """Return a function applying one step ``U = S (I x C)`` to a state."""
    ct = coin.matrix.T
    if isinstance(lattice, Cycle):

        def step(state: WalkState) -> WalkState:
            a = state.amplitudes @ ct
            out = np.empty_like(a)
            out[:, 0] = np.roll(a[:, 0], -1)
            out[:, 1] = np.roll(a[:, 1], 1)
            return WalkState(state.lattice, out)

    else:

        def step(state: WalkState) -> WalkState:
            a = state.amplitudes @ ct
            if abs(a[0, 0]) > 0.0 or abs(a[-1, 1]) > 0.0:
                raise BoundaryOverflowError("amplitude would leave the line window", radius=state.lattice.radius)
            out = np.zeros_like(a)
            out[:-1, 0] = a[1:, 0]
            out[1:, 1] = a[:-1, 1]
            return WalkState(state.lattice, out)

    return step


def build_inverse_step_operator(coin: CoinOperator, lattice: Lattice) -> Callable[[WalkState], WalkState]:
    """Inverse of :func:`build_step_operator`: unshift, then apply ``C^dagger``."""
    cinv_t = coin.matrix.conj()

    def step(state: WalkState) -> WalkState:
        a = state.amplitudes
        out = np.zeros_like(a)
        if isinstance(lattice, Cycle):
            out[:, 0] = np.roll(a[:, 0], 1)
            out[:, 1] = np.roll(a[:, 1], -1)
        else:
            if abs(a[-1, 0]) > 0.0 or abs(a[0, 1]) > 0.0:
                raise BoundaryOverflowError("amplitude would leave the line window", radius=lattice.radius)
            out[1:, 0] = a[:-1, 0]
            out[:-1, 1] = a[1:, 1]
        return WalkState(state.lattice, out @ cinv_t)

    return step


def evolve(state: WalkState, coin: CoinOperator, steps: int) -> WalkState:
    """Apply ``U^steps``; raises :class:`BoundaryOverflowError` at a line edge."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    step = build_step_operator(coin, state.lattice)
    for _ in range(steps):
        state = step(state)
    return state


@lru_cache(maxsize=256)
def propagator(coin: CoinOperator, w: int, lattice: Lattice) -> tuple[np.ndarray, np.ndarray]:
    """Amplitudes of ``U^w |0, L>`` and ``U^w |0, R>`` grouped by shift.

    Returns ``(deltas, amps)`` where ``amps[k, c0, c]`` is the amplitude on
    shift ``deltas[k]`` with final coin ``c`` for initial coin ``c0``. Only
    shifts reachable from some initial coin are kept, in ascending order. By
    linearity ``U^w |0, a>`` is ``a_L amps[:, 0] + a_R amps[:, 1]``.
    """
    if w < 1:
        raise ValueError("w must be >= 1")
    lat = lattice.sized(w)
    blocks = []
    for c0 in (0, 1):
        vec = (1.0, 0.0) if c0 == 0 else (0.0, 1.0)
        blocks.append(evolve(WalkState.localized(lat, vec), coin, w).amplitudes)
    amps = np.stack(blocks, axis=1)
    if isinstance(lat, Cycle):
        deltas = cycle_shift(lat.positions(), lat.M)
    else:
        deltas = lat.positions()
    order = np.argsort(deltas, kind="stable")
    deltas, amps = deltas[order], amps[order]
    keep = (np.abs(amps) ** 2).sum(axis=(1, 2)) > PROB_THRESHOLD
    deltas, amps = deltas[keep], amps[keep]
    deltas.setflags(write=False)
    amps.setflags(write=False)
    return deltas, amps


def shift_amplitudes(coin: CoinOperator, w: int, alpha: CoinState, lattice: Lattice = Line()) -> tuple[np.ndarray, np.ndarray]:
    """Per-shift final-coin amplitudes of ``U^w |0, alpha>``: ``(deltas, amp[k, c])``."""
    deltas, amps = propagator(coin, w, lattice)
    return deltas, alpha.l * amps[:, 0, :] + alpha.r * amps[:, 1, :]


def shift_profile(
    coin: CoinOperator, w: int, alpha: CoinState, lattice: Lattice = Line(), start: int = 0
) -> tuple[ShiftDistribution, dict[int, CoinState]]:
    """Shift distribution and collapsed coin states after ``w`` steps from ``|start, alpha>``.

    Shifts whose probability is below ``1e-12`` are dropped. On a cycle shifts
    are reported as residues in ``(-M/2, M/2]``.
    """
    if w < 1:
        raise ValueError("w must be >= 1")
    if start == 0:
        deltas, amp = shift_amplitudes(coin, w, alpha, lattice)
        probs = (np.abs(amp) ** 2).sum(axis=1)
    else:
        # explicit evolution from another vertex; used to check translation invariance
        lat = lattice.sized(w + abs(start))
        state = evolve(WalkState.localized(lat, alpha, start), coin, w)
        pos = lat.positions()
        rel = pos - start
        if isinstance(lat, Cycle):
            rel = cycle_shift(rel, lat.M)
        order = np.argsort(rel, kind="stable")
        deltas, amp = rel[order], state.amplitudes[order]
        probs = (np.abs(amp) ** 2).sum(axis=1)
    keep = probs > PROB_THRESHOLD
    deltas, amp, probs = deltas[keep], amp[keep], probs[keep]
    collapsed = {
        int(d): CoinState.from_vector(a[0] / math.sqrt(p), a[1] / math.sqrt(p))
        for d, a, p in zip(deltas, amp, probs)
    }
    dist = ShiftDistribution(tuple(int(d) for d in deltas), probs / probs.sum(), w=w, lattice=lattice)
    return dist, collapsed


def measure_position(state: WalkState, rng: np.random.Generator) -> tuple[int, WalkState]:
    """Projective position measurement with Born-rule sampling.

    One uniform draw selects the first position (in window order) whose
    cumulative probability exceeds it. Returns the outcome and the collapsed,
    renormalized state.
    """
    probs = state.position_probabilities()
    total = probs.sum()
    if total < _NORM_TOL:
        raise DegenerateStateError("state has vanishing norm", total=float(total))
    cum = np.cumsum(probs / total)
    k = int(np.searchsorted(cum, rng.random(), side="right"))
    k = min(k, len(cum) - 1)
    while probs[k] <= 0.0:
        k -= 1
    out = np.zeros_like(state.amplitudes)
    out[k] = state.amplitudes[k] / math.sqrt(probs[k])
    return int(state.lattice.positions()[k]), WalkState(state.lattice, out)
