"""Exit criteria, one test per criterion.

Each test gathers every sub-check before failing so a red line names all the
parts that missed, and each one also enforces its runtime budget.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from qwentropy import cli
from qwentropy.coin_graph import FULL, REDUCED, entropy_rate, explore, extremal_entropies, solve, stationary
from qwentropy.entropy import cw_cycle_rate_mc, cw_entropy_rate, cw_limit
from qwentropy.oracle import joint_distribution, joint_distribution_trace, partial_rate, trees_agree
from qwentropy.protocols import fit_log_exponent, qw_bound_exact, qw_bound_mc
from qwentropy.walk_core import CoinOperator, CoinState, Cycle, Line
from qwentropy.weak_limit import entropy_integral

import oracles
import test_properties

pytestmark = pytest.mark.acceptance

H = CoinOperator.hadamard()
S2 = oracles.S2


class Checks:
    def __init__(self):
        self.misses: list[str] = []

    def near(self, label, got, want, tol):
        if not abs(got - want) <= tol:
            self.misses.append(f"{label}: got {got:.9g}, want {want:.9g} +/- {tol:g}")

    def true(self, label, ok):
        if not ok:
            self.misses.append(label)

    def verdict(self):
        if self.misses:
            pytest.fail("; ".join(self.misses), pytrace=False)


@contextmanager
def budget(checks, seconds):
    t0 = time.perf_counter()
    yield
    elapsed = time.perf_counter() - t0
    checks.true(f"runtime {elapsed:.1f} s over {seconds} s", elapsed < seconds)


@pytest.mark.criterion(1, "exact rate 4/3 at w=2")
def test_criterion_1():
    c = Checks()
    with budget(c, 1):
        for mode in (FULL, REDUCED):
            for name, c0 in (("L", CoinState.L()), ("R", CoinState.R()), ("L+R", CoinState.from_vector(S2, S2))):
                _, _, r = solve(H, 2, c0, mode)
                c.true(f"{mode}/{name} not exact", r.exact)
                c.near(f"{mode}/{name}", r.value, 4 / 3, 1e-9)
    c.verdict()


@pytest.mark.criterion(2, "w=2 full matrix, stationary law and node entropies")
def test_criterion_2():
    c = Checks()
    with budget(c, 1):
        s = explore(H, 2)
        want = 0.25 * np.array([[1, 2, 1, 0], [4, 0, 0, 0], [1, 0, 1, 2], [0, 0, 4, 0]])
        got = s.dense()
        for i in range(4):
            if not np.allclose(got[i], want[i], atol=1e-9):
                c.misses.append(f"matrix row {i}: got {np.round(4 * got[i], 9).tolist()}/4, want {(4 * want[i]).tolist()}/4")
        mu = stationary(s).weights
        for i, v in enumerate(np.array([2, 1, 2, 1]) / 6):
            c.near(f"mu[{i}]", mu[i], v, 1e-9)
        for i, v in enumerate([1.5, 1.0, 1.5, 1.0]):
            c.near(f"H[{i}]", s.entropies()[i], v, 1e-9)
    c.verdict()


@pytest.mark.criterion(3, "truncated intervals")
def test_criterion_3():
    c = Checks()
    with budget(c, 10):
        _, _, r = solve(H, 2, mode=REDUCED, budget=0)
        c.near("w=2 one expansion midpoint", r.value, 1.3125, 1e-12)
        c.near("w=2 one expansion half-width", r.half_width, 0.0625, 1e-12)
        _, _, r = solve(H, 3, mode=REDUCED, budget=1)
        c.near("w=3 frontier midpoint", r.value, 1.54, 0.005)
        c.near("w=3 frontier half-width", r.half_width, 0.08, 0.005)
        _, _, r = solve(H, 3, mode=REDUCED, budget=11)
        c.near("w=3 deep midpoint", r.value, 1.499, 0.004)
        c.true(f"w=3 deep half-width {r.half_width:.6f} > 0.005", r.half_width <= 0.005)
    c.verdict()


@pytest.mark.criterion(4, "interval soundness and shrinkage at w=2")
def test_criterion_4():
    c = Checks()
    with budget(c, 5):
        lo, hi = extremal_entropies(H, 2)
        prev = math.inf
        for k in range(1, 7):
            # k expanded levels is expansion depth k - 1
            s = explore(H, 2, mode=REDUCED, budget=k - 1)
            r = entropy_rate(s, stationary(s), (lo, hi))
            c.true(f"k={k} interval misses 4/3", r.contains(4 / 3, 1e-9))
            c.true(f"k={k} width grew", r.width <= prev + 1e-12)
            prev = r.width
            c.near(f"k={k} width", r.width, 2.0 ** -(k + 1) * (hi - lo), 1e-9)
    c.verdict()


@pytest.mark.criterion(5, "extremal entropies at w=2 against a grid oracle")
def test_criterion_5():
    c = Checks()
    with budget(c, 30):
        lo, hi = extremal_entropies(H, 2)
        glo, ghi = oracles.grid_extremes(oracles.coin_matrix(S2, S2), 2, 1001, 1000)
        c.near("H_min", lo, 1.0, 1e-6)
        c.near("H_max", hi, 1.5, 1e-6)
        c.near("H_min vs grid", lo, glo, 1e-6)
        c.near("H_max vs grid", hi, ghi, 1e-6)
    c.verdict()


@pytest.mark.criterion(6, "classical formulas")
def test_criterion_6():
    c = Checks()
    with budget(c, 1):
        for w in range(1, 31):
            c.near(f"w={w}", cw_entropy_rate(w), oracles.binomial_entropy(w), 1e-12)
        c.near("w=2", cw_entropy_rate(2), 1.5, 1e-12)
        c.near("limit 16", cw_limit(16), 3.0, 1e-12)
        c.near("limit 17", cw_limit(17), math.log2(17), 1e-12)
    c.verdict()


@pytest.mark.criterion(7, "bound coincides with classical for w<=3, exceeds it for w=5..20")
def test_criterion_7():
    c = Checks()
    with budget(c, 5):
        for w in (1, 2, 3):
            c.near(f"w={w}", qw_bound_exact(H, w), cw_entropy_rate(w), 1e-9)
        for w in range(5, 21):
            q, k = qw_bound_exact(H, w), cw_entropy_rate(w)
            c.true(f"w={w}: bound {q:.6f} <= classical {k:.6f}", q > k)
    c.verdict()


@pytest.mark.criterion(8, "collapse and revival point w=216 on a 16-cycle")
def test_criterion_8():
    c = Checks()
    with budget(c, 10):
        c.near("qw bound", qw_bound_exact(H, 216, Cycle(16)), 0.514, 0.02)
        c.near("classical mc", cw_cycle_rate_mc(216, 16, 200_000, seed=216).value, 3.0, 0.05)
    c.verdict()


@pytest.mark.criterion(9, "weak-limit constant")
def test_criterion_9():
    c = Checks()
    with budget(c, 1):
        for w in (1, 10, 100):
            c.near(f"w={w}", entropy_integral(w) - math.log2(w), -0.163164, 1e-4)
    c.verdict()


@pytest.mark.criterion(10, "scaling exponents over w in [100, 500]")
def test_criterion_10():
    c = Checks()
    with budget(c, 120):
        ws = list(range(100, 501))
        s_qw, _ = fit_log_exponent(ws, [qw_bound_exact(H, w) for w in ws])
        s_cw, _ = fit_log_exponent(ws, [cw_entropy_rate(w) for w in ws])
        c.near("quantum exponent", s_qw, 0.94, 0.03)
        c.near("classical exponent", s_cw, 0.5, 0.02)
    c.verdict()


@pytest.mark.criterion(11, "readout-tree oracle convergence and product vs trace form")
def test_criterion_11():
    c = Checks()
    with budget(c, 60):
        for name, c0 in (("L", CoinState.L()), ("L+R", CoinState.from_vector(S2, S2))):
            c.near(f"partial rate n=12 from {name}", partial_rate(H, 2, c0, 12), 4 / 3, 0.05)
        starts = [CoinState.L(), CoinState.R(), CoinState.from_vector(S2, S2), CoinState.from_vector(0.6, 0.8j)]
        for w in (1, 2, 3):
            for N in (1, 2, 3):
                for c0 in starts:
                    a = joint_distribution(H, w, c0, N)
                    b = joint_distribution_trace(H, w, c0, N)
                    c.true(f"trees differ at w={w} N={N} c0={c0}", trees_agree(a, b, 1e-10))
    c.verdict()


@pytest.mark.criterion(12, "Monte Carlo bound at w=4 on the line")
def test_criterion_12(capsys):
    c = Checks()
    with budget(c, 30):
        run = qw_bound_mc(H, 4, Line(), 1_000_000, seed=2024)
        exact = qw_bound_exact(H, 4)
        c.true(
            f"estimate {run.estimate:.6f} is {abs(run.estimate - exact) / run.stderr:.1f} stderr from {exact:.6f}",
            abs(run.estimate - exact) <= 3 * run.stderr,
        )
        argv = ["bound", "--w", "4", "--method", "mc", "--iterations", "1000000", "--seed", "2024", "--format", "json"]
        outputs = []
        for _ in range(2):
            code = cli.run(argv)
            outputs.append(capsys.readouterr().out)
            c.true(f"exit code {code}", code == 0)
        c.true("repeated runs differ", outputs[0] == outputs[1])
    c.verdict()


@pytest.mark.criterion(13, "property suites over randomized coins")
def test_criterion_13():
    c = Checks()
    suites = [
        test_properties.test_coin_is_unitary,
        test_properties.test_norm_preserved_and_parity,
        test_properties.test_mirror_has_same_entropy,
        test_properties.test_translation_invariance_on_cycle,
        test_properties.test_profile_matches_dense_oracle,
        test_properties.test_truncated_system_is_stochastic_and_stationary,
    ]
    for suite in suites:
        try:
            suite()
        except AssertionError as exc:
            c.misses.append(f"{suite.__name__}: {exc}")
    c.verdict()
