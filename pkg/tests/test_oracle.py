import json

import numpy as np
import pytest

from qwentropy.coin_graph import extremal_entropies, solve
from qwentropy.errors import CapExceededError
from qwentropy.oracle import (
    conditional_entropies,
    dump_tree,
    joint_distribution,
    joint_distribution_trace,
    partial_rate,
    tree_entropies,
    trees_agree,
)
from qwentropy.walk_core import CoinOperator, CoinState

import oracles

H = CoinOperator.hadamard()
S2 = oracles.S2
L = CoinState.L()
SYM = CoinState.from_vector(S2, S2)


def test_first_layer():
    assert joint_distribution(H, 2, L, 1).as_dict() == pytest.approx({(-2,): 0.25, (0,): 0.5, (2,): 0.25})


def test_depth_three_by_hand():
    t = joint_distribution(H, 2, L, 3)
    assert t.total() == pytest.approx(1.0, abs=1e-12)
    # L -0-> (-L+R) -(-2)-> L -0-> (-L+R): 1/2 * 1/2 * 1/2
    assert t[(0, -2, 0)] == pytest.approx(1 / 8)
    # L -0-> (-L+R) -0-> R -2-> R: 1/2 * 1/2 * 1/4
    assert t[(0, 0, 2)] == pytest.approx(1 / 16)
    # (-L+R) never shifts by +2
    assert t[(0, 2, 0)] == 0.0
    legal = [(a, b, c) for a in (-2, 0, 2) for b in (-2, 0, 2) for c in (-2, 0, 2)]
    assert sum(t[s] for s in legal) == pytest.approx(1.0, abs=1e-12)
    assert len(legal) == 27 and len(t) < 27


def test_parity():
    t = joint_distribution(H, 3, L, 3)
    assert np.all(np.abs(t.sequences) % 2 == 1)


@pytest.mark.parametrize("w,N", [(1, 3), (2, 1), (2, 2), (2, 3), (3, 2), (3, 3)])
def test_product_form_equals_trace_form(w, N):
    assert trees_agree(joint_distribution(H, w, L, N), joint_distribution_trace(H, w, L, N), 1e-10)


def test_trace_form_general_coin():
    c = CoinOperator.from_angle(0.7, 0.4, 1.2)
    c0 = CoinState.from_vector(0.6, 0.8j)
    assert trees_agree(joint_distribution(c, 3, c0, 3), joint_distribution_trace(c, 3, c0, 3), 1e-10)


def test_trace_depth_limit():
    with pytest.raises(ValueError):
        joint_distribution_trace(H, 2, L, 4)


def test_cap():
    with pytest.raises(CapExceededError) as info:
        joint_distribution(H, 9, L, 8, cap=1000)
    assert info.value.details["attempted"] == 10**8


@pytest.mark.parametrize("c0", [L, SYM])
def test_partial_rate_converges_to_four_thirds(c0):
    assert partial_rate(H, 2, L, 1) == pytest.approx(1.5)
    assert abs(partial_rate(H, 2, c0, 12) - 4 / 3) < 0.05


@pytest.mark.parametrize("c0", [L, SYM])
def test_partial_rate_approach_is_monotone(c0):
    h = tree_entropies(H, 2, c0, 12)
    gaps = [abs(x / (n + 1) - 4 / 3) for n, x in enumerate(h)]
    assert all(b <= a + 1e-12 for a, b in zip(gaps[3:], gaps[4:]))


def test_chain_rule_within_extremes():
    lo, hi = extremal_entropies(H, 3)
    for c0 in (L, SYM):
        for d in conditional_entropies(H, 3, c0, 7):
            assert lo - 1e-9 <= d <= hi + 1e-9


def test_tree_entropy_matches_stored_tree():
    t = joint_distribution(H, 3, L, 4)
    assert t.entropy() == pytest.approx(tree_entropies(H, 3, L, 4)[-1], abs=1e-12)


def test_conditional_entropy_tends_to_exact_rate():
    _, _, r = solve(H, 2)
    assert conditional_entropies(H, 2, L, 12)[-1] == pytest.approx(r.value, abs=1e-3)


def test_json_dump():
    data = json.loads(dump_tree(joint_distribution(H, 2, L, 2)))
    assert data["depth"] == 2
    assert sum(leaf["p"] for leaf in data["leaves"]) == pytest.approx(1.0)
    assert data["leaves"][0]["shifts"] == [-2, -2]
