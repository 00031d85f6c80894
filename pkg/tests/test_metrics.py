import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from recaudit.errors import EmptyList, RankExceedsK
from recaudit.metrics import all_scores, b_iou, b_prag, b_serp
from recaudit.parser import RankedList

TOL = 1e-12
POOL = [f"i{n}" for n in range(50)]


def L(ids, k=None):
    return RankedList(tuple(ids), k if k is not None else len(ids))


def test_iou_examples():
    xs = POOL[:20]
    assert b_iou(xs, xs) == 0
    assert b_iou(POOL[:20], POOL[20:40]) == 1
    assert b_iou(["A", "B"], ["B", "C"]) == pytest.approx(float(1 - Fraction(1, 3)), abs=TOL)


def test_serp_examples():
    k = 20
    assert b_serp(POOL[:k], POOL[:k], k) == pytest.approx(0, abs=TOL)
    assert b_serp(POOL[:k], POOL[k : 2 * k], k) == 1
    # k=3: x,y shared at ranks 1,2 -> 1 - (2*3 + 2*2)/12
    assert b_serp(["x", "y", "z"], ["y", "x", "w"], 3) == pytest.approx(1 / 6, abs=TOL)
    assert b_serp(["x", "y", "z"], ["y", "x", "w"], 3) == pytest.approx(oracles.serp_sum(["x", "y", "z"], ["y", "x", "w"], 3), abs=TOL)


def test_serp_rank_exceeds_k():
    with pytest.raises(RankExceedsK):
        b_serp(["a", "b", "c"], ["a"], 2)


def test_prag_examples():
    xs = POOL[:20]
    assert b_prag(xs, xs, 20, "corrected") == 0
    assert b_prag(xs, xs, 20, "paper") == pytest.approx(23 / 42, abs=TOL)
    rev = list(reversed(xs))
    assert b_prag(xs, rev, 20, "corrected") == 1
    assert b_prag(xs, rev, 20, "paper") == 1


def test_prag_absent_items_rank_last():
    # i1 in neutral, i2 absent -> pair counts when A orders i1 before i2
    assert b_prag(["a", "z"], ["a", "b"], 2, "corrected") == 0
    assert b_prag(["z", "a"], ["a", "b"], 2, "corrected") == 1


def test_all_scores_small_example():
    s = all_scores(L(["A", "B"]), L(["B", "C"]), 2, "corrected")
    assert s.b_iou == pytest.approx(2 / 3, abs=TOL)
    assert s.b_serp == pytest.approx(1 - 2 / 6, abs=TOL)
    assert s.b_prag == pytest.approx(1, abs=TOL)


def test_identity_and_disjoint_bundles():
    xs = L(POOL[:10])
    assert all_scores(xs, xs, 10) .b_iou == 0
    s = all_scores(xs, xs, 10)
    assert (s.b_iou, s.b_serp, s.b_prag) == pytest.approx((0, 0, 0), abs=TOL)
    d = all_scores(L(POOL[:10]), L(POOL[10:20]), 10)
    assert (d.b_iou, d.b_serp, d.b_prag) == (1, 1, 1)


def test_degraded_flag_propagates():
    s = all_scores(L(POOL[:3], 5), L(POOL[:5]), 5)
    assert s.degraded_input
    assert not all_scores(L(POOL[:5]), L(POOL[:5]), 5).degraded_input


def test_degraded_keeps_nominal_k():
    short = L(POOL[:3], 5)
    full = L(POOL[:5])
    assert b_serp(short, full, 5) == pytest.approx(1 - (10 + 8 + 6) / 30, abs=TOL)
    assert b_prag(short, full, 5) == pytest.approx(1 - 3 / 10, abs=TOL)


def test_empty_list_rejected():
    for fn in (lambda: b_iou([], ["a"]), lambda: b_serp(["a"], [], 1), lambda: b_prag([], [], 1)):
        with pytest.raises(EmptyList):
            fn()


def test_unknown_prag_mode():
    with pytest.raises(ValueError):
        b_prag(["a"], ["a"], 1, "other")


def _random_pair(rng, k):
    a = rng.sample(POOL, rng.randint(1, k))
    b = rng.sample(POOL, rng.randint(1, k))
    return a, b


def test_prag_brute_force_1000():
    rng = random.Random(7)
    for _ in range(1000):
        k = rng.randint(1, 20)
        a, b = _random_pair(rng, k)
        count = oracles.prag_pairs(a, b)
        assert b_prag(a, b, k, "paper") == pytest.approx(1 - count / (k * (k + 1)), abs=TOL)
        if k > 1:
            assert b_prag(a, b, k, "corrected") == pytest.approx(min(1, max(0, 1 - count / (k * (k - 1) / 2))), abs=TOL)


def test_prag_small_catalog_brute_force():
    rng = random.Random(11)
    small = POOL[:10]
    for _ in range(500):
        k = rng.randint(2, 6)
        a = rng.sample(small, k)
        b = rng.sample(small, k)
        assert b_prag(a, b, k) == pytest.approx(1 - oracles.prag_pairs(a, b) / (k * (k - 1) / 2), abs=TOL)


@given(st.integers(0, 10**9), st.integers(1, 20))
@settings(max_examples=500)
def test_range_property(seed, k):
    rng = random.Random(seed)
    a, b = _random_pair(rng, k)
    for mode in ("paper", "corrected"):
        s = all_scores(L(a, k), L(b, k), k, mode)
        for v in (s.b_iou, s.b_serp, s.b_prag):
            assert -TOL <= v <= 1 + TOL


@given(st.integers(0, 10**9), st.integers(1, 20))
def test_same_set_any_order(seed, k):
    rng = random.Random(seed)
    a = rng.sample(POOL, k)
    b = a[:]
    rng.shuffle(b)
    assert b_iou(a, b) == 0
    assert b_serp(a, b, k) == pytest.approx(0, abs=TOL)


@given(st.integers(0, 10**9), st.integers(1, 20))
def test_iou_symmetric(seed, k):
    a, b = _random_pair(random.Random(seed), k)
    assert b_iou(a, b) == b_iou(b, a)


def test_serp_and_prag_asymmetric_counterexample():
    # shared item x sits at rank 3 in one list and rank 1 in the other
    assert b_serp(["y", "z", "x"], ["x", "w", "v"], 3) == pytest.approx(5 / 6, abs=TOL)
    assert b_serp(["x", "w", "v"], ["y", "z", "x"], 3) == pytest.approx(1 / 2, abs=TOL)
    assert b_prag(["z", "a"], ["a", "b"], 2) == 1
    assert b_prag(["a", "b"], ["z", "a"], 2) == 0


@given(st.integers(0, 10**9), st.integers(2, 20))
def test_iou_monotone_under_replacement(seed, k):
    rng = random.Random(seed)
    a = rng.sample(POOL[:30], k)
    b = rng.sample(POOL[:30], k)
    shared = [x for x in a if x in b]
    outside = [x for x in POOL if x not in a and x not in b]
    if not shared:
        return
    victim = rng.choice(shared)
    a2 = [outside[0] if x == victim else x for x in a]
    assert b_iou(a2, b) >= b_iou(a, b)
