import math
import random

import pytest
from hypothesis import given, strategies as st

from recaudit.analysis import (
    AggregateScore,
    AttributeReport,
    aggregate,
    attribute_report,
    context_effect,
    model_comparison,
    pool,
    tag_ratio,
    tag_ratio_table,
)
from recaudit.backends import SyntheticBiasModel, synth_rank
from recaudit.errors import AttributeSetMismatch, EmptyInput, EmptyList, MissingNeutral
from recaudit.metrics import BiasScores, all_scores
from recaudit.promptgen import NEUTRAL, UserSpec, builtin_attributes

GENDER = {a.id: a for a in builtin_attributes("gender")}
ACTION = frozenset({"genre:action"})


def bs(attr, iou, serp=0.0, prag=0.0):
    return BiasScores(attr, iou, serp, prag, "corrected", 20, False)


def test_aggregate_hand_values():
    a = aggregate([0.5, 0.6, 0.4, 0.55, 0.45], "iou")
    assert a.mean == pytest.approx(0.5, abs=1e-12)
    assert a.std == pytest.approx(math.sqrt(0.025 / 4), abs=1e-12)
    assert a.n == 5
    assert aggregate([0.3]).std == 0.0


def test_aggregate_empty():
    with pytest.raises(EmptyInput):
        aggregate([])


@given(st.lists(st.floats(0, 1), min_size=2, max_size=30))
def test_aggregate_bounds(xs):
    a = aggregate(xs)
    assert min(xs) - 1e-12 <= a.mean <= max(xs) + 1e-12
    assert a.std >= 0


def test_attribute_report_excludes_none():
    r = attribute_report("boy", {0: bs("boy", 0.2), 1: None, 2: bs("boy", 0.4)})
    assert r.excluded_seeds == [1]
    assert r.scores["iou"].n == 2
    assert r.scores["iou"].mean == pytest.approx(0.3)
    assert r.raw["iou"] == [0.2, 0.4]
    assert attribute_report("boy", {0: None}).scores == {}


def test_tag_ratio(movie_catalog):
    action = sorted(movie_catalog.ids_with_tag("genre:action"))[:7]
    other = [i.id for i in movie_catalog if "genre:action" not in i.tags][:13]
    assert tag_ratio(action + other, "genre:action", movie_catalog) == pytest.approx(0.35)
    assert tag_ratio(other, "genre:action", movie_catalog) == 0.0
    with pytest.raises(EmptyList):
        tag_ratio([], "genre:action", movie_catalog)


def _runs(catalog, beta, seeds):
    model = SyntheticBiasModel(beta, {"boy": ACTION, "male": ACTION})
    specs = {"neutral": NEUTRAL, **{a: UserSpec(GENDER[a]) for a in GENDER}}
    return {a: {s: synth_rank(model, spec, catalog, 20, s) for s in seeds} for a, spec in specs.items()}


def test_tag_ratio_table_neutral_first_and_equal_at_zero(movie_catalog):
    runs = _runs(movie_catalog, 0.0, range(5))
    runs = {k: runs[k] for k in ["girl", "neutral", "boy", "male", "female"]}
    table = tag_ratio_table(runs, "genre:action", movie_catalog)
    assert list(table)[0] == "neutral"
    assert len({a.mean for a in table.values()}) == 1


def test_tag_ratio_table_raises_without_neutral(movie_catalog):
    with pytest.raises(MissingNeutral):
        tag_ratio_table({"boy": {0: ["heat"]}}, "genre:action", movie_catalog)


def test_tag_ratio_boosted_attribute_rises(movie_catalog):
    table = tag_ratio_table(_runs(movie_catalog, 2.0, range(20)), "genre:action", movie_catalog)
    assert table["boy"].mean > table["neutral"].mean
    assert table["girl"].mean == table["neutral"].mean


def test_context_effect_identical_runs():
    runs = {"boy": {0: bs("boy", 0.3), 1: bs("boy", 0.5)}, "girl": {0: bs("girl", 0.1), 1: bs("girl", 0.2)}}
    eff = context_effect(runs, runs)
    assert all(e.delta == 0 for e in eff.values())


def test_context_effect_mismatch():
    a = {"boy": {0: bs("boy", 0.1)}}
    with pytest.raises(AttributeSetMismatch):
        context_effect(a, {"girl": {0: bs("girl", 0.1)}})
    with pytest.raises(AttributeSetMismatch):
        context_effect(a, {"boy": {1: bs("boy", 0.1)}})


def test_context_effect_mitigation_synthetic(movie_catalog):
    # a context boost that dominates the attribute boost pulls both lists
    # toward the same head, so divergence can only shrink on average
    ctx = "who loves action films"
    seeds = range(20)
    base = SyntheticBiasModel(1.0, {"girl": frozenset({"genre:romance"})})
    boosted = SyntheticBiasModel(1.0, {"girl": frozenset({"genre:romance"})},
                                 context_affinity={ctx: ACTION}, context_strength=6.0)

    def scores(model, context):
        out = {}
        for s in seeds:
            a = synth_rank(model, UserSpec(GENDER["girl"], context), movie_catalog, 20, s)
            n = synth_rank(model, UserSpec(None, context), movie_catalog, 20, s)
            out[s] = all_scores(a, n, 20, attribute_id="girl")
        return {"girl": out}

    eff = context_effect(scores(base, None), scores(boosted, ctx))
    for metric in ("iou",):
        assert eff["girl"].delta <= 0


def _rep(attr, **means):
    return AttributeReport(attr, {m: AggregateScore(m, v, 0.0, 5) for m, v in means.items()})


def test_model_comparison_hand_average():
    reports = {
        "gemma": {"movie": [_rep("boy", iou=0.2, serp=0.1, prag=0.3), _rep("girl", iou=0.4, serp=0.3, prag=0.1)]},
        "llama": {"movie": [_rep("boy", iou=0.1, serp=0.4, prag=0.4), _rep("girl", iou=0.3, serp=0.4, prag=0.4)]},
    }
    rows = {(r.model, r.metric): r for r in model_comparison(reports)}
    assert rows["gemma", "iou"].mean == pytest.approx(0.3)
    assert rows["llama", "iou"].mean == pytest.approx(0.2)
    assert rows["llama", "iou"].best and not rows["gemma", "iou"].best
    assert rows["gemma", "serp"].best and rows["gemma", "prag"].best
    assert rows["gemma", "iou"].n == 10


def test_model_comparison_single_model_no_flags():
    rows = model_comparison({"gemma": {"movie": [_rep("boy", iou=0.2, serp=0.1, prag=0.3)]}})
    assert len(rows) == 3 and not any(r.best for r in rows)


def test_pool_single_and_pooled_std():
    a = AggregateScore("iou", 0.3, 0.1, 5)
    assert pool([a]) == a
    xs, ys = [0.1, 0.2, 0.3], [0.5, 0.7]
    p = pool([aggregate(xs, "iou"), aggregate(ys, "iou")])
    grand = (0.2 + 0.6) / 2
    expected = math.sqrt(sum((v - grand) ** 2 for v in xs + ys) / 4)
    assert p.mean == pytest.approx(grand)
    assert p.std == pytest.approx(expected)
    with pytest.raises(EmptyInput):
        pool([])


def test_model_comparison_permutation_invariant():
    rng = random.Random(7)
    reports = {
        m: {d: [_rep(a, iou=rng.random(), serp=rng.random(), prag=rng.random()) for a in "abcd"] for d in ("x", "y")}
        for m in ("m1", "m2", "m3")
    }
    base = {(r.model, r.dataset, r.metric): (r.mean, r.best) for r in model_comparison(reports)}
    shuffled = {m: {d: list(reversed(v)) for d, v in reversed(list(ds.items()))} for m, ds in reversed(list(reports.items()))}
    again = {(r.model, r.dataset, r.metric): (r.mean, r.best) for r in model_comparison(shuffled)}
    assert base.keys() == again.keys()
    for key in base:
        assert base[key][1] == again[key][1]
        assert base[key][0] == pytest.approx(again[key][0], abs=1e-15)
