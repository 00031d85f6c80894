"""Seed aggregation and the content analyses built on top of bias scores."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .catalog import Catalog
from .errors import AttributeSetMismatch, EmptyInput, EmptyList, MissingNeutral
from .metrics import BiasScores
from .parser import RankedList
from .promptgen import NEUTRAL_ID

METRICS = ("iou", "serp", "prag")


@dataclass(frozen=True)
class AggregateScore:
    metric: str
    mean: float
    std: float
    n: int


@dataclass
class AttributeReport:
    attribute_id: str
    scores: dict[str, AggregateScore]
    excluded_seeds: list[int] = field(default_factory=list)
    tag_ratios: dict[str, float] = field(default_factory=dict)
    raw: dict[str, list[float]] = field(default_factory=dict)


def aggregate(scores: Sequence[float], metric: str = "") -> AggregateScore:
    """Mean and sample (n-1) standard deviation."""
    values = [float(s) for s in scores]
    if not values:
        raise EmptyInput("cannot aggregate an empty score list")
    mean = math.fsum(values) / len(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return AggregateScore(metric, mean, std, len(values))


def attribute_report(
    attribute_id: str,
    per_seed: Mapping[int, BiasScores | None],
    tag_ratios: Mapping[str, float] | None = None,
) -> AttributeReport:
    """Fold per-seed scores for one attribute; ``None`` marks an excluded seed."""
    seeds = sorted(per_seed)
    kept = [s for s in seeds if per_seed[s] is not None]
    excluded = [s for s in seeds if per_seed[s] is None]
    raw = {m: [per_seed[s].get(m) for s in kept] for m in METRICS}
    scores = {m: aggregate(raw[m], m) for m in METRICS} if kept else {}
    return AttributeReport(attribute_id, scores, excluded, dict(tag_ratios or {}), raw)


def tag_ratio(ranked: RankedList | Sequence[str], tag: str, catalog: Catalog) -> float:
    ids = list(ranked.item_ids) if isinstance(ranked, RankedList) else list(ranked)
    if not ids:
        raise EmptyList("tag ratio of an empty list")
    return sum(1 for i in ids if tag in catalog.get(i).tags) / len(ids)


def tag_ratio_table(
    runs: Mapping[str, Mapping[int, RankedList | None]],
    tag: str,
    catalog: Catalog,
) -> dict[str, AggregateScore]:
    """Per-attribute mean ratio of ``tag`` across seeds, neutral row first."""
    if NEUTRAL_ID not in runs:
        raise MissingNeutral("tag ratio table needs a neutral row")
    order = [NEUTRAL_ID] + [a for a in runs if a != NEUTRAL_ID]
    table = {}
    for attr in order:
        ratios = [tag_ratio(lst, tag, catalog) for _, lst in sorted(runs[attr].items()) if lst is not None]
        if ratios:
            table[attr] = aggregate(ratios, tag)
    return table


@dataclass(frozen=True)
class ContextEffect:
    without_context: AggregateScore
    with_context: AggregateScore
    delta: float


def context_effect(
    runs_no_context: Mapping[str, Mapping[int, BiasScores | None]],
    runs_with_context: Mapping[str, Mapping[int, BiasScores | None]],
    metric: str = "iou",
) -> dict[str, ContextEffect]:
    """Paired with/without-context divergence; negative delta means mitigation."""
    if set(runs_no_context) != set(runs_with_context):
        raise AttributeSetMismatch("context and no-context runs cover different attributes")
    out = {}
    for attr, seeds in runs_no_context.items():
        other = runs_with_context[attr]
        if set(seeds) != set(other):
            raise AttributeSetMismatch(f"seed sets differ for attribute {attr!r}")
        paired = [s for s in sorted(seeds) if seeds[s] is not None and other[s] is not None]
        if not paired:
            continue
        before = aggregate([seeds[s].get(metric) for s in paired], metric)
        after = aggregate([other[s].get(metric) for s in paired], metric)
        out[attr] = ContextEffect(before, after, after.mean - before.mean)
    return out


@dataclass(frozen=True)
class ComparisonRow:
    model: str
    dataset: str
    metric: str
    mean: float
    std: float
    n: int
    best: bool


def pool(aggregates: Sequence[AggregateScore]) -> AggregateScore:
    """Combine per-attribute aggregates, weighting attributes equally.

    The std is the sample std of all pooled per-seed values around the
    equal-weight mean, recovered from each group's (mean, std, n).
    """
    if not aggregates:
        raise EmptyInput("nothing to pool")
    if len(aggregates) == 1:
        return aggregates[0]
    grand = math.fsum(a.mean for a in aggregates) / len(aggregates)
    total_n = sum(a.n for a in aggregates)
    ss = math.fsum((a.n - 1) * a.std**2 + a.n * (a.mean - grand) ** 2 for a in aggregates)
    std = math.sqrt(ss / (total_n - 1)) if total_n > 1 else 0.0
    return AggregateScore(aggregates[0].metric, grand, std, total_n)


def model_comparison(
    reports: Mapping[str, Mapping[str, Sequence[AttributeReport]]],
) -> list[ComparisonRow]:
    """Overall divergence per (model, dataset, metric); lowest mean flagged best.

    Best flags are only assigned when more than one model reports a
    (dataset, metric) cell.
    """
    rows = []
    for model, datasets in reports.items():
        for dataset, attr_reports in datasets.items():
            for metric in METRICS:
                aggs = [r.scores[metric] for r in attr_reports if metric in r.scores]
                if not aggs:
                    continue
                p = pool(aggs)
                rows.append(ComparisonRow(model, dataset, metric, p.mean, p.std, p.n, False))
    cells: dict[tuple[str, str], list[int]] = {}
    for i, r in enumerate(rows):
        cells.setdefault((r.dataset, r.metric), []).append(i)
    for idxs in cells.values():
        if len({rows[i].model for i in idxs}) < 2:
            continue
        lowest = min(rows[i].mean for i in idxs)
        for i in idxs:
            if rows[i].mean == lowest:
                r = rows[i]
                rows[i] = ComparisonRow(r.model, r.dataset, r.metric, r.mean, r.std, r.n, True)
    return rows
