"""Tables, SVG plots and the summary JSON for one or more run artifacts."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from html import escape
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import jsonschema

from ._io import atomic_write_text, canonical_json
from .analysis import (
    METRICS,
    AggregateScore,
    AttributeReport,
    ComparisonRow,
    aggregate,
    attribute_report,
    context_effect,
    model_comparison,
)
from .artifact import RunArtifact
from .errors import AttributeSetMismatch, EmptyInput, SchemaViolation, TooManyAxes
from .promptgen import NEUTRAL_ID

SCHEMA_VERSION = 1
MAX_RADAR_AXES = 24

DIVERGENCE_HEADER = ["model", "dataset", "attribute", "metric", "mean", "std", "n", "prag_mode", "degraded_share"]
COMPARISON_HEADER = ["model", "dataset", "metric", "mean", "std", "n", "best"]
TAG_RATIO_HEADER = ["model", "dataset", "tag", "attribute", "mean", "std", "n"]

TABLE_FILES = ("divergence_by_attribute.csv", "model_comparison.csv", "tag_ratios.csv")
PLOT_FILES = ("tag_ratio_bar.svg", "context_radar.svg", "divergence_bar.svg")
SUMMARY_FILE = "summary.json"


def load_schema() -> dict:
    text = resources.files("recaudit").joinpath("schema/summary.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _f(x: float) -> str:
    return f"{x:.4f}"


# ------------------------------------------------------------------ bundle


@dataclass
class RunReport:
    artifact: RunArtifact
    attributes: list[AttributeReport]
    degraded_share: dict[str, float]
    tag_tables: dict[str, dict[str, AggregateScore]]
    diagnostics: dict[str, int]


@dataclass
class ContextComparison:
    model: str
    domain: str
    context: str
    metric: str
    attribute_ids: list[str]
    without: list[AggregateScore]
    with_ctx: list[AggregateScore]
    deltas: list[float]


@dataclass
class ReportBundle:
    runs: list[RunReport]
    comparison: list[ComparisonRow]
    contexts: list[ContextComparison] = field(default_factory=list)

    def diagnostics_total(self) -> dict[str, int]:
        total: dict[str, int] = {}
        for r in self.runs:
            for key, v in r.diagnostics.items():
                total[key] = total.get(key, 0) + v
        return total


def _run_report(art: RunArtifact) -> RunReport:
    grouped = art.by_attribute()
    reports = []
    degraded = {}
    for attr in art.attribute_ids():
        recs = grouped.get(attr, {})
        per_seed = {seed: recs[seed].bias_scores(art.k, art.prag_mode) if seed in recs else None for seed in art.seeds}
        scored = [b for b in per_seed.values() if b is not None]
        degraded[attr] = sum(b.degraded_input for b in scored) / len(scored) if scored else 0.0
        reports.append(attribute_report(attr, per_seed))
    tag_tables: dict[str, dict[str, AggregateScore]] = {}
    for tag in art.tags:
        table = {}
        for attr in [NEUTRAL_ID] + art.attribute_ids():
            vals = [grouped[attr][s].tag_ratios[tag] for s in art.seeds
                    if s in grouped.get(attr, {}) and tag in grouped[attr][s].tag_ratios]
            if vals:
                table[attr] = aggregate(vals, tag)
        tag_tables[tag] = table
        for rep in reports:
            if rep.attribute_id in table:
                rep.tag_ratios[tag] = table[rep.attribute_id].mean
    diag = {"raw_lines": 0, "unmatched": 0, "duplicates_removed": 0, "fuzzy_matched": 0}
    for r in art.records:
        for key in diag:
            diag[key] += int(r.diagnostics.get(key, 0))
    diag["records"] = len(art.records)
    diag["excluded_records"] = sum(1 for r in art.records if r.excluded)
    diag["degraded_records"] = sum(1 for r in art.records if r.degraded)
    return RunReport(art, reports, degraded, tag_tables, diag)


def _contexts(runs: Sequence[RunReport], metric: str = "iou") -> list[ContextComparison]:
    out = []
    groups: dict[tuple, dict[str | None, RunReport]] = {}
    for r in runs:
        a = r.artifact
        groups.setdefault((a.model, a.domain, a.catalog_hash, a.k, a.prag_mode), {})[a.context] = r
    for (model, domain, *_), by_ctx in groups.items():
        base = by_ctx.get(None)
        if base is None:
            continue
        for ctx in sorted(c for c in by_ctx if c is not None):
            other = by_ctx[ctx]
            attrs = [a for a in base.artifact.attribute_ids() if a in set(other.artifact.attribute_ids())]

            def per_seed(rr: RunReport):
                g = rr.artifact.by_attribute()
                return {a: {s: (g[a][s].bias_scores(rr.artifact.k, rr.artifact.prag_mode) if s in g[a] else None)
                            for s in rr.artifact.seeds} for a in attrs}

            try:
                eff = context_effect(per_seed(base), per_seed(other), metric)
            except AttributeSetMismatch:
                continue
            ids = [a for a in attrs if a in eff]
            out.append(ContextComparison(
                model, domain, ctx, metric, ids,
                [eff[a].without_context for a in ids],
                [eff[a].with_context for a in ids],
                [eff[a].delta for a in ids],
            ))
    return out


def build_bundle(artifacts: Sequence[RunArtifact]) -> ReportBundle:
    if not artifacts:
        raise EmptyInput("no run artifacts to report on")
    runs = [_run_report(a) for a in artifacts]
    if not any(rep.scores for r in runs for rep in r.attributes):
        raise EmptyInput("no scored attributes in the given artifacts")
    nested: dict[str, dict[str, list[AttributeReport]]] = {}
    for r in runs:
        nested.setdefault(r.artifact.model, {}).setdefault(r.artifact.dataset, []).extend(r.attributes)
    return ReportBundle(runs, model_comparison(nested), _contexts(runs))


# ------------------------------------------------------------------ tables


def _csv(header: list[str], rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def render_tables(bundle: ReportBundle) -> dict[str, str]:
    div_rows = []
    tag_rows = []
    for r in bundle.runs:
        a = r.artifact
        for rep in r.attributes:
            for m in METRICS:
                if m not in rep.scores:
                    continue
                s = rep.scores[m]
                div_rows.append([a.model, a.dataset, rep.attribute_id, m, _f(s.mean), _f(s.std), s.n,
                                 a.prag_mode, _f(r.degraded_share[rep.attribute_id])])
        for tag, table in r.tag_tables.items():
            for attr, s in table.items():
                tag_rows.append([a.model, a.dataset, tag, attr, _f(s.mean), _f(s.std), s.n])
    if not div_rows:
        raise EmptyInput("no attribute rows to tabulate")
    cmp_rows = [[c.model, c.dataset, c.metric, _f(c.mean), _f(c.std), c.n, "true" if c.best else "false"]
                for c in bundle.comparison]
    return {
        "divergence_by_attribute.csv": _csv(DIVERGENCE_HEADER, div_rows),
        "model_comparison.csv": _csv(COMPARISON_HEADER, cmp_rows),
        "tag_ratios.csv": _csv(TAG_RATIO_HEADER, tag_rows),
    }


def emit_tables(bundle: ReportBundle, out_dir: str | Path) -> list[Path]:
    payloads = render_tables(bundle)
    out_dir = Path(out_dir)
    return [atomic_write_text(out_dir / name, text) for name, text in payloads.items()]


# ------------------------------------------------------------------ plots

_PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860")
_FONT = 'font-family="DejaVu Sans, Arial, sans-serif"'


def _n(x: float) -> str:
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _svg(width: float, height: float, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_n(width)}" height="{_n(height)}" '
            f'viewBox="0 0 {_n(width)} {_n(height)}">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="#ffffff"/>', *body, "</svg>"]) + "\n"


def _text(x, y, s, size=12, anchor="middle", extra=""):
    return (f'<text x="{_n(x)}" y="{_n(y)}" font-size="{size}" text-anchor="{anchor}" {_FONT}{extra}>'
            f"{escape(str(s))}</text>")


def _bar_panel(y0: float, title: str, labels: list[str], series: list[tuple[str, list[AggregateScore | None]]],
               ymax: float, percent: bool) -> tuple[list[str], float]:
    """One grouped bar panel; bar height is exactly value/ymax of the plot height."""
    left, plot_h, group_w = 70.0, 240.0, max(48.0, 26.0 * len(series) + 18.0)
    plot_w = group_w * max(1, len(labels))
    top = y0 + 40.0
    base = top + plot_h
    out = [_text(left, y0 + 22, title, 15, "start", ' font-weight="bold"')]
    for i in range(5):
        v = ymax * i / 4
        y = base - plot_h * i / 4
        out.append(f'<line x1="{_n(left)}" y1="{_n(y)}" x2="{_n(left + plot_w)}" y2="{_n(y)}" stroke="#dddddd"/>')
        out.append(_text(left - 6, y + 4, f"{v:.0%}" if percent else f"{v:.2f}", 10, "end"))
    bar_w = (group_w - 18.0) / max(1, len(series))
    for gi, label in enumerate(labels):
        gx = left + gi * group_w + 9.0
        for si, (sname, values) in enumerate(series):
            agg = values[gi]
            if agg is None:
                continue
            h = plot_h * agg.mean / ymax
            x = gx + si * bar_w
            color = _PALETTE[si % len(_PALETTE)]
            out.append(
                f'<rect class="bar" x="{_n(x)}" y="{_n(base - h)}" width="{_n(bar_w - 2)}" height="{_n(h)}" '
                f'fill="{color}" data-label="{escape(label)}" data-series="{escape(sname)}" '
                f'data-value="{agg.mean:.6f}"/>'
            )
            if agg.std > 0:
                cx = x + (bar_w - 2) / 2
                lo = base - plot_h * max(0.0, agg.mean - agg.std) / ymax
                hi = base - plot_h * min(ymax, agg.mean + agg.std) / ymax
                out.append(f'<line class="errorbar" x1="{_n(cx)}" y1="{_n(lo)}" x2="{_n(cx)}" y2="{_n(hi)}" '
                           f'stroke="#222222"/>')
        out.append(_text(gx + (group_w - 18) / 2, base + 16, label, 10))
    out.append(f'<line x1="{_n(left)}" y1="{_n(base)}" x2="{_n(left + plot_w)}" y2="{_n(base)}" stroke="#000000"/>')
    if len(series) > 1:
        for si, (sname, _) in enumerate(series):
            lx = left + plot_w + 20
            ly = top + 16 * si
            out.append(f'<rect x="{_n(lx)}" y="{_n(ly)}" width="10" height="10" fill="{_PALETTE[si % len(_PALETTE)]}"/>')
            out.append(_text(lx + 14, ly + 9, sname, 10, "start"))
    width = left + plot_w + (140.0 if len(series) > 1 else 30.0)
    return out, width


def render_tag_ratio_bar(bundle: ReportBundle) -> str:
    body: list[str] = []
    y, width = 0.0, 320.0
    for r in bundle.runs:
        for tag, table in r.tag_tables.items():
            labels = list(table)
            panel, w = _bar_panel(y, f"Ratio of {tag} items ({r.artifact.model}, {r.artifact.dataset})",
                                  labels, [(tag, [table[a] for a in labels])], 1.0, True)
            body.extend(panel)
            width = max(width, w)
            y += 320.0
    if not body:
        body.append(_text(160, 40, "no analysis tags configured", 13))
        y = 80.0
    return _svg(width, y, body)


def render_divergence_bar(bundle: ReportBundle) -> str:
    body: list[str] = []
    y, width = 0.0, 320.0
    for r in bundle.runs:
        reps = [rep for rep in r.attributes if rep.scores]
        if not reps:
            continue
        labels = [rep.attribute_id for rep in reps]
        series = [(m.upper(), [rep.scores[m] for rep in reps]) for m in METRICS]
        panel, w = _bar_panel(y, f"Divergence from neutral ({r.artifact.model}, {r.artifact.dataset}, "
                                 f"PRAG {r.artifact.prag_mode})", labels, series, 1.0, False)
        body.extend(panel)
        width = max(width, w)
        y += 320.0
    return _svg(width, y, body)


def _radar_panel(y0: float, title: str, axes: list[str],
                 series: list[tuple[str, list[float]]]) -> list[str]:
    if len(axes) > MAX_RADAR_AXES:
        raise TooManyAxes(f"{len(axes)} axes exceed the radar limit of {MAX_RADAR_AXES}")
    cx, cy, radius = 260.0, y0 + 250.0, 170.0
    out = [_text(20, y0 + 24, title, 15, "start", ' font-weight="bold"')]
    n = max(1, len(axes))

    def point(i: int, v: float) -> tuple[float, float]:
        ang = -math.pi / 2 + 2 * math.pi * i / n
        return cx + radius * v * math.cos(ang), cy + radius * v * math.sin(ang)

    for ring in (0.25, 0.5, 0.75, 1.0):
        pts = " ".join(f"{_n(px)},{_n(py)}" for px, py in (point(i, ring) for i in range(n)))
        out.append(f'<polygon points="{pts}" fill="none" stroke="#dddddd"/>')
    for i, name in enumerate(axes):
        px, py = point(i, 1.0)
        lx, ly = point(i, 1.12)
        out.append(f'<line x1="{_n(cx)}" y1="{_n(cy)}" x2="{_n(px)}" y2="{_n(py)}" stroke="#bbbbbb"/>')
        out.append(_text(lx, ly + 4, name, 10))
    for si, (sname, values) in enumerate(series):
        color = _PALETTE[si % len(_PALETTE)]
        pts = [point(i, min(1.0, max(0.0, v))) for i, v in enumerate(values)]
        if pts:
            pts.append(pts[0])
        coords = " ".join(f"{_n(px)},{_n(py)}" for px, py in pts)
        out.append(f'<polyline class="series" points="{coords}" fill="none" stroke="{color}" stroke-width="2" '
                   f'data-series="{escape(sname)}"/>')
        out.append(f'<rect x="470" y="{_n(y0 + 50 + 16 * si)}" width="10" height="10" fill="{color}"/>')
        out.append(_text(484, y0 + 59 + 16 * si, sname, 10, "start"))
    return out


def render_context_radar(bundle: ReportBundle) -> str:
    body: list[str] = []
    y = 0.0
    if bundle.contexts:
        for c in bundle.contexts:
            body.extend(_radar_panel(
                y, f"{c.metric.upper()} divergence with and without context ({c.model}, {c.domain})", c.attribute_ids,
                [("no context", [a.mean for a in c.without]), (f"with context: {c.context}", [a.mean for a in c.with_ctx])],
            ))
            y += 480.0
    else:
        for r in bundle.runs:
            reps = [rep for rep in r.attributes if "iou" in rep.scores]
            if not reps:
                continue
            label = "no context" if r.artifact.context is None else f"context: {r.artifact.context}"
            body.extend(_radar_panel(y, f"IOU divergence ({r.artifact.model}, {r.artifact.dataset})",
                                     [rep.attribute_id for rep in reps], [(label, [rep.scores["iou"].mean for rep in reps])]))
            y += 480.0
    return _svg(620.0, max(y, 80.0), body)


def render_plots(bundle: ReportBundle) -> dict[str, str]:
    return {
        "tag_ratio_bar.svg": render_tag_ratio_bar(bundle),
        "context_radar.svg": render_context_radar(bundle),
        "divergence_bar.svg": render_divergence_bar(bundle),
    }


def emit_plots(bundle: ReportBundle, out_dir: str | Path) -> list[Path]:
    payloads = render_plots(bundle)
    out_dir = Path(out_dir)
    return [atomic_write_text(out_dir / name, text) for name, text in payloads.items()]


# ------------------------------------------------------------------ summary


def _agg(a: AggregateScore) -> dict[str, Any]:
    return {"mean": a.mean, "std": a.std, "n": a.n}


def summary_document(bundle: ReportBundle) -> dict[str, Any]:
    runs = []
    for r in bundle.runs:
        art = r.artifact
        grouped = art.by_attribute()
        attrs = []
        for rep in r.attributes:
            per_seed = []
            for s in art.seeds:
                rec = grouped.get(rep.attribute_id, {}).get(s)
                if rec is not None and rec.scores is not None:
                    per_seed.append({"seed": s, **{m: rec.scores[m] for m in METRICS},
                                     "degraded_input": bool(rec.scores.get("degraded_input", False))})
            attrs.append({
                "attribute_id": rep.attribute_id,
                "per_seed": per_seed,
                "aggregates": {m: _agg(a) for m, a in rep.scores.items()},
                "excluded_seeds": rep.excluded_seeds,
                "degraded_share": r.degraded_share[rep.attribute_id],
            })
        runs.append({
            "config_digest": art.config_digest,
            "artifact_digest": art.digest(),
            "model": art.model,
            "dataset": art.dataset,
            "domain": art.domain,
            "catalog_hash": art.catalog_hash,
            "backend_id": art.backend_id,
            "prag_mode": art.prag_mode,
            "k": art.k,
            "seeds": list(art.seeds),
            "context": art.context,
            "attributes": attrs,
            "tag_ratios": {tag: {a: _agg(s) for a, s in table.items()} for tag, table in r.tag_tables.items()},
            "diagnostics": r.diagnostics,
            "exclusions": [{"attribute_id": x.attribute_id, "seed": x.seed, "reason": x.excluded}
                           for x in art.exclusions()],
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "std_kind": "sample",
        "runs": runs,
        "model_comparison": [
            {"model": c.model, "dataset": c.dataset, "metric": c.metric, "mean": c.mean, "std": c.std,
             "n": c.n, "best": c.best}
            for c in bundle.comparison
        ],
        "context_effects": [
            {"model": c.model, "domain": c.domain, "context": c.context, "metric": c.metric,
             "attributes": [{"attribute_id": a, "without": _agg(w), "with": _agg(x), "delta": d}
                            for a, w, x, d in zip(c.attribute_ids, c.without, c.with_ctx, c.deltas)]}
            for c in bundle.contexts
        ],
        "diagnostics_total": bundle.diagnostics_total(),
    }


def validate_summary(doc: dict[str, Any]) -> None:
    try:
        jsonschema.validate(doc, load_schema())
    except jsonschema.ValidationError as exc:
        raise SchemaViolation(exc.message) from exc


def render_summary(bundle: ReportBundle) -> str:
    doc = summary_document(bundle)
    validate_summary(doc)
    return canonical_json(doc)


def emit_summary_json(bundle: ReportBundle, out_path: str | Path) -> Path:
    return atomic_write_text(out_path, render_summary(bundle))


def emit_report(artifacts: Sequence[RunArtifact], out_dir: str | Path) -> list[Path]:
    """Render everything in memory first, then write; nothing is written on error."""
    bundle = build_bundle(artifacts)
    payloads = {**render_tables(bundle), **render_plots(bundle), SUMMARY_FILE: render_summary(bundle)}
    out_dir = Path(out_dir)
    return [atomic_write_text(out_dir / name, text) for name, text in payloads.items()]
