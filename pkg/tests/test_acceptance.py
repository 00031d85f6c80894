"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import contextlib
import json
import random
import threading
import time
from fractions import Fraction
from pathlib import Path

import pytest

import oracles
from conftest import CATALOGS, RESPONSES, write_config
from reference_fixtures import ACTION_RATIOS, COMPARISON_BEST
from recaudit.artifact import RunArtifact, find_artifacts
from recaudit.backends import RawResponse, SyntheticBiasModel, fingerprint, synth_complete, synth_rank
from recaudit.catalog import load_catalog
from recaudit.config import load_config
from recaudit.errors import EmptyParse
from recaudit.metrics import all_scores, b_iou, b_prag, b_serp
from recaudit.parser import parse_response
from recaudit.promptgen import CATEGORIES, NEUTRAL, UserSpec, builtin_attributes
from recaudit.report import emit_report
from recaudit.runner import artifact_dir, build_backend, run

pytestmark = pytest.mark.acceptance

TOL = 1e-12
FIXTURE_ARTIFACTS = Path(__file__).resolve().parents[1] / "fixtures" / "artifacts"


@contextlib.contextmanager
def criterion(capsys, number, title):
    t0 = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        with capsys.disabled():
            status = "PASS" if ok else "FAIL"
            print(f"\nACCEPTANCE {number} [{status}] {title} ({time.perf_counter() - t0:.2f}s)")


# ------------------------------------------------------------------ 1


def test_1_metric_identities(capsys):
    with criterion(capsys, 1, "metric identities on 1000 random list pairs"):
        rng = random.Random(20240601)
        pool = [f"item-{i}" for i in range(50)]
        t0 = time.perf_counter()
        for _ in range(1000):
            k = rng.randint(1, 20)
            a = rng.sample(pool, k)
            b = rng.sample(pool, k)
            s = all_scores(a, b, k, "corrected")
            for v in (s.b_iou, s.b_serp, s.b_prag, b_prag(a, b, k, "paper")):
                assert -TOL <= v <= 1 + TOL
            same = all_scores(a, list(a), k, "corrected")
            assert abs(same.b_iou) <= TOL and abs(same.b_serp) <= TOL and abs(same.b_prag) <= TOL
            rest = [x for x in pool if x not in a]
            other = rng.sample(rest, min(k, len(rest)))
            dis = all_scores(a, other, k, "corrected")
            assert abs(dis.b_iou - 1) <= TOL and abs(dis.b_serp - 1) <= TOL and abs(dis.b_prag - 1) <= TOL
        assert time.perf_counter() - t0 < 5.0


# ------------------------------------------------------------------ 2


def test_2_metric_oracles(capsys):
    with criterion(capsys, 2, "PRAG brute-force oracle x1000 and SERP worked examples"):
        rng = random.Random(99)
        pool = [f"item-{i}" for i in range(50)]
        for _ in range(1000):
            k = rng.randint(1, 20)
            a = rng.sample(pool, rng.randint(1, k))
            b = rng.sample(pool, rng.randint(1, k))
            count = oracles.prag_pairs(a, b)
            assert abs(b_prag(a, b, k, "paper") - float(1 - Fraction(count, k * (k + 1)))) <= TOL
            if k > 1:
                expected = min(Fraction(1), max(Fraction(0), 1 - Fraction(2 * count, k * (k - 1))))
                assert abs(b_prag(a, b, k, "corrected") - float(expected)) <= TOL
        xs = pool[:20]
        assert abs(b_serp(xs, xs, 20) - 0) <= TOL
        assert abs(b_serp(xs, pool[20:40], 20) - 1) <= TOL
        assert abs(b_serp(["x", "y", "z"], ["x", "y", "w"], 3) - 1 / 6) <= TOL
        assert abs(b_serp(["A", "B"], ["B", "C"], 2) - 2 / 3) <= TOL


# ------------------------------------------------------------------ 3


def test_3_prag_mode_discrepancy(capsys):
    with criterion(capsys, 3, "PRAG identical k=20 lists: 23/42 (mode=paper) vs 0 (mode=corrected)"):
        xs = [f"item-{i}" for i in range(20)]
        assert abs(b_prag(xs, xs, 20, "paper") - 23 / 42) <= TOL
        assert b_prag(xs, xs, 20, "corrected") == 0


# ------------------------------------------------------------------ 4

SYNTH_CONFIG = """
k = 20
seeds = {seeds}
max_concurrency = 8

[backend]
kind = "synthetic"
bias_strength = {beta}

[backend.affinity]
{affinity}

[catalog]
path = "@CATALOGS@/movie.csv"

[attributes]
categories = {categories}
"""

ALL_AFFINITY = "\n".join(
    f'{a.id} = ["genre:action"]' if i % 2 else f'{a.id} = ["genre:romance", "region:non-western"]'
    for i, a in enumerate(builtin_attributes())
)


def _synth(tmp_path, beta, seeds, categories=json.dumps(list(CATEGORIES)), affinity=ALL_AFFINITY, name=None):
    body = SYNTH_CONFIG.format(seeds=list(seeds), beta=beta, affinity=affinity, categories=categories)
    return load_config(write_config(tmp_path, body, name or f"beta{beta}.toml"))


def test_4_synthetic_neutrality_and_monotonicity(capsys, tmp_path):
    with criterion(capsys, 4, "synthetic beta=0 neutrality; mean IOU monotone in beta over 20 seeds"):
        t0 = time.perf_counter()
        art = run(_synth(tmp_path, 0.0, range(5)), save=False)
        scored = [r for r in art.records if r.attribute_id != "neutral"]
        assert len(scored) == 13 * 5
        assert all(r.scores == {"iou": 0.0, "serp": 0.0, "prag": 0.0, "degraded_input": False} for r in scored)

        means = []
        for beta in (0.0, 0.5, 1.0, 2.0):
            cfg = _synth(tmp_path, beta, range(20), categories='["gender"]', affinity='boy = ["genre:action"]')
            boy = [r.scores["iou"] for r in run(cfg, save=False).records if r.attribute_id == "boy"]
            assert len(boy) == 20
            means.append(sum(boy) / 20)
        with capsys.disabled():
            print("\n  mean B_IOU by beta {0, 0.5, 1, 2}: " + ", ".join(f"{m:.4f}" for m in means))
        assert means[0] == 0.0
        assert means[-1] > means[0]
        assert all(x <= y for x, y in zip(means, means[1:]))
        assert time.perf_counter() - t0 < 30.0


# ------------------------------------------------------------------ 5


def test_5_parser_corpus_and_round_trip(capsys, catalogs):
    with criterion(capsys, 5, "parser corpus 100% agreement; 500 synthetic round-trips"):
        twins = sorted(RESPONSES.glob("*.json"))
        assert len(twins) >= 20
        names = " ".join(p.stem for p in twins)
        assert "repetition" in names and "hallucinat" in names
        for twin in twins:
            spec = json.loads(twin.read_text())
            text = twin.with_suffix(".txt").read_text(encoding="utf-8")
            cat = catalogs[spec["catalog"]]
            if "expected_error" in spec:
                with pytest.raises(EmptyParse):
                    parse_response(text, cat, spec["k"], spec["fuzzy_threshold"])
                continue
            got = parse_response(text, cat, spec["k"], spec["fuzzy_threshold"])
            exp = spec["expected"]
            assert list(got.item_ids) == exp["item_ids"], twin.name
            assert got.degraded == exp["degraded"], twin.name
            assert got.diagnostics.as_dict() == exp["diagnostics"], twin.name

        rng = random.Random(5)
        attrs = builtin_attributes()
        tags = ["genre:action", "genre:romance", "decade:1980s", "continent:asia", "region:western"]
        for _ in range(500):
            cat = catalogs[rng.choice(sorted(catalogs))]
            k = rng.randint(1, 20)
            attr = rng.choice(attrs)
            model = SyntheticBiasModel(rng.choice([0.0, 0.5, 1.5, 4.0]), {attr.id: frozenset({rng.choice(tags)})})
            spec = rng.choice([NEUTRAL, UserSpec(attr)])
            seed = rng.randrange(10_000)
            text = synth_complete(model, spec, cat, k, seed).text
            parsed = parse_response(text, cat, k)
            assert list(parsed.item_ids) == synth_rank(model, spec, cat, k, seed)
            assert not parsed.degraded


# ------------------------------------------------------------------ 6


class _Interrupting:
    def __init__(self, inner, after):
        self.inner, self.after, self.calls = inner, after, 0
        self.backend_id = inner.backend_id
        self.lock = threading.Lock()

    def complete(self, prompt, params):
        with self.lock:
            self.calls += 1
            if self.calls > self.after:
                raise KeyboardInterrupt
        return self.inner.complete(prompt, params)


def test_6_end_to_end_determinism(capsys, tmp_path):
    with criterion(capsys, 6, "byte-identical reports across reruns; interrupted run resumes to same digest"):
        outputs = []
        for name in ("first", "second"):
            d = tmp_path / name
            d.mkdir()
            cfg = _synth(d, 1.5, range(5))
            art = run(cfg)
            paths = emit_report([art], d / "report")
            outputs.append({p.name: p.read_bytes() for p in paths})
        assert outputs[0].keys() == outputs[1].keys()
        assert len(outputs[0]) == 7
        for name in outputs[0]:
            assert outputs[0][name] == outputs[1][name], name

        clean_dir = tmp_path / "first"
        resume_dir = tmp_path / "resume"
        resume_dir.mkdir()
        cfg = _synth(resume_dir, 1.5, range(5))
        total = (len(cfg.attributes) + 1) * len(cfg.seeds)
        with pytest.raises(KeyboardInterrupt):
            run(cfg, _Interrupting(build_backend(cfg), total // 2))
        resumed = run(cfg)
        assert resumed.stats["cache_hits"] >= total // 2
        clean = RunArtifact.load(artifact_dir(_synth(clean_dir, 1.5, range(5))))
        assert resumed.digest() == clean.digest()


# ------------------------------------------------------------------ 7


def _bars(svg):
    import re

    return [dict(re.findall(r'(data-[a-z]+|height)="([^"]*)"', m)) for m in re.findall(r'<rect class="bar"[^>]*>', svg)]


def test_7_reference_table_and_ratio_chart(capsys, tmp_path):
    with criterion(capsys, 7, "two-model comparison best flags and proportional tag-ratio bar heights via report"):
        import csv

        table_dirs = [p for p in find_artifacts(FIXTURE_ARTIFACTS) if p.name.startswith("comparison-")]
        assert len(table_dirs) == 6
        emit_report([RunArtifact.load(p) for p in table_dirs], tmp_path / "t1")
        with open(tmp_path / "t1" / "model_comparison.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        best = {(r["dataset"], r["metric"]): r["model"] for r in rows if r["best"] == "true"}
        assert best == COMPARISON_BEST
        assert all((r["best"] == "true") == (best[r["dataset"], r["metric"]] == r["model"]) for r in rows)

        emit_report([RunArtifact.load(FIXTURE_ARTIFACTS / "action-ratio")], tmp_path / "f3")
        bars = {b["data-label"]: float(b["height"]) for b in _bars((tmp_path / "f3" / "tag_ratio_bar.svg").read_text())}
        assert list(bars) == list(ACTION_RATIOS)
        scale = bars["neutral"] / ACTION_RATIOS["neutral"]
        for label, ratio in ACTION_RATIOS.items():
            assert abs(bars[label] / (scale * ratio) - 1) <= 0.005, label
            assert abs(bars[label] / (240 * ratio) - 1) <= 0.005, label


# ------------------------------------------------------------------ 8


class _Gauge:
    backend_id = "gauge"

    def __init__(self):
        self.active = self.peak = self.calls = 0
        self.lock = threading.Lock()

    def complete(self, prompt, params):
        with self.lock:
            self.active += 1
            self.calls += 1
            self.peak = max(self.peak, self.active)
        time.sleep(0.003)
        with self.lock:
            self.active -= 1
        return RawResponse(fingerprint(prompt.text, self.backend_id, params), self.backend_id, "1. Heat\n2. Aliens")


@pytest.mark.parametrize("limit", [1, 4, 16])
def test_8_concurrency_contract(capsys, tmp_path, limit):
    with criterion(capsys, 8, f"in-flight requests never exceed max_concurrency={limit} over 200 records"):
        body = f"""
k = 20
seeds = {list(range(40))}
max_concurrency = {limit}

[backend]
kind = "synthetic"

[catalog]
path = "@CATALOGS@/movie.csv"

[attributes]
categories = ["gender"]
"""
        cfg = load_config(write_config(tmp_path, body))
        gauge = _Gauge()
        art = run(cfg, gauge, save=False)
        assert len(art.records) == 200 and gauge.calls == 200
        assert 1 <= gauge.peak <= limit
        with capsys.disabled():
            print(f"\n  peak in-flight = {gauge.peak}")
