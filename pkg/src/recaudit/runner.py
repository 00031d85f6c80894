"""Config-driven orchestration: prompts -> cached completions -> parses -> scores."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ._io import atomic_write_text
from .analysis import tag_ratio
from .artifact import Record, RunArtifact
from .backends import (
    Backend,
    DecodingParams,
    FixtureBackend,
    LiveBackend,
    SyntheticBackend,
    SyntheticBiasModel,
    fingerprint,
)
from .config import ExperimentConfig
from .errors import AuditError
from .metrics import all_scores
from .parser import RankedList, parse_response
from .promptgen import NEUTRAL_ID, PromptInstance, render_prompt, user_specs

log = logging.getLogger(__name__)


def build_backend(config: ExperimentConfig) -> Backend:
    spec = config.backend
    if spec.kind == "synthetic":
        model = SyntheticBiasModel(
            bias_strength=spec.bias_strength,
            affinity=spec.affinity,
            context_affinity=spec.context_affinity,
            context_strength=spec.context_strength,
        )
        return SyntheticBackend(model, [config.catalog], spec.corruption)
    if spec.kind == "fixture":
        return FixtureBackend(spec.fixture_dir, spec.fixture_id)
    return LiveBackend(
        spec.url,
        spec.model,
        timeout=spec.timeout,
        max_retries=spec.max_retries,
        backoff_base=spec.backoff_base,
        max_concurrency=config.max_concurrency,
        send_seed=spec.send_seed,
    )


class ResponseCache:
    """Raw completion text stored at ``{root}/{backend_id}/{fingerprint}.txt``."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path(self, backend_id: str, fp: str) -> Path:
        return self.root / backend_id / f"{fp}.txt"

    def get(self, backend_id: str, fp: str) -> str | None:
        p = self.path(backend_id, fp)
        if p.is_file():
            return p.read_text(encoding="utf-8")
        return None

    def put(self, backend_id: str, fp: str, text: str) -> None:
        atomic_write_text(self.path(backend_id, fp), text)


@dataclass
class _Job:
    prompt: PromptInstance
    params: DecodingParams
    fp: str
    text: str | None = None
    error: str | None = None
    cached: bool = False


@dataclass
class RunStats:
    cache_hits: int = 0
    cache_misses: int = 0
    backend_calls: int = 0
    backend_errors: int = 0
    started_at: str = ""
    finished_at: str = ""
    wall_clock_s: float = 0.0
    extra: dict = field(default_factory=dict)


def run(config: ExperimentConfig, backend: Backend | None = None, *, save: bool = True) -> RunArtifact:
    """Execute one experiment; per-record failures become exclusion records."""
    backend = backend or build_backend(config)
    cache = ResponseCache(config.cache_dir)
    stats = RunStats(started_at=datetime.now(timezone.utc).isoformat(timespec="seconds"))
    t0 = time.perf_counter()
    catalog = config.catalog
    base_params = DecodingParams(config.temperature, config.max_tokens, 0)

    specs = user_specs(config.attributes, config.context)
    rendered = {s: render_prompt(s, catalog, config.k, config.template_id) for s in specs}
    jobs: list[_Job] = []
    for seed in config.seeds:
        params = base_params.with_seed(seed)
        for s in specs:
            base = rendered[s]
            prompt = PromptInstance(s, base.catalog_hash, base.k, base.template_id, seed, base.text)
            jobs.append(_Job(prompt, params, fingerprint(prompt.text, backend.backend_id, params)))

    pending = []
    for job in jobs:
        hit = cache.get(backend.backend_id, job.fp)
        if hit is not None:
            job.text, job.cached = hit, True
            stats.cache_hits += 1
        else:
            pending.append(job)
    stats.cache_misses = len(pending)

    def call(job: _Job) -> None:
        try:
            resp = backend.complete(job.prompt, job.params)
        except Exception as exc:  # isolate the record; interrupts still propagate
            job.error = f"{type(exc).__name__}: {exc}"
            log.warning("record %s/seed %d failed: %s", job.prompt.user_spec.attribute_id, job.prompt.seed, job.error)
            return
        job.text = resp.text
        cache.put(backend.backend_id, job.fp, resp.text)

    if pending:
        with ThreadPoolExecutor(max_workers=config.max_concurrency) as pool:
            # list() re-raises anything that escaped call(), e.g. KeyboardInterrupt
            list(pool.map(call, pending))
        stats.backend_calls = len(pending)
        stats.backend_errors = sum(1 for j in pending if j.error)

    records: dict[tuple[str, int], Record] = {}
    lists: dict[tuple[str, int], RankedList] = {}
    for job in jobs:
        attr = job.prompt.user_spec.attribute_id
        rec = Record(attr, job.prompt.seed, job.fp, backend.backend_id, job.text)
        records[(attr, job.prompt.seed)] = rec
        if job.error:
            rec.excluded = job.error
            continue
        try:
            ranked = parse_response(job.text or "", catalog, config.k, config.fuzzy_threshold)
        except AuditError as exc:
            rec.excluded = f"{type(exc).__name__}: {exc}"
            log.warning("record %s/seed %d excluded: %s", attr, job.prompt.seed, rec.excluded)
            continue
        lists[(attr, job.prompt.seed)] = ranked
        rec.item_ids = list(ranked.item_ids)
        rec.diagnostics = ranked.diagnostics.as_dict()
        rec.degraded = ranked.degraded
        rec.tag_ratios = {t: tag_ratio(ranked, t, catalog) for t in config.tags}

    for (attr, seed), rec in records.items():
        if attr == NEUTRAL_ID or rec.excluded:
            continue
        neutral = lists.get((NEUTRAL_ID, seed))
        if neutral is None:
            rec.note = "neutral baseline for this seed was excluded; not scored"
            continue
        s = all_scores(lists[(attr, seed)], neutral, config.k, config.prag_mode, attr)
        rec.scores = {"iou": s.b_iou, "serp": s.b_serp, "prag": s.b_prag, "degraded_input": s.degraded_input}

    stats.wall_clock_s = round(time.perf_counter() - t0, 6)
    stats.finished_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
    artifact = RunArtifact(
        config_digest=config.digest,
        model=config.backend.model_label,
        dataset=config.dataset_label,
        domain=catalog.domain,
        catalog_hash=catalog.content_hash,
        k=config.k,
        seeds=list(config.seeds),
        prag_mode=config.prag_mode,
        context=config.context,
        attributes=[{"id": a.id, "category": a.category, "phrase": a.phrase} for a in config.attributes],
        tags=list(config.tags),
        backend_id=backend.backend_id,
        records=[records[(s.attribute_id, seed)] for seed in config.seeds for s in specs],
        stats={
            "cache_hits": stats.cache_hits,
            "cache_misses": stats.cache_misses,
            "backend_calls": stats.backend_calls,
            "backend_errors": stats.backend_errors,
            "started_at": stats.started_at,
            "finished_at": stats.finished_at,
            "wall_clock_s": stats.wall_clock_s,
        },
    )
    if save:
        artifact.save(artifact_dir(config))
    return artifact


def artifact_dir(config: ExperimentConfig) -> Path:
    return config.output_dir / config.digest
