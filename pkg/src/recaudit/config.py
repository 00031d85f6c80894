"""Experiment configuration: TOML document -> validated :class:`ExperimentConfig`."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .catalog import DEFAULT_FUZZY_THRESHOLD, Catalog, load_catalog
from .errors import CatalogError, InvalidField, MissingCatalog, ParseError, UnknownCategory
from .metrics import PRAG_MODES
from .promptgen import (
    CATEGORIES,
    DEFAULT_TEMPLATE_ID,
    SensitiveAttribute,
    builtin_attributes,
    custom_attribute,
    load_template,
)

BACKEND_KINDS = ("live", "fixture", "synthetic")
DEFAULT_SEEDS = (0, 1, 2, 3, 4)

_TOP_KEYS = {
    "backend", "catalog", "attributes", "context", "k", "seeds", "decoding",
    "fuzzy_threshold", "prag_mode", "max_concurrency", "cache_dir", "output_dir",
    "template", "template_file", "tags", "dataset_label",
}
_BACKEND_KEYS = {
    "kind", "url", "model", "fixture_dir", "fixture_id", "bias_strength", "affinity",
    "context_affinity", "context_strength", "corruption", "max_retries", "timeout",
    "backoff_base", "send_seed",
}


@dataclass(frozen=True)
class BackendSpec:
    kind: str
    url: str | None = None
    model: str | None = None
    fixture_dir: Path | None = None
    fixture_id: str = "fixture"
    bias_strength: float = 0.0
    affinity: Mapping[str, frozenset[str]] = field(default_factory=dict)
    context_affinity: Mapping[str, frozenset[str]] = field(default_factory=dict)
    context_strength: float = 0.0
    corruption: str | None = None
    max_retries: int = 3
    timeout: float = 120.0
    backoff_base: float = 1.0
    send_seed: bool = True

    @property
    def model_label(self) -> str:
        if self.kind == "synthetic":
            return self.model or f"synthetic-beta{self.bias_strength:g}"
        if self.kind == "fixture":
            return self.model or self.fixture_id
        return self.model or "live"


@dataclass(frozen=True)
class ExperimentConfig:
    backend: BackendSpec
    catalog_path: Path
    catalog: Catalog
    attributes: tuple[SensitiveAttribute, ...]
    context: str | None = None
    k: int = 20
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    temperature: float = 0.7
    max_tokens: int = 1024
    fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD
    prag_mode: str = "corrected"
    max_concurrency: int = 4
    cache_dir: Path = Path("cache")
    output_dir: Path = Path("runs")
    template_id: str = DEFAULT_TEMPLATE_ID
    tags: tuple[str, ...] = ()
    dataset_label: str = ""
    digest: str = ""

    def canonical(self) -> dict[str, Any]:
        """Result-affecting settings only; paths and concurrency are excluded."""
        b = self.backend
        return {
            "backend": {
                "kind": b.kind,
                "url": b.url,
                "model": b.model,
                "fixture_id": b.fixture_id if b.kind == "fixture" else None,
                "bias_strength": b.bias_strength,
                "affinity": {k: sorted(v) for k, v in sorted(b.affinity.items())},
                "context_affinity": {k: sorted(v) for k, v in sorted(b.context_affinity.items())},
                "context_strength": b.context_strength,
                "corruption": b.corruption,
            },
            "catalog_hash": self.catalog.content_hash,
            "domain": self.catalog.domain,
            "attributes": [[a.id, a.category, a.phrase] for a in self.attributes],
            "context": self.context,
            "k": self.k,
            "seeds": list(self.seeds),
            "decoding": {"temperature": self.temperature, "max_tokens": self.max_tokens},
            "fuzzy_threshold": self.fuzzy_threshold,
            "prag_mode": self.prag_mode,
            "template_id": self.template_id,
            "tags": list(self.tags),
            "dataset_label": self.dataset_label,
        }


def _digest(doc: Mapping[str, Any]) -> str:
    blob = json.dumps(doc, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _num(raw: Mapping, key: str, default, kind=float, *, where: str = ""):
    name = f"{where}{key}"
    if key not in raw:
        return default
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidField(name, "must be a number")
    if kind is int:
        if not isinstance(value, int):
            raise InvalidField(name, "must be an integer")
        return value
    return float(value)


def _tag_map(raw: Any, name: str) -> dict[str, frozenset[str]]:
    if raw is None:
        return {}
    if not isinstance(raw, Mapping):
        raise InvalidField(name, "must be a table of lists of tags")
    out = {}
    for key, tags in raw.items():
        if isinstance(tags, str):
            tags = [tags]
        if not isinstance(tags, list) or not all(isinstance(t, str) and ":" in t for t in tags):
            raise InvalidField(f"{name}.{key}", "must be a list of namespace:value tags")
        out[str(key)] = frozenset(tags)
    return out


def _backend(raw: Any, base: Path) -> BackendSpec:
    if not isinstance(raw, Mapping):
        raise InvalidField("backend", "missing or not a table")
    unknown = set(raw) - _BACKEND_KEYS
    if unknown:
        raise InvalidField(f"backend.{sorted(unknown)[0]}", "unknown key")
    kind = raw.get("kind")
    if kind not in BACKEND_KINDS:
        raise InvalidField("backend.kind", f"must be one of {', '.join(BACKEND_KINDS)}")
    fixture_dir = None
    if kind == "live" and not raw.get("url"):
        raise InvalidField("backend.url", "required for live backends")
    if kind == "live" and not raw.get("model"):
        raise InvalidField("backend.model", "required for live backends")
    if kind == "fixture":
        if not raw.get("fixture_dir"):
            raise InvalidField("backend.fixture_dir", "required for fixture backends")
        fixture_dir = (base / raw["fixture_dir"]).resolve()
    beta = _num(raw, "bias_strength", 0.0, where="backend.")
    gamma = _num(raw, "context_strength", 0.0, where="backend.")
    if beta < 0:
        raise InvalidField("backend.bias_strength", "must be >= 0")
    if gamma < 0:
        raise InvalidField("backend.context_strength", "must be >= 0")
    corruption = raw.get("corruption")
    if corruption not in (None, "repeat", "hallucinate"):
        raise InvalidField("backend.corruption", "must be 'repeat' or 'hallucinate'")
    max_retries = _num(raw, "max_retries", 3, int, where="backend.")
    if max_retries < 0:
        raise InvalidField("backend.max_retries", "must be >= 0")
    timeout = _num(raw, "timeout", 120.0, where="backend.")
    if timeout <= 0:
        raise InvalidField("backend.timeout", "must be > 0")
    return BackendSpec(
        kind=kind,
        url=raw.get("url"),
        model=raw.get("model"),
        fixture_dir=fixture_dir,
        fixture_id=str(raw.get("fixture_id", "fixture")),
        bias_strength=beta,
        affinity=_tag_map(raw.get("affinity"), "backend.affinity"),
        context_affinity=_tag_map(raw.get("context_affinity"), "backend.context_affinity"),
        context_strength=gamma,
        corruption=corruption,
        max_retries=max_retries,
        timeout=timeout,
        backoff_base=_num(raw, "backoff_base", 1.0, where="backend."),
        send_seed=bool(raw.get("send_seed", True)),
    )


def _attributes(raw: Any) -> tuple[SensitiveAttribute, ...]:
    if raw is None:
        return tuple(builtin_attributes())
    if not isinstance(raw, Mapping):
        raise InvalidField("attributes", "must be a table")
    out: list[SensitiveAttribute] = []
    cats = raw.get("categories", [])
    if not isinstance(cats, list):
        raise InvalidField("attributes.categories", "must be a list")
    for cat in cats:
        try:
            out.extend(builtin_attributes(cat))
        except UnknownCategory:
            raise InvalidField("attributes.categories", f"unknown category {cat!r}") from None
    for entry in raw.get("custom", []):
        if isinstance(entry, str):
            entry = {"phrase": entry}
        if not isinstance(entry, Mapping) or not str(entry.get("phrase", "")).strip():
            raise InvalidField("attributes.custom", "entries need a non-empty phrase")
        category = entry.get("category", "custom")
        if category not in CATEGORIES:
            raise InvalidField("attributes.custom", f"unknown category {category!r}")
        out.append(custom_attribute(entry["phrase"], category, entry.get("id")))
    ids = [a.id for a in out]
    if len(set(ids)) != len(ids):
        raise InvalidField("attributes", "attribute ids must be unique")
    if not out:
        raise InvalidField("attributes", "no attributes selected")
    return tuple(out)


def validate_config(raw: Mapping[str, Any], base_dir: str | Path = ".") -> ExperimentConfig:
    """Check a parsed config document and fill defaults."""
    base = Path(base_dir)
    if not isinstance(raw, Mapping):
        raise ParseError("<root>", "config must be a table")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise InvalidField(sorted(unknown)[0], "unknown key")
    backend = _backend(raw.get("backend"), base)

    cat_raw = raw.get("catalog")
    if isinstance(cat_raw, str):
        cat_raw = {"path": cat_raw}
    if not isinstance(cat_raw, Mapping) or "path" not in cat_raw:
        raise InvalidField("catalog", "a catalog path is required")
    cat_path = (base / cat_raw["path"]).resolve()
    if not cat_path.is_file():
        raise MissingCatalog(str(cat_path))
    try:
        catalog = load_catalog(cat_path, cat_raw.get("domain"))
    except CatalogError as exc:
        raise InvalidField("catalog", str(exc)) from exc

    k = _num(raw, "k", 20, int)
    if k < 1:
        raise InvalidField("k", "must be >= 1")
    if k > len(catalog):
        raise InvalidField("k", f"exceeds catalog size {len(catalog)}")
    seeds = raw.get("seeds", list(DEFAULT_SEEDS))
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise InvalidField("seeds", "must be a non-empty list of integers")
    if len(set(seeds)) != len(seeds):
        raise InvalidField("seeds", "seeds must be distinct")
    if any(s < 0 for s in seeds):
        raise InvalidField("seeds", "seeds must be non-negative")

    dec = raw.get("decoding", {})
    if not isinstance(dec, Mapping):
        raise InvalidField("decoding", "must be a table")
    temperature = _num(dec, "temperature", 0.7, where="decoding.")
    max_tokens = _num(dec, "max_tokens", 1024, int, where="decoding.")
    if temperature < 0:
        raise InvalidField("decoding.temperature", "must be >= 0")
    if max_tokens < k * 24:
        raise InvalidField("decoding.max_tokens", f"must be at least k*24 = {k * 24}")

    fuzzy = _num(raw, "fuzzy_threshold", DEFAULT_FUZZY_THRESHOLD)
    if not 0.0 <= fuzzy <= 1.0:
        raise InvalidField("fuzzy_threshold", "must lie in [0, 1]")
    prag_mode = raw.get("prag_mode", "corrected")
    if prag_mode not in PRAG_MODES:
        raise InvalidField("prag_mode", f"must be one of {', '.join(PRAG_MODES)}")
    max_conc = _num(raw, "max_concurrency", 4, int)
    if max_conc < 1:
        raise InvalidField("max_concurrency", "must be >= 1")

    context = raw.get("context")
    if context is not None and (not isinstance(context, str) or not context.strip()):
        raise InvalidField("context", "must be a non-empty string")

    template_id = raw.get("template", DEFAULT_TEMPLATE_ID)
    if "template_file" in raw:
        tpath = base / raw["template_file"]
        if not tpath.is_file():
            raise InvalidField("template_file", f"not found: {tpath}")
        template_id = load_template(tpath, raw.get("template"))

    tags = raw.get("tags", [])
    if not isinstance(tags, list) or not all(isinstance(t, str) and ":" in t for t in tags):
        raise InvalidField("tags", "must be a list of namespace:value tags")

    label = raw.get("dataset_label")
    if label is None:
        label = catalog.domain if context is None else f"{catalog.domain} [{context.strip()}]"

    cfg = ExperimentConfig(
        backend=backend,
        catalog_path=cat_path,
        catalog=catalog,
        attributes=_attributes(raw.get("attributes")),
        context=context.strip() if context else None,
        k=k,
        seeds=tuple(seeds),
        temperature=temperature,
        max_tokens=max_tokens,
        fuzzy_threshold=fuzzy,
        prag_mode=prag_mode,
        max_concurrency=max_conc,
        cache_dir=(base / raw.get("cache_dir", "cache")).resolve(),
        output_dir=(base / raw.get("output_dir", "runs")).resolve(),
        template_id=template_id,
        tags=tuple(tags),
        dataset_label=str(label),
    )
    object.__setattr__(cfg, "digest", _digest(cfg.canonical()))
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(str(path), f"cannot read config: {exc}") from exc
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(str(path), str(exc)) from exc
    return validate_config(raw, path.parent)
