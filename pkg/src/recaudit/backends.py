"""Completion sources: live chat-completion endpoint, fixture store, synthetic model."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

import httpx

from . import kernels
from .catalog import Catalog
from .errors import (
    AuthFailure,
    EndpointUnreachable,
    FixtureMiss,
    KTooLarge,
    RetriesExhausted,
)
from .promptgen import PromptInstance, UserSpec

log = logging.getLogger(__name__)

API_KEY_ENV = "AUDIT_API_KEY"
TOKENS_PER_ITEM = 24
RETRYABLE_STATUS = frozenset({408, 425, 429, 500, 502, 503, 504})


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.7
    max_tokens: int = 1024
    seed: int = 0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")

    def check_budget(self, k: int, per_item: int = TOKENS_PER_ITEM) -> None:
        if self.max_tokens < k * per_item:
            raise ValueError(f"max_tokens={self.max_tokens} below {k}x{per_item} token budget")

    def with_seed(self, seed: int) -> "DecodingParams":
        return DecodingParams(self.temperature, self.max_tokens, seed)

    def as_dict(self) -> dict:
        return {"temperature": self.temperature, "max_tokens": self.max_tokens, "seed": self.seed}


@dataclass(frozen=True)
class RawResponse:
    prompt_fingerprint: str
    backend_id: str
    text: str
    latency_ms: float = 0.0
    retrieved_from_cache: bool = False


def fingerprint(text: str, backend_id: str, params: DecodingParams) -> str:
    payload = json.dumps(
        {"text": text, "backend": backend_id, "params": params.as_dict()},
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Backend(Protocol):
    backend_id: str

    def complete(self, prompt: PromptInstance, params: DecodingParams) -> RawResponse: ...


def complete(prompt: PromptInstance, params: DecodingParams, backend: Backend) -> RawResponse:
    return backend.complete(prompt, params)


# ---------------------------------------------------------------- live


def _safe_id(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", text).strip("-") or "model"


class LiveBackend:
    """Client for a ``/v1/chat/completions`` endpoint with retry and a concurrency cap."""

    def __init__(
        self,
        base_url: str,
        model: str,
        *,
        api_key: str | None = None,
        timeout: float = 120.0,
        max_retries: int = 3,
        backoff_base: float = 1.0,
        backoff_max: float = 30.0,
        max_concurrency: int = 4,
        send_seed: bool = True,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.backend_id = f"live-{_safe_id(model)}"
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.backoff_max = backoff_max
        self.send_seed = send_seed
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_concurrency)
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(
            headers=headers,
            timeout=timeout,
            transport=transport,
            limits=httpx.Limits(max_connections=max_concurrency),
        )
        self.requests_sent = 0

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _body(self, prompt: PromptInstance, params: DecodingParams) -> dict:
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        if self.send_seed:
            body["seed"] = params.seed
        return body

    def _delay(self, attempt: int) -> float:
        return min(self.backoff_max, self.backoff_base * 2**attempt)

    def complete(self, prompt: PromptInstance, params: DecodingParams) -> RawResponse:
        url = f"{self.base_url}/v1/chat/completions"
        body = self._body(prompt, params)
        fp = fingerprint(prompt.text, self.backend_id, params)
        last: str = ""
        unreachable = False
        with self._slots:
            start = time.perf_counter()
            for attempt in range(self.max_retries + 1):
                if attempt:
                    self._sleep(self._delay(attempt - 1))
                self.requests_sent += 1
                try:
                    resp = self._client.post(url, json=body)
                except (httpx.ConnectError, httpx.ConnectTimeout) as exc:
                    unreachable, last = True, f"connect failed: {exc}"
                    continue
                except httpx.TimeoutException as exc:
                    unreachable, last = False, f"timeout: {exc}"
                    continue
                except httpx.TransportError as exc:
                    unreachable, last = True, f"transport error: {exc}"
                    continue
                unreachable = False
                if resp.status_code in (401, 403):
                    raise AuthFailure(f"{url} answered {resp.status_code}")
                if resp.status_code in RETRYABLE_STATUS:
                    last = f"HTTP {resp.status_code}"
                    log.warning("retryable %s from %s (attempt %d)", last, url, attempt + 1)
                    continue
                if resp.status_code >= 400:
                    raise RetriesExhausted(f"{url} answered {resp.status_code}: {resp.text[:200]}")
                text = _extract_content(resp)
                latency = (time.perf_counter() - start) * 1000.0
                return RawResponse(fp, self.backend_id, text, latency, False)
        if unreachable:
            raise EndpointUnreachable(f"{url} unreachable after {self.max_retries + 1} attempts ({last})")
        raise RetriesExhausted(f"{url} failed after {self.max_retries + 1} attempts ({last})")


def _extract_content(resp: httpx.Response) -> str:
    try:
        data = resp.json()
        content = data["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise RetriesExhausted(f"malformed completion payload: {exc}") from exc
    return content if isinstance(content, str) else ""


# ---------------------------------------------------------------- fixtures


class FixtureBackend:
    """Serves pre-recorded completions from ``{directory}/{fingerprint}.txt``."""

    def __init__(self, directory: str | Path, backend_id: str = "fixture"):
        self.directory = Path(directory)
        self.backend_id = backend_id

    def path_for(self, fp: str) -> Path:
        return self.directory / f"{fp}.txt"

    def store(self, prompt: PromptInstance, params: DecodingParams, text: str) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.path_for(fingerprint(prompt.text, self.backend_id, params))
        path.write_text(text, encoding="utf-8")
        return path

    def complete(self, prompt: PromptInstance, params: DecodingParams) -> RawResponse:
        fp = fingerprint(prompt.text, self.backend_id, params)
        path = self.path_for(fp)
        if not path.is_file():
            raise FixtureMiss(f"no fixture for fingerprint {fp}")
        return RawResponse(fp, self.backend_id, path.read_text(encoding="utf-8"), 0.0, True)


# ---------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class SyntheticBiasModel:
    """Plackett-Luce recommender whose item weights depend on the user.

    An item's weight is multiplied by ``exp(bias_strength)`` when it carries a
    tag in ``affinity[attribute_id]`` and by ``exp(context_strength)`` when it
    carries a tag in ``context_affinity[context]``.
    """

    bias_strength: float = 0.0
    affinity: Mapping[str, frozenset[str]] = field(default_factory=dict)
    base_weights: tuple[float, ...] | None = None
    context_affinity: Mapping[str, frozenset[str]] = field(default_factory=dict)
    context_strength: float = 0.0

    def __post_init__(self) -> None:
        if self.bias_strength < 0 or self.context_strength < 0:
            raise ValueError("bias strengths must be non-negative")
        if self.base_weights is not None and any(not (w > 0) for w in self.base_weights):
            raise ValueError("base weights must be strictly positive")

    def digest(self) -> str:
        payload = json.dumps(
            {
                "beta": self.bias_strength,
                "affinity": {k: sorted(v) for k, v in sorted(self.affinity.items())},
                "base": list(self.base_weights) if self.base_weights is not None else None,
                "context_affinity": {k: sorted(v) for k, v in sorted(self.context_affinity.items())},
                "gamma": self.context_strength,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    def weights(self, user_spec: UserSpec, catalog: Catalog) -> list[float]:
        if self.base_weights is not None:
            if len(self.base_weights) != len(catalog):
                raise ValueError("base_weights length differs from catalog size")
            base = list(self.base_weights)
        else:
            base = [1.0 / (i + 1) for i in range(len(catalog))]
        boosted = frozenset() if user_spec.is_neutral else self.affinity.get(user_spec.attribute_id, frozenset())
        ctx_tags = self.context_affinity.get(user_spec.context, frozenset()) if user_spec.context else frozenset()
        attr_mult = math.exp(self.bias_strength)
        ctx_mult = math.exp(self.context_strength)
        out = []
        for w, item in zip(base, catalog.items):
            if boosted and item.tags & boosted:
                w *= attr_mult
            if ctx_tags and item.tags & ctx_tags:
                w *= ctx_mult
            out.append(w)
        return out


def draw_uniforms(seed: int, catalog_hash: str, k: int) -> list[float]:
    """Common random numbers for one (seed, catalog) pair.

    Every user spec consumes the same stream, so the only thing that changes
    a draw between users is the weight vector.
    """
    key = hashlib.sha256(f"{seed}|{catalog_hash}".encode()).digest()
    rng = random.Random(int.from_bytes(key, "big"))
    return [rng.random() for _ in range(k)]


def synth_rank(model: SyntheticBiasModel, user_spec: UserSpec, catalog: Catalog, k: int, seed: int) -> list[str]:
    if k > len(catalog):
        raise KTooLarge(f"k={k} exceeds catalog size {len(catalog)}")
    weights = model.weights(user_spec, catalog)
    picks = kernels.pl_draw(weights, draw_uniforms(seed, catalog.content_hash, k), k)
    return [catalog.items[i].id for i in picks]


CORRUPTIONS = ("repeat", "hallucinate")
HALLUCINATED_TITLE = "Zyxqv Wombat Quarrel Ninety Nine"


def format_numbered(titles: Sequence[str]) -> str:
    return "\n".join(f"{i}. {t}" for i, t in enumerate(titles, 1))


def synth_text(
    model: SyntheticBiasModel,
    user_spec: UserSpec,
    catalog: Catalog,
    k: int,
    seed: int,
    corruption: str | None = None,
) -> str:
    titles = [catalog.get(i).title for i in synth_rank(model, user_spec, catalog, k, seed)]
    # corruptions overwrite a slot so the parsed list comes back short
    if corruption == "repeat" and k > 1:
        titles[1] = titles[0]
    elif corruption == "hallucinate":
        titles[len(titles) // 2] = HALLUCINATED_TITLE
    elif corruption is not None:
        raise ValueError(f"unknown corruption {corruption!r}")
    return format_numbered(titles)


def synth_complete(
    model: SyntheticBiasModel,
    user_spec: UserSpec,
    catalog: Catalog,
    k: int,
    seed: int,
    corruption: str | None = None,
    backend_id: str = "synthetic",
) -> RawResponse:
    text = synth_text(model, user_spec, catalog, k, seed, corruption)
    key = hashlib.sha256(f"{backend_id}|{user_spec.key()}|{catalog.content_hash}|{k}|{seed}".encode()).hexdigest()
    return RawResponse(key, backend_id, text, 0.0, False)


class SyntheticBackend:
    """Backend adapter around :func:`synth_text`; knows catalogs by content hash."""

    def __init__(self, model: SyntheticBiasModel, catalogs: Sequence[Catalog], corruption: str | None = None):
        self.model = model
        self.corruption = corruption
        self._catalogs = {c.content_hash: c for c in catalogs}
        suffix = f"-{corruption}" if corruption else ""
        self.backend_id = f"synthetic-{model.digest()}{suffix}"

    def complete(self, prompt: PromptInstance, params: DecodingParams) -> RawResponse:
        catalog = self._catalogs[prompt.catalog_hash]
        start = time.perf_counter()
        text = synth_text(self.model, prompt.user_spec, catalog, prompt.k, params.seed, self.corruption)
        latency = (time.perf_counter() - start) * 1000.0
        return RawResponse(fingerprint(prompt.text, self.backend_id, params), self.backend_id, text, latency, False)
