"""Recommendation catalogs: loading, title normalization and item matching."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

from . import kernels
from .errors import (
    DuplicateId,
    DuplicateNormalizedTitle,
    EmptyCatalog,
    MalformedRow,
    MissingFile,
)

DEFAULT_FUZZY_THRESHOLD = 0.2
CSV_HEADER = ("id", "title", "tags")

_WS = re.compile(r"\s+")


def normalize_title(raw: str) -> str:
    """Canonical matching key for a title.

    NFKD with combining marks dropped, lowercased, anything that is not a
    letter, digit or whitespace removed, whitespace collapsed and trimmed.
    """
    decomposed = unicodedata.normalize("NFKD", raw)
    stripped = "".join(c for c in decomposed if not unicodedata.combining(c))
    lowered = stripped.lower()
    kept = "".join(c if (c.isalnum() or c.isspace()) and not unicodedata.combining(c) else "" for c in lowered)
    return _WS.sub(" ", kept).strip()


@dataclass(frozen=True)
class Item:
    id: str
    title: str
    tags: frozenset[str] = frozenset()

    def has_tag(self, tag: str) -> bool:
        return tag in self.tags


@dataclass(frozen=True)
class MatchResult:
    kind: str  # "exact" | "fuzzy" | "none"
    item_id: str | None = None
    distance: float = 1.0


@dataclass(frozen=True)
class Catalog:
    domain: str
    items: tuple[Item, ...]
    content_hash: str = field(default="")
    _normalized: tuple[str, ...] = field(default=(), repr=False, compare=False)
    _by_norm: dict = field(default_factory=dict, repr=False, compare=False)
    _by_id: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.items:
            raise EmptyCatalog(f"catalog {self.domain!r} has no items")
        by_id: dict[str, int] = {}
        by_norm: dict[str, int] = {}
        normalized = []
        for idx, item in enumerate(self.items):
            if item.id in by_id:
                raise DuplicateId(f"duplicate item id {item.id!r}")
            by_id[item.id] = idx
            norm = normalize_title(item.title)
            if norm in by_norm:
                raise DuplicateNormalizedTitle((self.items[by_norm[norm]].id, item.id), norm)
            by_norm[norm] = idx
            normalized.append(norm)
        object.__setattr__(self, "_normalized", tuple(normalized))
        object.__setattr__(self, "_by_norm", by_norm)
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "content_hash", _content_hash(self.items))

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[Item]:
        return iter(self.items)

    def __contains__(self, item_id: object) -> bool:
        return item_id in self._by_id

    @property
    def titles(self) -> list[str]:
        return [it.title for it in self.items]

    @property
    def normalized_titles(self) -> tuple[str, ...]:
        return self._normalized

    def get(self, item_id: str) -> Item:
        return self.items[self._by_id[item_id]]

    def index_of(self, item_id: str) -> int:
        return self._by_id[item_id]

    def ids_with_tag(self, tag: str) -> set[str]:
        return {it.id for it in self.items if tag in it.tags}


def _content_hash(items: Sequence[Item]) -> str:
    canonical = json.dumps(
        [[it.id, it.title, sorted(it.tags)] for it in items],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _parse_tags(raw: str, line: int) -> frozenset[str]:
    tags = set()
    for part in raw.split(";"):
        part = part.strip()
        if not part:
            continue
        ns, sep, value = part.partition(":")
        if not sep or not ns.strip() or not value.strip():
            raise MalformedRow(line, f"tag {part!r} is not of the form namespace:value")
        tags.add(part)
    return frozenset(tags)


def parse_catalog(text: str, domain: str) -> Catalog:
    """Build a catalog from CSV text with header ``id,title,tags``."""
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyCatalog(f"catalog {domain!r} is empty") from None
    if header and header[0].startswith("﻿"):
        header[0] = header[0][1:]
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise MalformedRow(1, f"expected header {','.join(CSV_HEADER)}, got {','.join(header)}")
    items = []
    seen: set[str] = set()
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) not in (2, 3):
            raise MalformedRow(line, f"expected 3 columns, got {len(row)}")
        item_id = row[0].strip()
        title = row[1].strip()
        if not item_id or any(c.isspace() for c in item_id):
            raise MalformedRow(line, f"bad item id {row[0]!r}")
        if not title:
            raise MalformedRow(line, "empty title")
        if item_id in seen:
            raise DuplicateId(f"line {line}: duplicate item id {item_id!r}")
        seen.add(item_id)
        tags = _parse_tags(row[2] if len(row) == 3 else "", line)
        items.append(Item(item_id, title, tags))
    if not items:
        raise EmptyCatalog(f"catalog {domain!r} has no items")
    return Catalog(domain, tuple(items))


def load_catalog(path: str | Path, domain: str | None = None) -> Catalog:
    """Load a catalog CSV; ``domain`` defaults to the file stem."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"catalog file not found: {path}")
    text = path.read_text(encoding="utf-8")
    return parse_catalog(text, domain or path.stem)


def match_item(catalog: Catalog, raw: str, fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD) -> MatchResult:
    if not 0.0 <= fuzzy_threshold <= 1.0:
        raise ValueError("fuzzy_threshold must lie in [0, 1]")
    norm = normalize_title(raw)
    if not norm:
        return MatchResult("none")
    idx = catalog._by_norm.get(norm)
    if idx is not None:
        return MatchResult("exact", catalog.items[idx].id, 0.0)
    best_idx, dist = kernels.nearest(norm, catalog.normalized_titles)
    if best_idx >= 0 and dist <= fuzzy_threshold:
        return MatchResult("fuzzy", catalog.items[best_idx].id, dist)
    return MatchResult("none")


def dump_catalog(catalog: Catalog) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for it in catalog.items:
        writer.writerow([it.id, it.title, ";".join(sorted(it.tags))])
    return buf.getvalue()
