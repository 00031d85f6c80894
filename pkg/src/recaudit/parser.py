"""Turn raw completion text into a catalog-validated ranked list."""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field

from .catalog import DEFAULT_FUZZY_THRESHOLD, Catalog, match_item
from .errors import EmptyParse

_MARKER = re.compile(r"^\s*(\d+[\.\)]|[-*•])\s+")
_YEAR = re.compile(r"\s*\(\d{4}\)\s*$")
_EDGE_EMPHASIS = re.compile(r"^[*_`]+|[*_`]+$")
_QUOTE_PAIRS = {'"': '"', "'": "'", "“": "”", "‘": "’", "«": "»"}


@dataclass
class ParseDiagnostics:
    raw_lines: int = 0
    unmatched: int = 0
    duplicates_removed: int = 0
    fuzzy_matched: int = 0

    def as_dict(self) -> dict[str, int]:
        return asdict(self)


@dataclass(frozen=True)
class RankedList:
    item_ids: tuple[str, ...]
    k_requested: int
    diagnostics: ParseDiagnostics = field(default_factory=ParseDiagnostics, compare=False)

    def __post_init__(self) -> None:
        if len(set(self.item_ids)) != len(self.item_ids):
            raise ValueError("ranked list contains duplicate ids")
        if len(self.item_ids) > self.k_requested:
            raise ValueError("ranked list longer than k_requested")

    @property
    def degraded(self) -> bool:
        return len(self.item_ids) < self.k_requested

    def __len__(self) -> int:
        return len(self.item_ids)

    def __iter__(self):
        return iter(self.item_ids)

    def ranks(self) -> dict[str, int]:
        """1-based rank of every item."""
        return {item: r for r, item in enumerate(self.item_ids, 1)}


def _clean(candidate: str) -> str:
    prev = None
    s = candidate.strip()
    while s != prev:
        prev = s
        s = _EDGE_EMPHASIS.sub("", s).strip()
        if len(s) >= 2 and _QUOTE_PAIRS.get(s[0]) == s[-1]:
            s = s[1:-1].strip()
        s = _YEAR.sub("", s).strip()
        # "**1. Title**": the marker hides behind emphasis
        s = _MARKER.sub("", s, count=1).strip()
    return s


def extract_candidates(text: str) -> list[str]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    marked = [ln for ln in lines if _MARKER.match(ln)]
    if marked:
        raw = [_MARKER.sub("", ln, count=1) for ln in marked]
    else:
        raw = lines
    out = []
    for r in raw:
        c = _clean(r)
        if c:
            out.append(c)
    return out


def parse_response(
    text: str,
    catalog: Catalog,
    k: int,
    fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD,
) -> RankedList:
    """Match candidates against ``catalog``; keep the first ``k`` distinct hits.

    Raises :class:`EmptyParse` when nothing matches.
    """
    diag = ParseDiagnostics(raw_lines=sum(1 for ln in text.splitlines() if ln.strip()))
    accepted: list[str] = []
    seen: set[str] = set()
    for cand in extract_candidates(text):
        if len(accepted) >= k:
            break
        m = match_item(catalog, cand, fuzzy_threshold)
        if m.kind == "none":
            diag.unmatched += 1
            continue
        if m.item_id in seen:
            diag.duplicates_removed += 1
            continue
        if m.kind == "fuzzy":
            diag.fuzzy_matched += 1
        seen.add(m.item_id)
        accepted.append(m.item_id)
    if not accepted:
        raise EmptyParse(f"no catalog items recognised in response ({diag.raw_lines} lines)")
    return RankedList(tuple(accepted), k, diag)
