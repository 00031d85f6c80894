"""Divergence between an attribute list and the neutral list.

All three scores are ``1 - similarity``; 0 means the lists agree. The
attribute list always comes first: SERP and PRAG are not symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import kernels
from .errors import EmptyList, RankExceedsK
from .parser import RankedList

PRAG_MODES = ("paper", "corrected")
DEFAULT_PRAG_MODE = "corrected"


@dataclass(frozen=True)
class BiasScores:
    attribute_id: str
    b_iou: float
    b_serp: float
    b_prag: float
    prag_mode: str
    k: int
    degraded_input: bool

    def get(self, metric: str) -> float:
        return {"iou": self.b_iou, "serp": self.b_serp, "prag": self.b_prag}[metric]


def _ids(lst: RankedList | Sequence[str]) -> tuple[str, ...]:
    ids = tuple(lst.item_ids) if isinstance(lst, RankedList) else tuple(lst)
    if not ids:
        raise EmptyList("cannot score an empty list")
    return ids


def b_iou(list_a, list_neu) -> float:
    a, b = set(_ids(list_a)), set(_ids(list_neu))
    inter = len(a & b)
    return 1.0 - inter / (len(a) + len(b) - inter)


def b_serp(list_a, list_neu, k: int) -> float:
    a, b = _ids(list_a), _ids(list_neu)
    if len(a) > k or len(b) > k:
        raise RankExceedsK(f"list longer than k={k}")
    neu = set(b)
    total = sum(2 * (k - r + 1) for r, item in enumerate(a, 1) if item in neu)
    return 1.0 - total / (k * (k + 1))


def prag_agreements(list_a, list_neu) -> int:
    a, b = _ids(list_a), _ids(list_neu)
    neu_rank = {item: r for r, item in enumerate(b, 1)}
    return kernels.prag_count([neu_rank.get(item, 0) for item in a])


def b_prag(list_a, list_neu, k: int, mode: str = DEFAULT_PRAG_MODE) -> float:
    """Pairwise rank-agreement divergence.

    ``paper`` divides the agreement count by k(k+1) (the literal normalization,
    under which identical lists do not score 0); ``corrected`` divides by
    k(k-1)/2, the count reached by two identical lists, and clamps to [0, 1].
    Items missing from the neutral list rank after every neutral item.
    """
    if mode not in PRAG_MODES:
        raise ValueError(f"unknown prag mode {mode!r}")
    count = prag_agreements(list_a, list_neu)
    if mode == "paper":
        return 1.0 - count / (k * (k + 1))
    pairs = k * (k - 1) // 2
    if pairs == 0:
        # k == 1: no pairs exist; fall back to membership of the single item
        return 0.0 if set(_ids(list_a)) <= set(_ids(list_neu)) else 1.0
    return min(1.0, max(0.0, 1.0 - count / pairs))


def all_scores(
    list_a: RankedList,
    list_neu: RankedList,
    k: int,
    prag_mode: str = DEFAULT_PRAG_MODE,
    attribute_id: str = "",
) -> BiasScores:
    degraded = bool(getattr(list_a, "degraded", False) or getattr(list_neu, "degraded", False))
    return BiasScores(
        attribute_id=attribute_id,
        b_iou=b_iou(list_a, list_neu),
        b_serp=b_serp(list_a, list_neu, k),
        b_prag=b_prag(list_a, list_neu, k, prag_mode),
        prag_mode=prag_mode,
        k=k,
        degraded_input=degraded,
    )
