"""Counterfactual bias auditing for LLM cold-start recommenders."""

__version__ = "0.1.0"

from .catalog import Catalog, Item, MatchResult, load_catalog, match_item, normalize_title
from .metrics import BiasScores, all_scores, b_iou, b_prag, b_serp
from .parser import RankedList, extract_candidates, parse_response
from .promptgen import (
    NEUTRAL,
    PromptInstance,
    SensitiveAttribute,
    UserSpec,
    builtin_attributes,
    counterfactual_set,
    render_prompt,
)

__all__ = [
    "BiasScores",
    "Catalog",
    "Item",
    "MatchResult",
    "NEUTRAL",
    "PromptInstance",
    "RankedList",
    "SensitiveAttribute",
    "UserSpec",
    "all_scores",
    "b_iou",
    "b_prag",
    "b_serp",
    "builtin_attributes",
    "counterfactual_set",
    "extract_candidates",
    "load_catalog",
    "match_item",
    "normalize_title",
    "parse_response",
    "render_prompt",
]
