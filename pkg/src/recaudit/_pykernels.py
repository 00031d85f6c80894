"""Pure-Python reference versions of the hot loops.

Kept behaviourally identical to ``_ckernels.pyx``; the test suite runs both.
"""

from __future__ import annotations

from typing import Sequence


def levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cost = 0 if ca == cb else 1
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


def normalized_distance(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return levenshtein(a, b) / longest


def nearest(query: str, candidates: Sequence[str]) -> tuple[int, float]:
    """Index and normalized distance of the closest candidate.

    Ties go to the lower index. Returns ``(-1, 1.0)`` for no candidates.
    """
    best_idx, best = -1, 2.0
    qlen = len(query)
    for idx, cand in enumerate(candidates):
        longest = max(qlen, len(cand))
        if longest == 0:
            d = 0.0
        else:
            # length difference bounds the edit distance from below
            if abs(qlen - len(cand)) / longest >= best:
                continue
            d = levenshtein(query, cand) / longest
        if d < best:
            best_idx, best = idx, d
            if d == 0.0:
                break
    if best_idx < 0:
        return -1, 1.0
    return best_idx, best


def pl_draw(weights: Sequence[float], uniforms: Sequence[float], k: int) -> list[int]:
    """Sequential Plackett-Luce draw of ``k`` indices without replacement.

    Step ``t`` consumes ``uniforms[t]`` and walks the remaining items in index
    order, picking the first whose running weight sum exceeds ``u * total``.
    """
    n = len(weights)
    if k > n or k > len(uniforms):
        raise ValueError("k exceeds number of items or uniforms")
    taken = [False] * n
    out: list[int] = []
    for t in range(k):
        total = 0.0
        for i in range(n):
            if not taken[i]:
                total += weights[i]
        target = uniforms[t] * total
        acc = 0.0
        pick = -1
        for i in range(n):
            if taken[i]:
                continue
            acc += weights[i]
            pick = i
            if acc > target:
                break
        taken[pick] = True
        out.append(pick)
    return out


def prag_count(neutral_ranks: Sequence[int]) -> int:
    """Count agreeing ordered pairs for the pairwise rank-agreement score.

    ``neutral_ranks[p]`` is the 1-based neutral rank of the item at position
    ``p`` of the attribute list, or 0 when the item is absent from the
    neutral list (treated as rank +inf).
    """
    m = len(neutral_ranks)
    count = 0
    for p in range(m):
        rp = neutral_ranks[p]
        if rp <= 0:
            continue
        for q in range(p + 1, m):
            rq = neutral_ranks[q]
            if rq <= 0 or rp < rq:
                count += 1
    return count
