"""Compare the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import random
import timeit
from pathlib import Path

from recaudit import _pykernels
from recaudit.catalog import load_catalog, normalize_title

try:
    from recaudit import _ckernels
except ImportError:
    _ckernels = None

CATALOG = Path(__file__).resolve().parents[1] / "fixtures" / "catalogs" / "movie.csv"


def _workloads(impl):
    rng = random.Random(0)
    titles = list(load_catalog(CATALOG).normalized_titles)
    # a few hundred-item catalog: the fixture titles plus noisy variants
    cands = titles + [t[::-1] + " ii" for t in titles] * 4
    queries = [normalize_title(rng.choice(titles))[:-1] + "x" for _ in range(50)]
    weights = [1.0 / (i + 1) for i in range(500)]
    uniforms = [rng.random() for _ in range(20)]
    ranks = [rng.choice([0] + list(range(1, 21))) for _ in range(20)]
    return {
        "nearest (50 queries x %d titles)" % len(cands): lambda: [impl.nearest(q, cands) for q in queries],
        "pl_draw (k=20 of 500)": lambda: impl.pl_draw(weights, uniforms, 20),
        "prag_count (k=20) x100": lambda: [impl.prag_count(ranks) for _ in range(100)],
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = {"python": _pykernels}
    if _ckernels is not None:
        impls["cython"] = _ckernels
    results: dict[str, dict[str, float]] = {}
    for name, impl in impls.items():
        for label, fn in _workloads(impl).items():
            t = min(timeit.repeat(fn, number=5, repeat=args.repeat)) / 5
            results.setdefault(label, {})[name] = t
    print(f"{'workload':<40}" + "".join(f"{n:>14}" for n in impls) + ("       speedup" if len(impls) > 1 else ""))
    for label, row in results.items():
        line = f"{label:<40}" + "".join(f"{row[n] * 1e3:>11.3f} ms" for n in impls)
        if "cython" in row:
            line += f"{row['python'] / row['cython']:>13.1f}x"
        print(line)
    if _ckernels is None:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
