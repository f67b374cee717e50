"""Benchmark the compiled kernels against the pure-NumPy fallback.

Run from the repo root after building the extension:

    python3 benchmarks/bench_kernels.py [--full]

Both backends implement identical semantics; this script reports the
throughput gap on the two hot paths (MaxSim scoring over a corpus and
the greedy merge loop) and verifies results agree while doing so.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from tilerank._kernels import hac_numpy, maxsim_numpy
from tilerank.rng import SplitMix64

try:
    from tilerank._kernels import _native
except ImportError:
    _native = None

UNIT_SNAP = 1e-6


def unit_rows(stream: SplitMix64, n: int, d: int) -> np.ndarray:
    rows = stream.uniform_signed(n * d).reshape(n, d)
    rows /= np.sqrt((rows * rows).sum(axis=1))[:, None]
    return rows


def timeit(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def native_clusters(tok: np.ndarray, budget: int) -> list:
    labels = _native.hac_labels(tok, budget, UNIT_SNAP)
    groups: dict = {}
    for t, lab in enumerate(labels.tolist()):
        groups.setdefault(lab, []).append(t)
    return [groups[k] for k in sorted(groups)]


def bench_maxsim(full: bool) -> None:
    stream = SplitMix64(101)
    n_docs, doc_tokens, nq, dim = (256, 512, 16, 128) if full else (64, 256, 8, 64)
    docs = [unit_rows(stream, doc_tokens, dim) for _ in range(n_docs)]
    query = unit_rows(stream, nq, dim)

    def pure():
        return [maxsim_numpy.maxsim_score(query, d) for d in docs]

    rows = [("pure", timeit(pure, 3))]
    if _native is not None:
        def compiled():
            return [_native.maxsim_score(query, d) for d in docs]

        rows.append(("compiled", timeit(compiled, 3)))
        worst = max(
            abs(a - b) for a, b in zip(pure(), compiled())
        )
        assert worst < 1e-9, f"backend disagreement: {worst}"

    print(f"maxsim: {n_docs} docs x {doc_tokens} tokens, N_q={nq}, d={dim}")
    base = rows[0][1]
    for name, secs in rows:
        print(f"  {name:9s} {secs * 1e3:9.2f} ms   x{base / secs:.1f}")


def bench_hac(full: bool) -> None:
    stream = SplitMix64(202)
    m, budget, dim = (2048, 512, 128) if full else (512, 128, 64)
    tok = unit_rows(stream, m, dim)

    rows = [("pure", timeit(lambda: hac_numpy.hac_cluster(tok, budget), 1))]
    if _native is not None:
        rows.append(("compiled", timeit(lambda: native_clusters(tok, budget), 1)))
        assert hac_numpy.hac_cluster(tok, budget) == native_clusters(tok, budget)

    print(f"hac: {m} tokens -> {budget} centroids, d={dim}")
    base = rows[0][1]
    for name, secs in rows:
        print(f"  {name:9s} {secs * 1e3:9.2f} ms   x{base / secs:.1f}")


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--full", action="store_true", help="larger problem sizes")
    args = parser.parse_args()
    if _native is None:
        print("note: compiled extension not available; timing fallback only")
    bench_maxsim(args.full)
    bench_hac(args.full)


if __name__ == "__main__":
    main()
