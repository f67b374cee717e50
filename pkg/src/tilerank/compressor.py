"""Token-budget compression via greedy agglomerative clustering.

Offline, each page's token matrix is distilled down to at most N_t
centroid rows by iteratively merging the most cosine-similar cluster
pair (centroid linkage; a cluster's centroid is the re-normalized mean
of its member tokens). Online scoring then runs MaxSim against the
centroids unchanged.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from .core import UNIT_SNAP, NestedPageRep, TokenMatrix
from .errors import ZeroNormRow


@dataclass(frozen=True)
class CompressionConfig:
    budget: int
    scope: str = "whole-sequence"

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.scope not in ("whole-sequence", "per-level"):
            raise ValueError(f"unknown scope {self.scope!r}")


@dataclass(frozen=True)
class CompressedPage:
    """Centroid rows for one page, ordered by smallest member token index.

    `provenance[i]` is the majority source level of centroid i's members
    (ties toward the coarser level); None when the source had no level
    structure.
    """

    page_id: str
    centroids: TokenMatrix
    provenance: tuple | None = None


def _materialize(tok64: np.ndarray, clusters: list) -> np.ndarray:
    """Centroids as re-normalized member means, float32.

    Means already within the unit-norm snap window (singletons, merges of
    bit-identical tokens) are kept bit-exact rather than re-divided.
    """
    out = np.empty((len(clusters), tok64.shape[1]), dtype=np.float64)
    for i, members in enumerate(clusters):
        mean = tok64[members].mean(axis=0)
        norm = np.sqrt((mean * mean).sum())
        if norm == 0.0:
            raise ZeroNormRow(members[0], "merged centroid")
        out[i] = mean if abs(norm - 1.0) <= UNIT_SNAP else mean / norm
    return out.astype(np.float32)


def _majority_level(members: list, rep: NestedPageRep) -> int:
    counts = np.zeros(rep.num_levels, dtype=np.int64)
    for t in members:
        counts[rep.level_of_token(t) - 1] += 1
    return int(counts.argmax()) + 1


def _apportion(sizes: list, total: int) -> list:
    """Split a token budget across levels proportionally to their sizes.

    Largest-remainder rounding, at least 1 and at most size per level.
    """
    n = len(sizes)
    m_total = sum(sizes)
    total = min(total, m_total)
    if total < n:
        raise ValueError(
            f"per-level compression needs budget >= {n} (one per level), got {total}"
        )
    quotas = [total * s / m_total for s in sizes]
    base = [min(sizes[k], max(1, int(quotas[k]))) for k in range(n)]
    delta = total - sum(base)
    grow = sorted(range(n), key=lambda k: (-(quotas[k] - int(quotas[k])), k))
    shrink = sorted(range(n), key=lambda k: (quotas[k] - int(quotas[k]), -k))
    while delta != 0:
        moved = False
        for k in grow if delta > 0 else shrink:
            if delta > 0 and base[k] < sizes[k]:
                base[k] += 1
                delta -= 1
                moved = True
            elif delta < 0 and base[k] > 1:
                base[k] -= 1
                delta += 1
                moved = True
            if delta == 0:
                break
        if not moved:
            raise AssertionError("budget apportionment failed to converge")
    return base


def hac_compress(
    tokens: TokenMatrix, cfg: CompressionConfig, page_id: str = ""
) -> CompressedPage:
    """Compress a flat token matrix; identity (bit-exact) when M <= budget."""
    if tokens.rows <= cfg.budget:
        return CompressedPage(page_id=page_id, centroids=tokens)
    tok64 = tokens.as_f64()
    clusters = kernels.hac_cluster(tok64, cfg.budget)
    return CompressedPage(
        page_id=page_id, centroids=TokenMatrix(_materialize(tok64, clusters))
    )


def compress_page(rep: NestedPageRep, cfg: CompressionConfig) -> CompressedPage:
    """Compress a nested page, attaching per-centroid provenance levels."""
    full = rep.nested_at(rep.num_levels)
    if full.rows <= cfg.budget and cfg.scope == "whole-sequence":
        provenance = tuple(rep.level_of_token(t) for t in range(full.rows))
        return CompressedPage(rep.page_id, full, provenance)
    tok64 = full.as_f64()
    if cfg.scope == "whole-sequence":
        clusters = kernels.hac_cluster(tok64, cfg.budget)
    else:
        sizes = [seg.rows for seg in rep.segments]
        clusters = []
        offset = 0
        for size, quota in zip(sizes, _apportion(sizes, cfg.budget)):
            seg64 = tok64[offset : offset + size]
            clusters.extend(
                [[m + offset for m in c] for c in kernels.hac_cluster(seg64, quota)]
            )
            offset += size
    centroids = TokenMatrix(_materialize(tok64, clusters))
    provenance = tuple(_majority_level(c, rep) for c in clusters)
    return CompressedPage(rep.page_id, centroids, provenance)


def compress_corpus(corpus, cfg: CompressionConfig, threads: int = 1) -> list:
    """Compress every page; deterministic and order-preserving."""
    pages = list(corpus)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda rep: compress_page(rep, cfg), pages))
    return [compress_page(rep, cfg) for rep in pages]
