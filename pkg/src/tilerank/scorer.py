"""MaxSim late interaction: scoring, top-K search, contribution analysis.

A query scores against a document as the sum over query tokens of the
maximum dot product against the document's tokens. Negative similarities
are not clamped. Result ordering is always (score descending, page_id
ascending), so ranking is deterministic and independent of corpus order
or parallel chunking.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from .core import NestedPageRep, QueryEmbedding, TokenMatrix
from .errors import DimMismatch, EmptyCorpus, EmptyDocument


@dataclass(frozen=True)
class ScoredPage:
    page_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class ContributionReport:
    """Per-granularity share of a query's MaxSim mass against one page.

    `ratios` sum to 1 when the total matched similarity is positive;
    otherwise `normalized` is False and `ratios` carries the raw sums.
    """

    query_id: str
    ratios: tuple
    normalized: bool


def maxsim(q: QueryEmbedding, doc: TokenMatrix) -> float:
    if doc.rows == 0:
        raise EmptyDocument(f"query {q.query_id!r} scored against an empty document")
    if doc.dim != q.tokens.dim:
        raise DimMismatch(f"query dim {q.tokens.dim} != doc dim {doc.dim}")
    return kernels.maxsim_score(q.tokens.data, doc.data)


def maxsim_at_level(q: QueryEmbedding, rep: NestedPageRep, k: int) -> float:
    return maxsim(q, rep.nested_at(k))


def _page_entry(doc, level):
    """Accept NestedPageRep, CompressedPage, or (page_id, TokenMatrix)."""
    if isinstance(doc, NestedPageRep):
        k = level if level is not None else doc.num_levels
        return doc.page_id, doc.nested_at(k)
    if hasattr(doc, "centroids"):
        return doc.page_id, doc.centroids
    page_id, matrix = doc
    return page_id, matrix


def search(
    q: QueryEmbedding,
    corpus,
    k: int,
    level: int | None = None,
    threads: int = 1,
) -> list:
    """Exhaustive MaxSim scan, top-k with deterministic tie-break."""
    if k < 1:
        raise ValueError("k must be >= 1")
    entries = [_page_entry(doc, level) for doc in corpus]
    if not entries:
        raise EmptyCorpus("search over an empty corpus")

    def score_one(entry):
        page_id, matrix = entry
        return page_id, maxsim(q, matrix)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scored = list(pool.map(score_one, entries))
    else:
        scored = [score_one(e) for e in entries]

    scored.sort(key=lambda item: (-item[1], item[0]))
    return [
        ScoredPage(page_id=pid, score=s, rank=r)
        for r, (pid, s) in enumerate(scored[:k], start=1)
    ]


def contribution(q: QueryEmbedding, rep: NestedPageRep) -> ContributionReport:
    """Attribute each query token's matched similarity to a granularity.

    The argmax document token (ties toward the lowest index, hence the
    coarser level) decides the bucket; buckets are normalized by their
    sum when that sum is positive.
    """
    full = rep.nested_at(rep.num_levels)
    if full.dim != q.tokens.dim:
        raise DimMismatch(f"query dim {q.tokens.dim} != page dim {full.dim}")
    vals, idx = kernels.maxsim_argmax(q.tokens.data, full.data)
    buckets = np.zeros(rep.num_levels, dtype=np.float64)
    for value, token_index in zip(vals.tolist(), idx.tolist()):
        buckets[rep.level_of_token(token_index) - 1] += value
    total = float(buckets.sum())
    if total > 0.0:
        return ContributionReport(q.query_id, tuple(buckets / total), True)
    return ContributionReport(q.query_id, tuple(buckets), False)


def write_run(path, results: dict) -> None:
    """TSV run file: query_id, page_id, rank, score (6 decimal places)."""
    with open(path, "w", encoding="utf-8") as fh:
        for query_id in results:
            for sp in results[query_id]:
                fh.write(f"{query_id}\t{sp.page_id}\t{sp.rank}\t{sp.score:.6f}\n")
