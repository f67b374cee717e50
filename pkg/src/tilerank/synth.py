"""Seeded synthetic corpora and images for end-to-end tests.

Pages get a direction inside one of a few clusters; tokens (and the
matching query's tokens) are noise-perturbed copies of that direction,
re-normalized. With zero noise a query's tokens equal its page's
direction exactly, so retrieval is perfectly separable. Generation is
single-threaded: the splitmix64 stream is consumed in a fixed order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    NestedPageRep,
    PageImage,
    QueryEmbedding,
    TokenMatrix,
    l2_normalize,
)
from .evalkit import RelevanceJudgments
from .rng import SplitMix64


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_pages: int = 64
    n_queries: int = 32
    dim: int = 16
    tokens_per_level: tuple = (4, 8, 16, 24)
    n_clusters: int = 8
    noise: float = 0.1
    page_jitter: float = 0.5
    query_tokens: int = 4

    def __post_init__(self):
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if self.n_clusters < 2:
            raise ValueError("need at least 2 clusters")


@dataclass(frozen=True)
class SynthCorpus:
    pages: list
    queries: list
    qrels: RelevanceJudgments
    page_of_query: dict


def _around(stream: SplitMix64, direction: np.ndarray, scale: float, n: int) -> np.ndarray:
    dim = direction.shape[0]
    rows = np.empty((n, dim), dtype=np.float64)
    for i in range(n):
        rows[i] = l2_normalize(direction + scale * stream.uniform_signed(dim))
    return rows


def gen_corpus(cfg: SynthConfig) -> SynthCorpus:
    stream = SplitMix64(cfg.seed)
    clusters = [
        l2_normalize(stream.uniform_signed(cfg.dim)) for _ in range(cfg.n_clusters)
    ]

    pages = []
    page_dirs = []
    for p in range(cfg.n_pages):
        base = clusters[p % cfg.n_clusters]
        direction = l2_normalize(base + cfg.page_jitter * stream.uniform_signed(cfg.dim))
        page_dirs.append(direction)
        segments = tuple(
            TokenMatrix(_around(stream, direction, cfg.noise, m).astype(np.float32))
            for m in cfg.tokens_per_level
        )
        pages.append(NestedPageRep(page_id=f"p{p:04d}", segments=segments))

    queries = []
    qrels = {}
    page_of_query = {}
    for q in range(cfg.n_queries):
        target = q % cfg.n_pages
        tokens = _around(stream, page_dirs[target], cfg.noise, cfg.query_tokens)
        query = QueryEmbedding(f"q{q:04d}", TokenMatrix(tokens.astype(np.float32)))
        queries.append(query)
        qrels[(query.query_id, pages[target].page_id)] = 1
        page_of_query[query.query_id] = pages[target].page_id

    return SynthCorpus(
        pages=pages,
        queries=queries,
        qrels=RelevanceJudgments(qrels),
        page_of_query=page_of_query,
    )


@dataclass(frozen=True)
class ImageSets:
    """Two RGB image families with known discriminative structure.

    Quadrant images differ everywhere (2x2 color blocks), so they are
    distinguishable from the coarsest view. Legend-strip images share a
    fixed base and differ only in a strip covering the last sixth of the
    width, i.e. exactly the last column of a 2x3 grid.
    """

    quadrant: list
    legend: list
    quadrant_colors: list
    strip_colors: list


def _color(stream: SplitMix64) -> np.ndarray:
    # keep channels in [32, 224) so no patch mean is ever zero
    return (32 + (stream.uniform_signed(3) * 0.5 + 0.5) * 192).astype(np.uint8)


def gen_images(
    seed: int, count: int = 4, height: int = 60, width: int = 72
) -> ImageSets:
    if width % 6 != 0 or height % 2 != 0:
        raise ValueError("width must be divisible by 6 and height by 2")
    stream = SplitMix64(seed)

    quadrant = []
    quadrant_colors = []
    for _ in range(count):
        colors = [_color(stream) for _ in range(4)]
        px = np.empty((height, width, 3), dtype=np.uint8)
        h2, w2 = height // 2, width // 2
        px[:h2, :w2] = colors[0]
        px[:h2, w2:] = colors[1]
        px[h2:, :w2] = colors[2]
        px[h2:, w2:] = colors[3]
        quadrant.append(PageImage(px))
        quadrant_colors.append(colors)

    base = np.full((height, width, 3), 128, dtype=np.uint8)
    strip_start = width - width // 6
    legend = []
    strip_colors = []
    for _ in range(count):
        color = _color(stream)
        px = base.copy()
        px[:, strip_start:] = color
        legend.append(PageImage(px))
        strip_colors.append(color)

    return ImageSets(
        quadrant=quadrant,
        legend=legend,
        quadrant_colors=quadrant_colors,
        strip_colors=strip_colors,
    )


def strip_probe_query(image: PageImage, encoder, target_h: int, target_w: int,
                      query_id: str = "probe") -> QueryEmbedding:
    """A query probing the page's last-sixth strip region.

    The crop is resized to the encoder input and encoded like any
    region, standing in for a question about the strip's content.
    """
    from .tiler import resize

    crop = PageImage(image.pixels[:, image.width - image.width // 6 :])
    region = resize(crop, target_h, target_w)
    return QueryEmbedding(query_id, encoder.encode_region(region))
