"""Domain types and numeric conventions.

Conventions used across the engine:

* Token embeddings are stored as row-major float32 matrices; every row is
  a unit vector under the L2 norm.
* All accumulations (norms, dot products, loss sums) run in float64.
* Similarity is always the raw dot product of unit rows, i.e. cosine.
* Zero-norm rows are hard errors, never silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimMismatch,
    IndexOutOfRange,
    LevelOutOfRange,
    NonFiniteEntry,
    ZeroNormRow,
)

# Rows whose float64 norm is within this of 1.0 are left bit-identical by
# normalization; anything further gets divided. Keeping the snap window
# wider than float32 rounding noise (~1e-7) makes normalization idempotent
# and keeps centroid arithmetic exact for singletons and duplicate merges.
UNIT_SNAP = 1e-6
_UNIT_SNAP = UNIT_SNAP


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale a vector to unit L2 norm (float64 accumulation).

    Raises ZeroNormRow for the zero vector. Direction is preserved; a
    vector already within 1e-6 of unit norm is returned unchanged.
    """
    v = np.asarray(v)
    norm = float(np.sqrt(np.einsum("i,i->", v.astype(np.float64), v.astype(np.float64))))
    if norm == 0.0:
        raise ZeroNormRow(0, "vector")
    if abs(norm - 1.0) <= _UNIT_SNAP:
        return v
    return (v.astype(np.float64) / norm).astype(v.dtype)


def normalize_rows(data: np.ndarray, context: str = "token matrix") -> np.ndarray:
    """Row-wise unit normalization with the same snap rule as l2_normalize."""
    d64 = data.astype(np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", d64, d64))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroNormRow(int(zero[0]), context)
    off = np.abs(norms - 1.0) > _UNIT_SNAP
    if not off.any():
        return data
    out = data.copy()
    out[off] = (d64[off] / norms[off, None]).astype(data.dtype)
    return out


@dataclass(frozen=True)
class TokenMatrix:
    """An M x d matrix of L2-normalized float32 token embeddings."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ValueError(f"token matrix must be 2-D, got shape {self.data.shape}")
        if self.data.dtype != np.float32 or not self.data.flags.c_contiguous:
            object.__setattr__(
                self, "data", np.ascontiguousarray(self.data, dtype=np.float32)
            )
        _freeze(self.data)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def as_f64(self) -> np.ndarray:
        return self.data.astype(np.float64)


def validate_token_matrix(m: TokenMatrix) -> TokenMatrix:
    """Check finiteness and row norms; returns a unit-normalized matrix.

    Rows already within 1e-6 of unit norm come back bit-identical.
    """
    data = m.data
    if data.size and not np.isfinite(data).all():
        bad = int(np.flatnonzero(~np.isfinite(data).all(axis=1))[0])
        raise NonFiniteEntry(bad)
    if data.shape[0] == 0:
        return m
    normalized = normalize_rows(data)
    if normalized is data:
        return m
    return TokenMatrix(normalized)


def token_matrix(arr, normalize: bool = True) -> TokenMatrix:
    """Build a validated TokenMatrix from any array-like."""
    tm = TokenMatrix(np.asarray(arr, dtype=np.float32))
    return validate_token_matrix(tm) if normalize else tm


@dataclass(frozen=True)
class GranularitySpec:
    """Ordered list of grid layouts (h_k, w_k), coarse to fine.

    Cell counts h_k * w_k must be strictly increasing; ties are forbidden.
    """

    levels: tuple

    def __post_init__(self):
        levels = tuple((int(h), int(w)) for h, w in self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise ValueError("granularity spec needs at least one level")
        prev = 0
        for h, w in levels:
            if h < 1 or w < 1:
                raise ValueError(f"grid {h}x{w} has a non-positive side")
            cells = h * w
            if cells <= prev:
                raise ValueError(
                    "grid cell counts must strictly increase coarse to fine"
                )
            prev = cells

    @classmethod
    def parse(cls, text: str) -> "GranularitySpec":
        """Parse the 'RxC(,RxC)*' grammar, e.g. '1x1,1x2,2x2,2x3'."""
        levels = []
        for part in text.split(","):
            piece = part.strip().lower()
            h, sep, w = piece.partition("x")
            if not sep or not h.isdigit() or not w.isdigit():
                raise ValueError(f"bad grid {part!r}; expected RxC like 2x3")
            levels.append((int(h), int(w)))
        return cls(tuple(levels))

    @classmethod
    def default(cls) -> "GranularitySpec":
        return cls(((1, 1), (1, 2), (2, 2), (2, 3)))

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    def cells(self, k: int) -> int:
        """Region count of 1-based level k."""
        h, w = self.levels[k - 1]
        return h * w

    @property
    def total_regions(self) -> int:
        return sum(h * w for h, w in self.levels)

    def __str__(self) -> str:
        return ",".join(f"{h}x{w}" for h, w in self.levels)


@dataclass(frozen=True)
class NestedPageRep:
    """Per-page token segments, one per granularity level, coarse to fine.

    The prefix over the first k segments is the usable representation at
    level k; `boundaries[k-1]` is its row count.
    """

    page_id: str
    segments: tuple
    boundaries: tuple = field(init=False)
    _full: TokenMatrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        segments = tuple(self.segments)
        if not segments:
            raise ValueError("page representation needs at least one segment")
        dim = segments[0].dim
        for seg in segments[1:]:
            if seg.dim != dim:
                raise DimMismatch(
                    f"segment dims disagree: {seg.dim} vs {dim} in page {self.page_id!r}"
                )
        offsets = np.cumsum([seg.rows for seg in segments])
        full = TokenMatrix(np.concatenate([seg.data for seg in segments], axis=0))
        object.__setattr__(self, "segments", segments)
        object.__setattr__(self, "boundaries", tuple(int(b) for b in offsets))
        object.__setattr__(self, "_full", full)

    @property
    def num_levels(self) -> int:
        return len(self.segments)

    @property
    def dim(self) -> int:
        return self.segments[0].dim

    @property
    def total_tokens(self) -> int:
        return self.boundaries[-1]

    def nested_at(self, k: int) -> TokenMatrix:
        """Concatenation of segments 1..k (a view into the full matrix)."""
        if not 1 <= k <= self.num_levels:
            raise LevelOutOfRange(f"level {k} outside 1..{self.num_levels}")
        if k == self.num_levels:
            return self._full
        return TokenMatrix(self._full.data[: self.boundaries[k - 1]])

    def level_of_token(self, token_index: int) -> int:
        """The 1-based level owning a token index (half-open boundaries)."""
        if not 0 <= token_index < self.total_tokens:
            raise IndexOutOfRange(
                f"token {token_index} outside 0..{self.total_tokens - 1}"
            )
        return int(np.searchsorted(self.boundaries, token_index, side="right")) + 1


@dataclass(frozen=True)
class QueryEmbedding:
    """A query's token matrix (N_q >= 1 rows) plus its id."""

    query_id: str
    tokens: TokenMatrix

    def __post_init__(self):
        if self.tokens.rows < 1:
            raise ValueError(f"query {self.query_id!r} has no tokens")


@dataclass(frozen=True)
class PageImage:
    """An 8-bit image, shape (height, width, channels), channels 1 or 3."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise ValueError(f"bad image shape {px.shape}; want (h, w, 1|3)")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        px = np.ascontiguousarray(px)
        object.__setattr__(self, "pixels", _freeze(px))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]
