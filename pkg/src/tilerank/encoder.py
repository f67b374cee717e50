"""The encoder boundary: sub-image batches in, token matrices out.

Real VLM embeddings enter through `ingest_external`; the built-in
`ToyEncoder` is a deterministic stand-in (patch means through a seeded
random projection) so the whole pipeline runs self-contained.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .core import (
    GranularitySpec,
    NestedPageRep,
    PageImage,
    TokenMatrix,
    validate_token_matrix,
)
from .errors import DimMismatch, GridTooFine, LevelCountMismatch, ZeroNormRow
from .mvtx import read_mvtx
from .rng import SplitMix64
from .tiler import SubImageBatch, TilerConfig, sample_multires


class EncoderBackend(ABC):
    """Turns one level's SubImageBatch into (regions x p_atomic) unit rows."""

    @property
    @abstractmethod
    def p_atomic(self) -> int:
        """Tokens produced per single region pass."""

    @property
    @abstractmethod
    def dim(self) -> int:
        """Embedding dimension of the output rows."""

    @abstractmethod
    def encode(self, batch: SubImageBatch) -> TokenMatrix:
        ...


@dataclass(frozen=True)
class ToyEncoderConfig:
    patch_grid: int = 4
    dim: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.patch_grid < 1:
            raise ValueError("patch_grid must be >= 1")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")


class ToyEncoder(EncoderBackend):
    """Deterministic encoder: per-patch channel means x random projection.

    Each region is split into patch_grid x patch_grid patches (floor
    boundaries). A patch's feature is its mean sample per channel scaled
    to [0, 1]; the feature is projected by a fixed C x dim matrix with
    entries uniform in [-1, 1) drawn from splitmix64(seed), then the row
    is unit-normalized. An all-zero patch (black image) is a ZeroNormRow
    error by design: it carries no direction.
    """

    def __init__(self, cfg: ToyEncoderConfig):
        self.cfg = cfg
        self._projections: dict = {}

    @property
    def p_atomic(self) -> int:
        return self.cfg.patch_grid ** 2

    @property
    def dim(self) -> int:
        return self.cfg.dim

    def _projection(self, channels: int) -> np.ndarray:
        proj = self._projections.get(channels)
        if proj is None:
            stream = SplitMix64(self.cfg.seed)
            proj = stream.uniform_signed(channels * self.cfg.dim).reshape(
                channels, self.cfg.dim
            )
            self._projections[channels] = proj
        return proj

    def encode_region(self, sub: PageImage) -> TokenMatrix:
        grid = self.cfg.patch_grid

        def cuts(size: int) -> np.ndarray:
            c = np.array([(i * size) // grid for i in range(grid + 1)], dtype=np.intp)
            if (np.diff(c) < 1).any():
                raise GridTooFine(
                    f"patch grid {grid} too fine for a {sub.height}x{sub.width} region"
                )
            return c

        rcuts = cuts(sub.height)
        ccuts = cuts(sub.width)
        px = sub.pixels.astype(np.float64)
        rowsum = np.add.reduceat(px, rcuts[:-1], axis=0)
        patchsum = np.add.reduceat(rowsum, ccuts[:-1], axis=1)
        areas = np.diff(rcuts)[:, None] * np.diff(ccuts)[None, :]
        feats = (patchsum / (areas[:, :, None] * 255.0)).reshape(-1, sub.channels)

        tokens = feats @ self._projection(sub.channels)
        norms = np.sqrt(np.einsum("ij,ij->i", tokens, tokens))
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise ZeroNormRow(int(zero[0]), "toy-encoded patch tokens")
        return TokenMatrix((tokens / norms[:, None]).astype(np.float32))

    def encode(self, batch: SubImageBatch) -> TokenMatrix:
        if not batch.regions:
            raise DimMismatch("empty sub-image batch")
        h0, w0 = batch.regions[0].height, batch.regions[0].width
        for r in batch.regions:
            if (r.height, r.width) != (h0, w0):
                raise DimMismatch("regions in a batch must share dimensions")
        parts = [self.encode_region(r).data for r in batch.regions]
        return TokenMatrix(np.concatenate(parts, axis=0))


def encode_page(
    image: PageImage,
    tiler_cfg: TilerConfig,
    backend: EncoderBackend,
    page_id: str = "",
) -> NestedPageRep:
    """Tile, encode every level, and assemble the nested representation."""
    batches = sample_multires(image, tiler_cfg)
    segments = tuple(backend.encode(b) for b in batches)
    return NestedPageRep(page_id=page_id, segments=segments)


def ingest_external(
    page_id: str, per_level_files: list, spec: GranularitySpec
) -> NestedPageRep:
    """Build a page representation from externally computed embeddings.

    One MVTX file per granularity level, coarse to fine; all files must
    agree on dim. Rows are validated and normalized on the way in.
    """
    if len(per_level_files) != spec.num_levels:
        raise LevelCountMismatch(
            f"{len(per_level_files)} files for {spec.num_levels} levels"
        )
    segments = []
    dim = None
    for path in per_level_files:
        matrix = validate_token_matrix(read_mvtx(path))
        if dim is None:
            dim = matrix.dim
        elif matrix.dim != dim:
            raise DimMismatch(f"{path}: dim {matrix.dim} != {dim}")
        segments.append(matrix)
    return NestedPageRep(page_id=page_id, segments=tuple(segments))


def conformance_check(backend: EncoderBackend, batch: SubImageBatch) -> TokenMatrix:
    """Contract every backend must satisfy; returns the encoded matrix."""
    out = backend.encode(batch)
    expected = batch.count * backend.p_atomic
    if out.rows != expected:
        raise AssertionError(
            f"backend produced {out.rows} rows for {batch.count} regions "
            f"x p_atomic {backend.p_atomic} (expected {expected})"
        )
    if out.dim != backend.dim:
        raise AssertionError(f"backend dim {out.dim} != reported {backend.dim}")
    validate_token_matrix(out)
    norms = np.sqrt(np.einsum("ij,ij->i", out.as_f64(), out.as_f64()))
    if np.abs(norms - 1.0).max() > 1e-4:
        raise AssertionError("backend rows are not unit-normalized")
    return out
