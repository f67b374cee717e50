"""On-disk index of page representations with bit-exact roundtrip.

Layout: `manifest.json` plus one MVTX file per page under `docs/`. A
full (uncompressed) index keeps per-page level boundaries in the
manifest so nested levels survive the roundtrip; a budgeted index stores
centroid matrices only.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .compressor import CompressionConfig, compress_corpus
from .core import GranularitySpec, NestedPageRep, TokenMatrix, validate_token_matrix
from .errors import FormatError, InconsistentDim
from .mvtx import read_mvtx, write_mvtx
from .scorer import search

FORMAT_VERSION = 1
_SAFE_ID = re.compile(r"^[A-Za-z0-9._-]+$")


@dataclass(frozen=True)
class PageEntry:
    page_id: str
    file: str
    rows: int
    boundaries: tuple | None = None


@dataclass(frozen=True)
class IndexManifest:
    dim: int
    budget: object  # int or the string "full"
    pages: tuple
    grids: str | None = None
    encoder: dict | None = None
    format_version: int = FORMAT_VERSION

    def to_json(self) -> str:
        payload = {
            "format_version": self.format_version,
            "dim": self.dim,
            "budget": self.budget,
            "grids": self.grids,
            "encoder": self.encoder,
            "pages": [
                {
                    "page_id": p.page_id,
                    "file": p.file,
                    "rows": p.rows,
                    **({"boundaries": list(p.boundaries)} if p.boundaries else {}),
                }
                for p in self.pages
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "IndexManifest":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"manifest is not valid JSON: {exc}") from None
        if payload.get("format_version") != FORMAT_VERSION:
            raise FormatError(
                f"unsupported manifest version {payload.get('format_version')!r}"
            )
        pages = tuple(
            PageEntry(
                page_id=p["page_id"],
                file=p["file"],
                rows=int(p["rows"]),
                boundaries=tuple(p["boundaries"]) if "boundaries" in p else None,
            )
            for p in payload.get("pages", [])
        )
        return cls(
            dim=int(payload["dim"]),
            budget=payload["budget"],
            pages=pages,
            grids=payload.get("grids"),
            encoder=payload.get("encoder"),
        )


def _checked_page_id(page_id: str) -> str:
    if not _SAFE_ID.match(page_id):
        raise FormatError(f"page id {page_id!r} is not filesystem-safe")
    return page_id


def build_index(
    corpus: list,
    out_dir,
    cfg: CompressionConfig | None = None,
    grids: GranularitySpec | None = None,
    encoder: dict | None = None,
    threads: int = 1,
) -> IndexManifest:
    """Write pages (compressed when cfg is given) plus the manifest."""
    out = Path(out_dir)
    (out / "docs").mkdir(parents=True, exist_ok=True)

    reps = list(corpus)
    seen = set()
    dim = None
    entries = []
    if cfg is None:
        stored = reps
    else:
        stored = compress_corpus(reps, cfg, threads=threads)
    for item in stored:
        if isinstance(item, NestedPageRep):
            page_id = item.page_id
            matrix = item.nested_at(item.num_levels)
            boundaries = item.boundaries
        else:
            page_id = item.page_id
            matrix = item.centroids
            boundaries = None
        _checked_page_id(page_id)
        if page_id in seen:
            raise FormatError(f"duplicate page id {page_id!r}")
        seen.add(page_id)
        if dim is None:
            dim = matrix.dim
        elif matrix.dim != dim:
            raise InconsistentDim(f"page {page_id!r} dim {matrix.dim} != {dim}")
        rel = f"docs/{page_id}.mvtx"
        write_mvtx(out / rel, matrix)
        entries.append(
            PageEntry(page_id=page_id, file=rel, rows=matrix.rows, boundaries=boundaries)
        )

    manifest = IndexManifest(
        dim=dim if dim is not None else 0,
        budget="full" if cfg is None else cfg.budget,
        pages=tuple(entries),
        grids=str(grids) if grids is not None else None,
        encoder=encoder,
    )
    (out / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return manifest


@dataclass(frozen=True)
class LoadedPage:
    page_id: str
    matrix: TokenMatrix
    boundaries: tuple | None


class Index:
    """A loaded, immutable index; safe for concurrent searches."""

    def __init__(self, manifest: IndexManifest, pages: list, root: Path):
        self.manifest = manifest
        self.pages = pages
        self.root = root

    def __len__(self) -> int:
        return len(self.pages)

    @property
    def is_full(self) -> bool:
        return self.manifest.budget == "full"

    def nested_pages(self) -> list:
        """Reconstruct NestedPageReps (full indexes only)."""
        reps = []
        for page in self.pages:
            if page.boundaries is None:
                raise FormatError(
                    f"page {page.page_id!r} has no level boundaries (compressed index)"
                )
            segments = []
            prev = 0
            for bound in page.boundaries:
                segments.append(TokenMatrix(page.matrix.data[prev:bound]))
                prev = bound
            reps.append(NestedPageRep(page.page_id, tuple(segments)))
        return reps

    def search(self, query, k: int, level: int | None = None, threads: int = 1):
        if level is not None:
            corpus = self.nested_pages()
        else:
            corpus = [(p.page_id, p.matrix) for p in self.pages]
        return search(query, corpus, k=k, level=level, threads=threads)


def load_index(in_dir) -> Index:
    """Read the manifest and every page file, verifying sizes and CRCs."""
    root = Path(in_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise FormatError(f"{manifest_path}: manifest not found")
    manifest = IndexManifest.from_json(manifest_path.read_text(encoding="utf-8"))
    pages = []
    for entry in manifest.pages:
        matrix = validate_token_matrix(read_mvtx(root / entry.file))
        if matrix.rows != entry.rows:
            raise FormatError(
                f"{entry.file}: {matrix.rows} rows, manifest says {entry.rows}"
            )
        if matrix.dim != manifest.dim:
            raise InconsistentDim(
                f"{entry.file}: dim {matrix.dim}, manifest says {manifest.dim}"
            )
        if entry.boundaries is not None and entry.boundaries[-1] != matrix.rows:
            raise FormatError(f"{entry.file}: boundaries do not cover all rows")
        pages.append(LoadedPage(entry.page_id, matrix, entry.boundaries))
    return Index(manifest=manifest, pages=pages, root=root)


@dataclass(frozen=True)
class StorageReport:
    pages: int
    total_bytes: int
    data_bytes: int
    tokens: int

    @property
    def bytes_per_page(self) -> float:
        return self.total_bytes / self.pages if self.pages else 0.0

    @property
    def tokens_per_page(self) -> float:
        return self.tokens / self.pages if self.pages else 0.0


def storage_report(index: Index) -> StorageReport:
    """Exact byte accounting of the index's page files."""
    total = 0
    data = 0
    tokens = 0
    for entry in index.manifest.pages:
        total += (index.root / entry.file).stat().st_size
        data += entry.rows * index.manifest.dim * 4
        tokens += entry.rows
    return StorageReport(
        pages=len(index.manifest.pages), total_bytes=total, data_bytes=data, tokens=tokens
    )
