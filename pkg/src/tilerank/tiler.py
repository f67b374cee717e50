"""Multi-resolution page sampling.

Every granularity level partitions the page into an h_k x w_k grid using
floor boundaries (remainder pixels accrue to later regions), then each
region is stretched to the encoder's fixed input resolution with
half-pixel-centered bilinear interpolation. Both steps are deterministic
and pure.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .core import GranularitySpec, PageImage
from .errors import FormatError, GridTooFine


@dataclass(frozen=True)
class TilerConfig:
    """Fixed encoder input resolution plus the grid hierarchy."""

    target_h: int
    target_w: int
    grids: GranularitySpec

    def __post_init__(self):
        if self.target_h < 8 or self.target_w < 8:
            raise ValueError("target resolution must be at least 8x8")


@dataclass(frozen=True)
class SubImageBatch:
    """All regions of one level, resized, in row-major grid order."""

    level_index: int
    regions: tuple

    @property
    def count(self) -> int:
        return len(self.regions)


def _bounds(size: int, parts: int) -> list:
    cuts = [(i * size) // parts for i in range(parts + 1)]
    if any(cuts[i + 1] - cuts[i] < 1 for i in range(parts)):
        raise GridTooFine(f"{parts} parts over {size} pixels leaves an empty region")
    return cuts


def partition(image: PageImage, h_k: int, w_k: int) -> list:
    """Split an image into an h_k x w_k grid of regions, row-major.

    Regions tile the image exactly: no overlap, no gaps.
    """
    rows = _bounds(image.height, h_k)
    cols = _bounds(image.width, w_k)
    regions = []
    for i in range(h_k):
        for j in range(w_k):
            regions.append(
                PageImage(image.pixels[rows[i] : rows[i + 1], cols[j] : cols[j + 1]])
            )
    return regions


def resize(image: PageImage, target_h: int, target_w: int) -> PageImage:
    """Bilinear resize with half-pixel center alignment.

    Source coordinate: (dst + 0.5) * scale - 0.5 with the scale factor
    src/dst precomputed in float64. Interpolation runs in float64;
    samples round to the nearest 8-bit value with ties away from zero.
    """
    src = image.pixels.astype(np.float64)
    sh, sw = image.height, image.width

    def axis_coords(dst: int, srcn: int):
        pos = (np.arange(dst, dtype=np.float64) + 0.5) * (srcn / dst) - 0.5
        pos = np.clip(pos, 0.0, srcn - 1.0)
        lo = np.floor(pos).astype(np.intp)
        hi = np.minimum(lo + 1, srcn - 1)
        return lo, hi, pos - lo

    y0, y1, fy = axis_coords(target_h, sh)
    x0, x1, fx = axis_coords(target_w, sw)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = src[y0][:, x0] * (1.0 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1.0 - fx) + src[y1][:, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    return PageImage(np.clip(np.floor(out + 0.5), 0.0, 255.0).astype(np.uint8))


def sample_multires(image: PageImage, cfg: TilerConfig) -> list:
    """One SubImageBatch per granularity level, coarse to fine."""
    batches = []
    for k, (h_k, w_k) in enumerate(cfg.grids.levels, start=1):
        regions = tuple(
            resize(r, cfg.target_h, cfg.target_w) for r in partition(image, h_k, w_k)
        )
        batches.append(SubImageBatch(level_index=k, regions=regions))
    return batches


# --- binary PGM (P5) / PPM (P6) ---

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _read_token(buf: bytes, pos: int):
    match = _TOKEN.match(buf, pos)
    if not match:
        raise FormatError("truncated image header")
    return match.group(1), match.end()


def read_image(path) -> PageImage:
    with open(path, "rb") as fh:
        buf = fh.read()
    magic, pos = _read_token(buf, 0)
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"unsupported image magic {magic!r} (want P5 or P6)")
    fields = []
    for _ in range(3):
        tok, pos = _read_token(buf, pos)
        if not tok.isdigit():
            raise FormatError(f"bad header token {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval < 1 or maxval > 255:
        raise FormatError(f"unsupported maxval {maxval} (only 8-bit samples)")
    pos += 1  # single whitespace byte after maxval
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    raster = buf[pos : pos + need]
    if len(raster) != need:
        raise FormatError(f"raster holds {len(raster)} bytes, expected {need}")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels)
    return PageImage(pixels)


def write_image(path, image: PageImage) -> None:
    magic = b"P5" if image.channels == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, image.width, image.height)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(image.pixels.tobytes())
