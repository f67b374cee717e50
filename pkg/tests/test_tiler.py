import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tilerank.core import GranularitySpec, PageImage
from tilerank.errors import FormatError, GridTooFine
from tilerank.rng import SplitMix64
from tilerank.tiler import (
    TilerConfig,
    partition,
    read_image,
    resize,
    sample_multires,
    write_image,
)


def rand_image(seed, h, w, c=1) -> PageImage:
    stream = SplitMix64(seed)
    px = (stream.floats(h * w * c) * 256).astype(np.uint8).reshape(h, w, c)
    return PageImage(px)


def ref_resize(px: np.ndarray, th: int, tw: int) -> np.ndarray:
    """Scalar reference bilinear: half-pixel centers, ties away from zero.

    The scale factor src/dst is precomputed, matching the documented
    coordinate convention.
    """
    sh, sw, ch = px.shape
    yscale = sh / th
    xscale = sw / tw
    out = np.empty((th, tw, ch), dtype=np.uint8)
    for y in range(th):
        sy = min(max((y + 0.5) * yscale - 0.5, 0.0), sh - 1.0)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, sh - 1)
        fy = sy - y0
        for x in range(tw):
            sx = min(max((x + 0.5) * xscale - 0.5, 0.0), sw - 1.0)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, sw - 1)
            fx = sx - x0
            for c in range(ch):
                top = px[y0, x0, c] * (1.0 - fx) + px[y0, x1, c] * fx
                bot = px[y1, x0, c] * (1.0 - fx) + px[y1, x1, c] * fx
                v = top * (1.0 - fy) + bot * fy
                out[y, x, c] = min(255, int(math.floor(v + 0.5)))
    return out


class TestPartition:
    def test_exact_division(self):
        img = rand_image(1, 100, 60)
        regions = partition(img, 2, 3)
        assert len(regions) == 6
        assert all(r.height == 50 and r.width == 20 for r in regions)

    def test_one_by_one_is_identity(self):
        img = rand_image(2, 17, 23)
        (region,) = partition(img, 1, 1)
        assert np.array_equal(region.pixels, img.pixels)

    def test_floor_boundaries_remainder_later(self):
        img = rand_image(3, 4, 5)
        regions = partition(img, 1, 2)
        assert [r.width for r in regions] == [2, 3]

    def test_grid_too_fine(self):
        img = rand_image(4, 3, 3)
        with pytest.raises(GridTooFine):
            partition(img, 4, 1)

    @settings(max_examples=40, deadline=None)
    @given(
        st.integers(0, 2 ** 31),
        st.integers(1, 12),
        st.integers(1, 12),
        st.integers(1, 4),
        st.integers(1, 4),
    )
    def test_partition_reconstructs_image(self, seed, h, w, hk, wk):
        if hk > h or wk > w:
            return
        img = rand_image(seed, h, w)
        regions = partition(img, hk, wk)
        rows = []
        for i in range(hk):
            rows.append(
                np.concatenate(
                    [regions[i * wk + j].pixels for j in range(wk)], axis=1
                )
            )
        assert np.array_equal(np.concatenate(rows, axis=0), img.pixels)


class TestResize:
    def test_constant_image_stays_constant(self):
        img = PageImage(np.full((5, 7, 1), 99, dtype=np.uint8))
        out = resize(img, 13, 11)
        assert (out.pixels == 99).all()
        assert (out.height, out.width) == (13, 11)

    def test_identity_resize(self):
        img = PageImage(np.array([[0, 255], [255, 0]], dtype=np.uint8))
        out = resize(img, 2, 2)
        assert np.array_equal(out.pixels, img.pixels)

    def test_upsample_matches_reference(self):
        img = PageImage(np.array([[0], [255]], dtype=np.uint8))
        out = resize(img, 4, 1)
        assert np.array_equal(out.pixels, ref_resize(img.pixels, 4, 1))

    def test_random_images_match_reference(self):
        for seed, (sh, sw), (th, tw) in [
            (10, (8, 8), (5, 11)),
            (11, (3, 9), (9, 3)),
            (12, (16, 7), (7, 16)),
            (13, (5, 5), (20, 20)),
        ]:
            img = rand_image(seed, sh, sw, c=3)
            out = resize(img, th, tw)
            assert np.array_equal(out.pixels, ref_resize(img.pixels, th, tw))

    def test_deterministic(self):
        img = rand_image(20, 9, 9)
        a = resize(img, 6, 6)
        b = resize(img, 6, 6)
        assert np.array_equal(a.pixels, b.pixels)


class TestSampleMultires:
    def test_default_grids_give_thirteen_regions(self):
        img = rand_image(30, 60, 72)
        cfg = TilerConfig(16, 16, GranularitySpec.default())
        batches = sample_multires(img, cfg)
        assert sum(b.count for b in batches) == 13
        assert [b.level_index for b in batches] == [1, 2, 3, 4]

    def test_single_level(self):
        img = rand_image(31, 20, 20)
        cfg = TilerConfig(8, 8, GranularitySpec(((1, 1),)))
        batches = sample_multires(img, cfg)
        assert len(batches) == 1 and batches[0].count == 1

    def test_all_regions_target_size(self):
        img = rand_image(32, 33, 47)
        cfg = TilerConfig(10, 12, GranularitySpec.default())
        for batch in sample_multires(img, cfg):
            for region in batch.regions:
                assert (region.height, region.width) == (10, 12)

    def test_target_too_small_rejected(self):
        with pytest.raises(ValueError):
            TilerConfig(4, 64, GranularitySpec.default())


class TestImageIO:
    def test_pgm_round_trip(self, tmp_path):
        img = rand_image(40, 11, 7, c=1)
        path = tmp_path / "img.pgm"
        write_image(path, img)
        back = read_image(path)
        assert np.array_equal(back.pixels, img.pixels)

    def test_ppm_round_trip(self, tmp_path):
        img = rand_image(41, 6, 9, c=3)
        path = tmp_path / "img.ppm"
        write_image(path, img)
        back = read_image(path)
        assert back.channels == 3
        assert np.array_equal(back.pixels, img.pixels)

    def test_comments_in_header(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# a comment\n2 2\n255\n\x01\x02\x03\x04")
        img = read_image(path)
        assert img.pixels.ravel().tolist() == [1, 2, 3, 4]

    def test_truncated_raster_rejected(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n2 2\n255\n\x01\x02")
        with pytest.raises(FormatError):
            read_image(path)

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "w.pbm"
        path.write_bytes(b"P4\n2 2\n\xff")
        with pytest.raises(FormatError):
            read_image(path)

    def test_16bit_maxval_rejected(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n1 1\n65535\n\x00\x00")
        with pytest.raises(FormatError):
            read_image(path)
