import numpy as np
import pytest

from tilerank.core import TokenMatrix
from tilerank.rng import SplitMix64


def unit_rows(stream: SplitMix64, n: int, d: int) -> np.ndarray:
    """n random unit rows (float32-exact) from a splitmix stream."""
    rows = stream.uniform_signed(n * d).reshape(n, d)
    rows /= np.sqrt((rows * rows).sum(axis=1))[:, None]
    rows32 = rows.astype(np.float32)
    # re-normalize after the float32 cast so stored rows are unit
    r64 = rows32.astype(np.float64)
    norms = np.sqrt((r64 * r64).sum(axis=1))
    return (r64 / norms[:, None]).astype(np.float32)


def unit_matrix(stream: SplitMix64, n: int, d: int) -> TokenMatrix:
    return TokenMatrix(unit_rows(stream, n, d))


@pytest.fixture
def sm():
    return SplitMix64
