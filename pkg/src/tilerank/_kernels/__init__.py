"""Kernel backend selection.

The compiled extension is preferred when importable; setting the
environment variable TILERANK_PURE=1 forces the NumPy fallback. Both
backends implement identical semantics (merge order, tie-breaking,
accumulation precision), so results are interchangeable.
"""

from __future__ import annotations

import os

import numpy as np

from ..core import UNIT_SNAP
from ..errors import ZeroNormRow
from . import hac_numpy, maxsim_numpy

_native = None
if os.environ.get("TILERANK_PURE") != "1":
    try:
        from importlib import import_module

        _native = import_module("._native", __name__)
    except ImportError:
        _native = None

BACKEND = "compiled" if _native is not None else "pure"


def _f64(arr: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(arr, dtype=np.float64)


def maxsim_score(q: np.ndarray, d: np.ndarray) -> float:
    q64, d64 = _f64(q), _f64(d)
    if _native is not None:
        return float(_native.maxsim_score(q64, d64))
    return maxsim_numpy.maxsim_score(q64, d64)


def maxsim_argmax(q: np.ndarray, d: np.ndarray):
    q64, d64 = _f64(q), _f64(d)
    if _native is not None:
        return _native.maxsim_argmax(q64, d64)
    return maxsim_numpy.maxsim_argmax(q64, d64)


def _labels_to_clusters(labels: np.ndarray) -> list:
    groups: dict = {}
    for t, lab in enumerate(labels.tolist()):
        groups.setdefault(lab, []).append(t)
    return [groups[k] for k in sorted(groups)]


def hac_cluster(tok: np.ndarray, budget: int) -> list:
    """Member index lists after greedy merging down to `budget` clusters."""
    tok64 = _f64(tok)
    if _native is not None:
        try:
            labels = _native.hac_labels(tok64, budget, UNIT_SNAP)
        except ValueError as exc:  # zero-norm signal from the nogil loop
            msg = str(exc)
            if msg.startswith("zero-norm:"):
                raise ZeroNormRow(int(msg.split(":", 1)[1]), "merged centroid") from None
            raise
        return _labels_to_clusters(labels)
    return hac_numpy.hac_cluster(tok64, budget)
