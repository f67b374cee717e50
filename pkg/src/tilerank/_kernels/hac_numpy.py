"""Pure-NumPy greedy agglomerative merge loop.

Semantics shared with the compiled kernel:

* A cluster's id is its smallest member token index; merging keeps the
  lower id and retires the higher one.
* Each step merges the active pair with maximal centroid cosine
  similarity; exact ties break toward the lexicographically smallest
  (id_i, id_j) pair.
* After a merge the centroid is recomputed fresh as the mean of all
  member token rows (ascending index order) and re-normalized.

The similarity table is O(M^2) with incremental row updates plus a
nearest-partner cache, so a step costs O(M d) instead of O(M^2 d).
"""

from __future__ import annotations

import numpy as np

from ..core import UNIT_SNAP
from ..errors import ZeroNormRow


def _unit_mean(tok64: np.ndarray, members: list) -> np.ndarray:
    """Re-normalized member mean, with the engine-wide unit snap.

    Means already within UNIT_SNAP of unit norm (singletons, merges of
    bit-identical tokens) are kept as-is so centroid arithmetic matches
    the stored float32 rows exactly.
    """
    mean = tok64[members].mean(axis=0)
    norm = np.sqrt((mean * mean).sum())
    if norm == 0.0:
        raise ZeroNormRow(members[0], "merged centroid")
    return mean if abs(norm - 1.0) <= UNIT_SNAP else mean / norm


def hac_cluster(tok64: np.ndarray, budget: int) -> list:
    """Cluster M unit rows down to `budget` clusters.

    Returns member index lists, each ascending, ordered by smallest member.
    """
    m_tokens = tok64.shape[0]
    if m_tokens <= budget:
        return [[i] for i in range(m_tokens)]

    members = [[i] for i in range(m_tokens)]
    active = np.ones(m_tokens, dtype=bool)
    cents = tok64.copy()
    sims = cents @ cents.T
    np.fill_diagonal(sims, -np.inf)
    best = sims.argmax(axis=1)
    best_sim = sims[np.arange(m_tokens), best]

    n_active = m_tokens
    while n_active > budget:
        top = best_sim[active].max()
        rows = np.flatnonzero(active & (best_sim == top))
        a, b = min(
            (min(int(i), int(best[i])), max(int(i), int(best[i]))) for i in rows
        )

        merged = sorted(members[a] + members[b])
        members[a] = merged
        members[b] = []
        active[b] = False
        n_active -= 1
        sims[b, :] = -np.inf
        sims[:, b] = -np.inf
        best_sim[b] = -np.inf

        centroid = _unit_mean(tok64, merged)
        cents[a] = centroid
        act = np.flatnonzero(active)
        vals = cents[act] @ centroid
        sims[a, act] = vals
        sims[act, a] = vals
        sims[a, a] = -np.inf

        if n_active <= budget:
            break

        # nearest-partner repair: rows pointing at a or b rescan fully,
        # everyone else only compares against the refreshed column a
        stale = active & ((best == a) | (best == b))
        stale[a] = True
        for i in np.flatnonzero(stale):
            j = int(sims[i].argmax())
            best[i] = j
            best_sim[i] = sims[i, j]
        rest = np.flatnonzero(active & ~stale)
        if rest.size:
            col = sims[rest, a]
            take = (col > best_sim[rest]) | ((col == best_sim[rest]) & (a < best[rest]))
            upd = rest[take]
            best[upd] = a
            best_sim[upd] = sims[upd, a]

    return [members[i] for i in np.flatnonzero(active)]
