"""Granularity-weighted contrastive training of a linear projection head.

The objective is an InfoNCE loss per granularity level with in-batch
negatives: scores are MaxSim between a query and every page's level-k
prefix, temperature-scaled, and the per-level losses are combined with
fixed level weights. Query and document tokens are both projected by the
same head and re-normalized before scoring; gradients flow through the
normalization and through the selected (argmax) document token.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import NestedPageRep, QueryEmbedding, token_matrix
from .errors import NonFiniteEntry, ZeroNormRow
from .rng import SplitMix64


@dataclass(frozen=True)
class TrainingConfig:
    temperature: float = 0.02
    level_weights: tuple = (1.0, 1.5, 2.0, 2.5)
    learning_rate: float = 0.05
    steps: int = 200
    batch_size: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if any(w <= 0 for w in self.level_weights):
            raise ValueError("level weights must be positive")


@dataclass
class ProjectionHead:
    """Trainable d_in x d_out linear map, float64."""

    weight: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if self.weight.ndim != 2:
            raise ValueError("projection head weight must be 2-D")
        if not np.isfinite(self.weight).all():
            raise NonFiniteEntry(0)

    @property
    def d_in(self) -> int:
        return self.weight.shape[0]

    @property
    def d_out(self) -> int:
        return self.weight.shape[1]

    @classmethod
    def init(cls, d_in: int, d_out: int, seed: int) -> "ProjectionHead":
        scale = np.sqrt(6.0 / (d_in + d_out))
        stream = SplitMix64(seed)
        w = stream.uniform_signed(d_in * d_out).reshape(d_in, d_out) * scale
        return cls(w)


def _check_batch(batch: list) -> int:
    if not batch:
        raise ValueError("empty training batch")
    levels = batch[0][1].num_levels
    for q, rep in batch:
        if rep.num_levels != levels:
            raise ValueError("pages in a batch must share the level count")
    return levels


def _project(raw64: np.ndarray, weight: np.ndarray):
    """Project rows and unit-normalize; returns (unit rows, pre-norm norms)."""
    proj = raw64 @ weight
    norms = np.sqrt(np.einsum("ij,ij->i", proj, proj))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroNormRow(int(zero[0]), "projected tokens")
    return proj / norms[:, None], norms


def _batch_views(batch: list, head: ProjectionHead | None):
    """Per-query and per-page (raw64, unit rows, norms) triples."""
    queries, pages = [], []
    for q, rep in batch:
        q_raw = q.tokens.as_f64()
        d_raw = rep.nested_at(rep.num_levels).as_f64()
        if head is None:
            queries.append((q_raw, q_raw, None))
            pages.append((d_raw, d_raw, None))
        else:
            q_unit, q_norms = _project(q_raw, head.weight)
            d_unit, d_norms = _project(d_raw, head.weight)
            queries.append((q_raw, q_unit, q_norms))
            pages.append((d_raw, d_unit, d_norms))
    return queries, pages


def _level_score_table(queries, pages, boundaries):
    """S[k][i][j] plus the argmax token index per query token.

    sims for a (query, page) pair are computed once over the full page
    and sliced per level, keeping prefix scores exactly consistent.
    """
    b_count = len(queries)
    n_levels = len(boundaries)
    scores = np.zeros((n_levels, b_count, b_count), dtype=np.float64)
    argmaxes = [[None] * b_count for _ in range(b_count)]
    for i, (_, q_unit, _) in enumerate(queries):
        for j, (_, d_unit, _) in enumerate(pages):
            sims = q_unit @ d_unit.T
            per_pair = []
            for k, bound in enumerate(boundaries):
                sub = sims[:, :bound]
                idx = sub.argmax(axis=1)
                vals = sub[np.arange(sub.shape[0]), idx]
                scores[k, i, j] = vals.sum()
                per_pair.append(idx)
            argmaxes[i][j] = per_pair
    return scores, argmaxes


def _nce_from_scores(s: np.ndarray, tau: float) -> float:
    """Mean over rows of -log softmax at the diagonal (row-max stabilized)."""
    if not np.isfinite(s).all():
        raise NonFiniteEntry(0)
    rows = s / tau
    mx = rows.max(axis=1)
    lse = mx + np.log(np.exp(rows - mx[:, None]).sum(axis=1))
    return float(np.mean(lse - np.diag(rows)))


def level_loss(batch: list, k: int, tau: float, head: ProjectionHead | None = None) -> float:
    """InfoNCE at one granularity level over in-batch negatives."""
    _check_batch(batch)
    queries, pages = _batch_views(batch, head)
    boundaries = batch[0][1].boundaries
    scores, _ = _level_score_table(queries, pages, boundaries)
    return _nce_from_scores(scores[k - 1], tau)


def total_loss(batch: list, cfg: TrainingConfig, head: ProjectionHead | None = None) -> float:
    """Level losses combined with the configured granularity weights."""
    levels = _check_batch(batch)
    if len(cfg.level_weights) != levels:
        raise ValueError(
            f"{len(cfg.level_weights)} level weights for {levels} levels"
        )
    queries, pages = _batch_views(batch, head)
    boundaries = batch[0][1].boundaries
    scores, _ = _level_score_table(queries, pages, boundaries)
    return float(
        sum(
            w * _nce_from_scores(scores[k], cfg.temperature)
            for k, w in enumerate(cfg.level_weights)
        )
    )


def grad_total_loss(batch: list, cfg: TrainingConfig, head: ProjectionHead):
    """Analytic (loss, d loss / d weight) at the current head.

    The subgradient at each MaxSim argmax follows the selected document
    token; exact ties break toward the lowest token index.
    """
    levels = _check_batch(batch)
    if len(cfg.level_weights) != levels:
        raise ValueError(f"{len(cfg.level_weights)} level weights for {levels} levels")
    queries, pages = _batch_views(batch, head)
    boundaries = batch[0][1].boundaries
    scores, argmaxes = _level_score_table(queries, pages, boundaries)

    b_count = len(batch)
    tau = cfg.temperature
    grad = np.zeros_like(head.weight)
    loss = 0.0
    for k, w_k in enumerate(cfg.level_weights):
        loss += w_k * _nce_from_scores(scores[k], tau)
        rows = scores[k] / tau
        mx = rows.max(axis=1, keepdims=True)
        ex = np.exp(rows - mx)
        soft = ex / ex.sum(axis=1, keepdims=True)
        coeff = (w_k / (b_count * tau)) * (soft - np.eye(b_count))
        for i in range(b_count):
            q_raw, q_unit, q_norms = queries[i]
            for j in range(b_count):
                c = coeff[i, j]
                if c == 0.0:
                    continue
                d_raw, d_unit, d_norms = pages[j]
                idx = argmaxes[i][j][k]
                d_sel = d_unit[idx]
                s = np.einsum("ij,ij->i", q_unit, d_sel)
                # d(q̂·d̂)/dW through both normalizations
                u = (d_sel - s[:, None] * q_unit) / q_norms[:, None]
                v = (q_unit - s[:, None] * d_sel) / d_norms[idx][:, None]
                grad += c * (q_raw.T @ u + d_raw[idx].T @ v)
    return loss, grad


def finite_difference_grad(
    batch: list, cfg: TrainingConfig, head: ProjectionHead, h: float = 1e-4
) -> np.ndarray:
    """Central-difference gradient of total_loss w.r.t. the head weights."""
    fd = np.zeros_like(head.weight)
    for r in range(head.d_in):
        for c in range(head.d_out):
            w_plus = head.weight.copy()
            w_plus[r, c] += h
            w_minus = head.weight.copy()
            w_minus[r, c] -= h
            fd[r, c] = (
                total_loss(batch, cfg, ProjectionHead(w_plus))
                - total_loss(batch, cfg, ProjectionHead(w_minus))
            ) / (2.0 * h)
    return fd


def gradient_check(
    batch: list, cfg: TrainingConfig, head: ProjectionHead, h: float = 1e-4
) -> float:
    """Max deviation between analytic and central-difference gradients,
    normalized by the gradient scale (max |entry| of either side).

    Per-entry relative error is meaningless for entries far below the
    gradient's magnitude: at tau = 0.02 the h^2 truncation term of the
    central difference already exceeds 1e-4 of a near-zero entry.
    """
    _, analytic = grad_total_loss(batch, cfg, head)
    fd = finite_difference_grad(batch, cfg, head, h)
    scale = max(np.abs(analytic).max(), np.abs(fd).max(), 1e-12)
    return float(np.abs(fd - analytic).max() / scale)


def projected_batch(batch: list, head: ProjectionHead) -> list:
    """The batch with every token matrix projected and re-normalized."""
    out = []
    for q, rep in batch:
        q_unit, _ = _project(q.tokens.as_f64(), head.weight)
        new_q = QueryEmbedding(q.query_id, token_matrix(q_unit))
        segments = tuple(
            token_matrix(_project(seg.as_f64(), head.weight)[0])
            for seg in rep.segments
        )
        out.append((new_q, NestedPageRep(rep.page_id, segments)))
    return out


@dataclass
class TrainResult:
    head: ProjectionHead
    loss_trace: list
    initial_loss: float
    final_loss: float
    heldout_ndcg: float
    heldout_queries: int = 0
    trace_steps: list = field(default_factory=list)


def train_toy(dataset: list, cfg: TrainingConfig, d_out: int | None = None) -> TrainResult:
    """Plain SGD on the projection head over a toy dataset.

    The dataset is (query, page) positive pairs; the last quarter is held
    out for a final NDCG@5 check against the full page corpus. Batches
    cycle through the training split in fixed order (no reshuffling, so
    runs are reproducible from the seed alone). Loss per step is recorded
    before each update; initial/final losses are evaluated on the whole
    training split as a single batch.
    """
    from .evalkit import RelevanceJudgments, ndcg_at_k
    from .scorer import search

    if len(dataset) < 2 * cfg.batch_size:
        raise ValueError(
            f"dataset of {len(dataset)} pairs; need >= {2 * cfg.batch_size}"
        )
    held = max(2, len(dataset) // 4)
    train, heldout = dataset[:-held], dataset[-held:]

    d_in = dataset[0][0].tokens.dim
    head = ProjectionHead.init(d_in, d_out or d_in, cfg.seed)
    initial_loss = total_loss(train, cfg, head)

    trace = []
    cursor = 0
    for step in range(cfg.steps):
        batch = [
            train[(cursor + i) % len(train)] for i in range(cfg.batch_size)
        ]
        cursor = (cursor + cfg.batch_size) % len(train)
        loss, grad = grad_total_loss(batch, cfg, head)
        trace.append(loss)
        head.weight = head.weight - cfg.learning_rate * grad

    final_loss = total_loss(train, cfg, head)

    corpus = [rep for _, rep in projected_batch(dataset, head)]
    qrels = RelevanceJudgments(
        {(q.query_id, rep.page_id): 1 for q, rep in heldout}
    )
    run = {}
    for q, _ in projected_batch(heldout, head):
        run[q.query_id] = search(q, corpus, k=5)
    ndcg = ndcg_at_k(run, qrels, k=5).mean

    return TrainResult(
        head=head,
        loss_trace=trace,
        initial_loss=initial_loss,
        final_loss=final_loss,
        heldout_ndcg=ndcg,
        heldout_queries=len(heldout),
    )


def write_loss_trace(path, trace: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,loss\n")
        for step, loss in enumerate(trace):
            fh.write(f"{step},{loss:.10f}\n")
