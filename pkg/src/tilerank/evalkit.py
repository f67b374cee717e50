"""Retrieval evaluation: graded NDCG@K, the combined selector, budget sweeps.

NDCG uses the standard graded gain (2^rel - 1) with log2(rank+1)
discounting. Queries whose judgments admit no gain (IDCG = 0) are
excluded from the mean but counted; queries judged but absent from the
run score 0 and are included, so silent failures are penalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .compressor import CompressionConfig, compress_corpus
from .errors import MalformedRun, MissingCell
from .scorer import search


@dataclass(frozen=True)
class RelevanceJudgments:
    """Graded relevance: (query_id, page_id) -> integer >= 0."""

    judgments: dict

    def __post_init__(self):
        for key, rel in self.judgments.items():
            if rel < 0:
                raise ValueError(f"negative relevance for {key}")

    def for_query(self, query_id: str) -> dict:
        return {
            pid: rel
            for (qid, pid), rel in self.judgments.items()
            if qid == query_id
        }

    @property
    def query_ids(self) -> list:
        return sorted({qid for qid, _ in self.judgments})


@dataclass(frozen=True)
class NdcgResult:
    per_query: dict
    mean: float
    evaluated: int
    excluded: int


def _ranking_of(entry) -> list:
    """Ordered page ids from a run entry; validates contiguous ranks."""
    pages = []
    for pos, item in enumerate(entry, start=1):
        if hasattr(item, "rank"):
            pid, rank = item.page_id, item.rank
        else:
            pid, rank = item[0], int(item[1])
        if rank != pos:
            raise MalformedRun(f"rank {rank} at position {pos}; ranks must be 1,2,...")
        pages.append(pid)
    return pages


def ndcg_at_k(run: dict, qrels: RelevanceJudgments, k: int) -> NdcgResult:
    """Per-query NDCG@k and the mean over evaluable queries."""
    per_query = {}
    excluded = 0
    for qid in qrels.query_ids:
        rels = qrels.for_query(qid)
        ideal = sorted(rels.values(), reverse=True)[:k]
        idcg = sum((2.0 ** rel - 1.0) / math.log2(r + 1) for r, rel in enumerate(ideal, 1))
        if idcg == 0.0:
            excluded += 1
            continue
        dcg = 0.0
        if qid in run:
            for rank, pid in enumerate(_ranking_of(run[qid])[:k], start=1):
                rel = rels.get(pid, 0)
                dcg += (2.0 ** rel - 1.0) / math.log2(rank + 1)
        per_query[qid] = dcg / idcg
    mean = sum(per_query.values()) / len(per_query) if per_query else 0.0
    return NdcgResult(per_query=per_query, mean=mean, evaluated=len(per_query), excluded=excluded)


@dataclass(frozen=True)
class OracleTable:
    """Per-query metric values for several single-granularity systems."""

    values: dict  # (query_id, system) -> float
    systems: tuple
    query_ids: tuple

    @classmethod
    def from_columns(cls, columns: dict) -> "OracleTable":
        """columns: system name -> {query_id: value}; must be rectangular."""
        systems = tuple(sorted(columns))
        if not systems:
            raise ValueError("oracle table needs at least one system")
        query_ids = tuple(sorted({qid for col in columns.values() for qid in col}))
        values = {}
        for system in systems:
            col = columns[system]
            for qid in query_ids:
                if qid not in col:
                    raise MissingCell(f"system {system!r} missing query {qid!r}")
                values[(qid, system)] = float(col[qid])
        return cls(values=values, systems=systems, query_ids=query_ids)

    def cell(self, query_id: str, system: str) -> float:
        try:
            return self.values[(query_id, system)]
        except KeyError:
            raise MissingCell(f"no cell for ({query_id!r}, {system!r})") from None


@dataclass(frozen=True)
class CombinedResult:
    per_query: dict
    mean: float
    system_means: dict


def combined_selector(table: OracleTable) -> CombinedResult:
    """Per query, the best score across systems; plus per-system means."""
    per_query = {
        qid: max(table.cell(qid, system) for system in table.systems)
        for qid in table.query_ids
    }
    n = len(table.query_ids)
    system_means = {
        system: sum(table.cell(qid, system) for qid in table.query_ids) / n
        for system in table.systems
    }
    return CombinedResult(
        per_query=per_query,
        mean=sum(per_query.values()) / n,
        system_means=system_means,
    )


@dataclass(frozen=True)
class SweepRow:
    budget: int
    mean_ndcg: float
    queries_evaluated: int


def budget_sweep(
    corpus: list,
    queries: list,
    qrels: RelevanceJudgments,
    budgets: list,
    k: int = 5,
    threads: int = 1,
) -> list:
    """Compress, search, and evaluate at each token budget (ascending)."""
    if list(budgets) != sorted(budgets):
        raise ValueError("budgets must be ascending")
    rows = []
    for budget in budgets:
        compressed = compress_corpus(corpus, CompressionConfig(budget), threads=threads)
        run = {q.query_id: search(q, compressed, k=k, threads=threads) for q in queries}
        result = ndcg_at_k(run, qrels, k=k)
        rows.append(SweepRow(budget, result.mean, result.evaluated))
    return rows


# --- text formats ---


def read_qrels(path) -> RelevanceJudgments:
    judgments = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise MalformedRun(f"{path}:{line_no}: want query<TAB>page<TAB>rel")
            judgments[(parts[0], parts[1])] = int(parts[2])
    return RelevanceJudgments(judgments)


def write_qrels(path, qrels: RelevanceJudgments) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (qid, pid), rel in sorted(qrels.judgments.items()):
            fh.write(f"{qid}\t{pid}\t{rel}\n")


def read_run(path) -> dict:
    """Run TSV -> {query_id: [(page_id, rank, score)] sorted by rank}."""
    run: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise MalformedRun(f"{path}:{line_no}: want query<TAB>page<TAB>rank<TAB>score")
            run.setdefault(parts[0], []).append((parts[1], int(parts[2]), float(parts[3])))
    for qid in run:
        run[qid].sort(key=lambda t: t[1])
    return run


def write_sweep_csv(path, rows: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("budget,mean_ndcg,queries_evaluated\n")
        for row in rows:
            fh.write(f"{row.budget},{row.mean_ndcg:.6f},{row.queries_evaluated}\n")
