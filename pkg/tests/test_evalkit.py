import math

import pytest

from tilerank.errors import MalformedRun, MissingCell
from tilerank.evalkit import (
    OracleTable,
    RelevanceJudgments,
    budget_sweep,
    combined_selector,
    ndcg_at_k,
    read_qrels,
    read_run,
    write_qrels,
    write_sweep_csv,
)
from tilerank.rng import SplitMix64
from tilerank.scorer import ScoredPage


def independent_ndcg(ranking, rels, k):
    """Separate DCG/IDCG implementation: explicit gain/discount loops."""
    dcg = 0.0
    for pos, pid in enumerate(ranking[:k]):
        gain = (2 ** rels.get(pid, 0)) - 1
        dcg += gain / (math.log(pos + 2) / math.log(2))
    ideal = sorted(rels.values(), reverse=True)
    idcg = 0.0
    for pos, rel in enumerate(ideal[:k]):
        idcg += ((2 ** rel) - 1) / (math.log(pos + 2) / math.log(2))
    return None if idcg == 0 else dcg / idcg


def as_run(pages):
    return [ScoredPage(pid, 1.0 / (i + 1), i + 1) for i, pid in enumerate(pages)]


class TestNdcg:
    def test_single_relevant_rank_one(self):
        qrels = RelevanceJudgments({("q", "a"): 1})
        result = ndcg_at_k({"q": as_run(["a", "b", "c"])}, qrels, k=5)
        assert result.mean == 1.0

    def test_single_relevant_rank_three(self):
        qrels = RelevanceJudgments({("q", "c"): 1})
        result = ndcg_at_k({"q": as_run(["a", "b", "c", "d", "e"])}, qrels, k=5)
        assert result.mean == pytest.approx(0.5, abs=1e-12)

    def test_values_in_unit_interval(self):
        stream = SplitMix64(1)
        for _ in range(50):
            pages = [f"p{i}" for i in range(8)]
            rels = {("q", p): stream.randint(4) for p in pages[:4]}
            order = pages[:]
            SplitMix64(stream.next_u64()).shuffle(order)
            result = ndcg_at_k({"q": as_run(order)}, RelevanceJudgments(rels), k=5)
            if result.evaluated:
                assert 0.0 <= result.mean <= 1.0

    def test_matches_independent_reimplementation(self):
        stream = SplitMix64(2)
        for _ in range(200):
            pages = [f"p{i}" for i in range(10)]
            rels = {p: stream.randint(4) for p in pages[: stream.randint(6) + 2]}
            order = pages[:]
            SplitMix64(stream.next_u64()).shuffle(order)
            k = stream.randint(8) + 1
            qrels = RelevanceJudgments({("q", p): r for p, r in rels.items()})
            got = ndcg_at_k({"q": as_run(order)}, qrels, k=k)
            want = independent_ndcg(order, rels, k)
            if want is None:
                assert got.evaluated == 0 and got.excluded == 1
            else:
                assert got.per_query["q"] == pytest.approx(want, abs=1e-9)

    def test_missing_query_scores_zero_and_counts(self):
        qrels = RelevanceJudgments({("q1", "a"): 1, ("q2", "a"): 1})
        result = ndcg_at_k({"q1": as_run(["a"])}, qrels, k=5)
        assert result.per_query == {"q1": 1.0, "q2": 0.0}
        assert result.mean == 0.5

    def test_zero_idcg_excluded_but_counted(self):
        qrels = RelevanceJudgments({("q1", "a"): 1, ("q2", "b"): 0})
        result = ndcg_at_k({"q1": as_run(["a"]), "q2": as_run(["b"])}, qrels, k=5)
        assert result.evaluated == 1
        assert result.excluded == 1
        assert result.mean == 1.0

    def test_relabeling_invariance(self):
        stream = SplitMix64(3)
        pages = [f"p{i}" for i in range(6)]
        rels = {p: stream.randint(3) for p in pages[:4]}
        order = pages[:]
        SplitMix64(9).shuffle(order)
        qrels1 = RelevanceJudgments({("q", p): r for p, r in rels.items()})
        got1 = ndcg_at_k({"q": as_run(order)}, qrels1, k=5)
        rename = {p: f"X_{p}" for p in pages}
        qrels2 = RelevanceJudgments({("q", rename[p]): r for p, r in rels.items()})
        got2 = ndcg_at_k({"q": as_run([rename[p] for p in order])}, qrels2, k=5)
        assert got1.mean == got2.mean

    def test_non_contiguous_ranks_rejected(self):
        qrels = RelevanceJudgments({("q", "a"): 1})
        run = {"q": [ScoredPage("a", 1.0, 1), ScoredPage("b", 0.9, 3)]}
        with pytest.raises(MalformedRun):
            ndcg_at_k(run, qrels, k=5)


class TestCombinedSelector:
    def _table(self, columns):
        return OracleTable.from_columns(columns)

    def test_single_system_is_identity(self):
        table = self._table({"only": {"q1": 0.3, "q2": 0.7}})
        result = combined_selector(table)
        assert result.mean == pytest.approx(0.5)
        assert result.mean == result.system_means["only"]

    def test_two_system_max(self):
        table = self._table(
            {"s1": {"q1": 0.2, "q2": 0.9}, "s2": {"q1": 0.8, "q2": 0.1}}
        )
        result = combined_selector(table)
        assert result.per_query == {"q1": 0.8, "q2": 0.9}
        assert result.mean == pytest.approx(0.85)

    def test_dominates_every_system(self):
        stream = SplitMix64(4)
        for _ in range(100):
            n_sys = stream.randint(4) + 1
            n_q = stream.randint(20) + 1
            columns = {
                f"s{s}": {f"q{i}": stream.next_float() for i in range(n_q)}
                for s in range(n_sys)
            }
            result = combined_selector(self._table(columns))
            for mean in result.system_means.values():
                assert result.mean >= mean

    def test_equality_iff_one_system_dominates(self):
        table = self._table(
            {"weak": {"q1": 0.1, "q2": 0.2}, "strong": {"q1": 0.5, "q2": 0.6}}
        )
        result = combined_selector(table)
        assert result.mean == result.system_means["strong"]

    def test_missing_cell(self):
        with pytest.raises(MissingCell):
            self._table({"s1": {"q1": 0.2}, "s2": {"q1": 0.8, "q2": 0.1}})


class TestBudgetSweep:
    def test_full_budget_equals_uncompressed(self):
        from tilerank.synth import SynthConfig, gen_corpus
        from tilerank.scorer import search

        corpus = gen_corpus(
            SynthConfig(seed=5, n_pages=8, n_queries=6, dim=8,
                        tokens_per_level=(2, 3), n_clusters=4)
        )
        max_tokens = max(rep.total_tokens for rep in corpus.pages)
        rows = budget_sweep(
            corpus.pages, corpus.queries, corpus.qrels, [2, max_tokens], k=5
        )
        run = {
            q.query_id: search(q, corpus.pages, k=5) for q in corpus.queries
        }
        want = ndcg_at_k(run, corpus.qrels, k=5)
        assert rows[1].mean_ndcg == want.mean
        assert rows[1].budget == max_tokens

    def test_budgets_must_ascend(self):
        with pytest.raises(ValueError):
            budget_sweep([], [], RelevanceJudgments({}), [128, 64])


class TestTextFormats:
    def test_qrels_round_trip(self, tmp_path):
        qrels = RelevanceJudgments({("q1", "a"): 2, ("q2", "b"): 0})
        path = tmp_path / "qrels.tsv"
        write_qrels(path, qrels)
        assert read_qrels(path).judgments == qrels.judgments

    def test_run_round_trip(self, tmp_path):
        from tilerank.scorer import write_run

        path = tmp_path / "run.tsv"
        write_run(path, {"q": [ScoredPage("a", 0.75, 1), ScoredPage("b", 0.25, 2)]})
        run = read_run(path)
        assert run == {"q": [("a", 1, 0.75), ("b", 2, 0.25)]}

    def test_sweep_csv(self, tmp_path):
        from tilerank.evalkit import SweepRow

        path = tmp_path / "sweep.csv"
        write_sweep_csv(path, [SweepRow(64, 0.5, 10)])
        assert path.read_text().splitlines() == [
            "budget,mean_ndcg,queries_evaluated",
            "64,0.500000,10",
        ]

    def test_malformed_qrels(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("q1 only-two-fields\n")
        with pytest.raises(MalformedRun):
            read_qrels(path)
