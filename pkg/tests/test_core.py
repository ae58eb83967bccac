import math

import pytest

from pivotrank import (
    CallRecord,
    DocEntry,
    InferenceLedger,
    JudgmentSet,
    PartitionPlan,
    PlanError,
    Query,
    RankEntry,
    RankedList,
    ValidationError,
    make_ranked_list,
    truncate_to_depth,
    validate,
)

from conftest import make_ids, make_ranking


class TestTokens:
    def test_query_and_doc_accept_plain_tokens(self):
        assert Query(id="q1").id == "q1"
        assert DocEntry(doc_id="msmarco_v2_doc_00_1", text="hello world").doc_id.startswith("msmarco")

    @pytest.mark.parametrize("bad", ["", " ", "a b", "a\tb", "a\nb", None, 7])
    def test_rejects_non_tokens(self, bad):
        with pytest.raises(ValidationError):
            Query(id=bad)
        with pytest.raises(ValidationError):
            DocEntry(doc_id=bad)


class TestRankedList:
    def test_synthesized_scores_descend_from_n(self):
        ranking = make_ranking("q1", 4)
        assert [e.rank for e in ranking] == [1, 2, 3, 4]
        assert [e.score for e in ranking] == [4.0, 3.0, 2.0, 1.0]
        assert validate(ranking) == []

    def test_empty_and_duplicate_orders_rejected(self):
        with pytest.raises(ValidationError, match="empty"):
            make_ranked_list(Query(id="q"), [])
        with pytest.raises(ValidationError, match="duplicate"):
            make_ranked_list(Query(id="q"), ["a", "b", "a"])

    def test_truncate_keeps_prefix(self):
        ranking = make_ranking("q1", 10)
        top = truncate_to_depth(ranking, 3)
        assert top.doc_ids() == make_ids(10)[:3]
        assert len(truncate_to_depth(ranking, 99)) == 10
        with pytest.raises(ValidationError):
            truncate_to_depth(ranking, 0)

    def test_doc_ids_and_iteration(self):
        ranking = make_ranking("q1", 3)
        assert ranking.doc_ids() == [e.doc_id for e in ranking]
        assert len(ranking) == 3


class TestValidate:
    def _entries(self, rows):
        return RankedList(
            query=Query(id="q"),
            entries=tuple(RankEntry(doc_id=d, rank=r, score=s) for d, r, s in rows),
        )

    def test_reports_each_violation_class(self):
        cases = {
            "start": ([("a", 2, 2.0)], "ranks start at 2"),
            "dup_rank": ([("a", 1, 2.0), ("b", 1, 1.0)], "duplicate rank"),
            "gap": ([("a", 1, 2.0), ("b", 3, 1.0)], "gap after rank 1"),
            "dup_doc": ([("a", 1, 3.0), ("a", 2, 2.0)], "duplicate doc_id"),
            "nan": ([("a", 1, math.nan)], "non-finite score"),
            "order": ([("a", 1, 1.0), ("b", 2, 1.0)], "non-strict score order"),
        }
        for name, (rows, needle) in cases.items():
            problems = validate(self._entries(rows))
            assert any(needle in p for p in problems), (name, problems)

    def test_clean_list_has_no_violations(self):
        assert validate(make_ranking("q", 50)) == []


class TestJudgmentSet:
    def test_grades_and_defaults(self):
        judged = JudgmentSet.from_pairs([("q1", "a", 3), ("q1", "b", 0), ("q2", "a", 1)])
        assert judged.grade("q1", "a") == 3
        assert judged.grade("q1", "unjudged") == 0
        assert judged.grade("q9", "a") == 0
        assert judged.query_ids() == ["q1", "q2"]
        assert len(judged) == 3 and bool(judged)
        assert not JudgmentSet({})

    def test_docs_for_returns_a_copy(self):
        judged = JudgmentSet.from_pairs([("q1", "a", 2)])
        docs = judged.docs_for("q1")
        docs["a"] = 99
        assert judged.grade("q1", "a") == 2

    def test_duplicate_pair_rejected(self):
        with pytest.raises(ValidationError, match="duplicate judgment"):
            JudgmentSet.from_pairs([("q1", "a", 1), ("q1", "a", 2)])

    def test_negative_grade_rejected(self):
        with pytest.raises(ValidationError):
            JudgmentSet.from_pairs([("q1", "a", -1)])


class TestPartitionPlan:
    def test_tdpart_defaults(self):
        plan = PartitionPlan.tdpart(20, 100)
        assert (plan.cutoff, plan.budget) == (10, 20)
        plan = PartitionPlan.tdpart(20, 100, cutoff=4, budget=50)
        assert (plan.cutoff, plan.budget) == (4, 50)

    def test_mode_constructors(self):
        assert PartitionPlan.single(20, 100).mode == "single"
        assert PartitionPlan.sliding(20, 10, 100).stride == 10

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(mode="zigzag", window=20, depth=100),
            dict(mode="single", window=0, depth=100),
            dict(mode="single", window=20, depth=19),
            dict(mode="sliding", window=20, depth=100, stride=0),
            dict(mode="sliding", window=20, depth=100, stride=20),
            dict(mode="sliding", window=20, depth=100),
            dict(mode="tdpart", window=20, depth=100, cutoff=0),
            dict(mode="tdpart", window=20, depth=100, cutoff=20),
            dict(mode="tdpart", window=20, depth=100, budget=5),
        ],
    )
    def test_invalid_plans_rejected(self, kwargs):
        with pytest.raises(PlanError):
            PartitionPlan(**kwargs)

    def test_budget_must_cover_cutoff(self):
        plan = PartitionPlan.tdpart(20, 100, cutoff=10, budget=10)
        assert plan.budget == 10
        with pytest.raises(PlanError):
            PartitionPlan.tdpart(20, 100, cutoff=10, budget=9)


class TestInferenceLedger:
    def test_counts_depth_and_width(self):
        ledger = InferenceLedger()
        ledger.add_stage([CallRecord(window_size=20)], parallel=False)
        ledger.add_stage([CallRecord(20, True)] * 5, parallel=True)
        ledger.add_stage([CallRecord(11)], parallel=False)
        assert ledger.total_inferences == 7
        assert ledger.sequential_depth == 3
        assert ledger.max_stage_width == 5
        assert ledger.stage_sizes == [1, 5, 1]
        assert ledger.to_dict() == {
            "total_inferences": 7,
            "sequential_depth": 3,
            "max_stage_width": 5,
            "stage_sizes": [1, 5, 1],
        }

    def test_empty_ledger_and_empty_stage(self):
        ledger = InferenceLedger()
        assert ledger.total_inferences == 0
        assert ledger.max_stage_width == 0
        assert ledger.stage_sizes == []
        with pytest.raises(ValidationError):
            ledger.add_stage([], parallel=False)

    def test_stages_are_immutable_snapshots(self):
        ledger = InferenceLedger()
        ledger.add_stage([CallRecord(3)], parallel=False)
        stages = ledger.stages
        ledger.add_stage([CallRecord(4)], parallel=False)
        assert len(stages) == 1 and len(ledger.stages) == 2
