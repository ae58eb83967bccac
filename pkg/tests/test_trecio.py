import io
import logging
import random

import pytest

from pivotrank import (
    JudgmentSet,
    ParseError,
    RankingError,
    parse_corpus,
    parse_qrels,
    parse_queries,
    parse_run,
    write_qrels,
    write_run,
)

from conftest import make_ranking

RUN_TEXT = """\
q2 Q0 docB 1 4.5 sys
q1 Q0 docA 1 12 sys
q1 Q0 docC 2 7.25 sys
q1 Q0 docB 3 1.5 sys
"""

QRELS_TEXT = """\
q1 0 docA 3
q1 0 docB 0
q2 Q0 docB 2
"""


class TestParseRun:
    def test_groups_and_orders_by_rank(self):
        run = parse_run(io.StringIO(RUN_TEXT))
        assert sorted(run) == ["q1", "q2"]
        assert run["q1"].doc_ids() == ["docA", "docC", "docB"]
        assert [e.score for e in run["q1"]] == [12.0, 7.25, 1.5]
        assert run["q2"].query.id == "q2"

    def test_accepts_shuffled_lines_and_bytes(self):
        lines = RUN_TEXT.splitlines()
        random.Random(5).shuffle(lines)
        run = parse_run(line.encode("utf-8") for line in lines)
        assert run["q1"].doc_ids() == ["docA", "docC", "docB"]

    def test_blank_lines_skipped(self):
        run = parse_run(io.StringIO("\n" + RUN_TEXT + "\n\n"))
        assert len(run["q1"]) == 3

    @pytest.mark.parametrize(
        "text, needle",
        [
            ("q1 Q0 docA 1 2.0", "6 whitespace-separated fields"),
            ("q1 Q0 docA one 2.0 sys", "rank is not an integer"),
            ("q1 Q0 docA 1 high sys", "score is not a number"),
            ("q1 Q0 docA 1 nan sys", "score is not finite"),
            ("q1 Q0 docA 1 2.0 sys\nq1 Q0 docB 3 1.0 sys", "ranks are not exactly"),
            ("q1 Q0 docA 1 2.0 sys\nq1 Q0 docA 2 1.0 sys", "duplicate doc_id"),
            ("q1 Q0 docA 1 2.0 sys\nq1 Q0 docB 2 3.0 sys", "score increases"),
        ],
    )
    def test_located_errors(self, text, needle):
        with pytest.raises(ParseError, match=needle) as excinfo:
            parse_run(io.StringIO(text))
        assert "line" in str(excinfo.value)
        assert excinfo.value.line is not None

    def test_tied_scores_warn_once_per_query(self, caplog):
        text = "q1 Q0 a 1 2.0 s\nq1 Q0 b 2 2.0 s\nq1 Q0 c 3 2.0 s\n"
        with caplog.at_level(logging.WARNING):
            run = parse_run(io.StringIO(text))
        assert len(run["q1"]) == 3
        assert sum("tied scores" in r.message for r in caplog.records) == 1


class TestWriteRun:
    def test_round_trip_is_byte_exact(self):
        run = {f"q{i}": make_ranking(f"q{i}", 25) for i in (3, 1, 2)}
        first = io.StringIO()
        write_run(run, "mytag", first)
        reparsed = parse_run(io.StringIO(first.getvalue()))
        second = io.StringIO()
        write_run(reparsed, "mytag", second)
        assert first.getvalue() == second.getvalue()
        assert first.getvalue().splitlines()[0] == "q1 Q0 d0001 1 25 mytag"

    def test_queries_sorted_and_count_returned(self):
        run = {"b": make_ranking("b", 2), "a": make_ranking("a", 3)}
        out = io.StringIO()
        assert write_run(run, "t", out) == 5
        ids = [line.split()[0] for line in out.getvalue().splitlines()]
        assert ids == ["a", "a", "a", "b", "b"]

    def test_bad_tag_rejected(self):
        with pytest.raises(RankingError):
            write_run({}, "has space", io.StringIO())


class TestQrels:
    def test_parse_and_defaults(self):
        judged = parse_qrels(io.StringIO(QRELS_TEXT))
        assert judged.grade("q1", "docA") == 3
        assert judged.grade("q1", "docB") == 0
        assert judged.grade("q2", "docB") == 2
        assert judged.grade("q1", "unjudged") == 0

    def test_iteration_column_not_interpreted(self):
        judged = parse_qrels(io.StringIO("q1 whatever docA 1\n"))
        assert judged.grade("q1", "docA") == 1

    @pytest.mark.parametrize(
        "text, needle",
        [
            ("q1 0 docA", "4 whitespace-separated fields"),
            ("q1 0 docA high", "grade is not an integer"),
            ("q1 0 docA -1", "grade is negative"),
            ("q1 0 docA 1\nq1 0 docA 2", "duplicate judgment"),
        ],
    )
    def test_located_errors(self, text, needle):
        with pytest.raises(ParseError, match=needle):
            parse_qrels(io.StringIO(text))

    def test_round_trip_is_byte_exact(self):
        judged = JudgmentSet.from_pairs(
            [("q2", "b", 1), ("q1", "z", 0), ("q1", "a", 3)]
        )
        first = io.StringIO()
        write_qrels(judged, first)
        second = io.StringIO()
        write_qrels(parse_qrels(io.StringIO(first.getvalue())), second)
        assert first.getvalue() == second.getvalue()
        assert first.getvalue().splitlines() == ["q1 0 a 3", "q1 0 z 0", "q2 0 b 1"]


class TestCorpusAndQueries:
    def test_parse_corpus(self):
        text = '{"id": "d1", "text": "alpha"}\n\n{"id": "d2", "text": ""}\n'
        docs = parse_corpus(io.StringIO(text))
        assert docs["d1"].text == "alpha"
        assert docs["d2"].text == ""

    @pytest.mark.parametrize(
        "text, needle",
        [
            ("not json", "invalid JSON"),
            ('["d1"]', "must be an object"),
            ('{"id": 7, "text": "x"}', "must be an object"),
            ('{"id": "d1"}', "must be an object"),
            ('{"id": "d1", "text": "x"}\n{"id": "d1", "text": "y"}', "duplicate document id"),
            ('{"id": "d 1", "text": "x"}', "doc_id"),
        ],
    )
    def test_corpus_errors(self, text, needle):
        with pytest.raises(ParseError, match=needle):
            parse_corpus(io.StringIO(text))

    def test_parse_queries(self):
        text = "q1\twhat is a pivot\nq2\tsecond query\twith a tab inside\n"
        queries = parse_queries(io.StringIO(text))
        assert queries["q1"].text == "what is a pivot"
        assert queries["q2"].text == "second query\twith a tab inside"

    @pytest.mark.parametrize(
        "text, needle",
        [
            ("q1 no tab here", "two tab-separated fields"),
            ("q1\ta\nq1\tb", "duplicate query id"),
        ],
    )
    def test_query_errors(self, text, needle):
        with pytest.raises(ParseError, match=needle):
            parse_queries(io.StringIO(text))


class TestFuzz:
    def test_parsers_never_crash_on_mutated_bytes(self):
        rng = random.Random(8)
        canonical_run = RUN_TEXT.encode()
        canonical_qrels = QRELS_TEXT.encode()
        for i in range(1_000):
            base = bytearray(canonical_run if i % 2 else canonical_qrels)
            for _ in range(rng.randint(0, 8)):
                op = rng.randrange(3)
                pos = rng.randrange(len(base)) if base else 0
                if op == 0 and base:
                    base[pos] = rng.randrange(256)
                elif op == 1:
                    base.insert(pos, rng.randrange(256))
                elif base:
                    del base[pos]
            data = bytes(base)
            parser = parse_run if i % 2 else parse_qrels
            try:
                parser(io.BytesIO(data))
            except RankingError:
                pass
