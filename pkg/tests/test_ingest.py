import io

import pytest

from xlingqa.errors import DataValidationError
from xlingqa.hashing import pair_id
from xlingqa.ingest import (
    Passage,
    parse_aligned_tsv,
    parse_passages_tsv,
    parse_qa_jsonl,
    write_aligned_tsv,
    write_passages_tsv,
    write_qa_jsonl,
)

from conftest import make_passage, make_qa, stream


class TestAlignedTsv:
    def test_empty_stream(self):
        result = parse_aligned_tsv(stream(""), "am", "en")
        assert result.records == []
        assert result.rejected == 0

    def test_rejects_are_counted_not_dropped(self):
        text = "a1\tb1\na2\tb2\nonly-one-column\na3\tb3\n"
        result = parse_aligned_tsv(stream(text), "am", "en")
        assert result.accepted == 3
        assert result.rejected == 1
        assert result.rejects[0].line_no == 3

    def test_field_mapping(self):
        result = parse_aligned_tsv(stream("hello\tbonjour\t0.93\n"), "en", "fr")
        (pair,) = result.records
        assert pair.text_a == "hello"
        assert pair.text_b == "bonjour"
        assert pair.similarity == 0.93
        assert pair.lang_a == "en"
        assert pair.lang_b == "fr"

    def test_pair_id_is_stable_and_content_derived(self):
        result = parse_aligned_tsv(stream("hello\tbonjour\n"), "en", "fr")
        # frozen: first 8 bytes of blake2b over "hello\x00bonjour"
        assert result.records[0].pair_id == 15387961013907957770
        assert pair_id("hello", "bonjour") != pair_id("bonjour", "hello")

    def test_malformed_utf8_is_hard_error_with_offset(self):
        with pytest.raises(DataValidationError, match="byte offset 4"):
            parse_aligned_tsv(io.BytesIO(b"abcd\xff\tx\n"), "am", "en")

    def test_bad_similarity_values_rejected(self):
        text = "a\tb\tnot-a-number\nc\td\t1.5\ne\tf\t0.5\n"
        result = parse_aligned_tsv(stream(text), "am", "en")
        assert result.accepted == 1
        assert {r.reason for r in result.rejects} == {
            "similarity not a number",
            "similarity outside [0, 1]",
        }

    def test_blank_lines_skipped_silently(self):
        text = "\na\tb\n\n\nc\td\n\n"
        result = parse_aligned_tsv(stream(text), "am", "en")
        assert result.accepted == 2
        assert result.rejected == 0

    def test_accounting_invariant(self):
        text = "a\tb\nbad\nc\td\te\tf\ng\th\t0.2\n\n"
        result = parse_aligned_tsv(stream(text), "am", "en")
        non_blank = sum(1 for line in text.split("\n") if line.strip())
        assert result.accepted + result.rejected == non_blank

    def test_round_trip(self, tmp_path):
        text = "a\tb\t0.25\nc\td\ne e\tf f\t1.0\n"
        first = parse_aligned_tsv(stream(text), "am", "en")
        out = tmp_path / "pairs.tsv"
        write_aligned_tsv(first.records, out)
        second = parse_aligned_tsv(out, "am", "en")
        assert second.records == first.records
        assert second.rejected == 0


class TestQaJsonl:
    def test_empty(self):
        assert parse_qa_jsonl(stream("")) == []

    def test_field_mapping(self):
        line = ('{"qid": "q1", "question": "who?", "answers": ["a", "b"], '
                '"language": "km"}')
        (ex,) = parse_qa_jsonl(stream(line + "\n"))
        assert ex.qid == "q1"
        assert ex.answers == ("a", "b")
        assert ex.positive_contexts == ()

    def test_positive_contexts_inherit_language(self):
        line = ('{"qid": "q1", "question": "who?", "answers": ["a"], "language": "km", '
                '"positive_contexts": [{"pid": "p1", "title": "t", "text": "x"}]}')
        (ex,) = parse_qa_jsonl(stream(line + "\n"))
        assert ex.positive_contexts[0].language == "km"

    def test_duplicate_qid_is_hard_error(self):
        lines = (
            '{"qid": "q1", "question": "a?", "answers": ["x"], "language": "km"}\n'
            '{"qid": "q1", "question": "b?", "answers": ["y"], "language": "km"}\n'
        )
        with pytest.raises(DataValidationError, match=r"line 2: duplicate qid 'q1'"):
            parse_qa_jsonl(stream(lines))

    def test_missing_key_names_line(self):
        with pytest.raises(DataValidationError, match="line 1: missing required key 'answers'"):
            parse_qa_jsonl(stream('{"qid": "q", "question": "x", "language": "km"}\n'))

    def test_empty_answers_is_hard_error(self):
        line = '{"qid": "q", "question": "x", "answers": [], "language": "km"}\n'
        with pytest.raises(DataValidationError, match="empty answers"):
            parse_qa_jsonl(stream(line))

    def test_round_trip(self, tmp_path):
        examples = [
            make_qa("q1", "who is it?", ["ans one", "two"], "am",
                    [make_passage("p1", "body text", "en", title="T")]),
            make_qa("q2", "where?", ["there"], "km"),
        ]
        out = tmp_path / "qa.jsonl"
        write_qa_jsonl(examples, out)
        assert parse_qa_jsonl(out) == examples


class TestPassagesTsv:
    def test_header_only(self):
        result = parse_passages_tsv(stream("pid\ttext\ttitle\tlanguage\n"))
        assert result.records == []
        assert result.rejected == 0

    def test_two_rows(self):
        text = "p1\tbody one\tTitle\ten\np2\tbody two\t\tth\n"
        result = parse_passages_tsv(stream(text))
        assert [p.pid for p in result.records] == ["p1", "p2"]
        assert result.records[1].language == "th"

    def test_duplicate_pid_names_pid(self):
        text = "p1\ta\tt\ten\np1\tb\tt\ten\n"
        with pytest.raises(DataValidationError, match="duplicate pid 'p1'"):
            parse_passages_tsv(stream(text))

    def test_wrong_column_count_rejected(self):
        text = "p1\ta\tt\ten\nbad\trow\n"
        result = parse_passages_tsv(stream(text))
        assert result.accepted == 1
        assert result.rejected == 1

    def test_empty_text_rejected(self):
        result = parse_passages_tsv(stream("p1\t\tt\ten\n"))
        assert result.accepted == 0
        assert result.rejected == 1

    def test_round_trip_with_header(self, tmp_path):
        passages = [
            Passage("p1", "Title", "body one", "en"),
            Passage("p2", "", "body two", "th"),
        ]
        out = tmp_path / "passages.tsv"
        write_passages_tsv(passages, out)
        again = parse_passages_tsv(out)
        assert again.records == passages
        assert again.rejected == 0

    def test_determinism(self):
        text = "p1\ta\tt\ten\np2\tb\tt\tth\n"
        first = parse_passages_tsv(stream(text))
        second = parse_passages_tsv(stream(text))
        assert first.records == second.records
