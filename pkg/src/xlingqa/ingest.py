"""Parsers for the external data formats.

Three formats are supported, all UTF-8 with LF line endings:

* aligned-pair TSV: ``text_a<TAB>text_b[<TAB>similarity]``
* QA JSONL: one object per line with keys ``qid``, ``question``,
  ``answers``, ``language`` and optional ``positive_contexts``
* passage TSV: ``pid<TAB>text<TAB>title<TAB>language`` with an optional
  header row detected by the literal column names

Parsers are pure functions of their input bytes: same bytes, same
records, in file order. Invalid lines are never dropped silently; they
are collected in a rejects report so that
``accepted + rejected == non-blank data lines``.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

from .errors import DataValidationError
from .hashing import pair_id

PASSAGE_TSV_HEADER = ("pid", "text", "title", "language")


@dataclass(frozen=True)
class SentencePair:
    """A bilingual sentence pair, optionally carrying a similarity score."""

    pair_id: int
    lang_a: str
    lang_b: str
    text_a: str
    text_b: str
    similarity: float | None = None


def make_pair(text_a: str, text_b: str, lang_a: str, lang_b: str,
              similarity: float | None = None) -> SentencePair:
    """Build a SentencePair with its derived 64-bit id."""
    return SentencePair(pair_id(text_a, text_b), lang_a, lang_b, text_a, text_b, similarity)


@dataclass(frozen=True)
class Passage:
    pid: str
    title: str
    text: str
    language: str


@dataclass(frozen=True)
class QaExample:
    qid: str
    question: str
    answers: tuple[str, ...]
    positive_contexts: tuple[Passage, ...]
    language: str


@dataclass(frozen=True)
class RejectedLine:
    line_no: int
    reason: str
    raw: str


@dataclass
class ParseResult:
    """Accepted records plus the rejects report for one input file."""

    records: list
    rejects: list[RejectedLine] = field(default_factory=list)

    @property
    def accepted(self) -> int:
        return len(self.records)

    @property
    def rejected(self) -> int:
        return len(self.rejects)


def _read_text(source: BinaryIO | bytes | str | Path) -> str:
    """Decode a byte source as UTF-8; malformed input is a hard error."""
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    elif isinstance(source, bytes):
        data = source
    else:
        data = source.read()
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DataValidationError(
            f"malformed UTF-8 at byte offset {exc.start}"
        ) from exc


def _data_lines(text: str):
    """Yield (line_no, line) for non-blank lines; blank lines are skipped."""
    for line_no, line in enumerate(text.split("\n"), start=1):
        if line.strip():
            yield line_no, line


def parse_aligned_tsv(source, lang_a: str, lang_b: str) -> ParseResult:
    """Parse aligned-pair TSV into SentencePair records.

    Lines with a wrong column count, empty texts, or an unparseable or
    out-of-range similarity go to the rejects report.
    """
    result = ParseResult([])
    for line_no, line in _data_lines(_read_text(source)):
        cols = line.split("\t")
        if len(cols) < 2:
            result.rejects.append(RejectedLine(line_no, "expected at least 2 columns", line))
            continue
        if len(cols) > 3:
            result.rejects.append(RejectedLine(line_no, "expected 2 or 3 columns", line))
            continue
        text_a, text_b = cols[0].strip(), cols[1].strip()
        if not text_a or not text_b:
            result.rejects.append(RejectedLine(line_no, "empty text cell", line))
            continue
        similarity = None
        if len(cols) == 3:
            try:
                similarity = float(cols[2])
            except ValueError:
                result.rejects.append(RejectedLine(line_no, "similarity not a number", line))
                continue
            if not 0.0 <= similarity <= 1.0:
                result.rejects.append(RejectedLine(line_no, "similarity outside [0, 1]", line))
                continue
        result.records.append(make_pair(text_a, text_b, lang_a, lang_b, similarity))
    return result


def write_aligned_tsv(pairs, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in pairs:
            if p.similarity is None:
                fh.write(f"{p.text_a}\t{p.text_b}\n")
            else:
                fh.write(f"{p.text_a}\t{p.text_b}\t{p.similarity!r}\n")


def parse_qa_jsonl(source) -> list[QaExample]:
    """Parse QA JSONL; duplicate or malformed records are hard errors."""
    examples: list[QaExample] = []
    seen: dict[str, int] = {}
    for line_no, line in _data_lines(_read_text(source)):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataValidationError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
        for key in ("qid", "question", "answers", "language"):
            if key not in obj:
                raise DataValidationError(f"line {line_no}: missing required key {key!r}")
        qid = str(obj["qid"])
        if qid in seen:
            raise DataValidationError(
                f"line {line_no}: duplicate qid {qid!r} (first seen at line {seen[qid]})"
            )
        seen[qid] = line_no
        answers = [str(a) for a in obj["answers"]]
        if not answers:
            raise DataValidationError(f"line {line_no}: empty answers list for qid {qid!r}")
        language = str(obj["language"])
        contexts = []
        for ctx in obj.get("positive_contexts", []) or []:
            for key in ("pid", "title", "text"):
                if key not in ctx:
                    raise DataValidationError(
                        f"line {line_no}: positive context missing key {key!r}"
                    )
            contexts.append(Passage(
                pid=str(ctx["pid"]),
                title=str(ctx["title"]),
                text=str(ctx["text"]),
                language=str(ctx.get("language", language)),
            ))
        examples.append(QaExample(
            qid=qid,
            question=str(obj["question"]),
            answers=tuple(answers),
            positive_contexts=tuple(contexts),
            language=language,
        ))
    return examples


def write_qa_jsonl(examples, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            obj = {
                "qid": ex.qid,
                "question": ex.question,
                "answers": list(ex.answers),
                "language": ex.language,
                "positive_contexts": [
                    {"pid": c.pid, "title": c.title, "text": c.text, "language": c.language}
                    for c in ex.positive_contexts
                ],
            }
            fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")


def parse_passages_tsv(source) -> ParseResult:
    """Parse passage TSV; pid collisions are hard errors."""
    result = ParseResult([])
    seen: dict[str, int] = {}
    header_skipped = False
    for line_no, line in _data_lines(_read_text(source)):
        cols = line.split("\t")
        if not header_skipped:
            header_skipped = True
            if tuple(c.strip() for c in cols) == PASSAGE_TSV_HEADER:
                continue
        if len(cols) != 4:
            result.rejects.append(RejectedLine(line_no, "expected 4 columns", line))
            continue
        pid, text, title, language = (c.strip() for c in cols)
        if not text:
            result.rejects.append(RejectedLine(line_no, "empty passage text", line))
            continue
        if pid in seen:
            raise DataValidationError(
                f"line {line_no}: duplicate pid {pid!r} (first seen at line {seen[pid]})"
            )
        seen[pid] = line_no
        result.records.append(Passage(pid=pid, title=title, text=text, language=language))
    return result


def write_passages_tsv(passages, path: str | Path, header: bool = True) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write("\t".join(PASSAGE_TSV_HEADER) + "\n")
        for p in passages:
            fh.write(f"{p.pid}\t{p.text}\t{p.title}\t{p.language}\n")


def read_text_lines(source) -> list[str]:
    """Non-blank stripped lines of a plain-text corpus file."""
    return [line.strip() for _, line in _data_lines(_read_text(source))]


def write_rejects_report(rejects, path: str | Path) -> None:
    """Persist a rejects report as TSV: line number, reason, raw line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("line\treason\traw\n")
        for r in rejects:
            fh.write(f"{r.line_no}\t{r.reason}\t{r.raw}\n")
