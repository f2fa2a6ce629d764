"""Answer-level retrieval evaluation.

A question counts as answered at cutoff k when any gold answer matches
any of its top-k passages. Two matchers are provided: ``string`` requires
the answer's token sequence to appear contiguously in the passage's
token sequence; ``regex`` escapes the answer and searches it as a
substring, so it is strictly more permissive. Both operate on the same
normalized text.

ROUGE-1 is computed as recall of the gold answer's unigrams inside each
passage (clipped by multiplicity), maximized over passages and answers,
then averaged over questions. McNemar's paired test over two hit vectors
uses the exact binomial form for few discordant pairs and the
continuity-corrected chi-square otherwise.
"""

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from scipy.stats import chi2

from .errors import DataValidationError
from .ingest import Passage, QaExample
from .retrieval import RetrievalRun
from .text import normalize_for_match

EXACT_TEST_MAX_DISCORDANT = 25  # below this, use the exact binomial form

normalize_text = normalize_for_match


def match_string(answer: str, passage_text: str) -> bool:
    """Token sequence of the answer occurs contiguously in the passage."""
    needle = normalize_text(answer).split()
    if not needle:
        return False
    hay = normalize_text(passage_text).split()
    n, m = len(hay), len(needle)
    return any(hay[i:i + m] == needle for i in range(n - m + 1))


def match_regex(answer: str, passage_text: str) -> bool:
    """Escaped answer occurs as a substring pattern in the passage."""
    needle = normalize_text(answer)
    if not needle:
        return False
    return re.search(re.escape(needle), normalize_text(passage_text)) is not None


MATCHERS = {"string": match_string, "regex": match_regex}


@dataclass
class HitVector:
    """Per-question binary outcomes, in QA-file order."""

    qids: list[str]
    hits: list[bool]

    def __len__(self) -> int:
        return len(self.hits)


@dataclass
class RecallResult:
    recall: float
    hit_vector: HitVector
    empty_answer_count: int
    missing_run_qids: int


def _passage_lookup(passages: Sequence[Passage]) -> dict[str, Passage]:
    return {p.pid: p for p in passages}


def _check_run_qids(run: RetrievalRun, qa: Sequence[QaExample]) -> None:
    known = {ex.qid for ex in qa}
    unknown = [qid for qid in run.qids if qid not in known]
    if unknown:
        raise DataValidationError(
            "run qids missing from the QA file: " + ", ".join(sorted(unknown)[:20])
        )


def recall_at_k(run: RetrievalRun, qa: Sequence[QaExample], passages: Sequence[Passage],
                k: int, matcher: str = "string") -> RecallResult:
    """Fraction of questions with any answer in any top-k passage.

    Questions without a ranked list count as misses, so paired hit
    vectors over one QA file always align.
    """
    match = MATCHERS[matcher]
    _check_run_qids(run, qa)
    by_pid = _passage_lookup(passages)
    qids, hits = [], []
    empty_answers = 0
    missing = 0
    for ex in qa:
        empty_answers += sum(1 for a in ex.answers if not normalize_text(a))
        hit = False
        if ex.qid not in run._by_qid:
            missing += 1
        else:
            for pid, _score in run.hits_for(ex.qid)[:k]:
                if pid not in by_pid:
                    raise DataValidationError(f"run references unknown pid {pid!r}")
                text = by_pid[pid].text
                if any(match(answer, text) for answer in ex.answers):
                    hit = True
                    break
        qids.append(ex.qid)
        hits.append(hit)
    recall = sum(hits) / len(hits) if hits else 0.0
    return RecallResult(recall, HitVector(qids, hits), empty_answers, missing)


def rouge1_parts(answer: str, passage_text: str) -> tuple[float, float, float]:
    """(recall, precision, f1) of answer unigrams inside the passage."""
    ans = Counter(normalize_text(answer).split())
    pas = Counter(normalize_text(passage_text).split())
    n_ans = sum(ans.values())
    n_pas = sum(pas.values())
    if n_ans == 0:
        return 0.0, 0.0, 0.0
    overlap = sum(min(count, pas[gram]) for gram, count in ans.items())
    recall = overlap / n_ans
    precision = overlap / n_pas if n_pas else 0.0
    f1 = 0.0 if overlap == 0 else 2 * precision * recall / (precision + recall)
    return recall, precision, f1


@dataclass
class RougeResult:
    mean_recall: float
    mean_precision: float
    mean_f1: float


def rouge1_max(run: RetrievalRun, qa: Sequence[QaExample], passages: Sequence[Passage],
               k: int) -> RougeResult:
    """Best per-question ROUGE-1 over top-k passages and gold answers.

    Selection maximizes recall; precision and F1 of the selected
    (answer, passage) pair are kept for the JSON report. Answers that
    normalize to nothing are skipped; a question with no usable answer
    or no ranked list scores 0.
    """
    _check_run_qids(run, qa)
    by_pid = _passage_lookup(passages)
    recalls, precisions, f1s = [], [], []
    for ex in qa:
        best = (0.0, 0.0, 0.0)
        if ex.qid in run._by_qid:
            for pid, _score in run.hits_for(ex.qid)[:k]:
                if pid not in by_pid:
                    raise DataValidationError(f"run references unknown pid {pid!r}")
                for answer in ex.answers:
                    if not normalize_text(answer):
                        continue
                    parts = rouge1_parts(answer, by_pid[pid].text)
                    if parts[0] > best[0]:
                        best = parts
        recalls.append(best[0])
        precisions.append(best[1])
        f1s.append(best[2])
    n = len(qa)
    if n == 0:
        return RougeResult(0.0, 0.0, 0.0)
    return RougeResult(sum(recalls) / n, sum(precisions) / n, sum(f1s) / n)


def language_distribution(run: RetrievalRun, passages: Sequence[Passage],
                          k: int = 20) -> dict[str, float]:
    """Per-language fraction of all retrieved passages at cutoff k.

    Returns the full map; rendering applies the report threshold. Sums
    to 1 whenever anything was retrieved.
    """
    by_pid = _passage_lookup(passages)
    counts: Counter[str] = Counter()
    total = 0
    for hits in run.hits:
        for pid, _score in hits[:k]:
            if pid not in by_pid:
                raise DataValidationError(f"run references unknown pid {pid!r}")
            counts[by_pid[pid].language] += 1
            total += 1
    if total == 0:
        return {}
    return {lang: count / total for lang, count in sorted(counts.items())}


@dataclass
class McNemarResult:
    b: int
    c: int
    statistic: float
    p_value: float
    method: str  # "exact" or "chi2_cc"


def mcnemar(hits_a: Sequence[bool] | HitVector, hits_b: Sequence[bool] | HitVector) -> McNemarResult:
    """Paired significance test over two aligned hit vectors.

    Only discordant pairs matter: b = (a hit, b miss), c = (a miss,
    b hit). With b + c < 25 the exact two-sided binomial p-value
    2 * P(X <= min(b, c)) for X ~ Binomial(b + c, 1/2) is used (capped
    at 1); otherwise the continuity-corrected chi-square statistic
    (|b - c| - 1)^2 / (b + c) with 1 degree of freedom.
    """
    a = hits_a.hits if isinstance(hits_a, HitVector) else list(hits_a)
    b_vec = hits_b.hits if isinstance(hits_b, HitVector) else list(hits_b)
    if len(a) != len(b_vec):
        raise DataValidationError("hit vectors differ in length")
    if isinstance(hits_a, HitVector) and isinstance(hits_b, HitVector):
        if hits_a.qids != hits_b.qids:
            raise DataValidationError("hit vectors are not over the same qid order")
    b = sum(1 for x, y in zip(a, b_vec) if x and not y)
    c = sum(1 for x, y in zip(a, b_vec) if not x and y)
    n = b + c
    if n == 0:
        return McNemarResult(0, 0, 0.0, 1.0, "exact")
    if n < EXACT_TEST_MAX_DISCORDANT:
        low = min(b, c)
        tail = sum(math.comb(n, i) for i in range(low + 1))
        p = min(1.0, 2.0 * tail / 2.0 ** n)
        return McNemarResult(b, c, float(low), p, "exact")
    statistic = (abs(b - c) - 1.0) ** 2 / n
    p = float(chi2.sf(statistic, df=1))
    return McNemarResult(b, c, statistic, p, "chi2_cc")


@dataclass
class EvalBlock:
    """All metrics for one (language, matcher) slice of a run."""

    language: str
    matcher: str
    n_questions: int
    recall_at: dict[int, float]
    rouge1_at: dict[int, RougeResult]
    language_distribution: dict[str, float]
    hit_vectors: dict[int, HitVector]
    empty_answer_count: int = 0
    mcnemar_at: dict[int, McNemarResult] | None = None


@dataclass
class EvalReport:
    label: str
    k_values: tuple[int, ...]
    blocks: list[EvalBlock] = field(default_factory=list)

    @property
    def n_questions(self) -> int:
        return sum(b.n_questions for b in self.blocks)


def evaluate_run(run: RetrievalRun, qa: Sequence[QaExample], passages: Sequence[Passage],
                 k_values: Sequence[int] = (10, 20), matchers: Sequence[str] = ("string", "regex"),
                 label: str = "run", baseline: RetrievalRun | None = None,
                 report_k: int = 20) -> EvalReport:
    """Evaluate a run per (language, matcher) block against one QA file.

    A baseline run, evaluated on the same QA file, adds a McNemar result
    per cutoff to every block.
    """
    ks = tuple(sorted(set(int(k) for k in k_values)))
    if not ks or ks[0] < 1:
        raise ValueError("k values must be positive")
    report = EvalReport(label=label, k_values=ks)
    languages = sorted({ex.language for ex in qa})
    for language in languages:
        subset = [ex for ex in qa if ex.language == language]
        sub_qids = {ex.qid for ex in subset}
        sub_run = _restrict_run(run, sub_qids)
        dist = language_distribution(sub_run, passages, k=report_k)
        base_run = _restrict_run(baseline, sub_qids) if baseline is not None else None
        for matcher in matchers:
            recall_at: dict[int, float] = {}
            hit_vectors: dict[int, HitVector] = {}
            rouge_at: dict[int, RougeResult] = {}
            mcnemar_at: dict[int, McNemarResult] = {}
            empty = 0
            for k in ks:
                res = recall_at_k(sub_run, subset, passages, k, matcher)
                recall_at[k] = res.recall
                hit_vectors[k] = res.hit_vector
                empty = res.empty_answer_count
                rouge_at[k] = rouge1_max(sub_run, subset, passages, k)
                if base_run is not None:
                    base = recall_at_k(base_run, subset, passages, k, matcher)
                    mcnemar_at[k] = mcnemar(res.hit_vector, base.hit_vector)
            report.blocks.append(EvalBlock(
                language=language,
                matcher=matcher,
                n_questions=len(subset),
                recall_at=recall_at,
                rouge1_at=rouge_at,
                language_distribution=dist,
                hit_vectors=hit_vectors,
                empty_answer_count=empty,
                mcnemar_at=mcnemar_at or None,
            ))
    return report


def _restrict_run(run: RetrievalRun | None, qids: set[str]) -> RetrievalRun:
    if run is None:
        raise ValueError("run is required")
    keep = [i for i, qid in enumerate(run.qids) if qid in qids]
    return RetrievalRun(
        qids=[run.qids[i] for i in keep],
        hits=[run.hits[i] for i in keep],
        k=run.k,
        index_fingerprint=run.index_fingerprint,
        model_fingerprint=run.model_fingerprint,
    )


def mcnemar_to_dict(res: McNemarResult) -> dict:
    return {"b": res.b, "c": res.c, "statistic": res.statistic,
            "p_value": res.p_value, "method": res.method}


def report_to_dict(report: EvalReport) -> dict:
    """JSON-ready dict; includes hit vectors so runs can be compared later."""
    return {
        "label": report.label,
        "k_values": list(report.k_values),
        "n_questions": report.n_questions,
        "blocks": [
            {
                "language": b.language,
                "matcher": b.matcher,
                "n_questions": b.n_questions,
                "recall_at": {str(k): v for k, v in sorted(b.recall_at.items())},
                "rouge1_at": {
                    str(k): {"recall": r.mean_recall, "precision": r.mean_precision,
                             "f1": r.mean_f1}
                    for k, r in sorted(b.rouge1_at.items())
                },
                "language_distribution": b.language_distribution,
                "empty_answer_count": b.empty_answer_count,
                "mcnemar_at": (
                    {str(k): mcnemar_to_dict(m) for k, m in sorted(b.mcnemar_at.items())}
                    if b.mcnemar_at else None
                ),
                "hit_vectors": {
                    str(k): {"qids": hv.qids, "hits": [int(h) for h in hv.hits]}
                    for k, hv in sorted(b.hit_vectors.items())
                },
            }
            for b in report.blocks
        ],
    }


def report_from_dict(obj: dict) -> EvalReport:
    report = EvalReport(label=obj["label"], k_values=tuple(obj["k_values"]))
    for blk in obj["blocks"]:
        report.blocks.append(EvalBlock(
            language=blk["language"],
            matcher=blk["matcher"],
            n_questions=blk["n_questions"],
            recall_at={int(k): v for k, v in blk["recall_at"].items()},
            rouge1_at={
                int(k): RougeResult(v["recall"], v["precision"], v["f1"])
                for k, v in blk["rouge1_at"].items()
            },
            language_distribution=blk["language_distribution"],
            hit_vectors={
                int(k): HitVector(v["qids"], [bool(h) for h in v["hits"]])
                for k, v in blk["hit_vectors"].items()
            },
            empty_answer_count=blk.get("empty_answer_count", 0),
            mcnemar_at=(
                {int(k): McNemarResult(**v) for k, v in blk["mcnemar_at"].items()}
                if blk.get("mcnemar_at") else None
            ),
        ))
    return report


def render_report(report: EvalReport, fmt: str = "json",
                  distribution_threshold: float = 0.01) -> str:
    """Deterministic textual rendering of a report.

    Markdown rows are (language, matcher) blocks with Recall@k and
    ROUGE-1@k columns, percentages to two decimals; an asterisk marks
    results whose McNemar p-value against the baseline is below 0.05.
    The rendered language distribution drops languages below the
    reporting threshold; the JSON keeps the full map.
    """
    if fmt == "json":
        return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"
    if fmt != "markdown":
        raise ValueError(f"unknown report format {fmt!r}")
    ks = report.k_values
    lines = [f"# Evaluation: {report.label}", ""]
    header = (["Block"] + [f"R@{k} (%)" for k in ks] + [f"ROUGE-1@{k} (%)" for k in ks])
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for blk in report.blocks:
        cells = [f"{report.label} ({blk.language}, {blk.matcher}, n={blk.n_questions})"]
        for k in ks:
            star = ""
            if blk.mcnemar_at and k in blk.mcnemar_at and blk.mcnemar_at[k].p_value < 0.05:
                star = "*"
            cells.append(f"{100.0 * blk.recall_at[k]:.2f}{star}")
        for k in ks:
            cells.append(f"{100.0 * blk.rouge1_at[k].mean_recall:.2f}")
        lines.append("| " + " | ".join(cells) + " |")
    lines.append("")
    seen_languages = set()
    for blk in report.blocks:
        if blk.language in seen_languages:
            continue  # the distribution is matcher-independent
        seen_languages.add(blk.language)
        shown = {lang: frac for lang, frac in blk.language_distribution.items()
                 if frac >= distribution_threshold}
        if not shown:
            continue
        lines.append(f"## Retrieved-language distribution ({blk.language} questions, top-20)")
        lines.append("")
        lines.append("| Language | Share (%) |")
        lines.append("|---|---|")
        for lang, frac in sorted(shown.items(), key=lambda kv: (-kv[1], kv[0])):
            lines.append(f"| {lang} | {100.0 * frac:.2f} |")
        lines.append("")
    return "\n".join(lines) + "\n"
