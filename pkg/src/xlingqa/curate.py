"""Aligned-corpus curation: pivot joining, similarity filtering,
deduplication and calibration sampling.

Low<->high language pairs are built by joining two bilingual corpora on
their shared pivot (English) sentences. Pivot matching is exact string
equality after NFC normalization and whitespace trimming; within one
pivot group the join emits the full cartesian product. Output is always
re-sorted into a canonical order so results never depend on input order
or sharding.
"""

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DataValidationError
from .ingest import SentencePair, make_pair
from .text import nfc, nfkc


@dataclass(frozen=True)
class TriJoinRecord:
    """One pivot-joined triple: shared pivot sentence plus both sides."""

    pivot_text: str
    low_text: str
    high_text: str
    low_similarity: float | None = None
    high_similarity: float | None = None


@dataclass(frozen=True)
class SimilarityScorer:
    """Named scoring function mapping two texts to a value in [0, 1]."""

    name: str
    fn: Callable[[str, str], float]

    def __call__(self, a: str, b: str) -> float:
        return self.fn(a, b)


def _pivot_key(text: str) -> str:
    return nfc(text).strip()


def _pair_sides(pair: SentencePair, pivot_side: str) -> tuple[str, str, float | None]:
    """(pivot text, other-side text, similarity) for one input pair."""
    if pivot_side == "a":
        return pair.text_a, pair.text_b, pair.similarity
    return pair.text_b, pair.text_a, pair.similarity


def trijoin_sort_key(rec: TriJoinRecord):
    return (
        rec.pivot_text,
        rec.low_text,
        rec.high_text,
        -1.0 if rec.low_similarity is None else rec.low_similarity,
        -1.0 if rec.high_similarity is None else rec.high_similarity,
    )


def pair_sort_key(pair: SentencePair):
    return (
        pair.text_a,
        pair.text_b,
        -1.0 if pair.similarity is None else pair.similarity,
    )


def pivot_join(low_en: Sequence[SentencePair], high_en: Sequence[SentencePair],
               pivot_side: str = "b") -> list[TriJoinRecord]:
    """Join two bilingual corpora on their shared pivot sentences.

    ``pivot_side`` names the side ("a" or "b") holding the pivot language
    in both inputs. Emits one record per (low, high) combination sharing
    a pivot key, sorted canonically.
    """
    if pivot_side not in ("a", "b"):
        raise ValueError("pivot_side must be 'a' or 'b'")
    groups: dict[str, list[tuple[str, float | None]]] = defaultdict(list)
    for pair in high_en:
        pivot, other, sim = _pair_sides(pair, pivot_side)
        groups[_pivot_key(pivot)].append((other, sim))
    out: list[TriJoinRecord] = []
    for pair in low_en:
        pivot, low_text, low_sim = _pair_sides(pair, pivot_side)
        key = _pivot_key(pivot)
        for high_text, high_sim in groups.get(key, ()):
            out.append(TriJoinRecord(key, low_text, high_text, low_sim, high_sim))
    out.sort(key=trijoin_sort_key)
    return out


def bow_cosine(a: str, b: str) -> float:
    """Cosine of term-frequency vectors after NFKC + lowercasing.

    Tokens are whitespace-separated; either side tokenizing to nothing
    scores 0.
    """
    ta = nfkc(a).lower().split()
    tb = nfkc(b).lower().split()
    if not ta or not tb:
        return 0.0
    ca, cb = Counter(ta), Counter(tb)
    dot = sum(ca[t] * cb[t] for t in ca.keys() & cb.keys())
    if dot == 0:
        return 0.0
    # integer sums under one sqrt keep score(x, x) == 1.0 exact
    norm2 = sum(v * v for v in ca.values()) * sum(v * v for v in cb.values())
    return min(dot / math.sqrt(norm2), 1.0)


BOW_SCORER = SimilarityScorer("bow", bow_cosine)


def identity_translator(text: str) -> str:
    return text


def load_dict_translator(path: str | Path) -> Callable[[str], str]:
    """Token-by-token dictionary translator from a two-column TSV.

    Unknown tokens pass through unchanged; this is a deterministic stub
    standing in for a real MT system.
    """
    table: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            cols = line.rstrip("\n").split("\t")
            if len(cols) != 2:
                raise DataValidationError(
                    f"{path}: line {line_no}: dictionary rows need exactly 2 columns"
                )
            table[cols[0]] = cols[1]

    def translate(text: str) -> str:
        return " ".join(table.get(tok, tok) for tok in text.split())

    return translate


@dataclass
class FilterResult:
    kept: list[SentencePair]
    rejects: list[tuple[SentencePair, str]] = field(default_factory=list)


def similarity_filter(pairs: Sequence[SentencePair], scorer: SimilarityScorer,
                      translator: Callable[[str], str], threshold: float) -> FilterResult:
    """Keep pairs whose translated text_a scores >= threshold against text_b.

    The kept pairs carry the computed score in their similarity field.
    Translator failures reject the pair with the failure reason.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    result = FilterResult([])
    for pair in pairs:
        try:
            translated = translator(pair.text_a)
        except Exception as exc:
            result.rejects.append((pair, f"translator failed: {exc}"))
            continue
        score = scorer(translated, pair.text_b)
        if score >= threshold:
            result.kept.append(make_pair(pair.text_a, pair.text_b, pair.lang_a,
                                         pair.lang_b, score))
    return result


def filter_on_column(pairs: Sequence[SentencePair], threshold: float) -> FilterResult:
    """Filter on the similarity column already present in the input.

    Pairs without a similarity value are rejected: an externally scored
    corpus is expected to score every row.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    result = FilterResult([])
    for pair in pairs:
        if pair.similarity is None:
            result.rejects.append((pair, "no similarity column value"))
        elif pair.similarity >= threshold:
            result.kept.append(pair)
    return result


def dedup(records: Sequence):
    """Drop duplicate keys, keeping the first record in canonical order.

    Keys are (low_text, high_text) for TriJoinRecord and
    (text_a, text_b) for SentencePair. Idempotent; output order is the
    canonical sort order, so the result is a pure function of the input
    multiset.
    """
    records = list(records)
    if not records:
        return []
    if isinstance(records[0], TriJoinRecord):
        records.sort(key=trijoin_sort_key)
        key_of = lambda r: (r.low_text, r.high_text)
    else:
        records.sort(key=pair_sort_key)
        key_of = lambda r: (r.text_a, r.text_b)
    seen = set()
    out = []
    for rec in records:
        key = key_of(rec)
        if key not in seen:
            seen.add(key)
            out.append(rec)
    return out


def calibration_sample(pairs: Sequence[SentencePair], n: int, seed: int) -> list[SentencePair]:
    """Uniform sample without replacement of min(n, len) pairs.

    Deterministic for a given seed; used to eyeball a filter threshold on
    a small manually judged sample.
    """
    if n < 0:
        raise ValueError("sample size must be >= 0")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pairs))
    return [pairs[i] for i in order[: min(n, len(pairs))]]


def write_review_tsv(pairs: Sequence[SentencePair], path: str | Path) -> None:
    """Write a calibration sample as a review sheet with a blank verdict column."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("text_a\ttext_b\tsimilarity\tverdict\n")
        for p in pairs:
            sim = "" if p.similarity is None else repr(p.similarity)
            fh.write(f"{p.text_a}\t{p.text_b}\t{sim}\t\n")


def write_trijoin_tsv(records: Sequence[TriJoinRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            low = "" if r.low_similarity is None else repr(r.low_similarity)
            high = "" if r.high_similarity is None else repr(r.high_similarity)
            fh.write(f"{r.pivot_text}\t{r.low_text}\t{r.high_text}\t{low}\t{high}\n")


def parse_trijoin_tsv(source) -> list[TriJoinRecord]:
    from .ingest import _data_lines, _read_text

    out: list[TriJoinRecord] = []
    for line_no, line in _data_lines(_read_text(source)):
        cols = line.split("\t")
        if len(cols) != 5:
            raise DataValidationError(f"line {line_no}: expected 5 columns")
        out.append(TriJoinRecord(
            cols[0], cols[1], cols[2],
            float(cols[3]) if cols[3] else None,
            float(cols[4]) if cols[4] else None,
        ))
    return out
