"""Masked-LM and translation-LM training instance generation.

Documents are split into fixed-size chunks (reserving room for CLS/SEP),
then 15% of content positions are selected for corruption: 80% become
MASK, 10% a random non-special token, 10% stay unchanged. Translation
examples concatenate both sides of a sentence pair in both orders.

All randomness flows from (global seed, record index), so output is
independent of worker count and schedule. Instances serialize to JSONL
with integer arrays so golden files stay diffable.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataValidationError
from .hashing import stable_hash64
from .wordpiece import Vocabulary

MIN_TAIL_TOKENS = 8

ORDER_LOW_FIRST = "low_first"
ORDER_HIGH_FIRST = "high_first"


@dataclass
class MaskedExample:
    """One training instance: ids, sparse original labels, segments."""

    input_ids: list[int]
    labels: dict[int, int]
    segment_ids: list[int]
    attention_len: int

    def restore(self) -> list[int]:
        """Input ids with the original tokens written back at label positions."""
        ids = list(self.input_ids)
        for pos, original in self.labels.items():
            ids[pos] = original
        return ids


@dataclass
class TlmExample:
    masked: MaskedExample
    order: str
    pair_id: int
    span_mask_counts: tuple[int, int]


@dataclass
class ChunkingResult:
    chunks: list[list[int]]
    dropped_tails: int


def chunk_documents(docs: Sequence[Sequence[int]], chunk_len: int,
                    min_tail: int = MIN_TAIL_TOKENS) -> ChunkingResult:
    """Split documents into chunks of chunk_len - 2 content tokens.

    The final short tail of a document is kept only when it has at least
    ``min_tail`` content tokens; shorter tails are dropped and counted.
    """
    if chunk_len < 8:
        raise ValueError("chunk_len must be >= 8")
    content = chunk_len - 2  # room for CLS and SEP
    chunks: list[list[int]] = []
    dropped = 0
    for doc in docs:
        for start in range(0, len(doc), content):
            piece = list(doc[start:start + content])
            if len(piece) == content or len(piece) >= min_tail:
                chunks.append(piece)
            else:
                dropped += 1
    return ChunkingResult(chunks, dropped)


def record_rng(global_seed: int, record_index: int) -> np.random.Generator:
    """Per-record generator; the schedule-independence contract hinges on this."""
    return np.random.default_rng(np.random.SeedSequence((global_seed, record_index)))


def _eligible_ids(vocab: Vocabulary) -> np.ndarray:
    return np.array([i for i in range(len(vocab)) if i not in vocab.special_ids],
                    dtype=np.int64)


def _corrupt(ids: list[int], positions: Sequence[int], vocab: Vocabulary,
             rate: float, rng: np.random.Generator) -> dict[int, int]:
    """Corrupt content positions in place; returns the label map."""
    eligible = _eligible_ids(vocab)
    labels: dict[int, int] = {}
    for pos in positions:
        if rng.random() >= rate:
            continue
        labels[pos] = ids[pos]
        roll = rng.random()
        if roll < 0.8:
            ids[pos] = vocab.mask_id
        elif roll < 0.9 and len(eligible) > 0:
            ids[pos] = int(eligible[rng.integers(0, len(eligible))])
        # else: selected but left unchanged
    return labels


def mlm_mask(chunk: Sequence[int], vocab: Vocabulary, rate: float = 0.15,
             seed: int | np.random.Generator = 0) -> MaskedExample:
    """Build one masked instance [CLS] chunk [SEP] from a content chunk.

    Each content position is selected independently with probability
    ``rate``; labels record originals at every selected position.
    Deterministic given (chunk, seed).
    """
    if not 0.0 < rate < 1.0:
        raise ValueError("mask rate must be in (0, 1)")
    if len(chunk) == 0:
        raise DataValidationError("cannot mask a chunk with no content tokens")
    rng = np.random.default_rng(seed)
    ids = [vocab.cls_id] + list(chunk) + [vocab.sep_id]
    labels = _corrupt(ids, range(1, len(ids) - 1), vocab, rate, rng)
    return MaskedExample(
        input_ids=ids,
        labels=labels,
        segment_ids=[0] * len(ids),
        attention_len=len(ids),
    )


@dataclass
class MlmGenResult:
    examples: list[MaskedExample]
    dropped_tails: int


def generate_mlm(docs: Sequence[Sequence[int]], vocab: Vocabulary, chunk_len: int,
                 rate: float = 0.15, seed: int = 12345) -> MlmGenResult:
    """Chunk documents and mask every chunk, seeded per record index."""
    chunking = chunk_documents(docs, chunk_len)
    examples = [
        mlm_mask(chunk, vocab, rate, record_rng(seed, idx))
        for idx, chunk in enumerate(chunking.chunks)
    ]
    return MlmGenResult(examples, chunking.dropped_tails)


def _truncate_pair(span1: list[int], span2: list[int], budget: int) -> tuple[list[int], list[int]]:
    """Trim tokens from the ends, longest span first, until both fit."""
    span1, span2 = list(span1), list(span2)
    next_if_tied = 0
    while len(span1) + len(span2) > budget:
        if len(span1) > len(span2):
            span1.pop()
        elif len(span2) > len(span1):
            span2.pop()
        elif next_if_tied == 0:
            span1.pop()
            next_if_tied = 1
        else:
            span2.pop()
            next_if_tied = 0
    return span1, span2


@dataclass
class TlmGenResult:
    examples: list[TlmExample]
    skipped_pairs: int


def tlm_pairs(pairs: Sequence[tuple[Sequence[int], Sequence[int]]], max_len: int = 256,
              vocab: Vocabulary | None = None, rate: float = 0.15, seed: int = 12345,
              pair_ids: Sequence[int] | None = None) -> TlmGenResult:
    """Two masked translation instances per pair, one per sentence order.

    Layout is CLS span1 SEP span2 SEP with segment ids 0 up to and
    including the first SEP, then 1. Overlong pairs are truncated from
    the span ends, longest first, until the sequence fits ``max_len``.
    Pairs with an empty side are skipped and counted.
    """
    if vocab is None:
        raise ValueError("a vocabulary is required")
    if max_len < 8:
        raise ValueError("max_len must be >= 8")
    if not 0.0 < rate < 1.0:
        raise ValueError("mask rate must be in (0, 1)")
    examples: list[TlmExample] = []
    skipped = 0
    record_index = 0
    for i, (low_ids, high_ids) in enumerate(pairs):
        if len(low_ids) == 0 or len(high_ids) == 0:
            skipped += 1
            continue
        if pair_ids is not None:
            pid = pair_ids[i]
        else:
            payload = ",".join(map(str, low_ids)) + "|" + ",".join(map(str, high_ids))
            pid = stable_hash64(payload.encode("ascii"))
        for order in (ORDER_LOW_FIRST, ORDER_HIGH_FIRST):
            if order == ORDER_LOW_FIRST:
                span1, span2 = list(low_ids), list(high_ids)
            else:
                span1, span2 = list(high_ids), list(low_ids)
            span1, span2 = _truncate_pair(span1, span2, max_len - 3)
            ids = [vocab.cls_id] + span1 + [vocab.sep_id] + span2 + [vocab.sep_id]
            segments = [0] * (len(span1) + 2) + [1] * (len(span2) + 1)
            span1_pos = range(1, 1 + len(span1))
            span2_pos = range(2 + len(span1), 2 + len(span1) + len(span2))
            rng = record_rng(seed, record_index)
            labels = _corrupt(ids, list(span1_pos) + list(span2_pos), vocab, rate, rng)
            counts = (
                sum(1 for p in labels if p in span1_pos),
                sum(1 for p in labels if p in span2_pos),
            )
            masked = MaskedExample(ids, labels, segments, attention_len=len(ids))
            examples.append(TlmExample(masked, order, pid, counts))
            record_index += 1
    return TlmGenResult(examples, skipped)


def _masked_to_obj(ex: MaskedExample) -> dict:
    positions = sorted(ex.labels)
    return {
        "input_ids": list(ex.input_ids),
        "segment_ids": list(ex.segment_ids),
        "label_positions": positions,
        "label_ids": [ex.labels[p] for p in positions],
        "attention_len": ex.attention_len,
    }


def _masked_from_obj(obj: dict) -> MaskedExample:
    return MaskedExample(
        input_ids=list(obj["input_ids"]),
        labels=dict(zip(obj["label_positions"], obj["label_ids"])),
        segment_ids=list(obj["segment_ids"]),
        attention_len=obj["attention_len"],
    )


def write_mlm_jsonl(examples: Sequence[MaskedExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(json.dumps(_masked_to_obj(ex), sort_keys=True) + "\n")


def read_mlm_jsonl(path: str | Path) -> list[MaskedExample]:
    with open(path, "r", encoding="utf-8") as fh:
        return [_masked_from_obj(json.loads(line)) for line in fh if line.strip()]


def write_tlm_jsonl(examples: Sequence[TlmExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            obj = _masked_to_obj(ex.masked)
            obj["order"] = ex.order
            obj["pair_id"] = ex.pair_id
            obj["span_mask_counts"] = list(ex.span_mask_counts)
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def read_tlm_jsonl(path: str | Path) -> list[TlmExample]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            out.append(TlmExample(
                masked=_masked_from_obj(obj),
                order=obj["order"],
                pair_id=obj["pair_id"],
                span_mask_counts=tuple(obj["span_mask_counts"]),
            ))
    return out
