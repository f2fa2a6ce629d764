"""WordPiece tokenization, lexicon segmentation and vocabulary extension.

The vocabulary file format is one token per line, id = line number,
round-tripping byte-exact. Extension appends new whole words after the
existing ids so that pre-existing embedding rows stay valid.
"""

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import _kernels
from .errors import DataValidationError
from .text import pre_tokenize

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP, MASK)

PROVENANCE_BASE = "base"
PROVENANCE_EXTENDED = "extended"


@dataclass(frozen=True)
class Vocabulary:
    """Ordered token list with dense ids and per-token provenance."""

    tokens: tuple[str, ...]
    provenance: tuple[str, ...] = ()
    continuation_prefix: str = "##"

    def __post_init__(self):
        if not self.provenance:
            object.__setattr__(self, "provenance", (PROVENANCE_BASE,) * len(self.tokens))
        if len(self.provenance) != len(self.tokens):
            raise DataValidationError("provenance and token list length differ")
        if len(set(self.tokens)) != len(self.tokens):
            raise DataValidationError("duplicate token strings in vocabulary")
        for special in SPECIAL_TOKENS:
            if special not in self.index:
                raise DataValidationError(f"special token {special} missing from vocabulary")

    @cached_property
    def index(self) -> dict[str, int]:
        return {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        return self.index[token]

    @cached_property
    def pad_id(self) -> int:
        return self.index[PAD]

    @cached_property
    def unk_id(self) -> int:
        return self.index[UNK]

    @cached_property
    def cls_id(self) -> int:
        return self.index[CLS]

    @cached_property
    def sep_id(self) -> int:
        return self.index[SEP]

    @cached_property
    def mask_id(self) -> int:
        return self.index[MASK]

    @cached_property
    def special_ids(self) -> frozenset[int]:
        return frozenset(self.index[t] for t in SPECIAL_TOKENS)


def new_vocab(tokens: Iterable[str], continuation_prefix: str = "##") -> Vocabulary:
    """Vocabulary with the special tokens at ids 0..4, then ``tokens``."""
    rest = [t for t in tokens if t not in SPECIAL_TOKENS]
    return Vocabulary(tuple(SPECIAL_TOKENS) + tuple(rest),
                      continuation_prefix=continuation_prefix)


def load_vocab(path: str | Path) -> Vocabulary:
    with open(path, "r", encoding="utf-8") as fh:
        tokens = tuple(line.rstrip("\n") for line in fh)
    if tokens and tokens[-1] == "":
        tokens = tokens[:-1]
    return Vocabulary(tokens)


def save_vocab(vocab: Vocabulary, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for token in vocab.tokens:
            fh.write(token + "\n")


@dataclass(frozen=True)
class TokenizerModel:
    vocab: Vocabulary
    max_chars_per_word: int = 100
    lowercase: bool = False

    def __post_init__(self):
        if self.max_chars_per_word < 1:
            raise DataValidationError("max_chars_per_word must be >= 1")


def wordpiece_tokenize(text: str, model: TokenizerModel) -> list[str]:
    """Tokenize text into subword pieces, one UNK per undecomposable word.

    Pre-tokenization splits on whitespace and isolates punctuation; each
    word is then split greedily longest-match-first. Total and
    deterministic: never raises, covers the input word by word.
    """
    vocab = model.vocab
    pieces: list[str] = []
    for word in pre_tokenize(text, lowercase=model.lowercase):
        if len(word) > model.max_chars_per_word:
            pieces.append(UNK)
            continue
        split = _kernels.wordpiece_pieces(word, vocab.index, vocab.continuation_prefix)
        if split is None:
            pieces.append(UNK)
        else:
            pieces.extend(split)
    return pieces


def encode(text: str, model: TokenizerModel) -> list[int]:
    """Token ids of ``wordpiece_tokenize`` output."""
    index = model.vocab.index
    return [index[t] for t in wordpiece_tokenize(text, model)]


@dataclass(frozen=True)
class Lexicon:
    """Word list driving longest-match segmentation of unspaced scripts."""

    words: frozenset[str]

    def __post_init__(self):
        if "" in self.words:
            raise DataValidationError("lexicon contains an empty word")

    @cached_property
    def max_word_len(self) -> int:
        return max((len(w) for w in self.words), default=0)


def load_lexicon(path: str | Path) -> Lexicon:
    with open(path, "r", encoding="utf-8") as fh:
        return Lexicon(frozenset(line.strip() for line in fh if line.strip()))


def segment_longest_match(text: str, lexicon: Lexicon) -> list[str]:
    """Left-to-right longest-match word segmentation.

    Whitespace acts as a hard boundary and is dropped; maximal runs with
    no lexicon match come out as single unknown chunks, so the output
    concatenates back to the input minus whitespace.
    """
    words: list[str] = []
    for chunk in text.split():
        i = 0
        n = len(chunk)
        unknown_start = None
        while i < n:
            end = min(n, i + lexicon.max_word_len)
            match = None
            while end > i:
                if chunk[i:end] in lexicon.words:
                    match = chunk[i:end]
                    break
                end -= 1
            if match is None:
                if unknown_start is None:
                    unknown_start = i
                i += 1
            else:
                if unknown_start is not None:
                    words.append(chunk[unknown_start:i])
                    unknown_start = None
                words.append(match)
                i = end
        if unknown_start is not None:
            words.append(chunk[unknown_start:])
    return words


def whitespace_segmenter(text: str) -> list[str]:
    """Donor segmenter for scripts that already separate words."""
    return text.split()


def lexicon_segmenter(lexicon: Lexicon) -> Callable[[str], list[str]]:
    return lambda text: segment_longest_match(text, lexicon)


def harvest_new_tokens(sentences: Iterable[str], donor_segmenter: Callable[[str], list[str]],
                       base: TokenizerModel) -> list[str]:
    """Donor-segmented words the base model can only render as UNK.

    A word qualifies exactly when retokenizing it under the base model
    yields the single UNK token; the result is sorted and unique.
    """
    found: set[str] = set()
    for sentence in sentences:
        for word in donor_segmenter(sentence):
            if not word or word in found:
                continue
            if wordpiece_tokenize(word, base) == [UNK]:
                found.add(word)
    return sorted(found)


@dataclass
class ExtendResult:
    vocab: Vocabulary
    added: int
    skipped_existing: int


def extend_vocab(base: Vocabulary, new_tokens: Sequence[str]) -> ExtendResult:
    """Append new whole-word tokens after the existing ids.

    Existing ids never move. Tokens already present are skipped and
    counted; empty tokens are a hard error.
    """
    additions = []
    skipped = 0
    for token in sorted(set(new_tokens)):
        if token == "":
            raise DataValidationError("cannot add an empty token to the vocabulary")
        if token in base.index:
            skipped += 1
        else:
            additions.append(token)
    vocab = Vocabulary(
        base.tokens + tuple(additions),
        base.provenance + (PROVENANCE_EXTENDED,) * len(additions),
        base.continuation_prefix,
    )
    return ExtendResult(vocab, added=len(additions), skipped_existing=skipped)
