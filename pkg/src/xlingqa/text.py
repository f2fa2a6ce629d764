"""Low-level text helpers shared by the tokenizer and the evaluator."""

import functools
import unicodedata


def nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def nfkc(text: str) -> str:
    return unicodedata.normalize("NFKC", text)


@functools.lru_cache(maxsize=None)
def is_punctuation(ch: str) -> bool:
    """True for Unicode punctuation (general category P*)."""
    return unicodedata.category(ch).startswith("P")


def pre_tokenize(text: str, lowercase: bool = False) -> list[str]:
    """Split on Unicode whitespace and isolate punctuation characters.

    Every punctuation character becomes its own word; this runs before
    subword tokenization.
    """
    if lowercase:
        text = text.lower()
    words: list[str] = []
    buf: list[str] = []
    for ch in text:
        if ch.isspace():
            if buf:
                words.append("".join(buf))
                buf = []
        elif is_punctuation(ch):
            if buf:
                words.append("".join(buf))
                buf = []
            words.append(ch)
        else:
            buf.append(ch)
    if buf:
        words.append("".join(buf))
    return words


def normalize_for_match(text: str) -> str:
    """Canonical form used by all answer-matching metrics.

    NFKC, lowercase, punctuation replaced by spaces, whitespace runs
    collapsed, ends stripped. Fixed and versioned: changing this rule
    changes every reported metric.
    """
    out: list[str] = []
    for ch in nfkc(text).lower():
        if is_punctuation(ch):
            out.append(" ")
        else:
            out.append(ch)
    return " ".join("".join(out).split())
