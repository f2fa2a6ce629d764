"""Stable hashing used for record identifiers, feature buckets and file
fingerprints.

All hashes here must be reproducible across runs, platforms and Python
versions, so the randomized builtin ``hash`` is never used. 64-bit values
are the first 8 bytes of BLAKE2b, interpreted big-endian unsigned.
"""

import hashlib
import unicodedata
from pathlib import Path


def stable_hash64(data: bytes) -> int:
    """First 8 bytes of BLAKE2b over ``data`` as an unsigned 64-bit int."""
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "big")


def pair_id(text_a: str, text_b: str) -> int:
    """Deterministic 64-bit id of a sentence pair.

    Hashes the NFC-normalized texts joined by a NUL byte, so the id is a
    pure function of the two texts and usable as a global dedup key.
    """
    a = unicodedata.normalize("NFC", text_a)
    b = unicodedata.normalize("NFC", text_b)
    return stable_hash64(a.encode("utf-8") + b"\x00" + b.encode("utf-8"))


def token_bucket(token: str, n_buckets: int) -> int:
    """Stable feature bucket of a token in ``[0, n_buckets)``."""
    return stable_hash64(token.encode("utf-8")) % n_buckets


def fingerprint_bytes(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def fingerprint_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return "sha256:" + h.hexdigest()
