"""Kernel backend selection.

The compiled extension is preferred when present; set ``XLINGQA_PURE=1``
to force the pure-Python fallback. Both backends produce bit-identical
results by contract.
"""

import os

import numpy as np

from . import pure

if os.environ.get("XLINGQA_PURE") == "1":
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        _impl = pure
        BACKEND = "pure"


def topk_indices(scores: np.ndarray, k: int) -> np.ndarray:
    """Top-k indices by (score desc, index asc) over float32 scores."""
    scores = np.ascontiguousarray(scores, dtype=np.float32)
    return _impl.topk_indices(scores, int(k))


def wordpiece_pieces(word: str, vocab, prefix: str = "##") -> list[str] | None:
    return _impl.wordpiece_pieces(word, vocab, prefix)
