"""Backend equivalence: the compiled kernels must match the pure ones bit
for bit on every input, ties included."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xlingqa import _kernels
from xlingqa._kernels import pure

native = pytest.importorskip("xlingqa._kernels._native")


def test_active_backend_reported():
    assert _kernels.BACKEND in ("native", "pure")


class TestTopkEquivalence:
    @given(st.lists(st.integers(-5, 5), min_size=0, max_size=200),
           st.integers(0, 40))
    @settings(max_examples=200, deadline=None)
    def test_tie_heavy_random_arrays(self, values, k):
        scores = np.array(values, dtype=np.float32)
        np.testing.assert_array_equal(native.topk_indices(scores, k),
                                      pure.topk_indices(scores, k))

    def test_large_random_arrays(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            n = int(rng.integers(1, 5000))
            scores = rng.standard_normal(n).astype(np.float32)
            k = int(rng.integers(1, 64))
            np.testing.assert_array_equal(native.topk_indices(scores, k),
                                          pure.topk_indices(scores, k))

    def test_all_equal_scores(self):
        scores = np.zeros(100, dtype=np.float32)
        out = native.topk_indices(scores, 10)
        np.testing.assert_array_equal(out, np.arange(10))

    def test_k_zero_and_oversized(self):
        scores = np.array([1.0, 2.0], dtype=np.float32)
        assert native.topk_indices(scores, 0).size == 0
        np.testing.assert_array_equal(native.topk_indices(scores, 99),
                                      pure.topk_indices(scores, 99))


class TestWordpieceEquivalence:
    VOCAB = {"a", "ab", "abc", "##b", "##bc", "##c", "x", "##x"}

    @given(st.text(alphabet="abcx", min_size=1, max_size=12))
    @settings(max_examples=300, deadline=None)
    def test_same_splits(self, word):
        assert (native.wordpiece_pieces(word, self.VOCAB, "##")
                == pure.wordpiece_pieces(word, self.VOCAB, "##"))

    def test_dispatcher_uses_some_backend(self):
        assert _kernels.wordpiece_pieces("abc", self.VOCAB) == ["abc"]
