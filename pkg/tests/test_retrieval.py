import numpy as np
import pytest

from xlingqa.errors import DataValidationError
from xlingqa.ingest import Passage
from xlingqa.retrieval import (
    RetrievalRun,
    batch_retrieve,
    build_index,
    read_run,
    top_k,
    write_run,
)
from xlingqa.xemb import EmbeddingMatrix


def make_matrix(rng, n, dim, prefix="p"):
    ids = [f"{prefix}{i:05d}" for i in range(n)]
    vectors = rng.standard_normal((n, dim)).astype(np.float32)
    return EmbeddingMatrix(ids, vectors)


def passages_for(matrix, language="xx"):
    return [Passage(pid, "", f"text {pid}", language) for pid in matrix.ids]


def full_sort_oracle(index, query, k):
    """Independent full sort over every (pid, score), ties by pid."""
    scores = index.vectors.astype(np.float32) @ np.asarray(query, dtype=np.float32)
    ranked = sorted(zip(index.pids, scores.tolist()), key=lambda x: (-x[1], x[0]))
    return [(pid, float(s)) for pid, s in ranked[:k]]


class TestBuildIndex:
    def test_empty_matrix(self):
        index = build_index(EmbeddingMatrix([], np.zeros((0, 4), np.float32)), [])
        assert index.size == 0
        assert top_k(index, np.zeros(4, np.float32), 5) == []

    def test_metadata_echo(self):
        rng = np.random.default_rng(0)
        matrix = make_matrix(rng, 100, 8)
        index = build_index(matrix, passages_for(matrix))
        assert index.size == 100
        assert index.dim == 8
        assert index.fingerprint.startswith("sha256:")

    def test_missing_passage_is_hard_error(self):
        rng = np.random.default_rng(0)
        matrix = make_matrix(rng, 3, 4)
        passages = passages_for(matrix)[:2]
        with pytest.raises(DataValidationError, match="p00002"):
            build_index(matrix, passages)

    def test_language_lookup(self):
        rng = np.random.default_rng(1)
        matrix = make_matrix(rng, 4, 4)
        passages = [Passage(pid, "", "t", lang)
                    for pid, lang in zip(matrix.ids, ["am", "en", "th", "en"])]
        index = build_index(matrix, passages)
        assert index.language_of("p00002") == "th"


class TestTopK:
    def test_k_at_least_index_size_is_full_sort(self):
        rng = np.random.default_rng(5)
        matrix = make_matrix(rng, 10, 4)
        index = build_index(matrix, passages_for(matrix))
        query = rng.standard_normal(4).astype(np.float32)
        assert top_k(index, query, 50) == full_sort_oracle(index, query, 50)
        assert len(top_k(index, query, 50)) == 10

    def test_matches_oracle_on_random_indexes(self):
        rng = np.random.default_rng(9)
        for trial in range(10):
            n = int(rng.integers(1, 400))
            dim = int(rng.integers(2, 16))
            matrix = make_matrix(rng, n, dim)
            index = build_index(matrix, passages_for(matrix))
            query = rng.standard_normal(dim).astype(np.float32)
            k = int(rng.integers(1, 30))
            assert top_k(index, query, k) == full_sort_oracle(index, query, k)

    def test_ties_resolved_by_pid_ascending(self):
        vectors = np.ones((5, 3), dtype=np.float32)
        ids = ["p4", "p0", "p3", "p1", "p2"]
        matrix = EmbeddingMatrix(ids, vectors)
        passages = [Passage(pid, "", "t", "xx") for pid in ids]
        index = build_index(matrix, passages)
        result = top_k(index, np.ones(3, dtype=np.float32), 3)
        assert [pid for pid, _ in result] == ["p0", "p1", "p2"]

    def test_duplicated_vector_blocks_keep_tie_order(self):
        rng = np.random.default_rng(3)
        base = rng.standard_normal((20, 6)).astype(np.float32)
        vectors = np.vstack([base, base, base])
        ids = [f"q{i:04d}" for i in range(60)]
        matrix = EmbeddingMatrix(ids, vectors)
        index = build_index(matrix, [Passage(i, "", "t", "xx") for i in ids])
        query = rng.standard_normal(6).astype(np.float32)
        assert top_k(index, query, 25) == full_sort_oracle(index, query, 25)

    def test_monotone_in_k(self):
        rng = np.random.default_rng(13)
        matrix = make_matrix(rng, 50, 5)
        index = build_index(matrix, passages_for(matrix))
        query = rng.standard_normal(5).astype(np.float32)
        for k in range(1, 20):
            a = top_k(index, query, k)
            b = top_k(index, query, k + 1)
            assert b[:k] == a
            assert b[k - 1][1] >= b[k][1] if len(b) > k else True

    def test_dim_mismatch(self):
        rng = np.random.default_rng(0)
        matrix = make_matrix(rng, 3, 4)
        index = build_index(matrix, passages_for(matrix))
        with pytest.raises(DataValidationError):
            top_k(index, np.zeros(5, dtype=np.float32), 2)


class TestBatchRetrieve:
    def test_empty_queries(self):
        rng = np.random.default_rng(0)
        matrix = make_matrix(rng, 5, 4)
        index = build_index(matrix, passages_for(matrix))
        run = batch_retrieve(index, EmbeddingMatrix([], np.zeros((0, 4), np.float32)), 3)
        assert run.qids == []
        assert run.k == 3
        assert run.index_fingerprint == index.fingerprint

    def test_shapes_and_order(self):
        rng = np.random.default_rng(4)
        matrix = make_matrix(rng, 30, 6)
        index = build_index(matrix, passages_for(matrix))
        queries = make_matrix(rng, 3, 6, prefix="q")
        run = batch_retrieve(index, queries, k=2)
        assert run.qids == queries.ids
        assert all(len(h) <= 2 for h in run.hits)

    def test_batch_equals_per_query(self):
        rng = np.random.default_rng(8)
        matrix = make_matrix(rng, 40, 5)
        index = build_index(matrix, passages_for(matrix))
        queries = make_matrix(rng, 7, 5, prefix="q")
        run = batch_retrieve(index, queries, k=4)
        for i in range(7):
            assert run.hits[i] == top_k(index, queries.vectors[i], 4)

    def test_worker_count_independence(self):
        rng = np.random.default_rng(21)
        matrix = make_matrix(rng, 200, 8)
        index = build_index(matrix, passages_for(matrix))
        queries = make_matrix(rng, 16, 8, prefix="q")
        single = batch_retrieve(index, queries, k=10, n_workers=1)
        pooled = batch_retrieve(index, queries, k=10, n_workers=8)
        assert single.qids == pooled.qids
        assert single.hits == pooled.hits


class TestRunFile:
    def test_round_trip_with_metadata(self, tmp_path):
        rng = np.random.default_rng(2)
        matrix = make_matrix(rng, 10, 4)
        index = build_index(matrix, passages_for(matrix))
        queries = make_matrix(rng, 2, 4, prefix="q")
        run = batch_retrieve(index, queries, k=3)
        path = tmp_path / "run.jsonl"
        write_run(run, path)
        again = read_run(path)
        assert again.qids == run.qids
        assert again.hits == run.hits
        assert again.k == 3
        assert again.index_fingerprint == run.index_fingerprint
        assert again.model_fingerprint == run.model_fingerprint

    def test_run_lines_are_one_query_each(self, tmp_path):
        run = RetrievalRun(qids=["a", "b"], hits=[[("p1", 1.0)], []], k=1)
        path = tmp_path / "run.jsonl"
        write_run(run, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        import json
        assert set(json.loads(lines[0]).keys()) == {"qid", "hits"}
