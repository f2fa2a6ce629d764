"""Exact top-k maximum-inner-product retrieval over a passage matrix.

No approximation: every query is scored against every passage and the k
best are returned. Ties are broken by ascending pid, which is what makes
ranked runs reproducible; the index therefore stores rows sorted by pid
so the kernels only ever break ties by row position.
"""

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import DataValidationError
from .ingest import Passage
from .xemb import EmbeddingMatrix


@dataclass(frozen=True)
class Index:
    """Immutable pid-sorted view of a passage embedding matrix."""

    pids: tuple[str, ...]
    vectors: np.ndarray  # float32, rows aligned with pids
    languages: tuple[str, ...]
    fingerprint: str

    @property
    def size(self) -> int:
        return len(self.pids)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def language_of(self, pid: str) -> str:
        return self._lang_map[pid]

    @property
    def _lang_map(self) -> dict[str, str]:
        cache = self.__dict__.get("_lang_map_cache")
        if cache is None:
            cache = dict(zip(self.pids, self.languages))
            self.__dict__["_lang_map_cache"] = cache
        return cache


def _index_fingerprint(pids: Sequence[str], vectors: np.ndarray) -> str:
    h = hashlib.sha256()
    for pid in pids:
        h.update(pid.encode("utf-8"))
        h.update(b"\x00")
    h.update(vectors.astype("<f4", copy=False).tobytes(order="C"))
    return "sha256:" + h.hexdigest()


def build_index(embeddings: EmbeddingMatrix, passages: Sequence[Passage]) -> Index:
    """Join embeddings with passage metadata; every id must resolve."""
    by_pid = {p.pid: p for p in passages}
    missing = [pid for pid in embeddings.ids if pid not in by_pid]
    if missing:
        raise DataValidationError(
            "embedding ids without a passage row: " + ", ".join(sorted(missing)[:20])
        )
    order = sorted(range(len(embeddings.ids)), key=lambda i: embeddings.ids[i])
    pids = tuple(embeddings.ids[i] for i in order)
    vectors = np.ascontiguousarray(embeddings.vectors[order], dtype=np.float32)
    languages = tuple(by_pid[pid].language for pid in pids)
    return Index(pids, vectors, languages, _index_fingerprint(pids, vectors))


def top_k(index: Index, query_vec: np.ndarray, k: int = 20) -> list[tuple[str, float]]:
    """The k largest inner products, sorted by (score desc, pid asc)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    query = np.asarray(query_vec, dtype=np.float32)
    if index.size == 0:
        return []
    if query.shape != (index.dim,):
        raise DataValidationError(
            f"query dim {query.shape} does not match index dim {index.dim}"
        )
    scores = index.vectors @ query
    chosen = _kernels.topk_indices(scores, k)
    return [(index.pids[i], float(scores[i])) for i in chosen]


@dataclass
class RetrievalRun:
    """Ranked lists per query, in query order, plus run provenance."""

    qids: list[str]
    hits: list[list[tuple[str, float]]]
    k: int
    index_fingerprint: str = ""
    model_fingerprint: str = ""

    def hits_for(self, qid: str) -> list[tuple[str, float]]:
        return self._by_qid[qid]

    @property
    def _by_qid(self) -> dict[str, list[tuple[str, float]]]:
        cache = self.__dict__.get("_by_qid_cache")
        if cache is None:
            cache = dict(zip(self.qids, self.hits))
            self.__dict__["_by_qid_cache"] = cache
        return cache


def _queries_fingerprint(queries: EmbeddingMatrix) -> str:
    h = hashlib.sha256()
    for qid in queries.ids:
        h.update(qid.encode("utf-8"))
        h.update(b"\x00")
    h.update(queries.vectors.astype("<f4", copy=False).tobytes(order="C"))
    return "sha256:" + h.hexdigest()


def batch_retrieve(index: Index, queries: EmbeddingMatrix, k: int = 20,
                   n_workers: int = 1) -> RetrievalRun:
    """One ranked list per query; output order and content never depend
    on the worker count."""
    if queries.dim != index.dim and index.size > 0:
        raise DataValidationError(
            f"query dim {queries.dim} does not match index dim {index.dim}"
        )

    def one(i: int) -> list[tuple[str, float]]:
        return top_k(index, queries.vectors[i], k) if index.size else []

    if n_workers <= 1 or len(queries) == 0:
        all_hits = [one(i) for i in range(len(queries))]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            all_hits = list(pool.map(one, range(len(queries))))
    return RetrievalRun(
        qids=list(queries.ids),
        hits=all_hits,
        k=k,
        index_fingerprint=index.fingerprint,
        model_fingerprint=_queries_fingerprint(queries),
    )


def write_run(run: RetrievalRun, path: str | Path) -> None:
    """Run file: JSONL, one query per line. Provenance goes to a sidecar
    so the run itself stays interoperable with external scorers."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid, hits in zip(run.qids, run.hits):
            obj = {
                "qid": qid,
                "hits": [{"pid": pid, "score": score} for pid, score in hits],
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    meta = {
        "k": run.k,
        "index_fingerprint": run.index_fingerprint,
        "model_fingerprint": run.model_fingerprint,
    }
    Path(str(path) + ".meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def read_run(path: str | Path) -> RetrievalRun:
    qids: list[str] = []
    hits: list[list[tuple[str, float]]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            qids.append(obj["qid"])
            hits.append([(h["pid"], float(h["score"])) for h in obj["hits"]])
    k = max((len(h) for h in hits), default=0)
    index_fp = model_fp = ""
    meta_path = Path(str(path) + ".meta.json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        k = meta.get("k", k)
        index_fp = meta.get("index_fingerprint", "")
        model_fp = meta.get("model_fingerprint", "")
    return RetrievalRun(qids, hits, k, index_fp, model_fp)
