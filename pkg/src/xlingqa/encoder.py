"""Small linear dual encoder trained with in-batch negatives.

Questions and passages are hashed bags of subword tokens mapped through
separate linear projections; similarity is the raw inner product of the
two dense vectors. Training minimizes the mean softmax cross-entropy of
each question against all passages in its batch, with the gold passage
on the diagonal.

Weights live in float64 during computation; persisted weights and
exported embeddings are float32.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataValidationError, NumericalError
from .hashing import token_bucket
from .xemb import EmbeddingMatrix

SIDE_QUESTION = "question"
SIDE_PASSAGE = "passage"


@dataclass
class DualEncoderParams:
    w_q: np.ndarray  # (embed_dim, feature_dim)
    w_p: np.ndarray  # (embed_dim, feature_dim)

    def __post_init__(self):
        self.w_q = np.asarray(self.w_q, dtype=np.float64)
        self.w_p = np.asarray(self.w_p, dtype=np.float64)
        if self.w_q.shape != self.w_p.shape or self.w_q.ndim != 2:
            raise DataValidationError("encoder weight matrices must share one 2-d shape")
        if not (np.isfinite(self.w_q).all() and np.isfinite(self.w_p).all()):
            raise DataValidationError("encoder weights contain non-finite values")

    @property
    def embed_dim(self) -> int:
        return int(self.w_q.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.w_q.shape[1])


def init_params(feature_dim: int, embed_dim: int, seed: int) -> DualEncoderParams:
    """Uniform init in [-0.01, 0.01], both towers from one seeded stream."""
    rng = np.random.default_rng(seed)
    w_q = rng.uniform(-0.01, 0.01, size=(embed_dim, feature_dim))
    w_p = rng.uniform(-0.01, 0.01, size=(embed_dim, feature_dim))
    return DualEncoderParams(w_q, w_p)


def save_params(params: DualEncoderParams, path: str | Path) -> None:
    np.savez(path, w_q=params.w_q.astype(np.float32), w_p=params.w_p.astype(np.float32))


def load_params(path: str | Path) -> DualEncoderParams:
    with np.load(path) as data:
        return DualEncoderParams(data["w_q"], data["w_p"])


def featurize(tokens: Sequence[str], feature_dim: int) -> np.ndarray:
    """Hashed bag-of-subwords feature vector, L2-normalized when nonzero."""
    if feature_dim < 1:
        raise ValueError("feature_dim must be >= 1")
    vec = np.zeros(feature_dim, dtype=np.float64)
    for token in tokens:
        vec[token_bucket(token, feature_dim)] += 1.0
    norm = np.linalg.norm(vec)
    if norm > 0.0:
        vec /= norm
    return vec


def _encode(w: np.ndarray, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (w.shape[1],):
        raise DataValidationError(
            f"feature vector of length {features.shape} does not match "
            f"feature_dim {w.shape[1]}"
        )
    return w @ features


def encode_q(params: DualEncoderParams, features: np.ndarray) -> np.ndarray:
    return _encode(params.w_q, features)


def encode_p(params: DualEncoderParams, features: np.ndarray) -> np.ndarray:
    return _encode(params.w_p, features)


def _batch_matrices(batch) -> tuple[np.ndarray, np.ndarray]:
    if len(batch) < 2:
        raise ValueError("in-batch loss needs a batch of at least 2 pairs")
    qf = np.stack([np.asarray(q, dtype=np.float64) for q, _ in batch])
    pf = np.stack([np.asarray(p, dtype=np.float64) for _, p in batch])
    return qf, pf


def _scores(params: DualEncoderParams, qf: np.ndarray, pf: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        eq = qf @ params.w_q.T
        ep = pf @ params.w_p.T
        scores = eq @ ep.T
    if not np.isfinite(scores).all():
        raise NumericalError("non-finite question-passage score")
    return scores


def inbatch_loss(params: DualEncoderParams, batch) -> float:
    """Mean -log softmax of the diagonal over each row of batch scores."""
    qf, pf = _batch_matrices(batch)
    scores = _scores(params, qf, pf)
    m = scores.max(axis=1)
    lse = m + np.log(np.exp(scores - m[:, None]).sum(axis=1))
    return float(np.mean(lse - np.diag(scores)))


def loss_grad(params: DualEncoderParams, batch) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of ``inbatch_loss`` w.r.t. both weight matrices."""
    qf, pf = _batch_matrices(batch)
    b = qf.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):
        eq = qf @ params.w_q.T
        ep = pf @ params.w_p.T
        scores = eq @ ep.T
    if not np.isfinite(scores).all():
        raise NumericalError("non-finite question-passage score")
    m = scores.max(axis=1)
    lse = m + np.log(np.exp(scores - m[:, None]).sum(axis=1))
    soft = np.exp(scores - lse[:, None])
    d_scores = (soft - np.eye(b)) / b
    g_eq = d_scores @ ep
    g_ep = d_scores.T @ eq
    return g_eq.T @ qf, g_ep.T @ pf


@dataclass
class TrainResult:
    params: DualEncoderParams
    losses: list[float]
    batch_composition: list[dict[str, int]] = field(default_factory=list)


def train(params_init: DualEncoderParams, data, lr: float, batch_size: int,
          steps: int, seed: int, tags: Sequence[str] | None = None) -> TrainResult:
    """Plain gradient descent over shuffled in-batch batches.

    ``data`` is a list of (question features, passage features) pairs.
    Deterministic for a given seed. When ``tags`` labels each pair (for
    example by language), the per-batch tag composition is recorded.
    Divergence to a non-finite loss aborts with the failing step.
    """
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    if not data:
        raise ValueError("training data is empty")
    if batch_size < 2:
        raise ValueError("batch_size must be >= 2")
    if tags is not None and len(tags) != len(data):
        raise ValueError("tags must parallel the training data")
    params = DualEncoderParams(params_init.w_q.copy(), params_init.w_p.copy())
    rng = np.random.default_rng(seed)
    losses: list[float] = []
    composition: list[dict[str, int]] = []
    step = 0
    while step < steps:
        order = rng.permutation(len(data))
        for start in range(0, len(order), batch_size):
            if step >= steps:
                break
            chosen = order[start:start + batch_size]
            if len(chosen) < 2:
                break  # leftover slice too small for in-batch negatives
            batch = [data[i] for i in chosen]
            try:
                loss = inbatch_loss(params, batch)
                if not np.isfinite(loss):
                    raise NumericalError("non-finite loss")
                g_q, g_p = loss_grad(params, batch)
            except NumericalError as exc:
                raise NumericalError(f"training diverged at step {step}: {exc}") from exc
            params.w_q -= lr * g_q
            params.w_p -= lr * g_p
            losses.append(loss)
            if tags is not None:
                counts: dict[str, int] = {}
                for i in chosen:
                    counts[tags[i]] = counts.get(tags[i], 0) + 1
                composition.append(counts)
            step += 1
    return TrainResult(params, losses, composition)


def export_embeddings(params: DualEncoderParams, items: Sequence[tuple[str, Sequence[str]]],
                      side: str) -> EmbeddingMatrix:
    """Encode (id, tokens) items through the chosen tower, float32 rows."""
    if side not in (SIDE_QUESTION, SIDE_PASSAGE):
        raise ValueError(f"side must be {SIDE_QUESTION!r} or {SIDE_PASSAGE!r}")
    w = params.w_q if side == SIDE_QUESTION else params.w_p
    seen = set()
    ids = []
    rows = np.zeros((len(items), params.embed_dim), dtype=np.float32)
    for i, (item_id, tokens) in enumerate(items):
        if item_id in seen:
            raise DataValidationError(f"duplicate id in export: {item_id!r}")
        seen.add(item_id)
        ids.append(item_id)
        rows[i] = _encode(w, featurize(tokens, params.feature_dim)).astype(np.float32)
    return EmbeddingMatrix(ids, rows)
