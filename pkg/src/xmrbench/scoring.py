"""Pair scoring, ranking, and the recall-at-k metric.

Two scoring schemes are supported: cosine similarity between image and text
embeddings, and a shallow classifier applied to the elementwise absolute
difference of the two embeddings whose match probability acts as the score.
In both cases higher means a better match. Rankings are deterministic: ties
break by ascending candidate index.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


def _vals(v) -> np.ndarray:
    """Accept either an EmbeddingVector or a bare array."""
    return np.asarray(getattr(v, "values", v), dtype=np.float64)


@dataclass(frozen=True)
class EmbeddingVector:
    """A finite real feature vector with an identity key."""

    id: str
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("embedding must be a non-empty 1-D vector")
        if not np.isfinite(vals).all():
            raise ValueError(f"embedding {self.id!r} contains non-finite entries")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class ClassifierHead:
    """One-hidden-layer ReLU network with a scalar sigmoid output.

    Scores a pair through ``sigmoid(w2 . relu(W1 @ d + b1) + b2)`` where d is
    the absolute embedding difference; the output always lies in (0, 1).
    """

    w1: np.ndarray  # (hidden, dim)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=np.float64)
        b1 = np.asarray(self.b1, dtype=np.float64)
        w2 = np.asarray(self.w2, dtype=np.float64)
        if w1.ndim != 2:
            raise ValueError("w1 must be a (hidden, dim) matrix")
        if b1.shape != (w1.shape[0],) or w2.shape != (w1.shape[0],):
            raise ValueError("b1 and w2 must match the hidden width of w1")
        for name, a in (("w1", w1), ("b1", b1), ("w2", w2)):
            if not np.isfinite(a).all():
                raise ValueError(f"{name} contains non-finite entries")
        if not np.isfinite(self.b2):
            raise ValueError("b2 must be finite")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b2", float(self.b2))

    @property
    def input_dim(self) -> int:
        return int(self.w1.shape[1])

    @property
    def hidden_dim(self) -> int:
        return int(self.w1.shape[0])


@dataclass(frozen=True)
class ScoreMatrix:
    """All pairwise matching scores: rows are images, columns are reports."""

    image_ids: tuple[str, ...]
    report_ids: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.shape != (len(self.image_ids), len(self.report_ids)):
            raise ValueError(
                f"score matrix shape {scores.shape} does not match "
                f"{len(self.image_ids)} images x {len(self.report_ids)} reports"
            )
        if scores.size and not np.isfinite(scores).all():
            raise ValueError("scores must be finite")
        scores.flags.writeable = False
        object.__setattr__(self, "image_ids", tuple(self.image_ids))
        object.__setattr__(self, "report_ids", tuple(self.report_ids))
        object.__setattr__(self, "scores", scores)

    def row(self, image_id: str) -> np.ndarray:
        return self.scores[self.image_ids.index(image_id)]


def sigmoid(x: float | np.ndarray):
    """Numerically stable logistic function (scalar in, scalar out)."""
    arr = np.asarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two equal-dimension vectors, in [-1, 1].

    A zero-norm operand is degenerate: the score is defined as 0.0 and a
    RuntimeWarning is emitted.
    """
    va, vb = _vals(a), _vals(b)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        warnings.warn("cosine similarity of a zero-norm vector is defined as 0", RuntimeWarning)
        return 0.0
    return float(np.dot(va, vb) / (na * nb))


def classifier_forward(head: ClassifierHead, diff: np.ndarray) -> float:
    """Forward pass of the shallow head on an absolute-difference vector."""
    hidden = np.maximum(head.w1 @ diff + head.b1, 0.0)
    return float(sigmoid(float(head.w2 @ hidden + head.b2)))


def classifier_score(v_i, v_t, head: ClassifierHead) -> float:
    """Match probability of a pair from the classifier head, in (0, 1).

    The head sees the elementwise absolute difference |v_i - v_t|, so the
    score is symmetric in its two arguments.
    """
    vi, vt = _vals(v_i), _vals(v_t)
    if vi.shape != vt.shape:
        raise ValueError(f"dimension mismatch: {vi.shape} vs {vt.shape}")
    if vi.size != head.input_dim:
        raise ValueError(f"head expects dim {head.input_dim}, got {vi.size}")
    return classifier_forward(head, np.abs(vi - vt))


Scorer = Callable[[np.ndarray, np.ndarray], float]


def make_cosine_scorer() -> Scorer:
    return cosine_similarity


def make_classifier_scorer(head: ClassifierHead) -> Scorer:
    def scorer(v_i: np.ndarray, v_t: np.ndarray) -> float:
        return classifier_score(v_i, v_t, head)

    return scorer


def score_all(images, reports, scorer: Scorer) -> ScoreMatrix:
    """Score every (image, report) pair with a fixed evaluation order.

    ``images`` and ``reports`` are EmbeddingTables (or anything exposing
    ``ids`` and ``vectors``). Each cell is scorer(image_m, report_n); scorer
    failures are re-raised with the (row, column) pair named.
    """
    img_ids, img_vecs = list(images.ids), np.asarray(images.vectors, dtype=np.float64)
    rep_ids, rep_vecs = list(reports.ids), np.asarray(reports.vectors, dtype=np.float64)
    if not img_ids or not rep_ids:
        raise ValueError("score_all requires non-empty image and report tables")
    out = np.empty((len(img_ids), len(rep_ids)), dtype=np.float64)
    for m in range(len(img_ids)):
        for n in range(len(rep_ids)):
            try:
                out[m, n] = scorer(img_vecs[m], rep_vecs[n])
            except Exception as e:
                raise RuntimeError(
                    f"scorer failed for image {img_ids[m]!r} x report {rep_ids[n]!r}: {e}"
                ) from e
    return ScoreMatrix(image_ids=tuple(img_ids), report_ids=tuple(rep_ids), scores=out)


def rank_reports(scores: np.ndarray, report_ids: Sequence[str]) -> list[str]:
    """Report ids sorted by descending score; ties break by ascending index."""
    row = np.asarray(scores, dtype=np.float64)
    if row.ndim != 1 or len(report_ids) != row.size:
        raise ValueError("scores must be a 1-D row matching report_ids")
    if row.size and not np.isfinite(row).all():
        raise ValueError("scores must be finite")
    order = np.argsort(-row, kind="stable")
    return [report_ids[i] for i in order]


def rank_of_true(scores: np.ndarray, true_index: int) -> int:
    """1-based rank the true candidate lands at under the standard tie-break.

    Equals the position of ``true_index`` in rank_reports output: candidates
    strictly ahead are those with a higher score, plus equal-score candidates
    with a smaller index.
    """
    row = np.asarray(scores, dtype=np.float64)
    t = row[true_index]
    ahead = int(np.count_nonzero(row > t))
    ahead += int(np.count_nonzero(row[:true_index] == t))
    return ahead + 1


def ranks_of_true_matrix(scores: np.ndarray, true_indices: np.ndarray) -> np.ndarray:
    """Vectorized rank_of_true over the rows of a score matrix."""
    scores = np.asarray(scores, dtype=np.float64)
    true_indices = np.asarray(true_indices, dtype=np.int64)
    m, n = scores.shape
    true_vals = scores[np.arange(m), true_indices]
    higher = (scores > true_vals[:, None]).sum(axis=1)
    col = np.arange(n)[None, :]
    tied_before = ((scores == true_vals[:, None]) & (col < true_indices[:, None])).sum(axis=1)
    return (higher + tied_before + 1).astype(np.int64)


def recall_at_k(rankings: Sequence[Sequence[str]], truth: dict[str, str], k: int,
                query_ids: Sequence[str] | None = None) -> float:
    """Percentage of queries whose true report appears in its top k.

    ``rankings`` holds one ranked report-id list per query, aligned with
    ``query_ids`` (or with truth insertion order when omitted). k larger
    than the candidate count is clamped with a warning.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    ids = list(query_ids) if query_ids is not None else list(truth)
    if len(ids) != len(rankings):
        raise ValueError("one ranking per query is required")
    if not rankings:
        raise ValueError("recall_at_k requires at least one query")
    n_candidates = len(rankings[0])
    if k > n_candidates:
        warnings.warn(f"k={k} exceeds candidate count {n_candidates}; clamping", RuntimeWarning)
        k = n_candidates
    correct = 0
    for qid, ranked in zip(ids, rankings):
        if truth[qid] in ranked[:k]:
            correct += 1
    return 100.0 * correct / len(rankings)


def dump_scores_csv(matrix: ScoreMatrix, path) -> None:
    """Write a ScoreMatrix as ``image_id,report_id,score`` rows for debugging."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("image_id,report_id,score\n")
        for m, img in enumerate(matrix.image_ids):
            for n, rep in enumerate(matrix.report_ids):
                f.write(f"{img},{rep},{float(matrix.scores[m, n])!r}\n")
