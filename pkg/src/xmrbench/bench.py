"""Occlusion retrieval benchmark: per-ratio tests, the full grid sweep,
random baselines, and deterministic report emission.

For every image the harness occludes a seeded block, embeds the occluded
image, scores it against every report embedding, and checks whether the true
report (the one from the image's own study) lands in the top k. Text is
never occluded; report embeddings are computed once per run. Recall is
reported in percent over all image queries, averaged over trials when
``trials_per_image`` > 1.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .data import ImageTensor, Manifest, load_image
from .embedders import Embedder, report_text_for_embedding, EmbeddingTable, DEFAULT_TEXT_SECTIONS
from .occlusion import OcclusionSpec, apply_occlusion, derive_seed
from .scoring import (
    ClassifierHead,
    ScoreMatrix,
    make_classifier_scorer,
    make_cosine_scorer,
    rank_of_true,
)

log = logging.getLogger("xmrbench.bench")

DEFAULT_RATIOS = (0.0, 0.25, 1.0, 4.0, 9.0, 25.0, 49.0, 81.0)
DEFAULT_KS = (5, 10, 20, 30, 50, 100)


@dataclass(frozen=True)
class BenchConfig:
    """Benchmark parameters; the defaults reproduce the standard grid."""

    occlusion_ratios: tuple[float, ...] = DEFAULT_RATIOS
    k_values: tuple[int, ...] = DEFAULT_KS
    seed: int = 0
    trials_per_image: int = 1
    scorer: str = "cosine"  # cosine | classifier
    fill_value: float = 0.0
    text_sections: tuple[str, ...] = DEFAULT_TEXT_SECTIONS
    normalize: bool = False
    occlusion_per_report: bool = False
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "occlusion_ratios", tuple(float(r) for r in self.occlusion_ratios))
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        for name, values in (("occlusion_ratios", self.occlusion_ratios),
                             ("k_values", self.k_values)):
            if not values:
                raise ValueError(f"{name} must be non-empty")
            if list(values) != sorted(set(values)):
                raise ValueError(f"{name} must be sorted ascending without duplicates")
        if any(not 0.0 <= r <= 100.0 for r in self.occlusion_ratios):
            raise ValueError("occlusion ratios must lie in [0, 100]")
        if any(k < 1 for k in self.k_values):
            raise ValueError("k values must be >= 1")
        if self.trials_per_image < 1:
            raise ValueError("trials_per_image must be >= 1")
        if self.scorer not in ("cosine", "classifier"):
            raise ValueError(f"unknown scorer {self.scorer!r}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def to_dict(self) -> dict:
        """Result-affecting parameters only; execution knobs like ``jobs``
        never influence the emitted numbers and stay out of provenance."""
        return {
            "occlusion_ratios": list(self.occlusion_ratios),
            "k_values": list(self.k_values),
            "seed": self.seed,
            "trials_per_image": self.trials_per_image,
            "scorer": self.scorer,
            "fill_value": self.fill_value,
            "text_sections": list(self.text_sections),
            "normalize": self.normalize,
            "occlusion_per_report": self.occlusion_per_report,
        }


@dataclass(frozen=True)
class RecallGrid:
    """Recall percentages over the (k x occlusion ratio) grid."""

    k_values: tuple[int, ...]
    ratios: tuple[float, ...]
    cells: np.ndarray  # shape (len(k_values), len(ratios))
    random_baseline: tuple[float, ...]  # analytic, per k
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.float64)
        if cells.shape != (len(self.k_values), len(self.ratios)):
            raise ValueError(
                f"grid shape {cells.shape} != ({len(self.k_values)}, {len(self.ratios)})"
            )
        if cells.size and (cells.min() < 0.0 or cells.max() > 100.0):
            raise ValueError("recall cells must lie in [0, 100]")
        if len(self.random_baseline) != len(self.k_values):
            raise ValueError("one random-baseline value per k is required")
        cells.flags.writeable = False
        object.__setattr__(self, "k_values", tuple(self.k_values))
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "random_baseline", tuple(self.random_baseline))

    def cell(self, k: int, ratio: float) -> float:
        return float(self.cells[self.k_values.index(k), self.ratios.index(ratio)])


@dataclass(frozen=True)
class Query:
    """One retrieval query: an image and the study whose report is true."""

    image_id: str
    study_id: str
    index: int


def build_queries(manifest: Manifest) -> list[Query]:
    """Enumerate image queries in manifest order; image ids must be unique."""
    queries: list[Query] = []
    seen: set[str] = set()
    for study in manifest.studies:
        for ref in study.image_refs:
            if ref in seen:
                raise ValueError(f"image ref {ref!r} appears twice in the manifest")
            seen.add(ref)
            queries.append(Query(image_id=ref, study_id=study.study_id, index=len(queries)))
    return queries


def load_images(manifest: Manifest, root: str | Path) -> dict[str, ImageTensor]:
    """Decode every referenced image, keyed by its manifest ref."""
    root = Path(root)
    images: dict[str, ImageTensor] = {}
    for query in build_queries(manifest):
        images[query.image_id] = load_image(root / query.image_id)
    return images


def embed_reports(manifest: Manifest, embedder: Embedder,
                  config: BenchConfig) -> EmbeddingTable:
    """Embed every report once; ids are study ids, order follows the manifest."""
    pairs = []
    for study in manifest.studies:
        text = report_text_for_embedding(study.report, config.text_sections)
        vec = embedder.embed_text(study.study_id, text)
        pairs.append((study.study_id, _maybe_normalize(vec, config)))
    return EmbeddingTable.from_pairs(pairs, dim=embedder.dim)


def _maybe_normalize(vec: np.ndarray, config: BenchConfig) -> np.ndarray:
    if not config.normalize:
        return vec
    norm = float(np.linalg.norm(vec))
    return vec / norm if norm > 0 else vec


def _scorer_for(config: BenchConfig, head: ClassifierHead | None):
    if config.scorer == "classifier":
        if head is None:
            raise ValueError("classifier scoring requires a trained classifier head")
        return make_classifier_scorer(head)
    return make_cosine_scorer()


def _query_rank(
    query: Query,
    images: dict[str, ImageTensor] | None,
    embedder: Embedder,
    report_vectors: np.ndarray,
    true_col: int,
    ratio: float,
    trial: int,
    config: BenchConfig,
    scorer,
) -> tuple[int, np.ndarray]:
    """Rank of the true report for one (query, trial); returns (rank, row)."""
    if embedder.needs_images:
        tensor = images[query.image_id]
    else:
        tensor = None

    def embed_occluded(occlusion_seed: int) -> np.ndarray:
        occluded = tensor
        if tensor is not None:
            spec = OcclusionSpec(
                ratio_percent=ratio, seed=occlusion_seed, fill_value=config.fill_value
            )
            occluded = apply_occlusion(tensor, spec)
        return _maybe_normalize(embedder.embed_image(query.image_id, occluded), config)

    n_reports = report_vectors.shape[0]
    row = np.empty(n_reports, dtype=np.float64)
    try:
        if config.occlusion_per_report:
            # Literal per-pair resampling: a fresh block for every report scored.
            for n in range(n_reports):
                seed = derive_seed(config.seed, query.index, ratio, trial, report_index=n)
                vec = embed_occluded(seed)
                row[n] = scorer(vec, report_vectors[n])
        else:
            seed = derive_seed(config.seed, query.index, ratio, trial)
            vec = embed_occluded(seed)
            for n in range(n_reports):
                row[n] = scorer(vec, report_vectors[n])
    except Exception as e:
        # keep the exception type (exit-code mapping relies on it) but name
        # the failing query so aborted runs are diagnosable
        e.args = (f"image {query.image_id!r} at ratio {ratio:g}%: {e}",)
        raise
    return rank_of_true(row, true_col), row


def _ranks_for_ratio(
    queries: list[Query],
    images: dict[str, ImageTensor] | None,
    embedder: Embedder,
    reports: EmbeddingTable,
    ratio: float,
    config: BenchConfig,
    head: ClassifierHead | None = None,
    collect_scores: bool = False,
) -> tuple[np.ndarray, list[ScoreMatrix]]:
    """True-report ranks for every (query, trial) at one occlusion ratio.

    Work is distributed over ``config.jobs`` threads; the result is ordered
    by (trial, query index) and therefore independent of the schedule.
    """
    scorer = _scorer_for(config, head)
    report_index = {sid: n for n, sid in enumerate(reports.ids)}
    vectors = np.asarray(reports.vectors, dtype=np.float64)

    tasks = [
        (trial, query) for trial in range(config.trials_per_image) for query in queries
    ]

    def run_task(task):
        trial, query = task
        return _query_rank(
            query, images, embedder, vectors, report_index[query.study_id],
            ratio, trial, config, scorer,
        )

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(run_task, tasks))
    else:
        outcomes = [run_task(t) for t in tasks]

    ranks = np.array([rank for rank, _ in outcomes], dtype=np.int64)
    matrices: list[ScoreMatrix] = []
    if collect_scores:
        per_trial = len(queries)
        for trial in range(config.trials_per_image):
            rows = np.stack([row for _, row in outcomes[trial * per_trial:(trial + 1) * per_trial]])
            matrices.append(ScoreMatrix(
                image_ids=tuple(q.image_id for q in queries),
                report_ids=reports.ids,
                scores=rows,
            ))
    return ranks, matrices


def _recall_from_ranks(ranks: np.ndarray, k: int, n_reports: int) -> float:
    k_eff = min(k, n_reports)
    return 100.0 * float(np.count_nonzero(ranks <= k_eff)) / ranks.size


def occlusion_retrieval_test(
    manifest: Manifest,
    embedder: Embedder,
    ratio: float,
    k: int,
    config: BenchConfig,
    images: dict[str, ImageTensor] | None = None,
    head: ClassifierHead | None = None,
    reports: EmbeddingTable | None = None,
) -> float:
    """Recall@k (percent) after occluding every query image at one ratio.

    ``images`` maps image ids to tensors and may be omitted only for
    pixel-blind embedders. Passing a precomputed ``reports`` table skips
    re-embedding the (never occluded) texts.
    """
    if manifest.report_count == 0:
        raise ValueError("manifest has no studies")
    queries = build_queries(manifest)
    if images is None and embedder.needs_images:
        raise ValueError("this embedder needs pixel data; pass images=")
    if reports is None:
        reports = embed_reports(manifest, embedder, config)
    ranks, _ = _ranks_for_ratio(queries, images, embedder, reports, ratio, config, head=head)
    return _recall_from_ranks(ranks, k, len(reports))


def sweep(
    manifest: Manifest,
    embedder: Embedder,
    config: BenchConfig,
    images: dict[str, ImageTensor] | None = None,
    head: ClassifierHead | None = None,
    collect_scores: bool = False,
) -> tuple[RecallGrid, dict[float, list[ScoreMatrix]]]:
    """Run the full (occlusion ratio x k) grid.

    Image embeddings are computed once per ratio and reused for every k
    (cutoffs never change scores or ranks). Returns the grid plus the raw
    score matrices per ratio when ``collect_scores`` is set.
    """
    if manifest.report_count == 0:
        raise ValueError("manifest has no studies")
    queries = build_queries(manifest)
    if images is None and embedder.needs_images:
        raise ValueError("this embedder needs pixel data; pass images=")
    reports = embed_reports(manifest, embedder, config)
    n_reports = len(reports)

    cells = np.empty((len(config.k_values), len(config.occlusion_ratios)), dtype=np.float64)
    all_scores: dict[float, list[ScoreMatrix]] = {}
    for col, ratio in enumerate(config.occlusion_ratios):
        started = time.monotonic()
        ranks, matrices = _ranks_for_ratio(
            queries, images, embedder, reports, ratio, config,
            head=head, collect_scores=collect_scores,
        )
        if collect_scores:
            all_scores[ratio] = matrices
        for row, k in enumerate(config.k_values):
            cells[row, col] = _recall_from_ranks(ranks, k, n_reports)
        log.info(
            "ratio %.2f%%: %d queries x %d trials in %.2fs",
            ratio, len(queries), config.trials_per_image, time.monotonic() - started,
        )

    grid = RecallGrid(
        k_values=config.k_values,
        ratios=config.occlusion_ratios,
        cells=cells,
        random_baseline=tuple(
            random_baseline_analytic(n_reports, min(k, n_reports)) for k in config.k_values
        ),
        meta={
            "images": len(queries) * config.trials_per_image,
            "reports": n_reports,
            "seed": config.seed,
            "scorer": config.scorer,
            "model": embedder.name,
        },
    )
    return grid, all_scores


# ---------------------------------------------------------------------------
# Random baselines
# ---------------------------------------------------------------------------

def random_baseline_analytic(n_reports: int, k: int) -> float:
    """Expected recall (percent) of a uniformly random ranking: 100 * k / N."""
    if not 1 <= k <= n_reports:
        raise ValueError(f"k must be in [1, {n_reports}], got {k}")
    return 100.0 * k / n_reports


def random_baseline_monte_carlo_grid(
    n_reports: int,
    k_values,
    n_queries: int,
    trials: int,
    seed: int = 0,
) -> dict[int, tuple[float, float]]:
    """Simulated random retrieval for several cutoffs over shared trials.

    Each trial draws a fresh uniform score matrix, ranks the true report of
    every query under the standard tie-break, and reads recall for every k
    off the same ranks. Returns {k: (mean percent, standard error)} where
    the standard error is across trials.
    """
    ks = [int(k) for k in k_values]
    if min(ks) < 1 or max(ks) > n_reports:
        raise ValueError("every k must lie in [1, n_reports]")
    if n_queries < 1 or trials < 1:
        raise ValueError("n_queries and trials must be >= 1")
    rng = np.random.default_rng(seed)
    true_idx = np.arange(n_queries, dtype=np.int64) % n_reports
    rows = np.arange(n_queries)
    per_trial = np.empty((trials, len(ks)), dtype=np.float64)
    for t in range(trials):
        scores = rng.random((n_queries, n_reports))
        true_vals = scores[rows, true_idx]
        # Uniform doubles never tie in practice; ranking reduces to counting
        # strictly larger scores (ties would break toward smaller indices).
        ranks = (scores > true_vals[:, None]).sum(axis=1) + 1
        for j, k in enumerate(ks):
            per_trial[t, j] = 100.0 * np.count_nonzero(ranks <= k) / n_queries
    out: dict[int, tuple[float, float]] = {}
    for j, k in enumerate(ks):
        mean = float(per_trial[:, j].mean())
        stderr = float(per_trial[:, j].std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        out[k] = (mean, stderr)
    return out


def random_baseline_monte_carlo(
    n_reports: int, k: int, n_queries: int, trials: int, seed: int = 0
) -> tuple[float, float]:
    """Mean and standard error of simulated random retrieval at one cutoff."""
    return random_baseline_monte_carlo_grid(n_reports, [k], n_queries, trials, seed)[k]


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

def _meta_to_jsonable(meta: dict) -> dict:
    return {str(k): meta[k] for k in sorted(meta, key=str)}


def emit_report(grid: RecallGrid, format: str, path: str | Path,
                config: BenchConfig | None = None) -> None:
    """Write the grid as CSV or JSON; identical inputs give identical bytes.

    The CSV carries provenance as leading ``#`` comment lines, then a header
    row ``k,p_<ratio>...,random`` and one row per k with 2-decimal cells.
    JSON carries full-precision cells plus the same provenance.
    """
    if format not in ("csv", "json"):
        raise ValueError(f"unknown report format {format!r}")
    payload = _render_report(grid, format, config)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(payload)


def _render_report(grid: RecallGrid, format: str, config: BenchConfig | None) -> str:
    if format == "json":
        doc = {
            "tool": "xmrbench",
            "version": __version__,
            "config": config.to_dict() if config is not None else None,
            "meta": _meta_to_jsonable(grid.meta),
            "k_values": list(grid.k_values),
            "ratios": list(grid.ratios),
            "cells": [[float(c) for c in row] for row in grid.cells],
            "random_baseline": [float(r) for r in grid.random_baseline],
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    lines = [f"# xmrbench {__version__}"]
    if grid.meta:
        lines.append("# meta: " + json.dumps(_meta_to_jsonable(grid.meta), sort_keys=True))
    if config is not None:
        lines.append("# config: " + json.dumps(config.to_dict(), sort_keys=True))
    header = ["k"] + [f"p_{r:.2f}" for r in grid.ratios] + ["random"]
    lines.append(",".join(header))
    for row, k in enumerate(grid.k_values):
        cells = [f"{grid.cells[row, col]:.2f}" for col in range(len(grid.ratios))]
        lines.append(",".join([str(k)] + cells + [f"{grid.random_baseline[row]:.2f}"]))
    return "\n".join(lines) + "\n"


def parse_report(path: str | Path, format: str | None = None) -> RecallGrid:
    """Read a report written by emit_report back into a RecallGrid."""
    text = Path(path).read_text(encoding="utf-8")
    if format is None:
        format = "json" if text.lstrip().startswith("{") else "csv"
    if format == "json":
        doc = json.loads(text)
        return RecallGrid(
            k_values=tuple(doc["k_values"]),
            ratios=tuple(doc["ratios"]),
            cells=np.asarray(doc["cells"], dtype=np.float64),
            random_baseline=tuple(doc["random_baseline"]),
            meta=doc.get("meta", {}),
        )
    meta: dict = {}
    rows: list[list[float]] = []
    ks: list[int] = []
    ratios: list[float] = []
    baseline: list[float] = []
    for line in text.splitlines():
        if line.startswith("# meta: "):
            meta = json.loads(line[len("# meta: "):])
            continue
        if line.startswith("#") or not line.strip():
            continue
        fields = line.split(",")
        if fields[0] == "k":
            if fields[-1] != "random":
                raise ValueError("last CSV column must be 'random'")
            ratios = [float(h[2:]) for h in fields[1:-1]]
            continue
        ks.append(int(fields[0]))
        rows.append([float(x) for x in fields[1:-1]])
        baseline.append(float(fields[-1]))
    if not ks or not ratios:
        raise ValueError("CSV report has no grid rows")
    return RecallGrid(
        k_values=tuple(ks),
        ratios=tuple(ratios),
        cells=np.asarray(rows, dtype=np.float64),
        random_baseline=tuple(baseline),
        meta=meta,
    )
