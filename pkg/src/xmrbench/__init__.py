"""xmrbench: occlusion-robustness benchmarking for image/text retrieval.

The package measures how retrieval quality (recall at k) of a dual-encoder
model degrades when query images are corrupted by seeded block occlusion,
sweeping a grid of occlusion ratios and cutoffs. A self-contained toy
contrastive model makes the whole pipeline runnable at desk scale; external
models plug in through a precomputed-embedding file format or a JSON wire
protocol over a child process's standard streams.
"""

__version__ = "0.1.0"

from .data import (  # noqa: E402,F401
    ImageTensor,
    Manifest,
    ReportText,
    StudyRecord,
    decode_image,
    filter_studies,
    load_manifest,
    write_manifest,
)
from .occlusion import (  # noqa: F401
    BlockPlacement,
    OcclusionSpec,
    apply_occlusion,
    block_dims,
    derive_seed,
    place_block,
)
from .scoring import (  # noqa: F401
    ClassifierHead,
    EmbeddingVector,
    ScoreMatrix,
    classifier_score,
    cosine_similarity,
    rank_reports,
    recall_at_k,
    score_all,
)
from .embedders import (  # noqa: F401
    EmbedderSpec,
    EmbeddingTable,
    OracleEmbedder,
    RandomEmbedder,
    ToyEmbedder,
    build_embedder,
    parse_embedder_spec,
    read_embeddings,
    write_embeddings,
)
from .bench import (  # noqa: F401
    BenchConfig,
    RecallGrid,
    emit_report,
    occlusion_retrieval_test,
    parse_report,
    random_baseline_analytic,
    random_baseline_monte_carlo,
    random_baseline_monte_carlo_grid,
    sweep,
)
from .toymodel import (  # noqa: F401
    SyntheticPairSpec,
    ToyEncoderParams,
    bce_pair_loss,
    gen_synthetic_pairs,
    info_nce_loss,
    load_params,
    save_params,
    train,
    triplet_loss,
)
from .wire import ExternalEmbedder, ProtocolError, run_conformance  # noqa: F401
