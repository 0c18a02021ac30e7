"""Subject re-identification toolkit.

Trains small embedding encoders with a hard-negative triplet objective,
evaluates them with episodic N-way K-shot retrieval, and summarizes cluster
separation of the resulting embedding spaces. Everything is seeded and
reproducible; stores and checkpoints are compact little-endian binaries.
"""

from .clusters import ClusterStats, cluster_stats, export_histogram_csv, subject_means
from .core import (
    DEFAULT_DIM,
    DistanceKind,
    EmbeddingRecord,
    EmbeddingSet,
    distance,
    pairwise_distances,
)
from .encoder import (
    ACTIVATIONS,
    EncoderModel,
    encode,
    init_encoder,
    load_checkpoint,
    save_checkpoint,
)
from .episodes import (
    AggregateReport,
    Episode,
    EpisodeResult,
    EpisodeSpec,
    evaluate,
    hit_at_r,
    rank_supports,
    recall_at_k,
    sample_episode,
)
from .errors import (
    BatchTooSmallError,
    CorruptFileError,
    CsvShapeError,
    DataValidationError,
    DegenerateVectorError,
    DimensionError,
    DuplicateRecordError,
    FormatError,
    InsufficientDataError,
    InvalidSpecError,
    MissingEmbeddingError,
    ReidkitError,
)
from .pca import pca_project
from .reports import (
    build_report,
    merge_report_docs,
    metric_row,
    read_report_doc,
    setting_label,
    strip_volatile,
    write_report_doc,
)
from .store import (
    export_csv,
    format_float32,
    import_csv,
    read_store,
    store_bytes,
    write_store,
)
from .synthetic import SyntheticSpec, generate_synthetic, scramble_map
from .training import TrainConfig, TrainReport, train
from .triplets import (
    DEFAULT_MARGIN,
    BatchLossResult,
    LossConfig,
    MinedTriplets,
    TripletBatch,
    batch_loss,
    mine_hard_triplets,
    triplet_loss,
    triplet_loss_grad,
)

__version__ = "0.1.0"

__all__ = [
    "ACTIVATIONS",
    "AggregateReport",
    "BatchLossResult",
    "BatchTooSmallError",
    "ClusterStats",
    "CorruptFileError",
    "CsvShapeError",
    "DEFAULT_DIM",
    "DEFAULT_MARGIN",
    "DataValidationError",
    "DegenerateVectorError",
    "DimensionError",
    "DistanceKind",
    "DuplicateRecordError",
    "EmbeddingRecord",
    "EmbeddingSet",
    "EncoderModel",
    "Episode",
    "EpisodeResult",
    "EpisodeSpec",
    "FormatError",
    "InsufficientDataError",
    "InvalidSpecError",
    "LossConfig",
    "MinedTriplets",
    "MissingEmbeddingError",
    "ReidkitError",
    "SyntheticSpec",
    "TrainConfig",
    "TrainReport",
    "TripletBatch",
    "batch_loss",
    "build_report",
    "cluster_stats",
    "distance",
    "encode",
    "evaluate",
    "export_csv",
    "export_histogram_csv",
    "format_float32",
    "generate_synthetic",
    "hit_at_r",
    "import_csv",
    "init_encoder",
    "load_checkpoint",
    "merge_report_docs",
    "metric_row",
    "mine_hard_triplets",
    "pairwise_distances",
    "pca_project",
    "rank_supports",
    "read_report_doc",
    "read_store",
    "recall_at_k",
    "sample_episode",
    "save_checkpoint",
    "scramble_map",
    "setting_label",
    "store_bytes",
    "strip_volatile",
    "subject_means",
    "train",
    "triplet_loss",
    "triplet_loss_grad",
    "write_report_doc",
    "write_store",
]
