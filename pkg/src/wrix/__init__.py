"""Speaker retrieval toolkit for diarised media archives.

Pipeline: ingest diarisation (RTTM) and segment embeddings (JSONL),
aggregate them into per-speaker profiles under a duration-weighting
scheme, index an archive, rank it against spoken queries, and evaluate
with standard ranked-retrieval metrics. A DSP toolbox degrades query
audio (noise / bit depth / resampling / reverberation) for robustness
studies, with a WADA-style non-intrusive SNR estimator.
"""

from .aggregate import (
    SCHEME_KINDS,
    SpeakerProfile,
    WeightingScheme,
    aggregate_speaker_embedding,
    build_profiles,
    compute_weights,
)
from .audio import AudioBuffer, gaussian_noise, read_wav, write_wav
from .distort import (
    DistortionSpec,
    apply_distortion,
    convolve_rir,
    measure_snr_db,
    mix_noise_at_snr,
    parse_distortion_spec,
    quantize_bits,
    resample_roundtrip,
)
from .errors import IndexFormatError, ParseError, ValidationError
from .index_io import load_index, save_index
from .ingest import (
    EmbeddingCorpus,
    FileStats,
    QuerySpec,
    RelevanceLabels,
    SegmentEmbedding,
    SegmentRecord,
    compute_file_stats,
    format_embeddings,
    format_rttm,
    normalize_name,
    parse_rttm,
    read_archive_manifest,
    read_embeddings,
    read_labels,
    read_query_manifest,
)
from .metrics import (
    DEFAULT_CATEGORIES,
    DEFAULT_KS,
    MetricsReport,
    QueryMetrics,
    aggregate,
    average_precision_at_k,
    avg_rpr,
    cumulative_curve,
    mrr,
    ndcg_at_k,
    precision_at_k,
    relevance_vector,
    silhouette_cosine,
)
from .retrieval import (
    EMPTY_FILE_SCORE,
    RETRIEVAL_MODES,
    ArchiveIndex,
    FusionSpec,
    RankedList,
    build_index,
    cosine,
    fuse_scores,
    query_embedding,
    rank_archive,
    rank_queries,
    rank_scores,
    read_ranked,
    read_scores,
    score_archive,
    score_file,
    write_ranked,
    write_scores,
)
from .synthetic import SyntheticArchive, generate_synthetic_archive
from .wada import WadaTable, build_wada_table, g_statistic, wada_snr_estimate

__version__ = "1.0.0"

__all__ = [
    "ArchiveIndex",
    "AudioBuffer",
    "DistortionSpec",
    "EmbeddingCorpus",
    "FileStats",
    "FusionSpec",
    "IndexFormatError",
    "MetricsReport",
    "ParseError",
    "QueryMetrics",
    "QuerySpec",
    "RankedList",
    "RelevanceLabels",
    "SegmentEmbedding",
    "SegmentRecord",
    "SpeakerProfile",
    "SyntheticArchive",
    "ValidationError",
    "WadaTable",
    "WeightingScheme",
    "DEFAULT_CATEGORIES",
    "DEFAULT_KS",
    "EMPTY_FILE_SCORE",
    "RETRIEVAL_MODES",
    "SCHEME_KINDS",
    "aggregate",
    "aggregate_speaker_embedding",
    "apply_distortion",
    "average_precision_at_k",
    "avg_rpr",
    "build_index",
    "build_profiles",
    "build_wada_table",
    "compute_file_stats",
    "compute_weights",
    "convolve_rir",
    "cosine",
    "cumulative_curve",
    "format_embeddings",
    "format_rttm",
    "fuse_scores",
    "g_statistic",
    "gaussian_noise",
    "generate_synthetic_archive",
    "load_index",
    "measure_snr_db",
    "mix_noise_at_snr",
    "mrr",
    "ndcg_at_k",
    "normalize_name",
    "parse_distortion_spec",
    "parse_rttm",
    "precision_at_k",
    "quantize_bits",
    "query_embedding",
    "rank_archive",
    "rank_queries",
    "rank_scores",
    "read_archive_manifest",
    "read_embeddings",
    "read_labels",
    "read_query_manifest",
    "read_ranked",
    "read_scores",
    "read_wav",
    "relevance_vector",
    "resample_roundtrip",
    "save_index",
    "score_archive",
    "score_file",
    "silhouette_cosine",
    "wada_snr_estimate",
    "write_ranked",
    "write_scores",
    "write_wav",
]
