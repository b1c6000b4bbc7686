"""Semantic-hierarchy-aware progressive latent codec.

The package splits into a coding core (range coder, conditional
Gaussian models, progressive bitstream) and analysis tooling around it
(taxonomy handling, class clustering, rate-distortion scoring).
"""

from .clustering import BalanceReport, EmbeddingSet, balance, kmeans, normalize, sse
from .context_models import (
    BundleConfig,
    GaussianField,
    ModelBundle,
    context_features,
    delta_refine,
    dump_bundle,
    entropy_params,
    hyper_features,
    load_bundle,
    load_bundle_file,
    write_bundle_file,
)
from .entropycoder import (
    SIGMA_MIN,
    decode_symbols,
    encode_symbols,
    ideal_bits,
    quantize_cdf,
)
from .errors import DataError, IntegrityError, SemcodecError
from .evaluation import (
    PredictionRow,
    RDPoint,
    bd_rate,
    composite_loss,
    export_predictions,
    export_rd,
    hierarchical_accuracy,
    parse_predictions,
    parse_rd,
    wup_score,
)
from .progressive_codec import (
    ChannelConfig,
    StreamHeader,
    decode,
    decode_truncated,
    encode,
    parse_header,
    prefix_mask,
    rate_report,
    sigma_order,
)
from .rng import SplitMix64
from .taxonomy import (
    Clustering,
    CoherenceReport,
    Taxonomy,
    coherence,
    depth_cut,
    dump_clustering,
    lca,
    load_taxonomy,
    parse_clustering,
    wup,
)

__version__ = "0.1.0"

__all__ = [
    "BalanceReport",
    "BundleConfig",
    "ChannelConfig",
    "Clustering",
    "CoherenceReport",
    "DataError",
    "EmbeddingSet",
    "GaussianField",
    "IntegrityError",
    "ModelBundle",
    "PredictionRow",
    "RDPoint",
    "SIGMA_MIN",
    "SemcodecError",
    "SplitMix64",
    "StreamHeader",
    "Taxonomy",
    "balance",
    "bd_rate",
    "coherence",
    "composite_loss",
    "context_features",
    "decode",
    "decode_symbols",
    "decode_truncated",
    "delta_refine",
    "depth_cut",
    "dump_bundle",
    "dump_clustering",
    "encode",
    "encode_symbols",
    "entropy_params",
    "export_predictions",
    "export_rd",
    "hierarchical_accuracy",
    "hyper_features",
    "ideal_bits",
    "kmeans",
    "lca",
    "load_bundle",
    "load_bundle_file",
    "load_taxonomy",
    "normalize",
    "parse_header",
    "parse_predictions",
    "parse_rd",
    "prefix_mask",
    "quantize_cdf",
    "rate_report",
    "sigma_order",
    "sse",
    "wup",
    "wup_score",
    "write_bundle_file",
]
