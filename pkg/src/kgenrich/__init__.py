"""kgenrich: knowledge-graph completion guided by query logs.

Train RotatE embeddings over an interned triplet store, predict missing
triplets by rejection sampling (optionally guided by entity-predicate pairs
mined from SPARQL SELECT logs), and evaluate hit counts and pair precision
against a held-out split.
"""

from .evaluator import (
    EvalReport,
    evaluate,
    export_annotation_sample,
    group_precision,
    hit_triplets,
    pair_precision,
    rc_ratio,
)
from .guidance import EsBinning, KmReason, KmVerdict, es_bin, km_classify
from .ingest import (
    MetadataTable,
    SanitizationReport,
    load_kg_dir,
    load_metadata,
    load_ntriples,
    load_tsv,
    sanitize,
    save_kg_dir,
    split,
)
from .kg import (
    ALL_SPLITS,
    DEV,
    TEST,
    TRAIN,
    EntityPredicatePair,
    KnowledgeGraph,
    Orientation,
    Triplet,
    Vocabulary,
    pair_of_triplet,
)
from .predictor import (
    PredicateMarginal,
    Prediction,
    StarvationError,
    accept_probability,
    predict_qg,
    predict_rs,
    predict_topk,
    proposal_space,
    sample_accepted,
)
from .query_log import (
    LabelPair,
    MinedPairs,
    QueryForm,
    QueryPairTable,
    SparqlQuery,
    build_pair_table,
    extract_pairs,
    mine_lines,
    mine_log,
    parse_query,
)
from .rotate import (
    GradientSet,
    RotatEModel,
    TrainConfig,
    gradients,
    load_model,
    loss,
    save_model,
    train,
)
from .synthetic import SyntheticBenchmark, make_benchmark, write_benchmark_files

__version__ = "0.1.0"
