"""Knowledge-graph embedding toolkit (Python bindings)."""

from ._kgforge import (
    IoError,
    KnowledgeGraph,
    ParseError,
    SparseCooccurrence,
    TokenEmbeddings,
    TranslationalModel,
    ValidationError,
    approx_ppr,
    build_corpus,
    build_cooccurrence,
    evaluate,
    exact_ppr,
    generate_factory_graph,
    generate_one_to_many,
    generate_planted_kg,
    load_checkpoint,
    run_cli,
    train_glove,
    train_sequences,
    train_translational,
)

__all__ = [
    "IoError",
    "KnowledgeGraph",
    "ParseError",
    "SparseCooccurrence",
    "TokenEmbeddings",
    "TranslationalModel",
    "ValidationError",
    "approx_ppr",
    "build_corpus",
    "build_cooccurrence",
    "evaluate",
    "exact_ppr",
    "generate_factory_graph",
    "generate_one_to_many",
    "generate_planted_kg",
    "load_checkpoint",
    "run_cli",
    "train_glove",
    "train_sequences",
    "train_translational",
]
