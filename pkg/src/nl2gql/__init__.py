"""Desk-scale NL2GQL toolkit: an in-memory property graph with a Cypher
style query subset, template-driven NL-GQL data generation with a
two-step self-instruct loop, schema linking for inference prompts, and
EM/EX evaluation."""

from .schema import (
    EdgeDef,
    GraphSchema,
    NodeDef,
    PropertyDef,
    SchemaParseError,
    SchemaValidationError,
    load_schema,
    save_schema,
)
from .graph import (
    Edge,
    GraphLoadError,
    Node,
    PropertyGraph,
    load_graph,
    save_graph,
)
from .executor import (
    ExecutionError,
    Rejection,
    ResultTable,
    TypeMismatchError,
    UnknownSchemaItemError,
    execute,
    execute_verified,
)
from .templates import (
    DataPool,
    NLGQLRecord,
    PoolStats,
    QueryTemplate,
    ground,
    instantiate,
    load_pool,
    pool_stats,
    save_pool,
    seed_templates,
)
from .similarity import SimilarityScorer, TrigramCosineScorer
from .datagen import GenerationConfig, LoopResult, self_instruct_loop, split_pool
from .linker import (
    DisconnectedLabelsError,
    LabelDictionary,
    LinkResult,
    assemble_prompt,
    build_dictionary,
    join_tables,
    link,
    link_labels,
    verify_match_clause,
)
from .llm import EndpointClient, LlmClient, LlmError, MockLlmClient
from .metrics import EvalReport, GoldDataError, em_score, evaluate_run, ex_score
from . import gql

__version__ = "0.1.0"

__all__ = [
    "DataPool",
    "DisconnectedLabelsError",
    "Edge",
    "EdgeDef",
    "EndpointClient",
    "EvalReport",
    "ExecutionError",
    "GenerationConfig",
    "GoldDataError",
    "GraphLoadError",
    "GraphSchema",
    "LabelDictionary",
    "LinkResult",
    "LlmClient",
    "LlmError",
    "LoopResult",
    "MockLlmClient",
    "NLGQLRecord",
    "Node",
    "NodeDef",
    "PoolStats",
    "PropertyDef",
    "PropertyGraph",
    "QueryTemplate",
    "Rejection",
    "ResultTable",
    "SchemaParseError",
    "SchemaValidationError",
    "SimilarityScorer",
    "TrigramCosineScorer",
    "TypeMismatchError",
    "UnknownSchemaItemError",
    "assemble_prompt",
    "build_dictionary",
    "em_score",
    "evaluate_run",
    "ex_score",
    "execute",
    "execute_verified",
    "gql",
    "ground",
    "instantiate",
    "join_tables",
    "link",
    "link_labels",
    "load_graph",
    "load_pool",
    "load_schema",
    "pool_stats",
    "save_graph",
    "save_pool",
    "save_schema",
    "seed_templates",
    "self_instruct_loop",
    "split_pool",
    "verify_match_clause",
]
