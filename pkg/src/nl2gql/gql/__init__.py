"""Graph query language subset: parse, print, canonicalize, split."""

from .ast import (
    Abs,
    Binary,
    Clause,
    EdgePattern,
    EdgePropAccess,
    Expr,
    GqlQuery,
    Literal,
    LimitClause,
    MatchClause,
    NodePattern,
    OrderByClause,
    OrderKey,
    PathPattern,
    ProjItem,
    PropAccess,
    ReturnClause,
    VarRef,
    WhereClause,
    WithClause,
    accessed_node_tags,
    canonicalize,
    clause_keyword,
    definition_order_names,
    iter_all_subexprs,
    iter_edge_patterns,
    iter_exprs,
    iter_node_patterns,
    iter_subexprs,
    pattern_edge_types,
    pattern_tags,
    print_clause,
    print_expr,
    print_query,
    rename_bindings,
    split_clauses,
    used_edge_types,
)
from .parser import GqlBindingError, GqlError, GqlSyntaxError, parse, tokenize, validate_query

__all__ = [
    "Abs",
    "Binary",
    "Clause",
    "EdgePattern",
    "EdgePropAccess",
    "Expr",
    "GqlQuery",
    "Literal",
    "LimitClause",
    "MatchClause",
    "NodePattern",
    "OrderByClause",
    "OrderKey",
    "PathPattern",
    "ProjItem",
    "PropAccess",
    "ReturnClause",
    "VarRef",
    "WhereClause",
    "WithClause",
    "GqlBindingError",
    "GqlError",
    "GqlSyntaxError",
    "accessed_node_tags",
    "canonicalize",
    "clause_keyword",
    "definition_order_names",
    "iter_all_subexprs",
    "iter_edge_patterns",
    "iter_exprs",
    "iter_node_patterns",
    "iter_subexprs",
    "parse",
    "pattern_edge_types",
    "pattern_tags",
    "print_clause",
    "print_expr",
    "print_query",
    "rename_bindings",
    "split_clauses",
    "tokenize",
    "used_edge_types",
    "validate_query",
]
