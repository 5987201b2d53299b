"""Query execution over a property graph.

Semantics in brief: MATCH enumerates homomorphic bindings of each pattern
chain (distinct aliases may bind the same node) and joins paths and clauses
by cross product; WHERE keeps rows whose predicate is exactly true (null
propagates and never passes); WITH/RETURN project; ORDER BY sorts stably
with nulls last; LIMIT truncates. After every MATCH clause the rows are
sorted by the tuple of bound node/edge ids in pattern order, which makes
results deterministic for a fixed load order regardless of join strategy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cmp_to_key

from . import gql
from .gql import (
    Abs,
    Binary,
    EdgePropAccess,
    GqlQuery,
    Literal,
    LimitClause,
    MatchClause,
    NodePattern,
    OrderByClause,
    PropAccess,
    ReturnClause,
    VarRef,
    WhereClause,
    WithClause,
)
from .gql.parser import GqlError
from .graph import PropertyGraph
from .schema import GraphSchema


class ExecutionError(ValueError):
    pass


class UnknownSchemaItemError(ExecutionError):
    pass


class TypeMismatchError(ExecutionError):
    pass


@dataclass(frozen=True)
class ResultTable:
    columns: tuple
    rows: tuple  # tuples of str | int | float | bool | None
    ordered: bool

    def to_json_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "rows": [list(r) for r in self.rows],
            "ordered": self.ordered,
        }


def table_from_json_dict(d: dict) -> ResultTable:
    return ResultTable(
        columns=tuple(d["columns"]),
        rows=tuple(tuple(r) for r in d["rows"]),
        ordered=bool(d["ordered"]),
    )


@dataclass(frozen=True)
class Rejection:
    stage: str
    reason: str
    candidate: str

    def to_json_dict(self) -> dict:
        return {"stage": self.stage, "reason": self.reason, "candidate": self.candidate}


# --------------------------------------------------------- schema checking


def check_schema_items(q: GqlQuery, schema: GraphSchema) -> None:
    """Reject queries naming tags, edge types, or properties the schema
    does not declare. The implicit 'name' property exists on every tag."""
    alias_tags = {}
    alias_edges = {}
    for n in gql.iter_node_patterns(q):
        if schema.node_def(n.tag) is None:
            raise UnknownSchemaItemError(f"unknown node tag {n.tag!r}")
        alias_tags[n.alias] = n.tag
    for e in gql.iter_edge_patterns(q):
        if schema.edge_def(e.edge_type) is None:
            raise UnknownSchemaItemError(f"unknown edge type {e.edge_type!r}")
        if e.alias:
            alias_edges[e.alias] = e.edge_type
    for expr in gql.iter_all_subexprs(q):
        if isinstance(expr, PropAccess):
            ndef = schema.node_def(expr.tag)
            if ndef is None:
                raise UnknownSchemaItemError(f"unknown node tag {expr.tag!r}")
            if expr.prop != "name" and ndef.prop(expr.prop) is None:
                raise UnknownSchemaItemError(f"no property {expr.prop!r} on tag {expr.tag!r}")
        elif isinstance(expr, EdgePropAccess):
            edge_type = alias_edges.get(expr.alias)
            if edge_type is None:
                continue  # binder already rejected truly unbound aliases
            edef = schema.edge_def(edge_type)
            if edef.prop(expr.prop) is None:
                raise UnknownSchemaItemError(
                    f"no property {expr.prop!r} on edge type {edge_type!r}"
                )


# -------------------------------------------------------------- evaluation


def _kind_name(v) -> str:
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, str):
        return "string"
    if isinstance(v, (int, float)):
        return "number"
    return "null"


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _eval(expr, env: dict, g: PropertyGraph):
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, VarRef):
        return env[expr.name]
    if isinstance(expr, PropAccess):
        node = g.nodes[env[expr.alias]]
        if expr.prop == "name":
            return node.name
        return node.props.get(expr.prop)
    if isinstance(expr, EdgePropAccess):
        edge = g.edges[env[expr.alias]]
        return edge.props.get(expr.prop)
    if isinstance(expr, Abs):
        v = _eval(expr.arg, env, g)
        if v is None:
            return None
        if not _is_number(v):
            raise TypeMismatchError(f"ABS expects a number, got {_kind_name(v)}")
        return abs(v)
    if isinstance(expr, Binary):
        return _eval_binary(expr, env, g)
    raise TypeError(f"not an expression: {expr!r}")


def _eval_binary(expr: Binary, env: dict, g: PropertyGraph):
    op = expr.op
    if op in ("AND", "OR"):
        left = _eval(expr.left, env, g)
        right = _eval(expr.right, env, g)
        for v in (left, right):
            if v is not None and not isinstance(v, bool):
                raise TypeMismatchError(f"{op} expects booleans, got {_kind_name(v)}")
        if op == "AND":
            if left is False or right is False:
                return False
            if left is None or right is None:
                return None
            return True
        if left is True or right is True:
            return True
        if left is None or right is None:
            return None
        return False
    left = _eval(expr.left, env, g)
    right = _eval(expr.right, env, g)
    if left is None or right is None:
        return None
    if op == "CONTAINS":
        if not isinstance(left, str) or not isinstance(right, str):
            raise TypeMismatchError(
                f"CONTAINS expects strings, got {_kind_name(left)} and {_kind_name(right)}"
            )
        return right in left
    if op == "-":
        if not _is_number(left) or not _is_number(right):
            raise TypeMismatchError(
                f"subtraction expects numbers, got {_kind_name(left)} and {_kind_name(right)}"
            )
        return left - right
    if op in ("=", "!="):
        equal = _equal_values(left, right)
        return equal if op == "=" else not equal
    # ordering: < > <= >=
    if _is_number(left) and _is_number(right):
        pass
    elif isinstance(left, str) and isinstance(right, str):
        pass
    else:
        raise TypeMismatchError(
            f"cannot order {_kind_name(left)} against {_kind_name(right)}"
        )
    if op == "<":
        return left < right
    if op == ">":
        return left > right
    if op == "<=":
        return left <= right
    return left >= right


def _equal_values(a, b) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if _is_number(a) and _is_number(b):
        return a == b
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    return False


def _compare_for_order(a, b) -> int:
    # nulls sort last regardless of direction; caller flips sign for DESC
    if _is_number(a) and _is_number(b):
        return -1 if a < b else (1 if a > b else 0)
    if isinstance(a, str) and isinstance(b, str):
        return -1 if a < b else (1 if a > b else 0)
    raise TypeMismatchError(
        f"cannot order {_kind_name(a)} against {_kind_name(b)}"
    )


# ----------------------------------------------------------------- matcher


def _match_path(g: PropertyGraph, path, rows):
    """Extend each row with all bindings of the path. Rows are
    (env, key_tuple) pairs; key_tuple accumulates bound element ids."""
    elements = path.elements
    out = []
    for env, key in rows:
        partial = [(env, key)]
        node_pat = elements[0]
        grown = []
        for env2, key2 in partial:
            for node_id in _node_candidates(g, node_pat):
                new_env = dict(env2)
                new_env[node_pat.alias] = node_id
                grown.append((new_env, key2 + (node_id,), node_id))
        # walk edge/node pairs, each step extends every partial binding
        i = 1
        while i < len(elements):
            edge_pat, next_pat = elements[i], elements[i + 1]
            next_grown = []
            for env2, key2, last_node in grown:
                for edge_id, other_id in _edge_candidates(g, edge_pat, last_node):
                    other = g.nodes[other_id]
                    if other.tag != next_pat.tag:
                        continue
                    if next_pat.name_filter is not None and other.name != next_pat.name_filter:
                        continue
                    new_env = dict(env2)
                    if edge_pat.alias:
                        new_env[edge_pat.alias] = edge_id
                    new_env[next_pat.alias] = other_id
                    next_grown.append((new_env, key2 + (edge_id, other_id), other_id))
            grown = next_grown
            i += 2
        out.extend((env2, key2) for env2, key2, _ in grown)
    return out


def _node_candidates(g: PropertyGraph, pat: NodePattern):
    for node_id in g.tag_index.get(pat.tag, []):
        if pat.name_filter is not None and g.nodes[node_id].name != pat.name_filter:
            continue
        yield node_id


def _edge_candidates(g: PropertyGraph, pat, node_id: int):
    """(edge id, other endpoint id) pairs for edges of the pattern's type
    incident to node_id in the pattern's direction."""
    if pat.direction == "out":
        for edge_id in g.out_by_type.get((node_id, pat.edge_type), []):
            yield edge_id, g.edges[edge_id].dst
    else:
        for edge_id in g.in_by_type.get((node_id, pat.edge_type), []):
            yield edge_id, g.edges[edge_id].src


# ---------------------------------------------------------------- executor


@dataclass
class _ProjectionState:
    columns: tuple
    exprs: tuple  # projected expressions, for ORDER BY fallback
    names: dict  # projected name -> column index
    rows: list  # list of value tuples


def execute(g: PropertyGraph, q: GqlQuery) -> ResultTable:
    """Evaluate q against g. Raises UnknownSchemaItemError or
    TypeMismatchError; never mutates the graph."""
    check_schema_items(q, g.schema)
    rows = [({}, ())]  # (env, binding key)
    projection = None
    ordered = False
    for clause in q.clauses:
        if isinstance(clause, MatchClause):
            for path in clause.paths:
                rows = _match_path(g, path, rows)
            rows.sort(key=lambda item: item[1])
            projection = None
        elif isinstance(clause, WhereClause):
            rows = [
                (env, key)
                for env, key in rows
                if _eval(clause.expr, env, g) is True
            ]
            projection = None
        elif isinstance(clause, (WithClause, ReturnClause)):
            projection = _project(g, clause, rows, projection)
            if isinstance(clause, WithClause):
                rows = [
                    ({name: row[idx] for name, idx in projection.names.items()}, ())
                    for row in projection.rows
                ]
        elif isinstance(clause, OrderByClause):
            ordered = True
            _order_rows(g, clause, projection)
            if projection.names:
                rows = [
                    ({name: row[idx] for name, idx in projection.names.items()}, ())
                    for row in projection.rows
                ]
        elif isinstance(clause, LimitClause):
            projection.rows = projection.rows[: clause.count]
            rows = rows[: clause.count] if projection is None else [
                ({name: row[idx] for name, idx in projection.names.items()}, ())
                for row in projection.rows
            ]
    if projection is None:
        raise ExecutionError("query has no projection")
    return ResultTable(
        columns=projection.columns,
        rows=tuple(tuple(r) for r in projection.rows),
        ordered=ordered,
    )


def _project(g, clause, rows, prev: _ProjectionState) -> _ProjectionState:
    columns = []
    names = {}
    exprs = []
    for idx, item in enumerate(clause.items):
        exprs.append(item.expr)
        if item.alias:
            columns.append(item.alias)
            names[item.alias] = idx
        else:
            columns.append(gql.print_expr(item.expr, 0))
            if isinstance(item.expr, VarRef):
                names[item.expr.name] = idx
    out_rows = []
    for env, _key in rows:
        out_rows.append(tuple(_eval(item.expr, env, g) for item in clause.items))
    state = _ProjectionState(tuple(columns), tuple(exprs), names, out_rows)
    return state


def _order_rows(g, clause, projection: _ProjectionState) -> None:
    if projection is None:
        raise ExecutionError("ORDER BY without a projection")

    key_getters = []
    for key in clause.keys:
        if key.expr in projection.exprs:
            idx = projection.exprs.index(key.expr)
            key_getters.append((lambda row, i=idx: row[i], key.desc))
        else:
            expr = key.expr
            names = projection.names

            def getter(row, expr=expr, names=names):
                env = {name: row[idx] for name, idx in names.items()}
                return _eval(expr, env, g)

            key_getters.append((getter, key.desc))

    def compare(row_a, row_b) -> int:
        for getter, desc in key_getters:
            a, b = getter(row_a), getter(row_b)
            if a is None and b is None:
                continue
            if a is None:
                return 1
            if b is None:
                return -1
            c = _compare_for_order(a, b)
            if c:
                return -c if desc else c
        return 0

    projection.rows.sort(key=cmp_to_key(compare))


def execute_verified(g: PropertyGraph, text: str):
    """Parse and execute; every failure becomes a Rejection value."""
    try:
        q = gql.parse(text)
    except GqlError as exc:
        return Rejection("parse", str(exc), text)
    try:
        return execute(g, q)
    except ExecutionError as exc:
        return Rejection("execute", str(exc), text)


def serialize_table(t: ResultTable) -> str:
    return json.dumps(t.to_json_dict(), ensure_ascii=False)
