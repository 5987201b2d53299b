"""AST for the graph query subset, with canonical printing.

The grammar covers exactly the constructs exercised by the eight canonical
query shapes: MATCH pattern chains with directed typed edges and name
filters, WHERE predicates, WITH/RETURN projections, ORDER BY, LIMIT,
comparisons, CONTAINS, ABS and subtraction.

Canonical surface form: uppercase keywords, single spaces between clauses,
single-quoted strings, aliases printed as written. canonicalize() further
alpha-renames aliases and orders equality operands so that semantically
identical queries print identically.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Union

COMPARISON_OPS = ("=", "!=", "<", ">", "<=", ">=")

# precedence levels for printing and parsing; higher binds tighter
PRECEDENCE = {
    "OR": 1,
    "AND": 2,
    "=": 3,
    "!=": 3,
    "<": 3,
    ">": 3,
    "<=": 3,
    ">=": 3,
    "CONTAINS": 3,
    "-": 4,
}
PRIMARY_PRECEDENCE = 5

# comparisons and CONTAINS do not chain; subtraction is left-associative
NON_ASSOCIATIVE = set(COMPARISON_OPS) | {"CONTAINS"}


@dataclass(frozen=True)
class Literal:
    value: Union[str, int, float, bool]


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class PropAccess:
    alias: str
    tag: str
    prop: str


@dataclass(frozen=True)
class EdgePropAccess:
    alias: str
    prop: str


@dataclass(frozen=True)
class Abs:
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Literal, VarRef, PropAccess, EdgePropAccess, Abs, Binary]


@dataclass(frozen=True)
class NodePattern:
    alias: str
    tag: str
    name_filter: Union[str, None] = None


@dataclass(frozen=True)
class EdgePattern:
    alias: Union[str, None]
    edge_type: str
    direction: str  # "out" = -[..]->, "in" = <-[..]-


@dataclass(frozen=True)
class PathPattern:
    # alternating NodePattern / EdgePattern, odd length, node at both ends
    elements: tuple


@dataclass(frozen=True)
class ProjItem:
    expr: Expr
    alias: Union[str, None] = None


@dataclass(frozen=True)
class OrderKey:
    expr: Expr
    desc: bool = False


@dataclass(frozen=True)
class MatchClause:
    paths: tuple


@dataclass(frozen=True)
class WhereClause:
    expr: Expr


@dataclass(frozen=True)
class WithClause:
    items: tuple


@dataclass(frozen=True)
class ReturnClause:
    items: tuple


@dataclass(frozen=True)
class OrderByClause:
    keys: tuple


@dataclass(frozen=True)
class LimitClause:
    count: int


Clause = Union[MatchClause, WhereClause, WithClause, ReturnClause, OrderByClause, LimitClause]


@dataclass(frozen=True)
class GqlQuery:
    clauses: tuple


def escape_string(s: str) -> str:
    out = []
    for ch in s:
        if ch == "\\":
            out.append("\\\\")
        elif ch == "'":
            out.append("\\'")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        else:
            out.append(ch)
    return "".join(out)


def print_literal(lit: Literal) -> str:
    v = lit.value
    # bool first: bool is an int subclass
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return "'" + escape_string(v) + "'"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def print_expr(e: Expr, parent_prec: int = 0) -> str:
    if isinstance(e, Literal):
        return print_literal(e)
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, PropAccess):
        return f"{e.alias}.{e.tag}.{e.prop}"
    if isinstance(e, EdgePropAccess):
        return f"{e.alias}.{e.prop}"
    if isinstance(e, Abs):
        return f"ABS({print_expr(e.arg, 0)})"
    if isinstance(e, Binary):
        prec = PRECEDENCE[e.op]
        if e.op in NON_ASSOCIATIVE:
            left = print_expr(e.left, prec + 1)
            right = print_expr(e.right, prec + 1)
        else:
            left = print_expr(e.left, prec)
            right = print_expr(e.right, prec + 1)
        text = f"{left} {e.op} {right}"
        if prec < parent_prec:
            return f"({text})"
        return text
    raise TypeError(f"not an expression: {e!r}")


def print_node(n: NodePattern) -> str:
    if n.name_filter is None:
        return f"({n.alias}:{n.tag})"
    return f"({n.alias}:{n.tag}{{name: '{escape_string(n.name_filter)}'}})"


def print_edge(e: EdgePattern) -> str:
    inner = f"[{e.alias}:{e.edge_type}]" if e.alias else f"[:{e.edge_type}]"
    if e.direction == "out":
        return f"-{inner}->"
    return f"<-{inner}-"


def print_path(p: PathPattern) -> str:
    out = []
    for el in p.elements:
        out.append(print_node(el) if isinstance(el, NodePattern) else print_edge(el))
    return "".join(out)


def print_proj_item(item: ProjItem) -> str:
    text = print_expr(item.expr, 0)
    if item.alias:
        text += f" AS {item.alias}"
    return text


def print_clause(c: Clause) -> str:
    if isinstance(c, MatchClause):
        return "MATCH " + ", ".join(print_path(p) for p in c.paths)
    if isinstance(c, WhereClause):
        return "WHERE " + print_expr(c.expr, 0)
    if isinstance(c, WithClause):
        return "WITH " + ", ".join(print_proj_item(i) for i in c.items)
    if isinstance(c, ReturnClause):
        return "RETURN " + ", ".join(print_proj_item(i) for i in c.items)
    if isinstance(c, OrderByClause):
        keys = []
        for k in c.keys:
            keys.append(print_expr(k.expr, 0) + (" DESC" if k.desc else ""))
        return "ORDER BY " + ", ".join(keys)
    if isinstance(c, LimitClause):
        return f"LIMIT {c.count}"
    raise TypeError(f"not a clause: {c!r}")


def print_query(q: GqlQuery) -> str:
    return " ".join(print_clause(c) for c in q.clauses)


def clause_keyword(c: Clause) -> str:
    if isinstance(c, MatchClause):
        return "MATCH"
    if isinstance(c, WhereClause):
        return "WHERE"
    if isinstance(c, WithClause):
        return "WITH"
    if isinstance(c, ReturnClause):
        return "RETURN"
    if isinstance(c, OrderByClause):
        return "ORDER BY"
    if isinstance(c, LimitClause):
        return "LIMIT"
    raise TypeError(f"not a clause: {c!r}")


def split_clauses(q: GqlQuery) -> list:
    """(keyword, clause text) per clause; joining the texts with single
    spaces reconstructs print_query(q) exactly."""
    return [(clause_keyword(c), print_clause(c)) for c in q.clauses]


# ---------------------------------------------------------------- walking


def iter_exprs_in_clause(c: Clause) -> Iterator[Expr]:
    if isinstance(c, WhereClause):
        yield c.expr
    elif isinstance(c, (WithClause, ReturnClause)):
        for item in c.items:
            yield item.expr
    elif isinstance(c, OrderByClause):
        for key in c.keys:
            yield key.expr


def iter_exprs(q: GqlQuery) -> Iterator[Expr]:
    for c in q.clauses:
        yield from iter_exprs_in_clause(c)


def iter_subexprs(e: Expr) -> Iterator[Expr]:
    """The expression and all descendants, pre-order."""
    yield e
    if isinstance(e, Abs):
        yield from iter_subexprs(e.arg)
    elif isinstance(e, Binary):
        yield from iter_subexprs(e.left)
        yield from iter_subexprs(e.right)


def iter_all_subexprs(q: GqlQuery) -> Iterator[Expr]:
    for e in iter_exprs(q):
        yield from iter_subexprs(e)


def iter_node_patterns(q: GqlQuery) -> Iterator[NodePattern]:
    for c in q.clauses:
        if isinstance(c, MatchClause):
            for p in c.paths:
                for el in p.elements:
                    if isinstance(el, NodePattern):
                        yield el


def iter_edge_patterns(q: GqlQuery) -> Iterator[EdgePattern]:
    for c in q.clauses:
        if isinstance(c, MatchClause):
            for p in c.paths:
                for el in p.elements:
                    if isinstance(el, EdgePattern):
                        yield el


def pattern_tags(q: GqlQuery) -> list:
    """Distinct pattern tags in first-occurrence order."""
    seen = []
    for n in iter_node_patterns(q):
        if n.tag not in seen:
            seen.append(n.tag)
    return seen


def pattern_edge_types(q: GqlQuery) -> list:
    seen = []
    for e in iter_edge_patterns(q):
        if e.edge_type not in seen:
            seen.append(e.edge_type)
    return seen


def accessed_node_tags(q: GqlQuery) -> list:
    """Distinct tags referenced through property accesses, sorted.

    This is the record-level "nodes" extraction: tags that merely anchor a
    name filter do not count, only tags whose properties the query touches.
    """
    tags = set()
    for e in iter_all_subexprs(q):
        if isinstance(e, PropAccess):
            tags.add(e.tag)
    return sorted(tags)


def used_edge_types(q: GqlQuery) -> list:
    """Distinct edge types appearing in MATCH patterns, sorted."""
    return sorted(set(pattern_edge_types(q)))


# ---------------------------------------------------------- canonicalizer


def definition_order_names(q: GqlQuery) -> list:
    """All binding names (pattern aliases, AS names) in definition order."""
    names = []
    for c in q.clauses:
        if isinstance(c, MatchClause):
            for p in c.paths:
                for el in p.elements:
                    if isinstance(el, NodePattern):
                        names.append(el.alias)
                    elif el.alias:
                        names.append(el.alias)
        elif isinstance(c, (WithClause, ReturnClause)):
            for item in c.items:
                if item.alias:
                    names.append(item.alias)
    return names


def _rename_expr(e: Expr, mapping: dict) -> Expr:
    if isinstance(e, VarRef):
        return VarRef(mapping.get(e.name, e.name))
    if isinstance(e, PropAccess):
        return PropAccess(mapping.get(e.alias, e.alias), e.tag, e.prop)
    if isinstance(e, EdgePropAccess):
        return EdgePropAccess(mapping.get(e.alias, e.alias), e.prop)
    if isinstance(e, Abs):
        return Abs(_rename_expr(e.arg, mapping))
    if isinstance(e, Binary):
        return Binary(e.op, _rename_expr(e.left, mapping), _rename_expr(e.right, mapping))
    return e


def rename_bindings(q: GqlQuery, mapping: dict) -> GqlQuery:
    """Rewrite every binding site and reference through the name mapping."""
    clauses = []
    for c in q.clauses:
        if isinstance(c, MatchClause):
            paths = []
            for p in c.paths:
                els = []
                for el in p.elements:
                    if isinstance(el, NodePattern):
                        els.append(replace(el, alias=mapping.get(el.alias, el.alias)))
                    else:
                        alias = mapping.get(el.alias, el.alias) if el.alias else None
                        els.append(replace(el, alias=alias))
                paths.append(PathPattern(tuple(els)))
            clauses.append(MatchClause(tuple(paths)))
        elif isinstance(c, WhereClause):
            clauses.append(WhereClause(_rename_expr(c.expr, mapping)))
        elif isinstance(c, (WithClause, ReturnClause)):
            items = tuple(
                ProjItem(_rename_expr(i.expr, mapping), mapping.get(i.alias, i.alias) if i.alias else None)
                for i in c.items
            )
            clauses.append(WithClause(items) if isinstance(c, WithClause) else ReturnClause(items))
        elif isinstance(c, OrderByClause):
            keys = tuple(OrderKey(_rename_expr(k.expr, mapping), k.desc) for k in c.keys)
            clauses.append(OrderByClause(keys))
        else:
            clauses.append(c)
    return GqlQuery(tuple(clauses))


def _order_equality_operands(e: Expr) -> Expr:
    if isinstance(e, Abs):
        return Abs(_order_equality_operands(e.arg))
    if isinstance(e, Binary):
        left = _order_equality_operands(e.left)
        right = _order_equality_operands(e.right)
        if e.op in ("=", "!=") and print_expr(left, 0) > print_expr(right, 0):
            left, right = right, left
        return Binary(e.op, left, right)
    return e


def canonicalize(q: GqlQuery) -> GqlQuery:
    """Alpha-rename bindings to a0, a1, ... in definition order, then order
    the operands of commutative equalities lexicographically.

    Idempotent, and invariant under any bijective renaming of the input's
    binding names.
    """
    names = definition_order_names(q)
    mapping = {}
    for name in names:
        if name not in mapping:
            mapping[name] = f"a{len(mapping)}"
    q = rename_bindings(q, mapping)
    clauses = []
    for c in q.clauses:
        if isinstance(c, WhereClause):
            clauses.append(WhereClause(_order_equality_operands(c.expr)))
        elif isinstance(c, (WithClause, ReturnClause)):
            items = tuple(ProjItem(_order_equality_operands(i.expr), i.alias) for i in c.items)
            clauses.append(WithClause(items) if isinstance(c, WithClause) else ReturnClause(items))
        elif isinstance(c, OrderByClause):
            keys = tuple(OrderKey(_order_equality_operands(k.expr), k.desc) for k in c.keys)
            clauses.append(OrderByClause(keys))
        else:
            clauses.append(c)
    return GqlQuery(tuple(clauses))
