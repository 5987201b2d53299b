"""Rule-based rendering of a query into a natural-language question.

Used by the offline mock on both generation steps, so a clean generated
template always back-translates to the identical sentence and passes the
consistency gate. Placeholder tokens inside templates survive the round
trip because sentinel substitution is reversed after rendering.
"""

from __future__ import annotations

from . import gql
from .gql import (
    Abs,
    Binary,
    EdgePropAccess,
    GqlQuery,
    Literal,
    LimitClause,
    MatchClause,
    OrderByClause,
    PropAccess,
    ReturnClause,
    VarRef,
    WhereClause,
    WithClause,
)
from .templates import _sentinel_fill

OP_WORDS = {
    ">": "greater than",
    "<": "less than",
    ">=": "at least",
    "<=": "at most",
    "=": "equal to",
    "!=": "not equal to",
}


def _literal_text(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


class _Renderer:
    def __init__(self, q: GqlQuery):
        self.q = q
        self.node_tags = {}
        self.node_filters = {}
        self.edge_types = {}
        self.adjacency = {}  # alias -> [(edge type, outgoing, neighbor alias)]
        self.env = {}  # projected name -> full phrase
        self.env_short = {}  # projected name -> short phrase for sort keys
        for n in gql.iter_node_patterns(q):
            self.node_tags[n.alias] = n.tag
            self.node_filters[n.alias] = n.name_filter
        for e in gql.iter_edge_patterns(q):
            if e.alias:
                self.edge_types[e.alias] = e.edge_type
        for c in q.clauses:
            if not isinstance(c, MatchClause):
                continue
            for p in c.paths:
                els = p.elements
                for i in range(1, len(els), 2):
                    left, edge, right = els[i - 1], els[i], els[i + 1]
                    if edge.direction == "out":
                        self.adjacency.setdefault(left.alias, []).append((edge.edge_type, True, right.alias))
                        self.adjacency.setdefault(right.alias, []).append((edge.edge_type, False, left.alias))
                    else:
                        self.adjacency.setdefault(left.alias, []).append((edge.edge_type, False, right.alias))
                        self.adjacency.setdefault(right.alias, []).append((edge.edge_type, True, left.alias))

    def node_phrase(self, alias: str, visited=frozenset()) -> str:
        tag = self.node_tags[alias]
        name = self.node_filters[alias]
        base = f"the {tag} '{name}'" if name is not None else f"each {tag}"
        quals = []
        for edge_type, outgoing, neighbor in self.adjacency.get(alias, []):
            if neighbor in visited:
                continue
            nb = self.node_phrase(neighbor, visited | {alias, neighbor})
            quals.append(f"that {edge_type} {nb}" if outgoing else f"{edge_type} by {nb}")
        if quals:
            return base + " " + " and ".join(quals)
        return base

    def expr_phrase(self, e) -> str:
        if isinstance(e, Literal):
            return _literal_text(e.value)
        if isinstance(e, VarRef):
            return self.env.get(e.name, e.name)
        if isinstance(e, PropAccess):
            return f"the {e.prop} of {self.node_phrase(e.alias)}"
        if isinstance(e, EdgePropAccess):
            edge_type = self.edge_types.get(e.alias, "relation")
            return f"the {e.prop} of the {edge_type} relation"
        if isinstance(e, Abs):
            arg = e.arg
            if isinstance(arg, Binary) and arg.op == "-":
                return (
                    "the absolute difference between "
                    f"{self.expr_phrase(arg.left)} and {self.expr_phrase(arg.right)}"
                )
            return f"the absolute value of {self.expr_phrase(arg)}"
        if isinstance(e, Binary):
            if e.op == "CONTAINS":
                return f"{self.expr_phrase(e.left)} contains '{self.expr_phrase(e.right)}'"
            if e.op in OP_WORDS:
                return f"{self.expr_phrase(e.left)} is {OP_WORDS[e.op]} {self.expr_phrase(e.right)}"
            if e.op == "-":
                return f"{self.expr_phrase(e.left)} minus {self.expr_phrase(e.right)}"
            word = "and" if e.op == "AND" else "or"
            return f"{self.expr_phrase(e.left)} {word} {self.expr_phrase(e.right)}"
        raise TypeError(f"not an expression: {e!r}")

    def short_phrase(self, e) -> str:
        if isinstance(e, (PropAccess, EdgePropAccess)):
            return e.prop
        if isinstance(e, VarRef):
            return self.env_short.get(e.name, e.name)
        return self.expr_phrase(e)

    def render(self) -> str:
        where_parts = []
        order_part = ""
        final_items = None
        clauses = self.q.clauses
        for i, c in enumerate(clauses):
            if isinstance(c, WhereClause):
                where_parts.append(self.expr_phrase(c.expr))
            elif isinstance(c, (WithClause, ReturnClause)):
                for item in c.items:
                    if item.alias:
                        self.env[item.alias] = self.expr_phrase(item.expr)
                        self.env_short[item.alias] = self.short_phrase(item.expr)
                final_items = c.items
            elif isinstance(c, OrderByClause):
                key = c.keys[0]
                limited = any(
                    isinstance(later, LimitClause) and later.count == 1
                    for later in clauses[i + 1 :]
                )
                extreme = "highest" if key.desc else "lowest"
                short = self.short_phrase(key.expr)
                if limited:
                    order_part = f" with the {extreme} {short}"
                else:
                    order_part = f" sorted by {short}" + (" descending" if key.desc else "")
        phrases = [self.expr_phrase(item.expr) for item in final_items]
        where_part = "".join(f" where {w}" for w in where_parts)
        head = " and ".join(phrases)
        # yes/no questions read better in "Is ..." form
        only = final_items[0].expr if len(final_items) == 1 else None
        if isinstance(only, Binary) and only.op in OP_WORDS:
            return (
                f"Is {self.expr_phrase(only.left)} {OP_WORDS[only.op]} "
                f"{self.expr_phrase(only.right)}{where_part}{order_part}?"
            )
        return f"What is {head}{where_part}{order_part}?"


def render_nl(q: GqlQuery) -> str:
    return _Renderer(q).render()


def _restore(text: str, back: dict) -> str:
    for sentinel, token in back.items():
        text = text.replace(sentinel, token)
    return text


def template_parse(template_gql: str):
    """Parse a template by sentinel-filling its data slots. Returns
    (query, back map) or None when the template cannot parse."""
    filled, _tokens, _mapping, back = _sentinel_fill(template_gql)
    try:
        return gql.parse(filled), back
    except gql.GqlError:
        return None


def template_render_nl(template_gql: str):
    """render_nl over a template, with placeholder tokens preserved."""
    parsed = template_parse(template_gql)
    if parsed is None:
        return None
    q, back = parsed
    return _restore(render_nl(q), back)


def template_split_clauses(template_gql: str):
    """split_clauses over a template, tokens preserved; None if unparseable."""
    parsed = template_parse(template_gql)
    if parsed is None:
        return None
    q, back = parsed
    return [(kw, _restore(text, back)) for kw, text in gql.split_clauses(q)]


CLAUSE_EXPLANATIONS = {
    "MATCH": "identifies the entities matching the pattern",
    "WHERE": "filters them by the stated condition",
    "WITH": "computes the intermediate values",
    "RETURN": "returns the requested values",
    "ORDER BY": "sorts the results",
    "LIMIT": "keeps only the top rows",
}


def explain_clauses(template_gql: str):
    """One sentence per clause, mirroring the back-translation reasoning
    format; None when the template does not parse."""
    split = template_split_clauses(template_gql)
    if split is None:
        return None
    return [f"{text} {CLAUSE_EXPLANATIONS[kw]}." for kw, text in split]
