"""The eight canonical query types: templates, instantiation, grounding.

A template carries an NL sentence and a GQL skeleton over abstract schema
slots. instantiate() fills the schema-item slots (tags, edge types,
properties) with real items so only data slots remain: entities, numbers,
strings. ground() fills those from the graph and keeps the pair only if
the query executes.
"""

from __future__ import annotations

import json
import re
import random
from dataclasses import dataclass, field

from . import gql
from .executor import Rejection, ResultTable, execute_verified
from .graph import (
    PropertyGraph,
    distinct_edge_prop_values,
    distinct_node_prop_values,
    nodes_by_tag,
)
from .schema import NUMERIC_KINDS, GraphSchema


class NoCompatibleSlotError(ValueError):
    def __init__(self, query_type_id: int, slot: str, need: str):
        super().__init__(
            f"template {query_type_id}: no schema item compatible with slot {slot} ({need})"
        )
        self.slot = slot
        self.query_type_id = query_type_id


@dataclass(frozen=True)
class QueryTemplate:
    query_type_id: int
    name: str
    nl_template: str
    gql_template: str
    # (token, slot kind); bracketed tokens are data or property slots,
    # bare tokens are schema-item slots shared between NL and GQL
    placeholder_slots: tuple


TYPE_NAMES = {
    1: "Entity property",
    2: "Numerical sorting",
    3: "Relationship inference",
    4: "Yes/No question",
    5: "Relationship filtering",
    6: "Attribute comparison",
    7: "Edge property",
    8: "String filtering",
}


def seed_templates() -> list:
    return [
        QueryTemplate(
            1,
            TYPE_NAMES[1],
            "What is [entity]'s [property]?",
            "MATCH (s:node{name:'[entity]'}) RETURN s.node.[property]",
            (("[entity]", "entity"), ("[property]", "property"), ("node", "node_tag")),
        ),
        QueryTemplate(
            2,
            TYPE_NAMES[2],
            "The [property2] of node with the highest [property1]?",
            "MATCH (s:node) WITH s.node.[property2] AS n1, s.node.[property1] AS n2 "
            "ORDER BY n2 DESC LIMIT 1 RETURN n1",
            (
                ("[property2]", "property2"),
                ("[property1]", "property"),
                ("node", "node_tag"),
            ),
        ),
        QueryTemplate(
            3,
            TYPE_NAMES[3],
            "The [property] of node1 rel2 by [entity]?",
            "MATCH (s1:node1)<-[:rel1]-(s2:node2)<-[:rel2]-(s3:node3{name: '[entity]'}) "
            "RETURN s1.node1.[property]",
            (
                ("[property]", "property"),
                ("[entity]", "entity"),
                ("node1", "node_tag"),
                ("node2", "node_tag"),
                ("node3", "node_tag"),
                ("rel1", "relation"),
                ("rel2", "relation"),
            ),
        ),
        QueryTemplate(
            4,
            TYPE_NAMES[4],
            "Is the [property] of the [entity] greater than [mount]?",
            "MATCH (s:node{name: '[entity]'}) RETURN s.node.[property] > [mount]",
            (
                ("[property]", "property"),
                ("[entity]", "entity"),
                ("[mount]", "numeric"),
                ("node", "node_tag"),
            ),
        ),
        QueryTemplate(
            5,
            TYPE_NAMES[5],
            "The [property] of node2 that rel [entity1] and [entity2]?",
            "MATCH (s1:node1{name: '[entity1]'})<-[:rel]-(s2:node2)-[:rel]->"
            "(s3:node1{name: '[entity2]'}) RETURN s2.node2.[property]",
            (
                ("[property]", "property"),
                ("[entity1]", "entity"),
                ("[entity2]", "entity"),
                ("node1", "node_tag"),
                ("node2", "node_tag"),
                ("rel", "relation"),
            ),
        ),
        QueryTemplate(
            6,
            TYPE_NAMES[6],
            "How much does the [property] of [entity1] differ from that of [entity2]?",
            "MATCH (s1:node{name: '[entity1]'}) WITH s1.node.[property] AS t1 "
            "MATCH (s2:node{name: '[entity2]'}) WITH ABS(s2.node.[property] - t1) "
            "as abs_diff RETURN abs_diff",
            (
                ("[property]", "property"),
                ("[entity1]", "entity"),
                ("[entity2]", "entity"),
                ("node", "node_tag"),
            ),
        ),
        QueryTemplate(
            7,
            TYPE_NAMES[7],
            "The [property] of node2 that rel [entity] with [r_property] less than [m]?",
            "MATCH (s1:node1{name: '[entity]'})-[r:rel]->(s2:node2) "
            "WHERE r.[r_property] < [m] RETURN s2.node2.[property]",
            (
                ("[property]", "property"),
                ("[r_property]", "r_property"),
                ("[entity]", "entity"),
                ("[m]", "numeric"),
                ("node1", "node_tag"),
                ("node2", "node_tag"),
                ("rel", "relation"),
            ),
        ),
        QueryTemplate(
            8,
            TYPE_NAMES[8],
            "The [property] of the node containing the [string]?",
            "MATCH (s:node) WHERE s.node.[property] CONTAINS '[string]' "
            "RETURN s.node.[property]",
            (
                ("[property]", "property"),
                ("[string]", "string"),
                ("node", "node_tag"),
            ),
        ),
    ]


def template_by_id(query_type_id: int) -> QueryTemplate:
    for t in seed_templates():
        if t.query_type_id == query_type_id:
            return t
    raise KeyError(query_type_id)


# ------------------------------------------------------------ placeholders

TOKEN_RE = re.compile(r"\[[A-Za-z_][A-Za-z0-9_]*\]|\b(?:node[1-3]?|rel[1-2]?)\b")
BRACKET_TOKEN_RE = re.compile(r"\[[A-Za-z_][A-Za-z0-9_]*\]")


def fill_placeholders(text: str, mapping: dict) -> str:
    """Replace placeholder tokens in one pass; unmapped tokens survive."""
    return TOKEN_RE.sub(lambda m: str(mapping.get(m.group(0), m.group(0))), text)


def find_placeholder_tokens(text: str) -> list:
    """Remaining bracketed tokens in first-occurrence order, each tagged
    with whether it sits alone inside a quoted literal."""
    seen = []
    for m in BRACKET_TOKEN_RE.finditer(text):
        tok = m.group(0)
        if any(t == tok for t, _ in seen):
            continue
        a, b = m.span()
        quoted = (
            a > 0
            and b < len(text)
            and text[a - 1] in "'\""
            and text[b] == text[a - 1]
        )
        seen.append((tok, quoted))
    return seen


# ------------------------------------------------------------- instantiate


def _numeric_props(props) -> list:
    return [p for p in props if p.kind in NUMERIC_KINDS]


def _string_props(props) -> list:
    return [p for p in props if p.kind == "string"]


def instantiate(t: QueryTemplate, s: GraphSchema, rng_seed) -> tuple:
    """Fill schema-item slots with real tags/edge types/properties, chosen
    uniformly over all compatible combinations. Entity, numeric, and string
    slots stay as placeholders for grounding."""
    rng = random.Random(str(rng_seed))
    combos, failure = _slot_combos(t, s)
    if not combos:
        raise NoCompatibleSlotError(t.query_type_id, *failure)
    mapping = rng.choice(combos)
    return fill_placeholders(t.nl_template, mapping), fill_placeholders(t.gql_template, mapping)


def _slot_combos(t: QueryTemplate, s: GraphSchema):
    """All valid slot assignments for the template, plus the slot to blame
    when none exists."""
    tid = t.query_type_id
    combos = []
    if tid == 1:
        for nd in s.node_defs:
            for p in nd.properties:
                combos.append({"node": nd.tag, "[property]": p.name})
        return combos, ("[property]", "needs any node property")
    if tid == 2:
        for nd in s.node_defs:
            nums = _numeric_props(nd.properties)
            for p2 in nd.properties:
                for p1 in nums:
                    combos.append({"node": nd.tag, "[property2]": p2.name, "[property1]": p1.name})
        return combos, ("[property1]", "needs a numeric node property to sort by")
    if tid == 3:
        for rel1 in s.edge_defs:
            node1, node2 = rel1.end_tag, rel1.start_tag
            props = s.node_def(node1).properties
            for rel2 in s.edge_defs:
                if rel2.end_tag != node2:
                    continue
                for p in props:
                    combos.append(
                        {
                            "node1": node1,
                            "node2": node2,
                            "node3": rel2.start_tag,
                            "rel1": rel1.edge_type,
                            "rel2": rel2.edge_type,
                            "[property]": p.name,
                        }
                    )
        return combos, ("rel2", "needs two chained edge types")
    if tid == 4:
        for nd in s.node_defs:
            for p in _numeric_props(nd.properties):
                combos.append({"node": nd.tag, "[property]": p.name})
        return combos, ("[property]", "needs a numeric node property")
    if tid == 5:
        for rel in s.edge_defs:
            node2, node1 = rel.start_tag, rel.end_tag
            for p in s.node_def(node2).properties:
                combos.append(
                    {"node1": node1, "node2": node2, "rel": rel.edge_type, "[property]": p.name}
                )
        return combos, ("[property]", "needs an edge type whose start tag has a property")
    if tid == 6:
        for nd in s.node_defs:
            for p in _numeric_props(nd.properties):
                combos.append({"node": nd.tag, "[property]": p.name})
        return combos, ("[property]", "needs a numeric node property")
    if tid == 7:
        for rel in s.edge_defs:
            rnums = _numeric_props(rel.properties)
            node1, node2 = rel.start_tag, rel.end_tag
            props = s.node_def(node2).properties
            for rp in rnums:
                for p in props:
                    combos.append(
                        {
                            "node1": node1,
                            "node2": node2,
                            "rel": rel.edge_type,
                            "[r_property]": rp.name,
                            "[property]": p.name,
                        }
                    )
        return combos, ("[r_property]", "needs an edge type with a numeric property")
    if tid == 8:
        for nd in s.node_defs:
            for p in _string_props(nd.properties):
                combos.append({"node": nd.tag, "[property]": p.name})
        return combos, ("[property]", "needs a string node property")
    raise KeyError(tid)


# ----------------------------------------------------------------- records


@dataclass(frozen=True)
class NLGQLRecord:
    nl: str
    gql: str
    template_nl: str
    template_gql: str
    answer: dict  # serialized ResultTable
    query_type_id: int
    nodes: tuple
    edges: tuple

    def to_json_dict(self) -> dict:
        return {
            "nl": self.nl,
            "gql": self.gql,
            "template_nl": self.template_nl,
            "template_gql": self.template_gql,
            "answer": self.answer,
            "query_type_id": self.query_type_id,
            "nodes": list(self.nodes),
            "edges": list(self.edges),
        }


def record_from_json_dict(d: dict) -> NLGQLRecord:
    return NLGQLRecord(
        nl=d["nl"],
        gql=d["gql"],
        template_nl=d["template_nl"],
        template_gql=d["template_gql"],
        answer=d["answer"],
        query_type_id=int(d["query_type_id"]),
        nodes=tuple(d["nodes"]),
        edges=tuple(d["edges"]),
    )


# ---------------------------------------------------------------- grounding

_SENTINEL_NUM_BASE = 424242000


def _sentinel_fill(template_gql: str):
    """Replace remaining tokens with parseable sentinels. Returns the
    filled text, token->sentinel text, and sentinel->token maps."""
    tokens = find_placeholder_tokens(template_gql)
    mapping = {}
    back = {}
    for i, (tok, quoted) in enumerate(tokens):
        if quoted:
            sent = f"ZSENTINEL{i}Z"
        else:
            sent = str(_SENTINEL_NUM_BASE + i)
        mapping[tok] = sent
        back[sent] = tok
    return fill_placeholders(template_gql, mapping), tokens, mapping, back


def template_key(template_gql: str) -> str:
    """Uniqueness key: positional sentinel fill, parse, canonical print.
    Different slot spellings with identical structure collapse together."""
    filled, _tokens, _mapping, _back = _sentinel_fill(template_gql)
    try:
        q = gql.parse(filled)
    except gql.GqlError:
        return "raw:" + " ".join(template_gql.split())
    return gql.print_query(gql.canonicalize(q))


def _classify_slots(q, tokens, mapping):
    """Map each token to a sampling rule by locating its sentinel in the
    AST. Returns {token: ("entity", tag) | ("numeric", pool_ref) |
    ("substring", pool_ref) | ("value", pool_ref) | ("limit",)} where
    pool_ref is ("node", tag, prop) or ("edge", edge_type, prop)."""
    edge_alias_types = {e.alias: e.edge_type for e in gql.iter_edge_patterns(q) if e.alias}
    rules = {}

    def prop_ref(expr):
        if isinstance(expr, gql.PropAccess):
            return ("node", expr.tag, expr.prop)
        if isinstance(expr, gql.EdgePropAccess):
            edge_type = edge_alias_types.get(expr.alias)
            if edge_type is not None:
                return ("edge", edge_type, expr.prop)
        return None

    for tok, quoted in tokens:
        sent = mapping[tok]
        rule = None
        if quoted:
            for n in gql.iter_node_patterns(q):
                if n.name_filter == sent:
                    rule = ("entity", n.tag)
                    break
            if rule is None:
                for e in gql.iter_all_subexprs(q):
                    if not isinstance(e, gql.Binary):
                        continue
                    if isinstance(e.right, gql.Literal) and e.right.value == sent:
                        ref = prop_ref(e.left)
                        if ref and e.op == "CONTAINS":
                            rule = ("substring", ref)
                            break
                        if ref and e.op in ("=", "!="):
                            rule = ("value", ref)
                            break
                    if isinstance(e.left, gql.Literal) and e.left.value == sent and e.op in ("=", "!="):
                        ref = prop_ref(e.right)
                        if ref:
                            rule = ("value", ref)
                            break
        else:
            sent_num = int(sent)
            for c in q.clauses:
                if isinstance(c, gql.LimitClause) and c.count == sent_num:
                    rule = ("limit",)
                    break
            if rule is None:
                for e in gql.iter_all_subexprs(q):
                    if not isinstance(e, gql.Binary) or e.op not in gql.ast.COMPARISON_OPS:
                        continue
                    sides = [(e.left, e.right), (e.right, e.left)]
                    for lit_side, other in sides:
                        if isinstance(lit_side, gql.Literal) and lit_side.value == sent_num:
                            ref = prop_ref(other)
                            if ref:
                                rule = ("numeric", ref)
                            break
                    if rule:
                        break
        if rule is None:
            return None, tok
        rules[tok] = rule
    return rules, None


def _pool_values(g: PropertyGraph, ref) -> list:
    kind, owner, prop = ref
    if kind == "node":
        return distinct_node_prop_values(g, owner, prop)
    return distinct_edge_prop_values(g, owner, prop)


def ground(pair: tuple, g: PropertyGraph, rng_seed, query_type_id: int):
    """Fill the data slots of an instantiated template pair from the graph
    and execute. Returns an NLGQLRecord, or a Rejection explaining why the
    pair is not groundable or not executable."""
    nl_template, gql_template = pair
    rng = random.Random(str(rng_seed))
    filled, tokens, mapping, _back = _sentinel_fill(gql_template)
    if not tokens:
        return _finish(nl_template, gql_template, nl_template, gql_template, g, query_type_id)
    try:
        q = gql.parse(filled)
    except gql.GqlError as exc:
        return Rejection("parse", str(exc), gql_template)
    rules, bad = _classify_slots(q, tokens, mapping)
    if rules is None:
        return Rejection("grounding", f"cannot classify placeholder {bad}", gql_template)
    values = {}
    for tok, _quoted in tokens:
        rule = rules[tok]
        if rule[0] == "entity":
            ids = nodes_by_tag(g, rule[1])
            if not ids:
                return Rejection("grounding", f"no nodes of tag {rule[1]!r} for {tok}", gql_template)
            values[tok] = g.nodes[rng.choice(ids)].name
        elif rule[0] == "numeric":
            pool = [v for v in _pool_values(g, rule[1]) if isinstance(v, (int, float)) and not isinstance(v, bool)]
            if not pool:
                return Rejection("grounding", f"no numeric values observed for {tok}", gql_template)
            v = rng.choice(pool)
            values[tok] = repr(v) if isinstance(v, float) else str(v)
        elif rule[0] == "substring":
            pool = [v for v in _pool_values(g, rule[1]) if isinstance(v, str) and len(v) >= 2]
            if not pool:
                return Rejection("grounding", f"no string values long enough for {tok}", gql_template)
            v = rng.choice(pool)
            length = rng.randint(2, len(v))
            start = rng.randint(0, len(v) - length)
            values[tok] = v[start : start + length]
        elif rule[0] == "value":
            pool = [v for v in _pool_values(g, rule[1]) if isinstance(v, str)]
            if not pool:
                return Rejection("grounding", f"no string values observed for {tok}", gql_template)
            values[tok] = rng.choice(pool)
        else:  # limit
            values[tok] = str(rng.choice([1, 2, 3, 5]))
    nl = fill_placeholders(nl_template, values)
    gql_text = fill_placeholders(gql_template, values)
    return _finish(nl, gql_text, nl_template, gql_template, g, query_type_id)


def _finish(nl, gql_text, nl_template, gql_template, g, query_type_id):
    result = execute_verified(g, gql_text)
    if isinstance(result, Rejection):
        return result
    q = gql.parse(gql_text)
    return NLGQLRecord(
        nl=nl,
        gql=gql.print_query(q),
        template_nl=nl_template,
        template_gql=gql_template,
        answer=result.to_json_dict(),
        query_type_id=query_type_id,
        nodes=tuple(gql.accessed_node_tags(q)),
        edges=tuple(gql.used_edge_types(q)),
    )


# -------------------------------------------------------------------- pool


@dataclass
class DataPool:
    records: list = field(default_factory=list)
    unique_template_index: set = field(default_factory=set)

    def add(self, record: NLGQLRecord) -> None:
        self.records.append(record)
        self.unique_template_index.add(template_key(record.template_gql))

    def counts_by_type(self) -> dict:
        counts = {i: 0 for i in range(1, 9)}
        for r in self.records:
            counts[r.query_type_id] = counts.get(r.query_type_id, 0) + 1
        return counts

    def records_of_type(self, query_type_id: int) -> list:
        return [r for r in self.records if r.query_type_id == query_type_id]


@dataclass(frozen=True)
class PoolStats:
    total: int
    per_type: dict
    unique_templates: int
    avg_nodes: float
    avg_edges: float


def pool_stats(d: DataPool) -> PoolStats:
    n = len(d.records)
    if n == 0:
        return PoolStats(0, {i: 0 for i in range(1, 9)}, 0, 0.0, 0.0)
    return PoolStats(
        total=n,
        per_type=d.counts_by_type(),
        unique_templates=len(d.unique_template_index),
        avg_nodes=sum(len(r.nodes) for r in d.records) / n,
        avg_edges=sum(len(r.edges) for r in d.records) / n,
    )


def save_pool(d: DataPool, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in d.records:
            fh.write(json.dumps(r.to_json_dict(), ensure_ascii=False))
            fh.write("\n")


def load_pool(path) -> DataPool:
    pool = DataPool()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                pool.add(record_from_json_dict(json.loads(line)))
    return pool
