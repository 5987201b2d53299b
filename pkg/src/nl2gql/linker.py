"""Schema linking for inference: map NL mentions to node tags through a
name gazetteer, connect the resolved tags with shortest join chains over
the schema graph, and assemble the (variant-dependent) prompt. A verifier
can rewrite a candidate query's MATCH clause onto the linked chain.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass, field

from . import gql
from .graph import PropertyGraph
from .prompts import PromptSpec, build_infer_prompt, schema_block
from .schema import GraphSchema
from .similarity import SimilarityScorer
from .templates import DataPool

VARIANTS = ("relevant", "relevant_zh", "full", "full_zh", "none")


class DisconnectedLabelsError(ValueError):
    def __init__(self, label_a: str, label_b: str):
        self.label_a = label_a
        self.label_b = label_b
        super().__init__(f"no join chain connects {label_a!r} and {label_b!r}")


def normalize_variant(variant: str) -> str:
    v = variant.replace("-", "_")
    if v not in VARIANTS:
        raise ValueError(f"unknown prompt variant {variant!r}; expected one of {VARIANTS}")
    return v


# -------------------------------------------------------------- dictionary


@dataclass(frozen=True)
class LabelDictionary:
    entries: dict  # label (tag or edge type) -> tuple of property names
    name_gazetteer: dict  # entity name -> tuple of tags carrying it


def build_dictionary(s: GraphSchema, g: PropertyGraph) -> LabelDictionary:
    entries = {nd.tag: tuple(p.name for p in nd.properties) for nd in s.node_defs}
    for ed in s.edge_defs:
        entries[ed.edge_type] = tuple(p.name for p in ed.properties)
    gazetteer = {}
    for name, ids in g.name_index.items():
        gazetteer[name] = tuple(sorted({g.nodes[i].tag for i in ids}))
    return LabelDictionary(entries=entries, name_gazetteer=gazetteer)


# ----------------------------------------------------------------- linking


@dataclass(frozen=True)
class Mention:
    start: int
    end: int
    name: str
    candidates: tuple  # tags the name could denote
    resolved: str | None  # single tag when disambiguated

    def labels(self) -> tuple:
        return (self.resolved,) if self.resolved else self.candidates


_CJK_RE = re.compile(r"[⺀-鿿㐀-䶿豈-﫿]")


def _find_spans(q: str, name: str):
    if _CJK_RE.search(name):
        pattern = re.escape(name)
    else:
        pattern = rf"(?<![0-9A-Za-z_]){re.escape(name)}(?![0-9A-Za-z_])"
    return [(m.start(), m.end()) for m in re.finditer(pattern, q)]


def _gql_name_tags(gql_text: str) -> dict:
    """name filter value -> tag used for it in the query (first wins)."""
    try:
        q = gql.parse(gql_text)
    except gql.GqlError:
        return {}
    out = {}
    for n in gql.iter_node_patterns(q):
        if n.name_filter is not None and n.name_filter not in out:
            out[n.name_filter] = n.tag
    return out


def link_labels(q: str, dictionary: LabelDictionary, pool: DataPool, scorer: SimilarityScorer):
    """Mentions found by a longest-match gazetteer scan over q (word
    boundaries for space-delimited names, plain substrings for CJK), plus
    the resolved tag set. Ambiguous names are settled by the pool record
    most similar to q that filters on the same name; otherwise every
    candidate tag is kept.
    """
    claimed = []
    raw = []
    for name in sorted(dictionary.name_gazetteer, key=lambda n: (-len(n), n)):
        for start, end in _find_spans(q, name):
            if any(start < e and s < end for s, e in claimed):
                continue
            claimed.append((start, end))
            raw.append((start, end, name))
    mentions = []
    for start, end, name in sorted(raw):
        candidates = dictionary.name_gazetteer[name]
        resolved = candidates[0] if len(candidates) == 1 else _disambiguate(q, name, candidates, pool, scorer)
        mentions.append(Mention(start, end, name, candidates, resolved))
    labels = set()
    for m in mentions:
        labels.update(m.labels())
    return mentions, tuple(sorted(labels))


def _disambiguate(q, name, candidates, pool, scorer):
    best_tag = None
    best_score = -1.0
    for r in pool.records:
        tag = _gql_name_tags(r.gql).get(name)
        if tag is None or tag not in candidates:
            continue
        score = scorer.score(r.nl, q)
        if score > best_score:
            best_score = score
            best_tag = tag
    return best_tag


# ------------------------------------------------------------- join tables


def _schema_adjacency(s: GraphSchema) -> dict:
    adj = {tag: [] for tag in s.tags}
    for ed in s.edge_defs:
        adj.setdefault(ed.start_tag, []).append((ed.end_tag, ed.edge_type))
        if ed.end_tag != ed.start_tag:
            adj.setdefault(ed.end_tag, []).append((ed.start_tag, ed.edge_type))
    for tag in adj:
        adj[tag].sort()
    return adj


def _astar(adj: dict, src: str, dst: str):
    """Fewest-hop path [tag, edge, tag, ...] with pure-lexicographic tie
    break on the visited sequence. Uniform edge weights, heuristic 0."""
    heap = [(0, (src,))]
    settled = set()
    while heap:
        cost, path = heapq.heappop(heap)
        tag = path[-1]
        if tag == dst:
            return cost, list(path)
        if tag in settled:
            continue
        settled.add(tag)
        for nb, edge_type in adj.get(tag, []):
            if nb not in settled:
                heapq.heappush(heap, (cost + 1, path + (edge_type, nb)))
    return None


def join_tables(labels, s: GraphSchema):
    """Join chain covering the labels over the schema viewed as an
    undirected multigraph: shortest path for two labels, a minimum
    spanning tree of pairwise shortest paths flattened into one walk for
    more."""
    labels = sorted(set(labels))
    unknown = [t for t in labels if s.node_def(t) is None]
    if unknown:
        raise ValueError(f"labels not in schema: {unknown}")
    if not labels:
        return []
    if len(labels) == 1:
        return [labels[0]]
    adj = _schema_adjacency(s)
    dist = {}
    paths = {}
    for i, a in enumerate(labels):
        for b in labels[i + 1 :]:
            found = _astar(adj, a, b)
            if found is None:
                raise DisconnectedLabelsError(a, b)
            dist[(a, b)] = found[0]
            paths[(a, b)] = found[1]
    if len(labels) == 2:
        return paths[(labels[0], labels[1])]
    return _flatten_mst(labels, dist, paths)


def _flatten_mst(labels, dist, paths):
    def d(a, b):
        return dist[(a, b)] if (a, b) in dist else dist[(b, a)]

    start = labels[0]
    in_tree = {start}
    tree_adj = {t: [] for t in labels}
    heap = [(d(start, v), start, v) for v in labels[1:]]
    heapq.heapify(heap)
    while len(in_tree) < len(labels):
        w, u, v = heapq.heappop(heap)
        if v in in_tree:
            continue
        in_tree.add(v)
        tree_adj[u].append(v)
        tree_adj[v].append(u)
        for nxt in labels:
            if nxt not in in_tree:
                heapq.heappush(heap, (d(v, nxt), v, nxt))

    def segment(a, b):
        if (a, b) in paths:
            return paths[(a, b)][1:]
        return list(reversed(paths[(b, a)]))[1:]

    seq = [start]
    remaining = set(labels) - {start}
    visited = {start}

    def dfs(u):
        for v in sorted(tree_adj[u]):
            if v in visited or not remaining:
                continue
            visited.add(v)
            seg = segment(u, v)
            seq.extend(seg)
            for el in seg:
                remaining.discard(el)
            dfs(v)
            if remaining:
                seq.extend(segment(v, u))

    dfs(start)
    return seq


# ------------------------------------------------------------- link result


@dataclass(frozen=True)
class LinkResult:
    mentions: tuple
    resolved_labels: tuple  # sorted tags
    join_path: tuple  # alternating tags and edge types
    relevant_schema: GraphSchema
    closed: bool = True  # False when labels were disconnected

    def path_tags(self) -> tuple:
        return tuple(self.join_path[0::2])

    def path_edge_types(self) -> tuple:
        return tuple(self.join_path[1::2])

    def to_json_dict(self) -> dict:
        return {
            "mentions": [
                {
                    "span": [m.start, m.end],
                    "name": m.name,
                    "candidates": list(m.candidates),
                    "resolved": m.resolved,
                }
                for m in self.mentions
            ],
            "resolved_labels": list(self.resolved_labels),
            "join_path": list(self.join_path),
            "relevant_tags": [nd.tag for nd in self.relevant_schema.node_defs],
            "relevant_edge_types": [ed.edge_type for ed in self.relevant_schema.edge_defs],
            "closed": self.closed,
        }


def link(q: str, dictionary: LabelDictionary, s: GraphSchema, pool: DataPool, scorer: SimilarityScorer) -> LinkResult:
    """Full linking pass. Disconnected labels degrade to the resolved-only
    sub-schema (closed=False) instead of failing the query."""
    mentions, labels = link_labels(q, dictionary, pool, scorer)
    if not labels:
        return LinkResult(tuple(mentions), (), (), s.subset((), ()), True)
    try:
        path = tuple(join_tables(labels, s))
        closed = True
    except DisconnectedLabelsError:
        path = ()
        closed = False
    tags = set(labels) | set(path[0::2])
    edge_types = set(path[1::2])
    return LinkResult(
        mentions=tuple(mentions),
        resolved_labels=tuple(sorted(labels)),
        join_path=path,
        relevant_schema=s.subset(
            [t for t in s.tags if t in tags],
            [e for e in s.edge_types if e in edge_types],
        ),
        closed=closed,
    )


def assemble_prompt(link_result: LinkResult, s: GraphSchema, q: str, variant: str) -> PromptSpec:
    """Inference prompt for the variant. Relevant variants fall back to the
    full schema when linking resolved nothing."""
    v = normalize_variant(variant)
    zh = v.endswith("_zh")
    if v == "none":
        return build_infer_prompt("", "", q, v)
    if v.startswith("relevant"):
        if link_result.resolved_labels:
            block = schema_block(link_result.relevant_schema, zh)
            return build_infer_prompt("Relevant Schema of Graph DB", block, q, v)
        # nothing resolved: fall back to the full schema under its own
        # header so the relevant variant never exceeds the full one
        return build_infer_prompt("Schema of Graph DB", schema_block(s, zh), q, v)
    return build_infer_prompt("Schema of Graph DB", schema_block(s, zh), q, v)


# ---------------------------------------------------------------- verifier


@dataclass(frozen=True)
class VerifyResult:
    query: gql.GqlQuery
    rewritten: bool
    flag_reason: str | None = None


def _pattern_labels(q: gql.GqlQuery):
    tags = {n.tag for n in gql.iter_node_patterns(q)}
    edge_types = {e.edge_type for e in gql.iter_edge_patterns(q)}
    return tags, edge_types


def verify_match_clause(candidate: gql.GqlQuery, link_result: LinkResult) -> VerifyResult:
    """Rewrite the candidate's MATCH onto the linked join chain when its
    pattern strays outside the chain; keep consistent candidates
    byte-identical. Rewrites that cannot preserve the candidate's variable
    references come back unchanged with a flag."""
    if not link_result.resolved_labels or not link_result.join_path:
        return VerifyResult(candidate, False)
    allowed_tags = set(link_result.path_tags()) | set(link_result.resolved_labels)
    allowed_edges = set(link_result.path_edge_types())
    tags, edge_types = _pattern_labels(candidate)
    if tags <= allowed_tags and edge_types <= allowed_edges:
        return VerifyResult(candidate, False)
    matches = [c for c in candidate.clauses if isinstance(c, gql.MatchClause)]
    if len(matches) != 1 or len(matches[0].paths) != 1:
        return VerifyResult(candidate, False, "multi-pattern candidate left unchanged")
    return _rewrite(candidate, matches[0].paths[0], link_result)


def _mention_tag(link_result: LinkResult, name: str) -> str | None:
    for m in link_result.mentions:
        if m.name == name and m.resolved:
            return m.resolved
    return None


def _rewrite(candidate, path_pattern, link_result):
    path = link_result.join_path
    path_tags = list(path[0::2])
    path_edges = list(path[1::2])

    # Where each original alias must land: its mention-resolved tag when it
    # filters on a linked name, else its own tag.
    node_targets = []  # (alias, target tag, name filter or None)
    for el in path_pattern.elements:
        if isinstance(el, gql.NodePattern):
            target = el.tag
            if el.name_filter is not None:
                resolved = _mention_tag(link_result, el.name_filter)
                if resolved is not None:
                    target = resolved
            node_targets.append((el.alias, target, el.name_filter))

    referenced = set()
    for e in gql.iter_all_subexprs(candidate):
        if isinstance(e, (gql.VarRef, gql.PropAccess, gql.EdgePropAccess)):
            referenced.add(e.alias)

    # Assign aliases to path positions, first unclaimed occurrence of the
    # target tag in pattern order; filtered or referenced aliases must land.
    position_alias = {}
    position_filter = {}
    new_tag_of_alias = {}
    for alias, target, name_filter in node_targets:
        spot = None
        for i, t in enumerate(path_tags):
            if t == target and i not in position_alias:
                spot = i
                break
        if spot is None:
            if name_filter is not None:
                return VerifyResult(candidate, False, f"no join-path slot for filter tag {target!r}")
            if alias in referenced:
                return VerifyResult(candidate, False, f"no join-path slot for alias {alias!r}")
            continue
        position_alias[spot] = alias
        position_filter[spot] = name_filter
        new_tag_of_alias[alias] = target

    edge_position_alias = {}
    for el in path_pattern.elements:
        if isinstance(el, gql.EdgePattern) and el.alias and el.alias in referenced:
            spot = None
            for i, et in enumerate(path_edges):
                if et == el.edge_type and i not in edge_position_alias:
                    spot = i
                    break
            if spot is None:
                return VerifyResult(candidate, False, f"no join-path slot for edge alias {el.alias!r}")
            edge_position_alias[spot] = el.alias

    taken = set(gql.definition_order_names(candidate)) | set(new_tag_of_alias)
    fresh_iter = (n for i in range(len(path_tags) + len(taken) + 1) if (n := f"v{i}") not in taken)
    elements = []
    for i, tag in enumerate(path_tags):
        alias = position_alias.get(i) or next(fresh_iter)
        elements.append(gql.NodePattern(alias, tag, position_filter.get(i)))
        if i < len(path_edges):
            edge_type = path_edges[i]
            ed = link_result.relevant_schema.edge_def(edge_type)
            if ed is None or tag not in (ed.start_tag, ed.end_tag):
                return VerifyResult(candidate, False, f"join-path edge {edge_type!r} unresolvable")
            direction = "out" if ed.start_tag == tag else "in"
            elements.append(gql.EdgePattern(edge_position_alias.get(i), edge_type, direction))

    rewritten_exprs = _retag_query(candidate, new_tag_of_alias)
    new_clauses = tuple(
        gql.MatchClause((gql.PathPattern(tuple(elements)),)) if isinstance(c, gql.MatchClause) else c
        for c in rewritten_exprs.clauses
    )
    new_query = gql.GqlQuery(new_clauses)
    try:
        gql.validate_query(new_query)
    except gql.GqlError as exc:
        return VerifyResult(candidate, False, f"rewrite failed validation: {exc}")
    return VerifyResult(new_query, True)


def _retag_query(q: gql.GqlQuery, new_tag_of_alias: dict) -> gql.GqlQuery:
    from .llm import map_query_exprs

    def fn(e):
        if isinstance(e, gql.PropAccess) and e.alias in new_tag_of_alias:
            return gql.PropAccess(e.alias, new_tag_of_alias[e.alias], e.prop)
        return e

    return map_query_exprs(q, fn)
