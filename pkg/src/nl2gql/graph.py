"""In-memory property graph with lookup indices.

Nodes are keyed by (tag, name): names must be unique within a tag, while the
same name may appear under different tags (disambiguated downstream). The
graph is immutable after loading and safe to share across workers.

On-disk form is line-delimited JSON, one entity per line:
  node: {"tag": ..., "name": ..., "props": {...}}
  edge: {"edge": ..., "start_name": ..., "start_tag": ..., "end_name": ...,
         "end_tag": ..., "props": {...}}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .schema import GraphSchema, value_kind_of


class GraphLoadError(ValueError):
    """A record violates the schema or duplicates an existing node."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class Node:
    id: int
    tag: str
    name: str
    props: dict


@dataclass(frozen=True)
class Edge:
    id: int
    edge_type: str
    src: int
    dst: int
    props: dict


@dataclass
class PropertyGraph:
    schema: GraphSchema
    nodes: list[Node] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)
    tag_index: dict[str, list[int]] = field(default_factory=dict)
    name_index: dict[str, list[int]] = field(default_factory=dict)
    key_index: dict[tuple[str, str], int] = field(default_factory=dict)
    # adjacency keyed by (node id, edge type), values are edge ids in load order
    out_by_type: dict[tuple[int, str], list[int]] = field(default_factory=dict)
    in_by_type: dict[tuple[int, str], list[int]] = field(default_factory=dict)

    def add_node(self, tag: str, name: str, props: dict, line: int | None = None) -> int:
        ndef = self.schema.node_def(tag)
        if ndef is None:
            raise GraphLoadError(f"unknown node tag {tag!r}", line)
        if not isinstance(name, str):
            raise GraphLoadError(f"node name must be a string, got {name!r}", line)
        if (tag, name) in self.key_index:
            raise GraphLoadError(f"duplicate node ({tag!r}, {name!r})", line)
        checked = {}
        for pname, value in props.items():
            pdef = ndef.prop(pname)
            if pdef is None:
                raise GraphLoadError(f"tag {tag!r} has no property {pname!r}", line)
            checked[pname] = _coerce(value, pdef.kind, f"{tag}.{pname}", line)
        node_id = len(self.nodes)
        self.nodes.append(Node(id=node_id, tag=tag, name=name, props=checked))
        self.tag_index.setdefault(tag, []).append(node_id)
        self.name_index.setdefault(name, []).append(node_id)
        self.key_index[(tag, name)] = node_id
        return node_id

    def add_edge(
        self,
        edge_type: str,
        start_tag: str,
        start_name: str,
        end_tag: str,
        end_name: str,
        props: dict,
        line: int | None = None,
    ) -> int:
        edef = self.schema.edge_def(edge_type)
        if edef is None:
            raise GraphLoadError(f"unknown edge type {edge_type!r}", line)
        if start_tag != edef.start_tag or end_tag != edef.end_tag:
            raise GraphLoadError(
                f"edge {edge_type!r} requires {edef.start_tag!r}->{edef.end_tag!r}, "
                f"got {start_tag!r}->{end_tag!r}",
                line,
            )
        src = self.key_index.get((start_tag, start_name))
        if src is None:
            raise GraphLoadError(f"edge {edge_type!r}: no node ({start_tag!r}, {start_name!r})", line)
        dst = self.key_index.get((end_tag, end_name))
        if dst is None:
            raise GraphLoadError(f"edge {edge_type!r}: no node ({end_tag!r}, {end_name!r})", line)
        checked = {}
        for pname, value in props.items():
            pdef = edef.prop(pname)
            if pdef is None:
                raise GraphLoadError(f"edge type {edge_type!r} has no property {pname!r}", line)
            checked[pname] = _coerce(value, pdef.kind, f"{edge_type}.{pname}", line)
        edge_id = len(self.edges)
        self.edges.append(Edge(id=edge_id, edge_type=edge_type, src=src, dst=dst, props=checked))
        self.out_by_type.setdefault((src, edge_type), []).append(edge_id)
        self.in_by_type.setdefault((dst, edge_type), []).append(edge_id)
        return edge_id


def _coerce(value, kind: str, where: str, line: int | None):
    actual = value_kind_of(value)
    if actual == kind:
        return value
    # sparse dumps routinely store whole floats as ints
    if kind == "float" and actual == "int":
        return float(value)
    raise GraphLoadError(f"{where} expects {kind}, got {value!r}", line)


def nodes_by_tag(g: PropertyGraph, tag: str) -> list[int]:
    """Node ids carrying the tag, in load order; unknown tag yields []."""
    return list(g.tag_index.get(tag, []))


def node_by_name(g: PropertyGraph, name: str) -> list[int]:
    """Node ids with the given name across all tags; unknown name yields []."""
    return list(g.name_index.get(name, []))


def load_graph(schema: GraphSchema, nodes_path, edges_path) -> PropertyGraph:
    """Load node and edge records, validating every line against the schema."""
    g = PropertyGraph(schema=schema)
    for line_no, record in _iter_jsonl(nodes_path):
        for key in ("tag", "name"):
            if key not in record:
                raise GraphLoadError(f"node record missing {key!r}", line_no)
        g.add_node(record["tag"], record["name"], record.get("props", {}), line=line_no)
    for line_no, record in _iter_jsonl(edges_path):
        for key in ("edge", "start_name", "start_tag", "end_name", "end_tag"):
            if key not in record:
                raise GraphLoadError(f"edge record missing {key!r}", line_no)
        g.add_edge(
            record["edge"],
            record["start_tag"],
            record["start_name"],
            record["end_tag"],
            record["end_name"],
            record.get("props", {}),
            line=line_no,
        )
    return g


def _iter_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as exc:
                raise GraphLoadError(f"bad JSON: {exc}", line_no) from exc


def save_graph(g: PropertyGraph, nodes_path, edges_path) -> None:
    """Re-serialize to the line-delimited format accepted by load_graph."""
    with open(nodes_path, "w", encoding="utf-8") as fh:
        for n in g.nodes:
            fh.write(json.dumps({"tag": n.tag, "name": n.name, "props": n.props}, ensure_ascii=False))
            fh.write("\n")
    with open(edges_path, "w", encoding="utf-8") as fh:
        for e in g.edges:
            src, dst = g.nodes[e.src], g.nodes[e.dst]
            fh.write(
                json.dumps(
                    {
                        "edge": e.edge_type,
                        "start_name": src.name,
                        "start_tag": src.tag,
                        "end_name": dst.name,
                        "end_tag": dst.tag,
                        "props": e.props,
                    },
                    ensure_ascii=False,
                )
            )
            fh.write("\n")


def distinct_node_prop_values(g: PropertyGraph, tag: str, prop: str) -> list:
    """Distinct stored values of tag.prop in first-occurrence order."""
    seen = []
    for node_id in g.tag_index.get(tag, []):
        value = g.nodes[node_id].props.get(prop)
        if value is not None and value not in seen:
            seen.append(value)
    return seen


def distinct_edge_prop_values(g: PropertyGraph, edge_type: str, prop: str) -> list:
    seen = []
    for e in g.edges:
        if e.edge_type != edge_type:
            continue
        value = e.props.get(prop)
        if value is not None and value not in seen:
            seen.append(value)
    return seen
