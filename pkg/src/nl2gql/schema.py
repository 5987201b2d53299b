"""Typed schema for a property graph: node tags, edge types, property declarations.

The on-disk form is a single JSON document with ``nodes`` and ``edges`` arrays;
each property is a ``[name, kind]`` pair with an optional third element holding
a Chinese gloss used by the *-zh prompt variants.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

VALUE_KINDS = ("string", "int", "float", "bool")
NUMERIC_KINDS = ("int", "float")


class SchemaParseError(ValueError):
    """The schema file is not well-formed (bad JSON or wrong shape)."""


class SchemaValidationError(ValueError):
    """The schema content violates an invariant; message names the element."""


def value_kind_of(value) -> str | None:
    """Kind tag for a scalar, or None for unsupported types.

    bool is checked before int because bool is an int subclass.
    """
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        return "string"
    return None


@dataclass(frozen=True)
class PropertyDef:
    name: str
    kind: str
    zh: str | None = None


@dataclass(frozen=True)
class NodeDef:
    tag: str
    properties: tuple[PropertyDef, ...]

    def prop(self, name: str) -> PropertyDef | None:
        for p in self.properties:
            if p.name == name:
                return p
        return None


@dataclass(frozen=True)
class EdgeDef:
    edge_type: str
    start_tag: str
    end_tag: str
    properties: tuple[PropertyDef, ...]

    def prop(self, name: str) -> PropertyDef | None:
        for p in self.properties:
            if p.name == name:
                return p
        return None


@dataclass(frozen=True)
class GraphSchema:
    node_defs: tuple[NodeDef, ...]
    edge_defs: tuple[EdgeDef, ...]

    def __post_init__(self):
        tags = [d.tag for d in self.node_defs]
        if len(set(tags)) != len(tags):
            dup = next(t for t in tags if tags.count(t) > 1)
            raise SchemaValidationError(f"duplicate node tag {dup!r}")
        types = [d.edge_type for d in self.edge_defs]
        if len(set(types)) != len(types):
            dup = next(t for t in types if types.count(t) > 1)
            raise SchemaValidationError(f"duplicate edge type {dup!r}")
        tag_set = set(tags)
        for e in self.edge_defs:
            for endpoint in (e.start_tag, e.end_tag):
                if endpoint not in tag_set:
                    raise SchemaValidationError(
                        f"edge {e.edge_type!r} references unknown tag {endpoint!r}"
                    )
        for d in list(self.node_defs) + list(self.edge_defs):
            names = [p.name for p in d.properties]
            if len(set(names)) != len(names):
                dup = next(n for n in names if names.count(n) > 1)
                label = d.tag if isinstance(d, NodeDef) else d.edge_type
                raise SchemaValidationError(
                    f"duplicate property {dup!r} on {label!r}"
                )
            for p in d.properties:
                if p.kind not in VALUE_KINDS:
                    label = d.tag if isinstance(d, NodeDef) else d.edge_type
                    raise SchemaValidationError(
                        f"property {p.name!r} on {label!r} has unknown kind {p.kind!r}"
                    )

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(d.tag for d in self.node_defs)

    @property
    def edge_types(self) -> tuple[str, ...]:
        return tuple(d.edge_type for d in self.edge_defs)

    def node_def(self, tag: str) -> NodeDef | None:
        for d in self.node_defs:
            if d.tag == tag:
                return d
        return None

    def edge_def(self, edge_type: str) -> EdgeDef | None:
        for d in self.edge_defs:
            if d.edge_type == edge_type:
                return d
        return None

    def subset(self, tags, edge_types) -> "GraphSchema":
        """Restriction to the given tags and edge types, preserving order."""
        keep_tags = set(tags)
        keep_edges = set(edge_types)
        return GraphSchema(
            node_defs=tuple(d for d in self.node_defs if d.tag in keep_tags),
            edge_defs=tuple(d for d in self.edge_defs if d.edge_type in keep_edges),
        )


def _parse_property(raw, owner: str) -> PropertyDef:
    if not isinstance(raw, list) or len(raw) not in (2, 3):
        raise SchemaParseError(
            f"property entry on {owner!r} must be [name, kind] or [name, kind, zh]: {raw!r}"
        )
    name, kind = raw[0], raw[1]
    zh = raw[2] if len(raw) == 3 else None
    if not isinstance(name, str) or not isinstance(kind, str):
        raise SchemaParseError(f"property entry on {owner!r} has non-string fields: {raw!r}")
    if zh is not None and not isinstance(zh, str):
        raise SchemaParseError(f"gloss for property {name!r} on {owner!r} must be a string")
    return PropertyDef(name=name, kind=kind, zh=zh)


def load_schema(path) -> GraphSchema:
    """Load and validate a schema document.

    Raises SchemaParseError for malformed files and SchemaValidationError when
    the content breaks an invariant (e.g. an edge naming a nonexistent tag).
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaParseError(f"schema file {path}: {exc}") from exc
    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise SchemaParseError(f"schema file {path}: expected object with 'nodes' and 'edges'")

    node_defs = []
    for raw in doc["nodes"]:
        if not isinstance(raw, dict) or "tag" not in raw:
            raise SchemaParseError(f"node entry missing 'tag': {raw!r}")
        tag = raw["tag"]
        props = tuple(_parse_property(p, tag) for p in raw.get("properties", []))
        node_defs.append(NodeDef(tag=tag, properties=props))
    edge_defs = []
    for raw in doc["edges"]:
        if not isinstance(raw, dict) or "edge" not in raw:
            raise SchemaParseError(f"edge entry missing 'edge': {raw!r}")
        for key in ("start_tag", "end_tag"):
            if key not in raw:
                raise SchemaParseError(f"edge {raw.get('edge')!r} missing {key!r}")
        props = tuple(_parse_property(p, raw["edge"]) for p in raw.get("properties", []))
        edge_defs.append(
            EdgeDef(
                edge_type=raw["edge"],
                start_tag=raw["start_tag"],
                end_tag=raw["end_tag"],
                properties=props,
            )
        )
    return GraphSchema(node_defs=tuple(node_defs), edge_defs=tuple(edge_defs))


def save_schema(schema: GraphSchema, path) -> None:
    doc = {
        "nodes": [
            {
                "tag": d.tag,
                "properties": [
                    [p.name, p.kind] if p.zh is None else [p.name, p.kind, p.zh]
                    for p in d.properties
                ],
            }
            for d in schema.node_defs
        ],
        "edges": [
            {
                "edge": d.edge_type,
                "start_tag": d.start_tag,
                "end_tag": d.end_tag,
                "properties": [
                    [p.name, p.kind] if p.zh is None else [p.name, p.kind, p.zh]
                    for p in d.properties
                ],
            }
            for d in schema.edge_defs
        ],
    }
    Path(path).write_text(json.dumps(doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
