"""Shared fixtures: the bundled fin sample graph, a small hand-built graph
with sparse properties, a grounded record pool, and the acceptance-line
summary hook."""

from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import settings

from nl2gql.graph import PropertyGraph, load_graph
from nl2gql.schema import EdgeDef, GraphSchema, NodeDef, PropertyDef, load_schema
from nl2gql.similarity import TrigramCosineScorer
from nl2gql.templates import DataPool, ground, instantiate, seed_templates

settings.register_profile("suite", derandomize=True, max_examples=60, deadline=None)
settings.load_profile("suite")

FIN_DIR = Path(__file__).resolve().parent.parent / "fixtures" / "fin"


@pytest.fixture(scope="session")
def fin_schema():
    return load_schema(FIN_DIR / "schema.json")


@pytest.fixture(scope="session")
def fin_graph(fin_schema):
    return load_graph(fin_schema, FIN_DIR / "nodes.jsonl", FIN_DIR / "edges.jsonl")


@pytest.fixture(scope="session")
def scorer():
    return TrigramCosineScorer()


def _p(name, kind):
    return PropertyDef(name=name, kind=kind)


@pytest.fixture(scope="session")
def tiny_schema():
    return GraphSchema(
        node_defs=(
            NodeDef("person", (_p("age", "int"), _p("nickname", "string"), _p("vip", "bool"))),
            NodeDef("city", (_p("pop", "float"), _p("motto", "string"))),
        ),
        edge_defs=(
            EdgeDef("lives_in", "person", "city", (_p("years", "int"),)),
            EdgeDef("knows", "person", "person", ()),
        ),
    )


@pytest.fixture(scope="session")
def tiny_graph(tiny_schema):
    g = PropertyGraph(schema=tiny_schema)
    g.add_node("person", "alice", {"age": 30, "nickname": "Al", "vip": True})
    g.add_node("person", "bob", {"age": 25, "nickname": "Bobby"})
    g.add_node("person", "carol", {"age": 41, "vip": False})
    g.add_node("person", "dave", {})
    g.add_node("city", "springfield", {"pop": 30000.0, "motto": "A Noble Spirit Embiggens"})
    g.add_node("city", "shelbyville", {"pop": 25000.5})
    g.add_edge("lives_in", "person", "alice", "city", "springfield", {"years": 5})
    g.add_edge("lives_in", "person", "bob", "city", "springfield", {})
    g.add_edge("lives_in", "person", "carol", "city", "shelbyville", {"years": 2})
    g.add_edge("lives_in", "person", "dave", "city", "shelbyville", {"years": 9})
    g.add_edge("knows", "person", "alice", "person", "bob", {})
    g.add_edge("knows", "person", "bob", "person", "carol", {})
    return g


@pytest.fixture(scope="session")
def grounded_pool(fin_schema, fin_graph):
    """Records grounded straight from the seed templates, several seeds per
    type. Rejections (e.g. a slot with no compatible value) are skipped."""
    pool = DataPool()
    from nl2gql.templates import NLGQLRecord

    for t in seed_templates():
        for i in range(10):
            pair = instantiate(t, fin_schema, f"pool:{t.query_type_id}:{i}")
            rec = ground(pair, fin_graph, f"ground:{t.query_type_id}:{i}", t.query_type_id)
            if isinstance(rec, NLGQLRecord):
                pool.add(rec)
    return pool


# one line per acceptance criterion, printed after the run so the verdicts
# survive pytest's output capture
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
