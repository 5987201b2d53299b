"""Seed templates, instantiation, grounding, and the data pool."""

import re

import pytest

from nl2gql import gql
from nl2gql.executor import Rejection, execute, table_from_json_dict
from nl2gql.graph import PropertyGraph
from nl2gql.schema import EdgeDef, GraphSchema, NodeDef, PropertyDef
from nl2gql.templates import (
    DataPool,
    NLGQLRecord,
    NoCompatibleSlotError,
    find_placeholder_tokens,
    ground,
    instantiate,
    load_pool,
    pool_stats,
    record_from_json_dict,
    save_pool,
    seed_templates,
    template_by_id,
    template_key,
)

DATA_SLOT = re.compile(r"\[[a-z_0-9]+\]")


def test_eight_seed_templates_with_distinct_types():
    ts = seed_templates()
    assert [t.query_type_id for t in ts] == list(range(1, 9))
    assert len({t.gql_template for t in ts}) == 8
    for t in ts:
        assert template_by_id(t.query_type_id) == t


def test_instantiate_fills_schema_and_property_slots(fin_schema):
    for t in seed_templates():
        nl, gq = instantiate(t, fin_schema, f"seed:{t.query_type_id}")
        # bare schema-item slots resolved to real schema items
        for token, kind in t.placeholder_slots:
            if not token.startswith("["):
                assert token not in re.findall(r"[A-Za-z_][A-Za-z_0-9]*", gq) or token in fin_schema.tags
        # property slots are filled too; only the template's own data slots survive
        assert "[property" not in gq and "[r_property" not in gq
        data_slots = {tok for tok, kind in t.placeholder_slots if "propert" not in kind}
        for leftover in DATA_SLOT.findall(gq):
            assert leftover in data_slots, (t.query_type_id, leftover)


def test_instantiate_deterministic_and_seed_sensitive(fin_schema):
    t = seed_templates()[0]
    a = instantiate(t, fin_schema, "s1")
    assert instantiate(t, fin_schema, "s1") == a
    outcomes = {instantiate(t, fin_schema, f"s{i}") for i in range(30)}
    assert len(outcomes) > 1


def test_instantiate_raises_when_no_slot_fits():
    s = GraphSchema(
        node_defs=(NodeDef("doc", (PropertyDef("title", "string"),)),),
        edge_defs=(),
    )
    with pytest.raises(NoCompatibleSlotError) as info:
        instantiate(template_by_id(2), s, "x")
    assert info.value.query_type_id == 2
    for tid in (3, 4, 5, 6, 7):
        with pytest.raises(NoCompatibleSlotError):
            instantiate(template_by_id(tid), s, "x")
    # string-only schema still accommodates types 1 and 8
    instantiate(template_by_id(1), s, "x")
    instantiate(template_by_id(8), s, "x")


def test_find_placeholder_tokens_distinguishes_quoted():
    tokens = find_placeholder_tokens(
        "MATCH (s:stock{name: '[entity]'}) WHERE s.stock.open_price > [number] RETURN s.stock.name"
    )
    assert ("[entity]", True) in tokens
    assert ("[number]", False) in tokens


def test_ground_all_eight_types(fin_schema, fin_graph):
    for t in seed_templates():
        hits = 0
        for i in range(6):
            pair = instantiate(t, fin_schema, f"i:{t.query_type_id}:{i}")
            rec = ground(pair, fin_graph, f"g:{t.query_type_id}:{i}", t.query_type_id)
            if isinstance(rec, NLGQLRecord):
                hits += 1
                assert not DATA_SLOT.search(rec.gql)
                assert not DATA_SLOT.search(rec.nl)
                assert rec.query_type_id == t.query_type_id
        assert hits > 0, f"type {t.query_type_id} never grounded"


def test_ground_is_deterministic(fin_schema, fin_graph):
    t = seed_templates()[4]
    pair = instantiate(t, fin_schema, "d")
    a = ground(pair, fin_graph, "gd", 5)
    b = ground(pair, fin_graph, "gd", 5)
    assert a == b


def test_grounded_answer_replays(grounded_pool, fin_graph):
    assert grounded_pool.records
    for r in grounded_pool.records:
        again = execute(fin_graph, gql.parse(r.gql))
        assert again == table_from_json_dict(r.answer)


def test_record_tags_track_accessed_properties(grounded_pool):
    for r in grounded_pool.records:
        q = gql.parse(r.gql)
        assert r.nodes == tuple(gql.accessed_node_tags(q))
        assert r.edges == tuple(gql.used_edge_types(q))
        assert 1 <= len(r.nodes) <= 3


def test_ground_rejects_on_empty_graph(fin_schema):
    empty = PropertyGraph(schema=fin_schema)
    t = seed_templates()[0]
    pair = instantiate(t, fin_schema, "e")
    rec = ground(pair, empty, "ge", 1)
    assert isinstance(rec, Rejection)
    assert rec.stage == "grounding"


def test_ground_rejects_unparseable_template(fin_graph):
    rec = ground(("what?", "MATCH (s:stock RETURN"), fin_graph, "x", 1)
    assert isinstance(rec, Rejection) and rec.stage == "parse"


def test_template_key_collapses_alias_spelling():
    a = template_key("MATCH (s:stock{name: '[entity]'}) RETURN s.stock.open_price")
    b = template_key("MATCH (z9:stock{name: '[entity]'}) RETURN z9.stock.open_price")
    assert a == b
    c = template_key("MATCH (s:stock{name: '[entity]'}) RETURN s.stock.market_cap")
    assert a != c


def test_template_key_raw_fallback():
    k = template_key("MATCH (s:stock RETURN")
    assert k.startswith("raw:")


def test_pool_counts_and_uniques(grounded_pool):
    counts = grounded_pool.counts_by_type()
    assert set(counts) == set(range(1, 9))
    assert sum(counts.values()) == len(grounded_pool.records)
    for tid, n in counts.items():
        assert len(grounded_pool.records_of_type(tid)) == n
    stats = pool_stats(grounded_pool)
    assert stats.total == len(grounded_pool.records)
    assert 0 < stats.unique_templates <= stats.total
    assert stats.avg_nodes == pytest.approx(
        sum(len(r.nodes) for r in grounded_pool.records) / stats.total
    )


def test_pool_stats_empty():
    stats = pool_stats(DataPool())
    assert stats.total == 0 and stats.avg_nodes == 0.0


def test_pool_stats_on_single_chain_record():
    # mixed-direction chain: three pattern tags, but only the two tags whose
    # properties are read (RETURN + WHERE) count as record nodes
    text = (
        "MATCH (t:trade{name: '钢铁'})<-[bt:belong_to]-(s:stock)"
        "-[hsd:has_stock_data]->(sd:stock_data)"
        " WHERE sd.stock_data.opening_price > 1 RETURN s.stock.name"
    )
    q = gql.parse(text)
    nodes = tuple(gql.accessed_node_tags(q))
    edges = tuple(gql.used_edge_types(q))
    assert sorted(nodes) == ["stock", "stock_data"]
    assert sorted(edges) == ["belong_to", "has_stock_data"]
    pool = DataPool()
    pool.add(
        NLGQLRecord(
            nl="钢铁行业中，有哪些股票的开盘价大于1？",
            gql=text,
            template_nl="[t]行业中，有哪些股票的开盘价大于[m]？",
            template_gql=text.replace("'钢铁'", "'[t]'").replace("> 1", "> [m]"),
            answer={"columns": ["s.stock.name"], "rows": [], "ordered": False},
            query_type_id=6,
            nodes=nodes,
            edges=edges,
        )
    )
    stats = pool_stats(pool)
    assert stats.avg_nodes == 2.0
    assert stats.avg_edges == 2.0
    assert stats.unique_templates == 1


def test_pool_save_load_round_trip(grounded_pool, tmp_path):
    path = tmp_path / "pool.jsonl"
    save_pool(grounded_pool, path)
    loaded = load_pool(path)
    assert loaded.records == grounded_pool.records
    assert loaded.unique_template_index == grounded_pool.unique_template_index
    # CJK stays readable in the file
    assert "宝钢股份" in path.read_text(encoding="utf-8")


def test_record_json_round_trip(grounded_pool):
    r = grounded_pool.records[0]
    assert record_from_json_dict(r.to_json_dict()) == r
    assert list(r.to_json_dict()) == [
        "nl",
        "gql",
        "template_nl",
        "template_gql",
        "answer",
        "query_type_id",
        "nodes",
        "edges",
    ]
