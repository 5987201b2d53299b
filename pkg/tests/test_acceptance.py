"""Acceptance gate: ten checks, each computing a verdict, filing one
summary line for the terminal report, then asserting it.

The checks are property-based (oracle agreement, round-trips, replay,
monotonicity) plus scaled structural runs of the full mock pipeline; none
depends on network access or wall-clock beyond generous bounds.
"""

import json
import random
import time
from pathlib import Path

import conftest
from fuzzgen import random_queries
from oracle import bfs_distance, brute_force_execute

from nl2gql import gql
from nl2gql.cli import main
from nl2gql.datagen import GenerationConfig, self_instruct_loop
from nl2gql.executor import execute, table_from_json_dict
from nl2gql.graph import PropertyGraph
from nl2gql.linker import (
    DisconnectedLabelsError,
    assemble_prompt,
    build_dictionary,
    join_tables,
    link,
)
from nl2gql.llm import MockLlmClient
from nl2gql.metrics import em_score, ex_score
from nl2gql.schema import EdgeDef, GraphSchema, NodeDef, PropertyDef
from nl2gql.similarity import TrigramCosineScorer
from nl2gql.templates import (
    DataPool,
    NLGQLRecord,
    ground,
    instantiate,
    pool_stats,
    seed_templates,
)


def report(n, ok, desc):
    verdict = "PASS" if ok else "FAIL"
    conftest.ACCEPTANCE_LINES.append(f"criterion {n:>2}: {verdict} - {desc}")
    assert ok, f"criterion {n}: {desc}"


# --------------------------------------------------------------- criterion 1


NAME_WORDS = ("alpha", "beta", "gamma", "delta", "omega", "宝盈", "长江", "quartz", "zenith")


def random_graph(schema, rng):
    """Random instance of the schema, <= 50 nodes, sparse properties."""
    g = PropertyGraph(schema=schema)
    names = {tag: [] for tag in schema.tags}

    def add_one(tag, i):
        props = {}
        for p in schema.node_def(tag).properties:
            if rng.random() < 0.15:
                continue
            if p.kind == "int":
                props[p.name] = rng.randrange(0, 5000)
            elif p.kind == "float":
                props[p.name] = round(rng.uniform(0.5, 900.0), 2)
            elif p.kind == "bool":
                props[p.name] = rng.random() < 0.5
            else:
                props[p.name] = f"{rng.choice(NAME_WORDS)} {rng.choice(NAME_WORDS)} {rng.randrange(100)}"
        name = f"{tag} {i}"
        g.add_node(tag, name, props)
        names[tag].append(name)

    i = 0
    for tag in schema.tags:  # every tag populated at least twice
        for _ in range(2):
            add_one(tag, i)
            i += 1
    for _ in range(rng.randrange(6, 34)):
        add_one(rng.choice(schema.tags), i)
        i += 1
    for ed in schema.edge_defs:
        for _ in range(rng.randrange(2, 7)):
            props = {}
            for p in ed.properties:
                if rng.random() < 0.2:
                    continue
                props[p.name] = (
                    rng.randrange(0, 50) if p.kind == "int" else round(rng.uniform(0.0, 9.0), 3)
                )
            g.add_edge(
                ed.edge_type,
                ed.start_tag,
                rng.choice(names[ed.start_tag]),
                ed.end_tag,
                rng.choice(names[ed.end_tag]),
                props,
            )
    return g


def test_criterion_1_executor_agrees_with_brute_force(fin_schema):
    started = time.monotonic()
    cases = mismatches = 0
    for gi in range(10):
        rng = random.Random(f"acc1:{gi}")
        g = random_graph(fin_schema, rng)
        assert len(g.nodes) <= 50
        queries = list(random_queries(fin_schema, seed=1000 + gi, count=20))
        for t in seed_templates():
            pair = instantiate(t, fin_schema, f"acc1:{gi}:{t.query_type_id}")
            rec = ground(pair, g, f"acc1g:{gi}:{t.query_type_id}", t.query_type_id)
            if isinstance(rec, NLGQLRecord):
                queries.append(gql.parse(rec.gql))
        for q in queries:
            cases += 1
            if execute(g, q) != brute_force_execute(g, q):
                mismatches += 1
    elapsed = time.monotonic() - started
    report(
        1,
        cases >= 200 and mismatches == 0 and elapsed < 60.0,
        f"executor vs brute force: {mismatches} mismatches on {cases} queries over 10 random "
        f"graphs (<= 50 nodes) in {elapsed:.1f}s (need >= 200 cases, 0 mismatches, < 60 s)",
    )


# --------------------------------------------------------------- criterion 2


# mixed-direction three-node chain with an edge-heavy WHERE, the hardest
# fixed surface form the grammar must keep stable
CHAIN_QUERY = (
    "MATCH (t:trade{name: '钢铁'})<-[bt:belong_to]-(s:stock)"
    "-[hsd:has_stock_data]->(sd:stock_data)"
    " WHERE sd.stock_data.opening_price > 1 RETURN s.stock.name"
)

DUMMY_VALUES = (("[entity1]", "A"), ("[entity2]", "B"), ("[entity]", "X"), ("[string]", "zz"))


def dummy_fill(gql_template):
    out = gql_template
    for tok, val in DUMMY_VALUES:
        out = out.replace(tok, val)
    for tok in ("[mount]", "[m]"):
        out = out.replace(tok, "1")
    return out


def test_criterion_2_parse_print_parse_fixpoint(fin_schema):
    texts = [CHAIN_QUERY]
    for t in seed_templates():
        _nl, gql_template = instantiate(t, fin_schema, f"acc2:{t.query_type_id}")
        texts.append(dummy_fill(gql_template))
    texts.extend(gql.print_query(q) for q in random_queries(fin_schema, seed=77, count=500))
    failures = 0
    for text in texts:
        try:
            first = gql.parse(text)
            printed = gql.print_query(first)
            second = gql.parse(printed)
            if second != first or gql.print_query(second) != printed:
                failures += 1
        except gql.GqlError:
            failures += 1
    report(
        2,
        failures == 0 and len(texts) == 509,
        f"parse-print-parse fixpoint on {len(texts)} queries "
        f"(8 dummy-filled templates + fixed chain + 500 fuzz): {failures} failures (need 0)",
    )


# --------------------------------------------------------------- criterion 3


def test_criterion_3_grounding_replay(fin_schema, fin_graph, grounded_pool, scorer):
    pool = DataPool()
    client = MockLlmClient(fin_schema, seed=9, corruption=0.3)
    result = self_instruct_loop(
        fin_schema, fin_graph, pool, client, scorer,
        GenerationConfig(target_count=64, k_demonstrations=4, rng_seed=9),
    )
    records = list(result.pool.records) + list(grounded_pool.records)
    replayed = sum(
        1
        for r in records
        if execute(fin_graph, gql.parse(r.gql)) == table_from_json_dict(r.answer)
    )
    report(
        3,
        len(result.pool.records) == 64 and replayed == len(records),
        f"grounding replay: {replayed}/{len(records)} pool records re-execute to their "
        f"stored answer (need 100%)",
    )


# --------------------------------------------------------------- criterion 4


def _empty_comparison(e):
    """Rewrite literal comparisons so no graph value can satisfy them."""
    if isinstance(e, gql.Binary):
        if e.op in ("AND", "OR"):
            return gql.Binary(e.op, _empty_comparison(e.left), _empty_comparison(e.right))
        if isinstance(e.right, gql.Literal):
            v = e.right.value
            numeric = isinstance(v, (int, float)) and not isinstance(v, bool)
            if e.op in ("<", "<=") and numeric:
                return gql.Binary(e.op, e.left, gql.Literal(-(10**9)))
            if e.op in (">", ">=", "=") and numeric:
                return gql.Binary(e.op, e.left, gql.Literal(10**9))
            if e.op in ("=", "CONTAINS") and isinstance(v, str):
                return gql.Binary(e.op, e.left, gql.Literal(v + " unmatchable"))
    return e


def corrupt_where_constants(q):
    clauses = []
    changed = False
    for c in q.clauses:
        if isinstance(c, gql.WhereClause):
            expr = _empty_comparison(c.expr)
            changed = changed or expr != c.expr
            clauses.append(gql.WhereClause(expr))
        else:
            clauses.append(c)
    return gql.GqlQuery(tuple(clauses)), changed


def test_criterion_4_metric_oracles(fin_graph, grounded_pool):
    records = grounded_pool.records
    em_ok = sum(em_score(r.gql, r.gql) for r in records)
    ex_ok = sum(ex_score(fin_graph, r.gql, r.gql) for r in records)

    renamed_ok = 0
    for r in records:
        q = gql.parse(r.gql)
        names = gql.definition_order_names(q)
        renamed = gql.rename_bindings(q, {n: f"w{i}" for i, n in enumerate(names)})
        renamed_ok += em_score(gql.print_query(renamed), r.gql)

    corrupted = corrupted_zero = 0
    for r in records:
        if not table_from_json_dict(r.answer).rows:
            continue  # empty gold: nothing for the corruption to flip
        bad, changed = corrupt_where_constants(gql.parse(r.gql))
        if not changed:
            continue
        corrupted += 1
        corrupted_zero += int(ex_score(fin_graph, gql.print_query(bad), r.gql) == 0)

    n = len(records)
    report(
        4,
        em_ok == n and ex_ok == n and renamed_ok == n and corrupted >= 10 and corrupted_zero == corrupted,
        f"metric oracles: em(gold,gold) {em_ok}/{n}, ex(gold,gold) {ex_ok}/{n}, "
        f"alias-renamed em=1 {renamed_ok}/{n}, corrupted WHERE constants ex=0 "
        f"{corrupted_zero}/{corrupted} (need 100% each, >= 10 corrupted)",
    )


# --------------------------------------------------------------- criterion 5


def test_criterion_5_join_chain_length_matches_bfs():
    pairs = mismatches = 0
    for si in range(100):
        rng = random.Random(f"acc5:{si}")
        tags = [f"t{j}" for j in range(rng.randrange(2, 13))]
        edges = []
        for _ in range(rng.randrange(1, 2 * len(tags))):
            a, b = rng.sample(tags, 2)
            edges.append(EdgeDef(f"e{len(edges)}", a, b, ()))
        s = GraphSchema(
            node_defs=tuple(NodeDef(t, (PropertyDef("x", "int"),)) for t in tags),
            edge_defs=tuple(edges),
        )
        adjacent = {t: set() for t in tags}
        for ed in edges:
            adjacent[ed.start_tag].add(ed.end_tag)
            adjacent[ed.end_tag].add(ed.start_tag)
        for i, a in enumerate(tags):
            for b in tags[i + 1 :]:
                pairs += 1
                want = bfs_distance(adjacent, a, b)
                try:
                    hops = (len(join_tables([a, b], s)) - 1) // 2
                except DisconnectedLabelsError:
                    hops = None
                if hops != want:
                    mismatches += 1
    report(
        5,
        mismatches == 0 and pairs > 200,
        f"join chain length vs BFS distance: {mismatches} mismatches on {pairs} label pairs "
        f"over 100 random schemas <= 12 tags (need 0)",
    )


# --------------------------------------------------------------- criterion 6


def _synthetic_record(tid, i):
    return NLGQLRecord(
        nl=f"question {tid} {i}",
        gql="MATCH (s:stock) RETURN s.stock.code",
        template_nl="t",
        template_gql="g",
        answer={"columns": [], "rows": [], "ordered": False},
        query_type_id=tid,
        nodes=("stock",),
        edges=(),
    )


def test_criterion_6_split_exactness():
    from nl2gql.datagen import split_pool

    counts = {1: 2875, 2: 1945, 3: 1525, 4: 1205, 5: 995, 6: 705, 7: 455, 8: 295}
    pool = DataPool()
    for tid, n in counts.items():
        for i in range(n):
            pool.add(_synthetic_record(tid, i))
    assert len(pool.records) == 10000
    train, dev, test = split_pool(pool, (0.7, 0.1, 0.2), rng_seed=42)
    sizes = (len(train.records), len(dev.records), len(test.records))

    worst = 0.0
    for part, frac in ((train, 0.7), (dev, 0.1), (test, 0.2)):
        got = part.counts_by_type()
        for tid, total in counts.items():
            worst = max(worst, abs(got.get(tid, 0) - frac * total))
    report(
        6,
        sizes == (7000, 1000, 2000) and worst <= 1.0 + 1e-9,
        f"split of 10000 synthetic records: sizes {sizes} (need exactly 7000/1000/2000), "
        f"worst per-type deviation from proportional {worst:.1f} (need <= 1)",
    )


# --------------------------------------------------------------- criterion 7


def _pipeline_config(dir_path):
    cfg = {
        "schema": str(conftest.FIN_DIR / "schema.json"),
        "nodes": str(conftest.FIN_DIR / "nodes.jsonl"),
        "edges": str(conftest.FIN_DIR / "edges.jsonl"),
        "generation": {"target_count": 200, "k_demonstrations": 4},
        "llm": {"mock": True, "mock_corruption": 0.2},
        "variant": "relevant",
        "rng_seed": 42,
    }
    path = dir_path / "config.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return str(path)


def _pipeline_outputs(dir_path):
    out = dir_path / "out"
    pool = (out / "pool.jsonl").read_bytes()
    splits = tuple((out / "splits" / f"{n}.jsonl").read_bytes() for n in ("train", "dev", "test"))
    predictions = tuple(
        {k: v for k, v in json.loads(line).items() if k != "latency"}
        for line in (out / "predictions.jsonl").read_text(encoding="utf-8").splitlines()
    )
    report_dict = json.loads((out / "report.json").read_text(encoding="utf-8"))
    report_dict.pop("avg_latency_seconds", None)
    return pool, splits, predictions, report_dict


def test_criterion_7_closed_loop_determinism(tmp_path, capsys):
    started = time.monotonic()
    outputs = []
    for sub in ("first", "second"):
        d = tmp_path / sub
        d.mkdir()
        cfg = _pipeline_config(d)
        for argv in (
            ["gen", "--config", cfg],
            ["split", "--config", cfg],
            ["infer", "--config", cfg],
            ["eval", "--config", cfg],
        ):
            assert main(argv) == 0, argv
        capsys.readouterr()
        outputs.append(_pipeline_outputs(d))
    elapsed = time.monotonic() - started
    identical = outputs[0] == outputs[1]
    n_records = len(outputs[0][0].splitlines())
    report(
        7,
        identical and n_records == 200 and elapsed < 300.0,
        f"closed-loop mock pipeline at seed 42, target 200: two runs byte-identical "
        f"(timing fields excluded) = {identical}, {n_records} records, both runs in "
        f"{elapsed:.1f}s (need identical, 200 records, < 300 s)",
    )


# --------------------------------------------------------------- criterion 8


def test_criterion_8_prompt_variant_token_ordering(fin_schema, fin_graph, grounded_pool, scorer):
    dictionary = build_dictionary(fin_schema, fin_graph)
    nls = [r.nl for r in grounded_pool.records] + ["今天天气如何", "tell me something new"]
    violations = 0
    for nl in nls:
        lr = link(nl, dictionary, fin_schema, grounded_pool, scorer)
        none_t = assemble_prompt(lr, fin_schema, nl, "none").token_count
        rel_t = assemble_prompt(lr, fin_schema, nl, "relevant").token_count
        full_t = assemble_prompt(lr, fin_schema, nl, "full").token_count
        if not none_t < rel_t <= full_t:
            violations += 1
    report(
        8,
        violations == 0 and len(nls) > 50,
        f"prompt token counts none < relevant <= full held for {len(nls) - violations}/{len(nls)} "
        f"test questions (need all)",
    )


# --------------------------------------------------------------- criterion 9


def test_criterion_9_coverage_shape(fin_schema, fin_graph, scorer):
    pool = DataPool()
    client = MockLlmClient(fin_schema, seed=5, corruption=0.2)
    result = self_instruct_loop(
        fin_schema, fin_graph, pool, client, scorer,
        GenerationConfig(target_count=160, k_demonstrations=4, rng_seed=5),
    )
    stats = pool_stats(result.pool)
    populated = sum(1 for t in range(1, 9) if stats.per_type.get(t, 0) > 0)
    report(
        9,
        stats.total == 160 and populated == 8 and 1.0 <= stats.avg_nodes <= 3.0,
        f"coverage shape at desk scale: {stats.total} records, {populated}/8 types populated, "
        f"avg nodes per record {stats.avg_nodes:.2f} (need all 8 types, avg in [1.0, 3.0])",
    )


# -------------------------------------------------------------- criterion 10


class RecordingScorer:
    """Similarity scorer that remembers every (candidate, back-translation)
    pair it was asked about, keyed to dedupe repeat lookups."""

    def __init__(self):
        self.inner = TrigramCosineScorer()
        self.scores = {}

    def score(self, a, b):
        s = self.inner.score(a, b)
        self.scores[(a, b)] = s
        return s


def test_criterion_10_gate_monotonicity(fin_schema, fin_graph):
    recorder = RecordingScorer()
    client = MockLlmClient(fin_schema, seed=11, corruption=0.9)
    self_instruct_loop(
        fin_schema, fin_graph, DataPool(), client, recorder,
        GenerationConfig(target_count=120, k_demonstrations=4, rng_seed=11, max_iterations=120),
    )
    stream = list(recorder.scores.values())
    accepted = [sum(1 for s in stream if s >= tau) for tau in (0.5, 0.8, 0.95)]
    report(
        10,
        len(stream) > 20 and accepted[0] >= accepted[1] >= accepted[2],
        f"gate monotonicity on a recorded stream of {len(stream)} candidates: accepted "
        f"{accepted[0]}/{accepted[1]}/{accepted[2]} at thresholds 0.5/0.8/0.95 "
        f"(need non-increasing)",
    )
