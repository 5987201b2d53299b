"""Command-line surface: load | gen | split | link | infer | eval.

Configuration lives in a JSON file (paths resolved relative to it) with
flag overrides; the LLM credential is named by environment variable in the
config and read from the environment at call time, never stored. Commands
exit 0 on success and 2 on configuration or data errors; progress and
rejection counts go to standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from . import gql
from .datagen import GenerationConfig, self_instruct_loop, split_pool
from .graph import GraphLoadError, PropertyGraph, load_graph
from .linker import (
    LinkResult,
    assemble_prompt,
    build_dictionary,
    link,
    normalize_variant,
    verify_match_clause,
)
from .llm import EndpointClient, LlmError, MockLlmClient
from .metrics import GoldDataError, evaluate_run
from .schema import GraphSchema, SchemaParseError, SchemaValidationError, load_schema
from .similarity import TrigramCosineScorer
from .templates import DataPool, load_pool, pool_stats, save_pool


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LlmSettings:
    mock: bool = True
    mock_corruption: float = 0.0
    base_url: str | None = None
    model: str | None = None
    api_key_env: str = "NL2GQL_API_KEY"
    timeout: float = 60.0
    retries: int = 2


@dataclass(frozen=True)
class RunConfig:
    config_dir: Path
    schema_path: Path
    nodes_path: Path
    edges_path: Path
    pool_path: Path
    splits_dir: Path
    predictions_path: Path
    report_path: Path
    generation: GenerationConfig
    llm: LlmSettings
    variant: str = "relevant"
    rng_seed: int | str = 0
    jobs: int = 1

    def __post_init__(self):
        normalize_variant(self.variant)
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        if self.llm.mock and self.llm.base_url:
            raise ConfigError("exactly one of mock and endpoint may be active; both are set")
        if not self.llm.mock and not (self.llm.base_url and self.llm.model):
            raise ConfigError("endpoint mode needs base_url and model (or set llm.mock)")


def load_config(path, seed=None, variant=None, mock=None, jobs=None, target_count=None) -> RunConfig:
    config_path = Path(path)
    try:
        raw = json.loads(config_path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    base = config_path.parent

    def resolve(key, default):
        return base / raw.get(key, default)

    gen_raw = dict(raw.get("generation", {}))
    quotas = {int(k): v for k, v in gen_raw.pop("per_type_quotas", {}).items()}
    rng_seed = raw.get("rng_seed", 0) if seed is None else seed
    try:
        generation = GenerationConfig(per_type_quotas=quotas, rng_seed=rng_seed, **gen_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad generation section: {exc}") from exc
    llm_raw = dict(raw.get("llm", {}))
    if mock:
        llm_raw["mock"] = True
        llm_raw.pop("base_url", None)
        llm_raw.pop("model", None)
    try:
        llm = LlmSettings(**llm_raw)
    except TypeError as exc:
        raise ConfigError(f"bad llm section: {exc}") from exc
    if target_count is not None:
        generation = replace(generation, target_count=target_count)
    try:
        return RunConfig(
            config_dir=base,
            schema_path=resolve("schema", "schema.json"),
            nodes_path=resolve("nodes", "nodes.jsonl"),
            edges_path=resolve("edges", "edges.jsonl"),
            pool_path=resolve("pool", "out/pool.jsonl"),
            splits_dir=resolve("splits_dir", "out/splits"),
            predictions_path=resolve("predictions", "out/predictions.jsonl"),
            report_path=resolve("report", "out/report.json"),
            generation=generation,
            llm=llm,
            variant=variant if variant is not None else raw.get("variant", "relevant"),
            rng_seed=rng_seed,
            jobs=jobs if jobs is not None else raw.get("jobs", 1),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ------------------------------------------------------------------ pieces


def _load_graph(cfg: RunConfig) -> PropertyGraph:
    schema = load_schema(cfg.schema_path)
    return load_graph(schema, cfg.nodes_path, cfg.edges_path)


def _make_client(cfg: RunConfig, schema: GraphSchema, retrieval_records=None):
    if cfg.llm.mock:
        return MockLlmClient(
            schema,
            seed=cfg.rng_seed,
            corruption=cfg.llm.mock_corruption,
            retrieval_records=retrieval_records,
        )
    return EndpointClient(
        base_url=cfg.llm.base_url,
        model=cfg.llm.model,
        api_key_env=cfg.llm.api_key_env,
        timeout=cfg.llm.timeout,
        retries=cfg.llm.retries,
    )


def _split_paths(cfg: RunConfig) -> dict:
    return {name: cfg.splits_dir / f"{name}.jsonl" for name in ("train", "dev", "test")}


_EMPTY_SCHEMA = GraphSchema(node_defs=(), edge_defs=())
_EMPTY_LINK = LinkResult((), (), (), _EMPTY_SCHEMA, True)


def _extract_gql(response: str) -> str:
    for line in response.splitlines():
        if line.startswith("GQL: "):
            return line[len("GQL: ") :].strip()
    return response.strip()


# ---------------------------------------------------------------- commands


def cmd_load(cfg: RunConfig) -> int:
    g = _load_graph(cfg)
    summary = {
        "tags": {tag: len(ids) for tag, ids in sorted(g.tag_index.items())},
        "nodes": len(g.nodes),
        "edges": len(g.edges),
        "edge_types": {e: 0 for e in g.schema.edge_types},
    }
    for edge in g.edges:
        summary["edge_types"][edge.edge_type] += 1
    print(json.dumps(summary, ensure_ascii=False, indent=2))
    return 0


def cmd_gen(cfg: RunConfig) -> int:
    g = _load_graph(cfg)
    client = _make_client(cfg, g.schema)
    result = self_instruct_loop(
        g.schema, g, DataPool(), client, TrigramCosineScorer(), cfg.generation
    )
    cfg.pool_path.parent.mkdir(parents=True, exist_ok=True)
    save_pool(result.pool, cfg.pool_path)
    stats = pool_stats(result.pool)
    print(
        f"accepted {stats.total} records "
        f"({stats.unique_templates} unique templates) "
        f"from {result.candidates_tried} candidates",
        file=sys.stderr,
    )
    for stage, count in sorted(result.rejection_histogram().items()):
        print(f"rejected at {stage}: {count}", file=sys.stderr)
    print(str(cfg.pool_path))
    return 0


def cmd_split(cfg: RunConfig) -> int:
    pool = load_pool(cfg.pool_path)
    train, dev, test = split_pool(pool, rng_seed=cfg.rng_seed)
    cfg.splits_dir.mkdir(parents=True, exist_ok=True)
    paths = _split_paths(cfg)
    for name, part in (("train", train), ("dev", dev), ("test", test)):
        save_pool(part, paths[name])
        print(f"{name}: {len(part.records)} records", file=sys.stderr)
    print(str(cfg.splits_dir))
    return 0


def cmd_link(cfg: RunConfig, nl: str) -> int:
    g = _load_graph(cfg)
    pool = load_pool(cfg.pool_path) if cfg.pool_path.exists() else DataPool()
    dictionary = build_dictionary(g.schema, g)
    result = link(nl, dictionary, g.schema, pool, TrigramCosineScorer())
    print(json.dumps(result.to_json_dict(), ensure_ascii=False, indent=2))
    return 0


def _infer_one(record, g, dictionary, pool, scorer, client, variant):
    latencies = {}
    relevant = variant.startswith("relevant")
    started = time.monotonic()
    link_result = (
        link(record.nl, dictionary, g.schema, pool, scorer) if relevant else _EMPTY_LINK
    )
    latencies["link"] = time.monotonic() - started

    started = time.monotonic()
    prompt = assemble_prompt(link_result, g.schema, record.nl, variant)
    latencies["prompt"] = time.monotonic() - started

    started = time.monotonic()
    try:
        pred = _extract_gql(client.complete(prompt))
    except LlmError as exc:
        pred = f"<llm error: {exc}>"
    if relevant and link_result.resolved_labels:
        try:
            verified = verify_match_clause(gql.parse(pred), link_result)
            pred = gql.print_query(verified.query)
        except gql.GqlError:
            pass
    latencies["llm"] = time.monotonic() - started
    return pred, latencies


def cmd_infer(cfg: RunConfig, split: str) -> int:
    g = _load_graph(cfg)
    paths = _split_paths(cfg)
    if not paths[split].exists():
        raise ConfigError(f"split file missing: {paths[split]} (run split first)")
    dataset = load_pool(paths[split])
    train = load_pool(paths["train"]) if paths["train"].exists() else DataPool()
    variant = normalize_variant(cfg.variant)
    client = _make_client(cfg, g.schema, retrieval_records=train.records)
    dictionary = build_dictionary(g.schema, g)
    scorer = TrigramCosineScorer()

    def run(record):
        return _infer_one(record, g, dictionary, train, scorer, client, variant)

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool_exec:
            outcomes = list(pool_exec.map(run, dataset.records))
    else:
        outcomes = [run(r) for r in dataset.records]

    cfg.predictions_path.parent.mkdir(parents=True, exist_ok=True)
    with open(cfg.predictions_path, "w", encoding="utf-8") as fh:
        for i, (pred, latencies) in enumerate(outcomes):
            fh.write(json.dumps({"id": i, "gql": pred, "latency": latencies}, ensure_ascii=False))
            fh.write("\n")
    print(f"inferred {len(outcomes)} predictions ({variant})", file=sys.stderr)
    print(str(cfg.predictions_path))
    return 0


def cmd_eval(cfg: RunConfig, split: str) -> int:
    g = _load_graph(cfg)
    paths = _split_paths(cfg)
    dataset = load_pool(paths[split])
    predictions = {}
    with open(cfg.predictions_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                row = json.loads(line)
                predictions[row["id"]] = (row["gql"], row.get("latency", {}))
    missing = [i for i in range(len(dataset.records)) if i not in predictions]
    if missing:
        raise ConfigError(f"predictions missing for record ids {missing[:5]}...")

    ids = {id(r): i for i, r in enumerate(dataset.records)}

    def system(record):
        return predictions[ids[id(record)]]

    report = evaluate_run(
        g,
        dataset.records,
        system,
        variant=cfg.variant,
        metadata={"rng_seed": str(cfg.rng_seed), "split": split},
    )
    cfg.report_path.parent.mkdir(parents=True, exist_ok=True)
    cfg.report_path.write_text(
        json.dumps(report.to_json_dict(), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    print(f"em {report.em:.4f} ex {report.ex:.4f} over {report.total} records", file=sys.stderr)
    print(str(cfg.report_path))
    return 0


# -------------------------------------------------------------------- main


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nl2gql", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to run configuration JSON")
        p.add_argument("--seed", default=None, help="override the configured rng seed")
        p.add_argument("--variant", default=None, help="prompt variant: relevant|relevant-zh|full|full-zh|none")
        p.add_argument("--mock", action="store_true", help="force the deterministic mock client")
        p.add_argument("--jobs", type=int, default=None, help="worker threads for inference")
        p.add_argument("--target-count", type=int, default=None, help="override generation target")

    for name in ("load", "gen", "split", "link", "infer", "eval"):
        p = sub.add_parser(name)
        common(p)
        if name == "link":
            p.add_argument("--nl", required=True, help="natural-language question to link")
        if name in ("infer", "eval"):
            p.add_argument("--split", default="test", choices=("train", "dev", "test"))
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(
            args.config,
            seed=args.seed,
            variant=args.variant,
            mock=args.mock or None,
            jobs=args.jobs,
            target_count=args.target_count,
        )
        if args.command == "load":
            return cmd_load(cfg)
        if args.command == "gen":
            return cmd_gen(cfg)
        if args.command == "split":
            return cmd_split(cfg)
        if args.command == "link":
            return cmd_link(cfg, args.nl)
        if args.command == "infer":
            return cmd_infer(cfg, args.split)
        return cmd_eval(cfg, args.split)
    except (
        ConfigError,
        GraphLoadError,
        SchemaParseError,
        SchemaValidationError,
        GoldDataError,
        LlmError,
        FileNotFoundError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
