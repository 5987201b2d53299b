"""Compare prompt variants on one shared pool: accuracy vs prompt size.

Generates a single pool and split, then runs linking + inference +
evaluation once per prompt variant (none, relevant, relevant-zh, full,
full-zh) against the same test split. Prints one row per variant with
em/ex, the mean assembled prompt token count, and per-stage latency.
Smaller prompts are the point of relevant-schema linking: the none and
relevant variants should sit well below full on tokens.

Usage:
    python3 scripts/compare_prompt_variants.py --workdir runs/variants
"""

import argparse
import json
import statistics
import sys
from pathlib import Path

from nl2gql.cli import main as nl2gql_main
from nl2gql.graph import load_graph
from nl2gql.linker import assemble_prompt, build_dictionary, link, normalize_variant
from nl2gql.schema import load_schema
from nl2gql.similarity import TrigramCosineScorer
from nl2gql.templates import load_pool

ROOT = Path(__file__).resolve().parent.parent
FIXTURE = ROOT / "fixtures" / "fin"
VARIANTS = ("none", "relevant", "relevant-zh", "full", "full-zh")


def write_config(args, workdir: Path, variant: str) -> Path:
    # pool and splits are shared; predictions/report are per variant
    cfg = {
        "schema": str(FIXTURE / "schema.json"),
        "nodes": str(FIXTURE / "nodes.jsonl"),
        "edges": str(FIXTURE / "edges.jsonl"),
        "pool": "out/pool.jsonl",
        "splits_dir": "out/splits",
        "predictions": f"out/predictions.{variant}.jsonl",
        "report": f"out/report.{variant}.json",
        "variant": variant,
        "rng_seed": args.seed,
        "generation": {
            "target_count": args.target_count,
            "k_demonstrations": 8,
            "similarity_threshold": 0.8,
        },
        "llm": {"mock": True, "mock_corruption": args.corruption},
    }
    path = workdir / f"config.{variant}.json"
    path.write_text(json.dumps(cfg, indent=2), encoding="utf-8")
    return path


def run_stage(argv) -> None:
    rc = nl2gql_main(argv)
    if rc != 0:
        sys.exit(rc)


def mean_prompt_tokens(workdir: Path, variant: str) -> float:
    schema = load_schema(FIXTURE / "schema.json")
    g = load_graph(schema, FIXTURE / "nodes.jsonl", FIXTURE / "edges.jsonl")
    dictionary = build_dictionary(schema, g)
    scorer = TrigramCosineScorer()
    train = load_pool(workdir / "out" / "splits" / "train.jsonl")
    test = load_pool(workdir / "out" / "splits" / "test.jsonl")
    counts = []
    for record in test.records:
        lr = link(record.nl, dictionary, schema, train, scorer)
        counts.append(assemble_prompt(lr, schema, record.nl, normalize_variant(variant)).token_count)
    return statistics.mean(counts) if counts else 0.0


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--workdir", default="runs/variants", help="output directory")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--target-count", type=int, default=200)
    parser.add_argument("--corruption", type=float, default=0.2)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)

    first = str(write_config(args, workdir, VARIANTS[0]))
    run_stage(["gen", "--config", first])
    run_stage(["split", "--config", first])

    rows = []
    for variant in VARIANTS:
        cfg = str(write_config(args, workdir, variant))
        run_stage(["infer", "--config", cfg, "--jobs", str(args.jobs)])
        run_stage(["eval", "--config", cfg])
        report = json.loads(
            (workdir / "out" / f"report.{variant}.json").read_text(encoding="utf-8")
        )
        lat = report["avg_latency_seconds"]
        rows.append(
            (
                variant,
                mean_prompt_tokens(workdir, variant),
                report["em"],
                report["ex"],
                lat["link"] + lat["prompt"],
                report["total"],
            )
        )

    print()
    print(f"{'variant':<12} {'tokens':>8} {'em':>8} {'ex':>8} {'link+prompt s':>14} {'n':>5}")
    for variant, tokens, em, ex, lp, n in rows:
        print(f"{variant:<12} {tokens:>8.1f} {em:>8.4f} {ex:>8.4f} {lp:>14.6f} {n:>5}")
    print(f"\nartifacts under {workdir / 'out'}")


if __name__ == "__main__":
    main()
