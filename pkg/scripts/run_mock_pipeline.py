"""Run the full desk-scale pipeline against the bundled fixture graph.

Generates an NL-GQL pool with the deterministic mock client, splits it
7:1:2, links and infers over one split, evaluates, and prints the report.
All outputs land under --workdir, so repeated runs stay isolated; the same
seed reproduces the same pool, splits, predictions, and scores.

Usage:
    python3 scripts/run_mock_pipeline.py --workdir runs/mock --seed 42
"""

import argparse
import json
import sys
from pathlib import Path

from nl2gql.cli import main as nl2gql_main

ROOT = Path(__file__).resolve().parent.parent
FIXTURE = ROOT / "fixtures" / "fin"


def write_config(args, workdir: Path) -> Path:
    cfg = {
        "schema": str(FIXTURE / "schema.json"),
        "nodes": str(FIXTURE / "nodes.jsonl"),
        "edges": str(FIXTURE / "edges.jsonl"),
        "variant": args.variant,
        "rng_seed": args.seed,
        "generation": {
            "target_count": args.target_count,
            "k_demonstrations": 8,
            "similarity_threshold": args.similarity_threshold,
        },
        "llm": {"mock": True, "mock_corruption": args.corruption},
    }
    path = workdir / "config.json"
    path.write_text(json.dumps(cfg, indent=2), encoding="utf-8")
    return path


def run_stage(argv) -> None:
    rc = nl2gql_main(argv)
    if rc != 0:
        sys.exit(rc)


def print_report(report: dict) -> None:
    print()
    print(f"variant        {report['variant']}")
    print(f"records        {report['total']}")
    print(f"em             {report['em']:.4f}")
    print(f"ex             {report['ex']:.4f}")
    print(f"failures       {len(report['failures'])}")
    print()
    print("type        em      ex   count")
    for tid, em, ex, count in report["per_type_table"]:
        print(f"{tid:>4}    {em:6.4f}  {ex:6.4f}   {count:>5}")
    print()
    print("stage latency (mean seconds, first record excluded)")
    for stage, secs in report["avg_latency_seconds"].items():
        print(f"  {stage:<8} {secs:.6f}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--workdir", default="runs/mock", help="output directory")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--target-count", type=int, default=200)
    parser.add_argument("--similarity-threshold", type=float, default=0.8)
    parser.add_argument("--corruption", type=float, default=0.2,
                        help="mock client corruption rate in [0, 1]")
    parser.add_argument("--variant", default="relevant",
                        choices=("none", "relevant", "relevant-zh", "full", "full-zh"))
    parser.add_argument("--split", default="test", choices=("train", "dev", "test"))
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    cfg = str(write_config(args, workdir))

    run_stage(["load", "--config", cfg])
    run_stage(["gen", "--config", cfg])
    run_stage(["split", "--config", cfg])
    run_stage(["infer", "--config", cfg, "--split", args.split, "--jobs", str(args.jobs)])
    run_stage(["eval", "--config", cfg, "--split", args.split])

    report = json.loads((workdir / "out" / "report.json").read_text(encoding="utf-8"))
    print_report(report)
    print(f"\nartifacts under {workdir / 'out'}")


if __name__ == "__main__":
    main()
