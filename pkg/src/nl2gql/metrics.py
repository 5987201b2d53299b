"""EM / EX scoring and run evaluation.

EM compares multisets of canonical clause components: both queries are
parsed, binding names alpha-renamed, equality operands ordered, literals
normalized by the printer, then split into (keyword, clause text) pairs.
EX compares execution results on the graph: as sequences when the gold
query orders its output, as multisets otherwise, with numeric cells equal
within 1e-6. Gold-side failures are data errors; prediction-side failures
score 0.
"""

from __future__ import annotations

import hashlib
import time
from collections import Counter
from dataclasses import dataclass, field

from . import gql
from .executor import Rejection, ResultTable, execute_verified, table_from_json_dict
from .graph import PropertyGraph

EM_DEFINITION = (
    "exact-set-match over (keyword, clause) components after canonicalization: "
    "bindings alpha-renamed in definition order, equality operands ordered, "
    "literals and spacing normalized by the printer"
)

NUMERIC_TOLERANCE = 1e-6


class GoldDataError(ValueError):
    """The gold query failed to parse or execute; the dataset is at fault."""


def canonical_components(text: str):
    return gql.split_clauses(gql.canonicalize(gql.parse(text)))


def em_score(pred: str, gold: str) -> int:
    try:
        gold_parts = canonical_components(gold)
    except gql.GqlError as exc:
        raise GoldDataError(f"gold query does not parse: {exc}") from exc
    try:
        pred_parts = canonical_components(pred)
    except gql.GqlError:
        return 0
    return int(Counter(gold_parts) == Counter(pred_parts))


# ------------------------------------------------------------------ tables


def _cell_equal(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return abs(a - b) <= NUMERIC_TOLERANCE
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    return False


def _row_equal(a, b) -> bool:
    return len(a) == len(b) and all(_cell_equal(x, y) for x, y in zip(a, b))


def tables_match(gold: ResultTable, pred: ResultTable) -> bool:
    """Row-level comparison; column names are not part of the contract."""
    if len(gold.rows) != len(pred.rows):
        return False
    if gold.ordered:
        return all(_row_equal(a, b) for a, b in zip(gold.rows, pred.rows))
    used = [False] * len(pred.rows)
    for row in gold.rows:
        found = False
        for j, other in enumerate(pred.rows):
            if not used[j] and _row_equal(row, other):
                used[j] = True
                found = True
                break
        if not found:
            return False
    return True


def ex_score(g: PropertyGraph, pred: str, gold: str) -> int:
    gold_result = execute_verified(g, gold)
    if isinstance(gold_result, Rejection):
        raise GoldDataError(f"gold query failed at {gold_result.stage}: {gold_result.reason}")
    pred_result = execute_verified(g, pred)
    if isinstance(pred_result, Rejection):
        return 0
    return int(tables_match(gold_result, pred_result))


# ------------------------------------------------------------------ report


LATENCY_STAGES = ("link", "prompt", "llm", "execute")


@dataclass
class EvalReport:
    em: float
    ex: float
    per_type: dict  # type id -> (em, ex, count)
    avg_latency_seconds: dict  # stage -> mean seconds (first record excluded)
    failures: list  # (record id, stage, reason)
    total: int
    variant: str
    dataset_hash: str
    metadata: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "em": self.em,
            "ex": self.ex,
            "total": self.total,
            "variant": self.variant,
            "dataset_hash": self.dataset_hash,
            "per_type": {
                str(t): {"em": v[0], "ex": v[1], "count": v[2]}
                for t, v in sorted(self.per_type.items())
            },
            "per_type_table": [
                [t, v[0], v[1], v[2]] for t, v in sorted(self.per_type.items())
            ],
            "failures": [list(f) for f in self.failures],
            "metadata": self.metadata,
            "avg_latency_seconds": self.avg_latency_seconds,
        }


def dataset_hash(dataset) -> str:
    h = hashlib.sha256()
    for r in dataset:
        h.update(r.nl.encode("utf-8"))
        h.update(b"\x1f")
        h.update(r.gql.encode("utf-8"))
        h.update(b"\x1e")
    return h.hexdigest()


def _normalize_prediction(outcome):
    if isinstance(outcome, tuple):
        pred, latencies = outcome
        return pred, dict(latencies)
    return outcome, {}


def evaluate_run(g: PropertyGraph, dataset, system, variant: str = "none", metadata=None) -> EvalReport:
    """Score system over the dataset. system maps a record to a predicted
    query string or a (string, stage latency dict) pair; the execute stage
    is timed here. Latency means exclude the first record as warmup when
    more than one record exists; scores are deterministic, timings are not.
    """
    per_type_acc = {}
    failures = []
    latency_rows = []
    em_total = 0
    ex_total = 0
    for i, record in enumerate(dataset):
        pred, latencies = _normalize_prediction(system(record))
        em = em_score(pred, record.gql)
        started = time.monotonic()
        pred_result = execute_verified(g, pred)
        latencies = {**latencies, "execute": time.monotonic() - started}
        if isinstance(pred_result, Rejection):
            failures.append((i, pred_result.stage, pred_result.reason))
            ex = 0
        else:
            gold_result = table_from_json_dict(record.answer)
            ex = int(tables_match(gold_result, pred_result))
        em_total += em
        ex_total += ex
        acc = per_type_acc.setdefault(record.query_type_id, [0, 0, 0])
        acc[0] += em
        acc[1] += ex
        acc[2] += 1
        latency_rows.append(latencies)
    n = len(dataset)
    counted = latency_rows[1:] if n > 1 else latency_rows
    avg_latency = {}
    for stage in LATENCY_STAGES:
        values = [row[stage] for row in counted if stage in row]
        avg_latency[stage] = sum(values) / len(values) if values else 0.0
    per_type = {
        t: (acc[0] / acc[2], acc[1] / acc[2], acc[2]) for t, acc in per_type_acc.items()
    }
    meta = {"em_definition": EM_DEFINITION}
    meta.update(metadata or {})
    return EvalReport(
        em=em_total / n if n else 0.0,
        ex=ex_total / n if n else 0.0,
        per_type=per_type,
        avg_latency_seconds=avg_latency,
        failures=failures,
        total=n,
        variant=variant,
        dataset_hash=dataset_hash(dataset),
        metadata=meta,
    )
