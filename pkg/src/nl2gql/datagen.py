"""Two-step self-instruct data generation.

Each cycle: sample demonstrations, ask the client for a new template pair
(NL-GQL-Gen), back-translate the query with clause-by-clause reasoning
(GQL2NL-Gen), gate on NL similarity, ground against the graph, and append
to the pool so later cycles can sample the new record. Rejections are
values, never exceptions: the loop records {stage, reason, candidate} and
moves on.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

from . import gql
from . import nlgen
from .executor import Rejection, UnknownSchemaItemError, check_schema_items
from .graph import PropertyGraph
from .prompts import PromptSpec, build_cot_prompt as _assemble_cot, build_gen_prompt, sample_demonstrations
from .schema import GraphSchema
from .similarity import SimilarityScorer
from .templates import (
    DataPool,
    NoCompatibleSlotError,
    ground,
)


@dataclass(frozen=True)
class GenerationConfig:
    k_demonstrations: int = 8
    similarity_threshold: float = 0.8
    target_count: int = 100
    per_type_quotas: dict = field(default_factory=dict)  # type id -> minimum count
    rng_seed: int | str = 0
    max_iterations: int | None = None  # default: max(1000, 20 * target_count)

    def __post_init__(self):
        if not 0 < self.similarity_threshold <= 1:
            raise ValueError(f"similarity_threshold must be in (0, 1], got {self.similarity_threshold}")
        if self.k_demonstrations < 1:
            raise ValueError(f"k_demonstrations must be >= 1, got {self.k_demonstrations}")
        if self.target_count < 0:
            raise ValueError(f"target_count must be >= 0, got {self.target_count}")
        for t, quota in self.per_type_quotas.items():
            if t not in range(1, 9):
                raise ValueError(f"unknown query type id in quotas: {t!r}")
            if quota < 0:
                raise ValueError(f"quota for type {t} must be >= 0, got {quota}")
        if sum(self.per_type_quotas.values()) > self.target_count:
            raise ValueError("per_type_quotas sum exceeds target_count")

    @property
    def iteration_budget(self) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return max(1000, 20 * self.target_count)


# ------------------------------------------------------------------- steps


_NL_RE = re.compile(r"^NL: (.*)$", re.MULTILINE)
_GQL_RE = re.compile(r"^GQL: (.*)$", re.MULTILINE)
_QUOTED_RE = re.compile(r'"([^"]*)"')


def nl_gql_gen(client, prompt: PromptSpec, s: GraphSchema):
    """Step 1: request a new template pair. Returns (nl, gql) template
    strings, or a Rejection when the response is malformed, unparseable,
    or names schema items outside s."""
    response = client.complete(prompt)
    nl_match = _NL_RE.search(response)
    gql_match = _GQL_RE.search(response)
    if nl_match is None or gql_match is None:
        return Rejection("structure", "response missing NL: or GQL: line", response)
    q_prime = nl_match.group(1).strip()
    l_prime = gql_match.group(1).strip()
    if not q_prime or not l_prime:
        return Rejection("structure", "empty NL or GQL line", response)
    parsed = nlgen.template_parse(l_prime)
    if parsed is None:
        return Rejection("parse", "generated template does not parse", l_prime)
    try:
        check_schema_items(parsed[0], s)
    except UnknownSchemaItemError as exc:
        return Rejection("schema", str(exc), l_prime)
    return q_prime, l_prime


def build_cot_prompt(s: GraphSchema, k_examples: list, l_prime: str) -> PromptSpec:
    """Step 2 prompt: worked clause-by-clause examples, then l_prime split
    the same way, awaiting its combined sentence."""
    return _assemble_cot(s, k_examples, l_prime)


def gql2nl_gen(client, prompt: PromptSpec):
    """Step 2: back-translate. Returns the final quoted sentence of the
    response, or a Rejection when none is present."""
    response = client.complete(prompt)
    spans = _QUOTED_RE.findall(response)
    if not spans:
        return Rejection("backtranslation", "no quoted sentence in response", response)
    return spans[-1]


def consistency_gate(scorer: SimilarityScorer, q_prime: str, q_double: str, cfg: GenerationConfig) -> bool:
    return scorer.score(q_prime, q_double) >= cfg.similarity_threshold


# -------------------------------------------------------------------- loop


@dataclass
class LoopResult:
    pool: DataPool
    rejections: list
    candidates_tried: int
    per_type_counts: dict

    def rejection_histogram(self) -> dict:
        hist = {}
        for r in self.rejections:
            hist[r.stage] = hist.get(r.stage, 0) + 1
        return hist


def _pick_type(i: int, accepted_by_type: dict, cfg: GenerationConfig, dead: set) -> int | None:
    """Round-robin over live types, preferring those under quota."""
    under = [
        t
        for t in range(1, 9)
        if t not in dead and accepted_by_type.get(t, 0) < cfg.per_type_quotas.get(t, 0)
    ]
    if under:
        return under[i % len(under)]
    live = [t for t in range(1, 9) if t not in dead]
    if not live:
        return None
    return live[i % len(live)]


def self_instruct_loop(
    s: GraphSchema,
    g: PropertyGraph,
    d: DataPool,
    client,
    scorer: SimilarityScorer,
    cfg: GenerationConfig,
) -> LoopResult:
    """Run generation cycles until target_count records are accepted or the
    iteration budget runs out. d is extended in place and also returned.

    Types whose templates cannot be instantiated on s at all are retired
    after the first failure; a quota on such a type is reported unmet
    rather than spinning the budget down.
    """
    rejections: list[Rejection] = []
    accepted_by_type = {t: 0 for t in range(1, 9)}
    dead_types: set[int] = set()
    accepted = 0
    tried = 0
    for i in range(cfg.iteration_budget):
        if accepted >= cfg.target_count:
            break
        type_id = _pick_type(i, accepted_by_type, cfg, dead_types)
        if type_id is None:
            break
        demo_seed = f"{cfg.rng_seed}:iter{i}:demo"
        try:
            prompt = build_gen_prompt(s, d, type_id, cfg, demo_seed)
        except NoCompatibleSlotError as exc:
            dead_types.add(type_id)
            rejections.append(Rejection("instantiate", str(exc), f"type {type_id}"))
            continue
        tried += 1
        step1 = nl_gql_gen(client, prompt, s)
        if isinstance(step1, Rejection):
            rejections.append(step1)
            continue
        q_prime, l_prime = step1
        demos = sample_demonstrations(s, d, type_id, cfg.k_demonstrations, demo_seed)
        step2 = gql2nl_gen(client, build_cot_prompt(s, demos, l_prime))
        if isinstance(step2, Rejection):
            rejections.append(step2)
            continue
        score = scorer.score(q_prime, step2)
        if not consistency_gate(scorer, q_prime, step2, cfg):
            rejections.append(
                Rejection(
                    "gate",
                    f"similarity {score:.3f} below threshold {cfg.similarity_threshold}",
                    f"NL: {q_prime}\nGQL: {l_prime}",
                )
            )
            continue
        record = ground((q_prime, l_prime), g, f"{cfg.rng_seed}:iter{i}:ground", type_id)
        if isinstance(record, Rejection):
            rejections.append(record)
            continue
        d.add(record)
        accepted += 1
        accepted_by_type[type_id] += 1
    return LoopResult(
        pool=d,
        rejections=rejections,
        candidates_tried=tried,
        per_type_counts=accepted_by_type,
    )


# ------------------------------------------------------------------- split


def _largest_remainder(weights: list, total: int) -> list:
    """Integer allocation of total proportional to weights, each share
    within 1 of exact; ties go to the earliest index."""
    if total <= 0 or sum(weights) == 0:
        return [0] * len(weights)
    denom = sum(weights)
    exact = [w * total / denom for w in weights]
    floors = [int(x) for x in exact]
    leftover = total - sum(floors)
    order = sorted(range(len(weights)), key=lambda j: (-(exact[j] - floors[j]), j))
    for j in order[:leftover]:
        floors[j] += 1
    return floors


def split_pool(d: DataPool, ratios=(0.7, 0.1, 0.2), rng_seed=0):
    """Disjoint (train, dev, test) cover of d, stratified by query type.

    dev and test take floor(n * ratio) records each (after ratio
    normalization), the remainder goes to train; per-type counts stay
    within 1 of proportional via largest-remainder allocation.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or sum(ratios) == 0:
        raise ValueError(f"ratios must be three non-negative numbers, got {ratios!r}")
    total = sum(ratios)
    r_dev, r_test = ratios[1] / total, ratios[2] / total
    n = len(d.records)
    dev_n = int(n * r_dev + 1e-9)
    test_n = int(n * r_test + 1e-9)

    type_ids = sorted({r.query_type_id for r in d.records})
    by_type = {t: d.records_of_type(t) for t in type_ids}
    counts = [len(by_type[t]) for t in type_ids]
    dev_alloc = _largest_remainder(counts, dev_n)
    test_alloc = _largest_remainder(counts, test_n)

    train, dev, test = DataPool(), DataPool(), DataPool()
    for j, t in enumerate(type_ids):
        records = list(by_type[t])
        rng = random.Random(f"{rng_seed}:type{t}")
        rng.shuffle(records)
        take_dev = min(dev_alloc[j], len(records))
        take_test = min(test_alloc[j], len(records) - take_dev)
        for r in records[:take_dev]:
            dev.add(r)
        for r in records[take_dev : take_dev + take_test]:
            test.add(r)
        for r in records[take_dev + take_test :]:
            train.add(r)
    return train, dev, test
