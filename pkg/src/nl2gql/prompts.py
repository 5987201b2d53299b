"""Prompt assembly: schema blocks, task descriptions, and the three
prompt shapes (pair generation, CoT back-translation, inference).

Every builder is a pure function of its inputs; prompts are byte-stable
across runs so they can be hashed, cached, and replayed by the mock.
"""

from __future__ import annotations

import re
import random
from dataclasses import dataclass, field

from .schema import GraphSchema
from .templates import DataPool, QueryTemplate, TYPE_NAMES, instantiate, template_by_id
from . import nlgen


@dataclass(frozen=True)
class PromptSpec:
    kind: str  # gen | cot | infer
    text: str
    meta: dict = field(default_factory=dict)

    @property
    def token_count(self) -> int:
        return count_tokens(self.text)


_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def count_tokens(text: str) -> int:
    return len(_TOKEN_RE.findall(text))


# ------------------------------------------------------------ schema block


def _props_repr(properties, zh: bool) -> str:
    parts = []
    for p in properties:
        if zh and p.zh:
            parts.append(f"('{p.name}', '{p.kind}', '{p.zh}')")
        else:
            parts.append(f"('{p.name}', '{p.kind}')")
    return "[" + ", ".join(parts) + "]"


def schema_block(s: GraphSchema, zh: bool = False) -> str:
    lines = ["Nodes"]
    for nd in s.node_defs:
        lines.append(f"  {{'tag': '{nd.tag}', 'properties': {_props_repr(nd.properties, zh)}}}")
    lines.append("Edges")
    for ed in s.edge_defs:
        lines.append(
            f"  {{'edge': '{ed.edge_type}', 'start_tag': '{ed.start_tag}', "
            f"'end_tag': '{ed.end_tag}', 'properties': {_props_repr(ed.properties, zh)}}}"
        )
    return "\n".join(lines)


# -------------------------------------------------------- task descriptions

TYPE_DESCRIPTIONS = {
    1: "the generated NL and GQL are both related to simple property queries "
    "of nodes and do not involve any computations.",
    2: "the generated NL and GQL are both related to sorting concepts and numerical values.",
    3: "the generated NL and GQL are both related to reasoning about relationships "
    "between nodes and edges.",
    4: "the generated NL and GQL both pertain to 'whether' or 'existence' related queries.",
    5: "the generated NL and GQL are both related to filtering relationships on "
    "multi-hop subgraphs associated with nodes.",
    6: "the generated NL and GQL are both related to aggregate calculations of node properties.",
    7: "the generated NL and GQL are both related to comparing and aggregating "
    "calculations of edge properties.",
    8: "the generated NL and GQL are both related to string matching.",
}

GEN_TASK_PREAMBLE = (
    "Please generate a new NL-GQL template data pair of the same type as the "
    "provided NL based on the given Graph database schema and NL-GQL demonstrations. "
    "In the Graph database schema section, Nodes contain information about all "
    "entities, including node tags and their corresponding properties. Edges "
    "contain information about all relationships, including the head and tail "
    "nodes of the edge and any edge properties. In the NL-GQL demonstrations, "
    "named entities are replaced with placeholders."
)

GEN_OUTPUT_RULE = (
    "Respond with exactly two lines: 'NL: <template sentence>' and "
    "'GQL: <template query>'."
)

COT_TASK = (
    "You are a graph database expert. Explain the final graph query language "
    "template clause by clause, as in the demonstrations, and conclude with "
    'the natural language question it answers in the form: so the output is: "<question>".'
)

INFER_TASK = (
    "You are a graph database expert. Please write the corresponding graph "
    "query language based on the relevant schema and natural language. "
    "Respond with one line: 'GQL: <query>'."
)


def gen_task_description(query_type_id: int) -> str:
    return (
        f"{GEN_TASK_PREAMBLE} The query type is {TYPE_NAMES[query_type_id]}, "
        f"in this type {TYPE_DESCRIPTIONS[query_type_id]}"
    )


# ------------------------------------------------------------ gen prompt


def sample_demonstrations(
    s: GraphSchema, d: DataPool, query_type_id: int, k: int, rng_seed
) -> list:
    """k (nl, gql) template demonstrations of the type: sampled from the
    pool when it has enough, topped up from instantiated seed templates."""
    rng = random.Random(str(rng_seed))
    records = d.records_of_type(query_type_id)
    pairs = [(r.template_nl, r.template_gql) for r in records]
    if len(pairs) >= k:
        return rng.sample(pairs, k)
    template = template_by_id(query_type_id)
    demos = list(pairs)
    i = 0
    while len(demos) < k:
        demos.append(instantiate(template, s, f"{rng_seed}:seed{i}"))
        i += 1
    return demos


def build_gen_prompt(s: GraphSchema, d: DataPool, query_type_id: int, cfg, rng_seed) -> PromptSpec:
    demos = sample_demonstrations(s, d, query_type_id, cfg.k_demonstrations, rng_seed)
    parts = [
        "[Schema of Graph DB]:",
        schema_block(s),
        "",
        f"[Task Description]: {gen_task_description(query_type_id)} {GEN_OUTPUT_RULE}",
        "",
        "[NL-GQL]:",
    ]
    for nl, gql_text in demos:
        parts.append(f"NL: {nl}")
        parts.append(f"GQL: {gql_text}")
        parts.append("")
    return PromptSpec("gen", "\n".join(parts).rstrip() + "\n", {"query_type_id": query_type_id})


# ------------------------------------------------------------ cot prompt


def _cot_example(nl: str, gql_text: str) -> list:
    lines = [f"GQL: {gql_text}"]
    explanations = nlgen.explain_clauses(gql_text)
    if explanations:
        lines.extend(explanations)
    lines.append(f'Combining these parts, so the output is: "{nl}"')
    return lines


def build_cot_prompt(s: GraphSchema, k_examples: list, l_prime: str) -> PromptSpec:
    parts = [
        "[Schema of Graph DB]:",
        schema_block(s),
        "",
        f"[Task Description]: {COT_TASK}",
        "",
        "[CoT-based GQL2NL]:",
    ]
    for nl, gql_text in k_examples:
        parts.extend(_cot_example(nl, gql_text))
        parts.append("")
    parts.append(f"GQL: {l_prime}")
    explanations = nlgen.explain_clauses(l_prime)
    if explanations:
        parts.extend(explanations)
    parts.append("Combining these parts, so the output is:")
    return PromptSpec("cot", "\n".join(parts) + "\n")


# ----------------------------------------------------------- infer prompt


def build_infer_prompt(s_block_header: str, s_block: str, nl: str, variant: str) -> PromptSpec:
    parts = []
    if s_block:
        parts.append(f"[{s_block_header}]:")
        parts.append(s_block)
        parts.append("")
    parts.append(f"[Task Description]: {INFER_TASK}")
    parts.append("")
    parts.append(f"[NL]: {nl}")
    return PromptSpec("infer", "\n".join(parts) + "\n", {"variant": variant})
