"""LLM clients: a real HTTP endpoint and a deterministic mock.

The mock is a pure function of (prompt text, seed): it derives a private
RNG stream from a hash of the prompt, so repeated runs with the same seed
replay byte-identical, while different prompts decorrelate. Its generation
and back-translation paths share the rule-based NL renderer, which makes
clean candidates self-consistent; the corruption knob injects the failure
modes the pipeline must filter (scrambled NL, unparseable GQL, properties
missing from the schema, wrong literals).
"""

from __future__ import annotations

import hashlib
import os
import random
import re

import httpx

from . import gql
from . import nlgen
from .prompts import PromptSpec
from .schema import GraphSchema, NUMERIC_KINDS
from .similarity import TrigramCosineScorer


class LlmError(RuntimeError):
    pass


class LlmClient:
    """Protocol: anything with complete(prompt: PromptSpec) -> str."""

    def complete(self, prompt: PromptSpec) -> str:  # pragma: no cover - interface
        raise NotImplementedError


class EndpointClient:
    """OpenAI-style chat completions endpoint.

    The credential is named by environment variable and read at call time;
    it is never accepted inline or read from a file.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = "NL2GQL_API_KEY",
        timeout: float = 60.0,
        retries: int = 2,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.retries = retries

    def complete(self, prompt: PromptSpec) -> str:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise LlmError(f"environment variable {self.api_key_env!r} is not set")
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": 0.0,
        }
        last_error = None
        for _attempt in range(self.retries + 1):
            try:
                resp = httpx.post(
                    f"{self.base_url}/chat/completions",
                    json=payload,
                    headers={"Authorization": f"Bearer {key}"},
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                data = resp.json()
                return data["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as exc:
                last_error = exc
        raise LlmError(f"endpoint failed after {self.retries + 1} attempts: {last_error}")


# --------------------------------------------------------------------- mock


_DEMO_RE = re.compile(r"^NL: (.*)\nGQL: (.*)$", re.MULTILINE)
_GQL_LINE_RE = re.compile(r"^GQL: (.*)$", re.MULTILINE)
_NL_LINE_RE = re.compile(r"^\[NL\]: (.*)$", re.MULTILINE)
_WORD_RE = re.compile(r"\S+")


def _map_expr(e, fn):
    if isinstance(e, gql.Abs):
        e = gql.Abs(_map_expr(e.arg, fn))
    elif isinstance(e, gql.Binary):
        e = gql.Binary(e.op, _map_expr(e.left, fn), _map_expr(e.right, fn))
    return fn(e)


def map_query_exprs(q: gql.GqlQuery, fn) -> gql.GqlQuery:
    """Rebuild the query with fn applied bottom-up to every expression."""
    clauses = []
    for c in q.clauses:
        if isinstance(c, gql.WhereClause):
            clauses.append(gql.WhereClause(_map_expr(c.expr, fn)))
        elif isinstance(c, (gql.WithClause, gql.ReturnClause)):
            items = tuple(gql.ProjItem(_map_expr(i.expr, fn), i.alias) for i in c.items)
            clauses.append(type(c)(items))
        elif isinstance(c, gql.OrderByClause):
            keys = tuple(gql.OrderKey(_map_expr(k.expr, fn), k.desc) for k in c.keys)
            clauses.append(gql.OrderByClause(keys))
        else:
            clauses.append(c)
    return gql.GqlQuery(tuple(clauses))


def _kind_class(kind: str) -> str:
    return "numeric" if kind in NUMERIC_KINDS else kind


class MockLlmClient:
    """Deterministic stand-in for the generation / back-translation /
    inference endpoints, driven entirely by the schema and a seed."""

    def __init__(
        self,
        schema: GraphSchema,
        seed=0,
        corruption: float = 0.0,
        retrieval_records=None,
    ):
        if not 0.0 <= corruption <= 1.0:
            raise ValueError(f"corruption must be in [0, 1], got {corruption}")
        self.schema = schema
        self.seed = seed
        self.corruption = corruption
        self.retrieval_records = list(retrieval_records or [])
        self._scorer = TrigramCosineScorer()

    # -- plumbing ----------------------------------------------------------

    def _rng(self, prompt: PromptSpec) -> random.Random:
        digest = hashlib.sha256(prompt.text.encode("utf-8")).hexdigest()[:16]
        return random.Random(f"{self.seed}:{digest}")

    def complete(self, prompt: PromptSpec) -> str:
        if prompt.kind == "gen":
            return self._complete_gen(prompt)
        if prompt.kind == "cot":
            return self._complete_cot(prompt)
        if prompt.kind == "infer":
            return self._complete_infer(prompt)
        raise LlmError(f"mock cannot answer prompt kind {prompt.kind!r}")

    # -- generation --------------------------------------------------------

    def _complete_gen(self, prompt: PromptSpec) -> str:
        rng = self._rng(prompt)
        demos = _DEMO_RE.findall(prompt.text)
        if not demos:
            raise LlmError("gen prompt carries no demonstrations")
        _nl, demo_gql = demos[rng.randrange(len(demos))]
        new_gql = self._mutate_template(demo_gql, rng)
        new_nl = nlgen.template_render_nl(new_gql)
        if new_nl is None:
            new_gql, new_nl = demo_gql, nlgen.template_render_nl(demo_gql)
        if new_nl is None:
            raise LlmError(f"demonstration template does not parse: {demo_gql!r}")
        new_nl, new_gql = self._corrupt_pair(new_nl, new_gql, rng)
        return f"NL: {new_nl}\nGQL: {new_gql}"

    def _mutate_template(self, template_gql: str, rng: random.Random) -> str:
        """Swap one accessed property for a sibling of the same kind class,
        consistently across the query. Falls back to the original template
        when nothing is swappable."""
        parsed = nlgen.template_parse(template_gql)
        if parsed is None:
            return template_gql
        q, back = parsed
        edge_alias_types = {e.alias: e.edge_type for e in gql.iter_edge_patterns(q) if e.alias}
        targets = {}
        for e in gql.iter_all_subexprs(q):
            if isinstance(e, gql.PropAccess):
                nd = self.schema.node_def(e.tag)
                if nd is None:
                    continue
                kind = "string" if e.prop == "name" else getattr(nd.prop(e.prop), "kind", None)
                if kind is None:
                    continue
                alts = [
                    p.name
                    for p in nd.properties
                    if p.name != e.prop and _kind_class(p.kind) == _kind_class(kind)
                ]
                if alts:
                    targets[("node", e.tag, e.prop)] = alts
            elif isinstance(e, gql.EdgePropAccess):
                edge_type = edge_alias_types.get(e.alias)
                ed = self.schema.edge_def(edge_type) if edge_type else None
                if ed is None:
                    continue
                prop_def = ed.prop(e.prop)
                if prop_def is None:
                    continue
                alts = [
                    p.name
                    for p in ed.properties
                    if p.name != e.prop and _kind_class(p.kind) == _kind_class(prop_def.kind)
                ]
                if alts:
                    targets[("edge", edge_type, e.prop)] = alts
        if not targets:
            return template_gql
        key = rng.choice(sorted(targets))
        replacement = rng.choice(targets[key])
        mutated = self._swap_prop(q, edge_alias_types, key, replacement)
        return nlgen._restore(gql.print_query(mutated), back)

    @staticmethod
    def _swap_prop(q, edge_alias_types, key, replacement):
        owner_kind, owner, prop = key

        def fn(e):
            if (
                owner_kind == "node"
                and isinstance(e, gql.PropAccess)
                and e.tag == owner
                and e.prop == prop
            ):
                return gql.PropAccess(e.alias, e.tag, replacement)
            if (
                owner_kind == "edge"
                and isinstance(e, gql.EdgePropAccess)
                and edge_alias_types.get(e.alias) == owner
                and e.prop == prop
            ):
                return gql.EdgePropAccess(e.alias, replacement)
            return e

        return map_query_exprs(q, fn)

    # -- corruption --------------------------------------------------------

    def _corrupt_pair(self, nl: str, gql_text: str, rng: random.Random):
        c = self.corruption
        r = rng.random()
        if r >= c:
            return nl, gql_text
        if r < c * 0.25:
            return self._scramble(nl, rng, 1.0), gql_text
        if r < c * 0.5:
            return self._scramble(nl, rng, rng.uniform(0.05, 0.6)), gql_text
        if r < c * 0.75:
            return nl, gql_text + " )("
        return nl, self._alienate(gql_text, rng)

    @staticmethod
    def _scramble(text: str, rng: random.Random, fraction: float) -> str:
        def mangle(m):
            w = m.group(0)
            if rng.random() >= fraction:
                return w
            chars = list(w)
            rng.shuffle(chars)
            return "".join(chars) + "q"

        return _WORD_RE.sub(mangle, text)

    def _alienate(self, template_gql: str, rng: random.Random) -> str:
        """Rename one accessed property to one the schema does not define."""
        parsed = nlgen.template_parse(template_gql)
        if parsed is None:
            return template_gql + " )("
        q, back = parsed
        accesses = [
            e
            for e in gql.iter_all_subexprs(q)
            if isinstance(e, (gql.PropAccess, gql.EdgePropAccess))
        ]
        if not accesses:
            return template_gql + " )("
        victim = accesses[rng.randrange(len(accesses))]

        def fn(e):
            if e == victim:
                if isinstance(e, gql.PropAccess):
                    return gql.PropAccess(e.alias, e.tag, f"phantom_{e.prop}")
                return gql.EdgePropAccess(e.alias, f"phantom_{e.prop}")
            return e

        return nlgen._restore(gql.print_query(map_query_exprs(q, fn)), back)

    # -- back-translation ---------------------------------------------------

    def _complete_cot(self, prompt: PromptSpec) -> str:
        lines = _GQL_LINE_RE.findall(prompt.text)
        if not lines:
            raise LlmError("cot prompt carries no GQL line")
        target = lines[-1]
        nl = nlgen.template_render_nl(target)
        parts = nlgen.explain_clauses(target) or []
        if nl is None:
            nl = "the question"
        parts.append(f'Combining these parts, so the output is: "{nl}"')
        return "\n".join(parts)

    # -- inference ----------------------------------------------------------

    def _complete_infer(self, prompt: PromptSpec) -> str:
        rng = self._rng(prompt)
        m = _NL_LINE_RE.search(prompt.text)
        if m is None:
            raise LlmError("infer prompt carries no [NL] line")
        question = m.group(1)
        if not self.retrieval_records:
            raise LlmError("mock inference needs retrieval records")
        best = max(self.retrieval_records, key=lambda r: self._scorer.score(r.nl, question))
        answer = best.gql
        c = self.corruption
        r = rng.random()
        if r < c:
            if r < c / 3:
                answer = self._rename_aliases(answer)
            elif r < 2 * c / 3:
                answer = self._bump_literal(answer)
            else:
                answer = answer + " )("
        return f"GQL: {answer}"

    @staticmethod
    def _rename_aliases(gql_text: str) -> str:
        try:
            q = gql.parse(gql_text)
        except gql.GqlError:
            return gql_text
        names = gql.definition_order_names(q)
        return gql.print_query(gql.rename_bindings(q, {n: f"z{i}" for i, n in enumerate(names)}))

    @staticmethod
    def _bump_literal(gql_text: str) -> str:
        try:
            q = gql.parse(gql_text)
        except gql.GqlError:
            return gql_text + " )("
        state = {"done": False}

        def fn(e):
            if (
                not state["done"]
                and isinstance(e, gql.Literal)
                and isinstance(e.value, (int, float))
                and not isinstance(e.value, bool)
            ):
                state["done"] = True
                return gql.Literal(e.value + 1)
            return e

        bumped = map_query_exprs(q, fn)
        if not state["done"]:
            return gql_text + " )("
        return gql.print_query(bumped)
