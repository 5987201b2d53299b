"""Tokenizer, recursive-descent parser, and binding validator.

Errors carry byte offsets (UTF-8) into the original text so that failures
on Chinese literals point at the right place. Keywords are case-insensitive
on input; identifiers are case-sensitive ASCII.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    Abs,
    Binary,
    Clause,
    EdgePattern,
    Expr,
    GqlQuery,
    Literal,
    LimitClause,
    MatchClause,
    NodePattern,
    OrderByClause,
    OrderKey,
    PathPattern,
    ProjItem,
    PropAccess,
    EdgePropAccess,
    ReturnClause,
    VarRef,
    WhereClause,
    WithClause,
)


class GqlError(ValueError):
    pass


class GqlSyntaxError(GqlError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class GqlBindingError(GqlError):
    pass


KEYWORDS = {
    "MATCH",
    "WHERE",
    "WITH",
    "RETURN",
    "ORDER",
    "BY",
    "LIMIT",
    "AS",
    "AND",
    "OR",
    "CONTAINS",
    "DESC",
    "ASC",
    "ABS",
    "TRUE",
    "FALSE",
}

CLAUSE_STARTERS = {"MATCH", "WHERE", "WITH", "RETURN", "ORDER", "LIMIT"}

TWO_CHAR_OPS = ("<=", ">=", "!=", "<>", "==")
ONE_CHAR_TOKENS = "()[]{}:,.<>=-"

ESCAPES = {"\\": "\\", "'": "'", '"': '"', "n": "\n", "t": "\t"}


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, INT, FLOAT, STRING, OP, EOF
    text: str
    value: object
    pos: int  # character offset into source


def byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def _is_ident_start(ch: str) -> bool:
    return ch == "_" or ("a" <= ch <= "z") or ("A" <= ch <= "Z")


def _is_ident_char(ch: str) -> bool:
    return _is_ident_start(ch) or ch.isdigit()


def tokenize(text: str) -> list:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        start = i
        if _is_ident_start(ch):
            while i < n and _is_ident_char(text[i]):
                i += 1
            tokens.append(Token("IDENT", text[start:i], None, start))
            continue
        if ch.isdigit():
            while i < n and text[i].isdigit():
                i += 1
            is_float = False
            if i < n and text[i] == "." and i + 1 < n and text[i + 1].isdigit():
                is_float = True
                i += 1
                while i < n and text[i].isdigit():
                    i += 1
            if i < n and text[i] in "eE":
                j = i + 1
                if j < n and text[j] in "+-":
                    j += 1
                if j < n and text[j].isdigit():
                    is_float = True
                    i = j
                    while i < n and text[i].isdigit():
                        i += 1
            word = text[start:i]
            if is_float:
                tokens.append(Token("FLOAT", word, float(word), start))
            else:
                tokens.append(Token("INT", word, int(word), start))
            continue
        if ch in "'\"":
            quote = ch
            i += 1
            out = []
            while True:
                if i >= n:
                    raise GqlSyntaxError("unterminated string literal", byte_offset(text, start))
                c = text[i]
                if c == quote:
                    i += 1
                    break
                if c == "\\":
                    if i + 1 >= n or text[i + 1] not in ESCAPES:
                        raise GqlSyntaxError("bad escape in string literal", byte_offset(text, i))
                    out.append(ESCAPES[text[i + 1]])
                    i += 2
                    continue
                out.append(c)
                i += 1
            tokens.append(Token("STRING", text[start:i], "".join(out), start))
            continue
        two = text[i : i + 2]
        if two in TWO_CHAR_OPS:
            tokens.append(Token("OP", two, None, start))
            i += 2
            continue
        if ch in ONE_CHAR_TOKENS:
            tokens.append(Token("OP", ch, None, start))
            i += 1
            continue
        raise GqlSyntaxError(f"unexpected character {ch!r}", byte_offset(text, i))
    tokens.append(Token("EOF", "", None, n))
    return tokens


def _allowed_next(state: str, seen_return: bool) -> set:
    if state == "START":
        return {"MATCH"}
    if state == "MATCH":
        return {"MATCH", "WHERE", "WITH", "RETURN"}
    if state == "WHERE":
        return {"MATCH", "WITH", "RETURN"}
    if state == "WITH":
        return {"MATCH", "WHERE", "WITH", "RETURN", "ORDER BY", "LIMIT", "END"}
    if state == "RETURN":
        return {"ORDER BY", "LIMIT", "END"}
    if state == "ORDER BY":
        return {"LIMIT", "END"} if seen_return else {"LIMIT", "RETURN", "END"}
    if state == "LIMIT":
        return {"END"} if seen_return else {"RETURN", "MATCH", "WITH", "END"}
    raise AssertionError(state)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0

    # ------------------------------------------------------------ helpers

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str, tok: Token = None) -> GqlSyntaxError:
        tok = tok or self.peek()
        return GqlSyntaxError(message, byte_offset(self.text, tok.pos))

    def at_keyword(self, kw: str) -> bool:
        tok = self.peek()
        return tok.kind == "IDENT" and tok.text.upper() == kw

    def accept_keyword(self, kw: str) -> bool:
        if self.at_keyword(kw):
            self.advance()
            return True
        return False

    def expect_keyword(self, kw: str) -> Token:
        if not self.at_keyword(kw):
            raise self.error(f"expected {kw}")
        return self.advance()

    def accept_op(self, op: str) -> bool:
        tok = self.peek()
        if tok.kind == "OP" and tok.text == op:
            self.advance()
            return True
        return False

    def expect_op(self, op: str) -> Token:
        tok = self.peek()
        if tok.kind != "OP" or tok.text != op:
            raise self.error(f"expected {op!r}")
        return self.advance()

    def expect_ident(self, what: str) -> Token:
        tok = self.peek()
        if tok.kind != "IDENT":
            raise self.error(f"expected {what}")
        return self.advance()

    def expect_plain_ident(self, what: str) -> Token:
        # identifier position where keyword collisions would be ambiguous
        tok = self.expect_ident(what)
        if tok.text.upper() in KEYWORDS:
            raise self.error(f"{what} must not be a keyword: {tok.text!r}", tok)
        return tok

    def at_clause_boundary(self) -> bool:
        tok = self.peek()
        if tok.kind == "EOF":
            return True
        return tok.kind == "IDENT" and tok.text.upper() in CLAUSE_STARTERS

    # ------------------------------------------------------------ clauses

    def parse_query(self) -> GqlQuery:
        clauses = []
        state = "START"
        seen_return = False
        while True:
            tok = self.peek()
            if tok.kind == "EOF":
                kw = "END"
            elif tok.kind == "IDENT" and tok.text.upper() in CLAUSE_STARTERS:
                kw = tok.text.upper()
                if kw == "ORDER":
                    kw = "ORDER BY"
            else:
                raise self.error("expected a clause keyword")
            if kw not in _allowed_next(state, seen_return):
                if kw == "END":
                    raise self.error("query ends without a projection clause")
                raise self.error(f"{kw} cannot follow {state}" if state != "START" else f"query must start with MATCH, not {kw}")
            if kw == "END":
                break
            if kw == "MATCH":
                clauses.append(self.parse_match())
            elif kw == "WHERE":
                self.advance()
                clauses.append(WhereClause(self.parse_expr()))
            elif kw == "WITH":
                self.advance()
                clauses.append(WithClause(self.parse_proj_items()))
            elif kw == "RETURN":
                self.advance()
                clauses.append(ReturnClause(self.parse_proj_items()))
                seen_return = True
            elif kw == "ORDER BY":
                self.advance()
                self.expect_keyword("BY")
                clauses.append(OrderByClause(self.parse_order_keys()))
            elif kw == "LIMIT":
                self.advance()
                tok = self.peek()
                if tok.kind != "INT":
                    raise self.error("LIMIT expects a non-negative integer")
                self.advance()
                clauses.append(LimitClause(tok.value))
            state = kw
        return GqlQuery(tuple(clauses))

    def parse_match(self) -> MatchClause:
        self.expect_keyword("MATCH")
        paths = [self.parse_path()]
        while self.accept_op(","):
            paths.append(self.parse_path())
        return MatchClause(tuple(paths))

    def parse_path(self) -> PathPattern:
        elements = [self.parse_node_pattern()]
        while True:
            tok = self.peek()
            if tok.kind == "OP" and tok.text in ("-", "<"):
                elements.append(self.parse_edge_pattern())
                elements.append(self.parse_node_pattern())
            else:
                break
        return PathPattern(tuple(elements))

    def parse_node_pattern(self) -> NodePattern:
        self.expect_op("(")
        alias = self.expect_plain_ident("node alias").text
        self.expect_op(":")
        tag = self.expect_ident("node tag").text
        name_filter = None
        if self.accept_op("{"):
            key = self.expect_ident("filter key")
            if key.text != "name":
                raise self.error(f"only name filters are supported, got {key.text!r}", key)
            self.expect_op(":")
            tok = self.peek()
            if tok.kind != "STRING":
                raise self.error("name filter expects a string literal")
            self.advance()
            name_filter = tok.value
            self.expect_op("}")
        self.expect_op(")")
        return NodePattern(alias, tag, name_filter)

    def parse_edge_pattern(self) -> EdgePattern:
        if self.accept_op("<"):
            self.expect_op("-")
            alias, edge_type = self.parse_edge_body()
            self.expect_op("-")
            return EdgePattern(alias, edge_type, "in")
        self.expect_op("-")
        alias, edge_type = self.parse_edge_body()
        self.expect_op("-")
        self.expect_op(">")
        return EdgePattern(alias, edge_type, "out")

    def parse_edge_body(self):
        self.expect_op("[")
        alias = None
        if not self.accept_op(":"):
            alias = self.expect_plain_ident("edge alias").text
            self.expect_op(":")
        edge_type = self.expect_ident("edge type").text
        self.expect_op("]")
        return alias, edge_type

    def parse_proj_items(self) -> tuple:
        items = [self.parse_proj_item()]
        while self.accept_op(","):
            items.append(self.parse_proj_item())
        return tuple(items)

    def parse_proj_item(self) -> ProjItem:
        expr = self.parse_expr()
        alias = None
        if self.accept_keyword("AS"):
            alias = self.expect_plain_ident("AS alias").text
        return ProjItem(expr, alias)

    def parse_order_keys(self) -> tuple:
        keys = [self.parse_order_key()]
        while self.accept_op(","):
            keys.append(self.parse_order_key())
        return tuple(keys)

    def parse_order_key(self) -> OrderKey:
        expr = self.parse_expr()
        if self.accept_keyword("DESC"):
            return OrderKey(expr, True)
        self.accept_keyword("ASC")
        return OrderKey(expr, False)

    # -------------------------------------------------------- expressions

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        left = self.parse_and()
        while self.at_keyword("OR"):
            self.advance()
            left = Binary("OR", left, self.parse_and())
        return left

    def parse_and(self) -> Expr:
        left = self.parse_comparison()
        while self.at_keyword("AND"):
            self.advance()
            left = Binary("AND", left, self.parse_comparison())
        return left

    def parse_comparison(self) -> Expr:
        left = self.parse_sub()
        tok = self.peek()
        if tok.kind == "OP" and tok.text in ("=", "==", "!=", "<>", "<", ">", "<=", ">="):
            self.advance()
            op = {"==": "=", "<>": "!="}.get(tok.text, tok.text)
            return Binary(op, left, self.parse_sub())
        if self.at_keyword("CONTAINS"):
            self.advance()
            return Binary("CONTAINS", left, self.parse_sub())
        return left

    def parse_sub(self) -> Expr:
        left = self.parse_primary()
        while True:
            tok = self.peek()
            if tok.kind == "OP" and tok.text == "-":
                self.advance()
                left = Binary("-", left, self.parse_primary())
            else:
                break
        return left

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "OP" and tok.text == "(":
            self.advance()
            expr = self.parse_expr()
            self.expect_op(")")
            return expr
        if tok.kind == "OP" and tok.text == "-":
            # unary minus folds into a numeric literal
            self.advance()
            num = self.peek()
            if num.kind not in ("INT", "FLOAT"):
                raise self.error("unary minus expects a number")
            self.advance()
            return Literal(-num.value)
        if tok.kind in ("INT", "FLOAT", "STRING"):
            self.advance()
            return Literal(tok.value)
        if tok.kind == "IDENT":
            upper = tok.text.upper()
            if upper == "ABS":
                self.advance()
                self.expect_op("(")
                arg = self.parse_expr()
                self.expect_op(")")
                return Abs(arg)
            if upper == "TRUE":
                self.advance()
                return Literal(True)
            if upper == "FALSE":
                self.advance()
                return Literal(False)
            if upper in KEYWORDS:
                raise self.error("expected an expression")
            self.advance()
            name = tok.text
            if self.accept_op("."):
                second = self.expect_ident("property or tag").text
                if self.accept_op("."):
                    third = self.expect_ident("property name").text
                    return PropAccess(name, second, third)
                return EdgePropAccess(name, second)
            return VarRef(name)
        raise self.error("expected an expression")


# ------------------------------------------------------------------ binder


def _check_expr(e: Expr, scope: dict, where: str) -> None:
    if isinstance(e, Literal):
        return
    if isinstance(e, VarRef):
        binding = scope.get(e.name)
        if binding is None:
            raise GqlBindingError(f"{where}: unbound name {e.name!r}")
        if binding[0] != "value":
            raise GqlBindingError(
                f"{where}: {e.name!r} is a {binding[0]} alias, not a value; project a property instead"
            )
        return
    if isinstance(e, PropAccess):
        binding = scope.get(e.alias)
        if binding is None:
            raise GqlBindingError(f"{where}: unbound alias {e.alias!r}")
        if binding[0] != "node":
            raise GqlBindingError(f"{where}: {e.alias!r} is not a node alias")
        if binding[1] != e.tag:
            raise GqlBindingError(
                f"{where}: alias {e.alias!r} has tag {binding[1]!r}, not {e.tag!r}"
            )
        return
    if isinstance(e, EdgePropAccess):
        binding = scope.get(e.alias)
        if binding is None:
            raise GqlBindingError(f"{where}: unbound alias {e.alias!r}")
        if binding[0] != "edge":
            raise GqlBindingError(
                f"{where}: {e.alias!r} is not an edge alias; node properties need alias.tag.prop"
            )
        return
    if isinstance(e, Abs):
        _check_expr(e.arg, scope, where)
        return
    if isinstance(e, Binary):
        _check_expr(e.left, scope, where)
        _check_expr(e.right, scope, where)
        return
    raise TypeError(f"not an expression: {e!r}")


def validate_query(q: GqlQuery) -> None:
    """Check alias uniqueness, scoping, and ORDER BY resolvability.

    Scope rules: pattern aliases and AS names are globally unique; WITH
    resets the visible scope to its own projections; ORDER BY evaluates in
    the post-projection scope, or may repeat a projected expression
    verbatim.
    """
    defined = set()
    scope = {}
    post_projection = None  # (names scope, list of projected exprs)

    def define(name: str, binding: tuple, where: str) -> None:
        if name in defined:
            raise GqlBindingError(f"{where}: duplicate alias {name!r}")
        defined.add(name)
        scope[name] = binding

    for c in q.clauses:
        if isinstance(c, MatchClause):
            for p in c.paths:
                for el in p.elements:
                    if isinstance(el, NodePattern):
                        define(el.alias, ("node", el.tag), "MATCH")
                    elif el.alias:
                        define(el.alias, ("edge", el.edge_type), "MATCH")
            post_projection = None
        elif isinstance(c, WhereClause):
            _check_expr(c.expr, scope, "WHERE")
            post_projection = None
        elif isinstance(c, (WithClause, ReturnClause)):
            kw = "WITH" if isinstance(c, WithClause) else "RETURN"
            new_scope = {}
            exprs = []
            for item in c.items:
                _check_expr(item.expr, scope, kw)
                exprs.append(item.expr)
                if item.alias is not None:
                    if item.alias in defined:
                        raise GqlBindingError(f"{kw}: duplicate alias {item.alias!r}")
                    defined.add(item.alias)
                    new_scope[item.alias] = ("value",)
                elif isinstance(item.expr, VarRef):
                    new_scope[item.expr.name] = ("value",)
                elif isinstance(c, WithClause):
                    raise GqlBindingError("WITH item needs AS unless it is a bare name")
            post_projection = (new_scope, exprs)
            if isinstance(c, WithClause):
                scope = dict(new_scope)
        elif isinstance(c, OrderByClause):
            if post_projection is None:
                raise GqlBindingError("ORDER BY must follow WITH or RETURN")
            names, exprs = post_projection
            for key in c.keys:
                try:
                    _check_expr(key.expr, names, "ORDER BY")
                except GqlBindingError:
                    if key.expr not in exprs:
                        raise GqlBindingError(
                            "ORDER BY expression must reference projected names "
                            f"or repeat a projected expression: {key.expr!r}"
                        ) from None
        elif isinstance(c, LimitClause):
            if c.count < 0:
                raise GqlBindingError("LIMIT must be non-negative")


def parse(text: str) -> GqlQuery:
    """Parse and validate; the result round-trips through print_query."""
    parser = _Parser(text)
    query = parser.parse_query()
    validate_query(query)
    return query
