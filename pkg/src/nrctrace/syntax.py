"""Surface syntax: AST, lexer, parser, printer, name resolution and desugaring."""

from __future__ import annotations

import re
from collections.abc import Callable, Mapping
from dataclasses import dataclass

from .types import BOOL, INT, CollTy, RecTy, Type


class Expr:
    pass


@dataclass(frozen=True)
class SVar(Expr):
    name: str


@dataclass(frozen=True)
class SLabel(Expr):
    name: str


@dataclass(frozen=True)
class SInt(Expr):
    n: int


@dataclass(frozen=True)
class SBool(Expr):
    b: bool


@dataclass(frozen=True)
class SLet(Expr):
    x: str
    e1: Expr
    e2: Expr


@dataclass(frozen=True)
class SRecord(Expr):
    fields: tuple[tuple[str, Expr], ...]


@dataclass(frozen=True)
class SProj(Expr):
    e: Expr
    field: str


@dataclass(frozen=True)
class SNot(Expr):
    e: Expr


@dataclass(frozen=True)
class SAnd(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class SIf(Expr):
    c: Expr
    t: Expr
    f: Expr


@dataclass(frozen=True)
class SEmpty(Expr):
    """Empty collection; ty is the collection type when annotated."""

    ty: CollTy | None = None


@dataclass(frozen=True)
class SSingle(Expr):
    e: Expr


@dataclass(frozen=True)
class SUnion(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class SFor(Expr):
    x: str
    src: Expr
    body: Expr


@dataclass(frozen=True)
class SIsEmpty(Expr):
    e: Expr


@dataclass(frozen=True)
class SPlus(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class SEq(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class SSum(Expr):
    x: str
    src: Expr
    body: Expr


@dataclass(frozen=True)
class SCompr(Expr):
    """Comprehension sugar {body | x in src}."""

    body: Expr
    x: str
    src: Expr


KEYWORDS = frozenset(
    "let in if then else for sum true false union empty int bool".split()
)
IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_']*\Z")


def is_ident(name: str) -> bool:
    return bool(IDENT_RE.match(name)) and name not in KEYWORDS


class ParseError(Exception):
    def __init__(self, msg: str, line: int, col: int) -> None:
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


# Lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<label>@[A-Za-z0-9_'%]+)
  | (?P<int>-?[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>==|&&|[{}()\[\]:,.|!+=;])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # label, int, ident, kw, op, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            if kind == "ident" and s in KEYWORDS:
                kind = "kw"
            toks.append(Token(kind, s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rindex("\n") + 1
        pos = m.end()
    col = pos - line_start + 1
    toks.append(Token("eof", "", line, col))
    return toks


# Parser


class Parser:
    def __init__(self, text: str) -> None:
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "kw")

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        if self.tok.kind != "ident":
            raise self.error(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t.text

    def field_name(self) -> str:
        if self.tok.kind in ("ident", "int", "kw") and not self.tok.text.startswith("-"):
            t = self.tok
            self.i += 1
            return t.text
        raise self.error("expected field name")

    def parse_top(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")
        return e

    def expr(self) -> Expr:
        if self.at("let"):
            self.i += 1
            x = self.ident()
            self.expect("=")
            e1 = self.expr()
            self.expect("in")
            return SLet(x, e1, self.expr())
        if self.at("if"):
            self.i += 1
            c = self.expr()
            self.expect("then")
            t = self.expr()
            self.expect("else")
            return SIf(c, t, self.expr())
        if self.at("for") or self.at("sum"):
            kw = self.tok.text
            self.i += 1
            self.expect("(")
            x = self.ident()
            self.expect("in")
            src = self.expr()
            self.expect(")")
            body = self.expr()
            return SFor(x, src, body) if kw == "for" else SSum(x, src, body)
        return self.union()

    def _rhs(self, sub: Callable[[], Expr]) -> Expr:
        # binders in operand position extend as far right as possible
        if self.at("let") or self.at("if") or self.at("for") or self.at("sum"):
            return self.expr()
        return sub()

    def union(self) -> Expr:
        e = self.conj()
        while self.at("union"):
            self.i += 1
            e = SUnion(e, self._rhs(self.conj))
        return e

    def conj(self) -> Expr:
        e = self.equality()
        while self.at("&&"):
            self.i += 1
            e = SAnd(e, self._rhs(self.equality))
        return e

    def equality(self) -> Expr:
        e = self.additive()
        if self.at("=="):
            self.i += 1
            e = SEq(e, self._rhs(self.additive))
            if self.at("=="):
                raise self.error("'==' is not associative; add parentheses")
        return e

    def additive(self) -> Expr:
        e = self.unary()
        while self.at("+"):
            self.i += 1
            e = SPlus(e, self._rhs(self.unary))
        return e

    def unary(self) -> Expr:
        if self.at("!"):
            self.i += 1
            return SNot(self._rhs(self.unary))
        return self.postfix()

    def postfix(self) -> Expr:
        e = self.primary()
        while self.at("."):
            self.i += 1
            e = SProj(e, self.field_name())
        return e

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return SInt(int(t.text))
        if t.kind == "label":
            self.i += 1
            return SLabel(t.text[1:])
        if t.kind == "ident":
            self.i += 1
            return SVar(t.text)
        if self.at("true") or self.at("false"):
            self.i += 1
            return SBool(t.text == "true")
        if self.at("empty"):
            self.i += 1
            self.expect("(")
            e = self.expr()
            self.expect(")")
            return SIsEmpty(e)
        if self.at("("):
            self.i += 1
            e = self.expr()
            if self.at(":"):
                colon = self.tok
                self.i += 1
                ty = self.type_()
                if not isinstance(e, SEmpty):
                    raise self.error("type annotations are only allowed on {}", colon)
                if not isinstance(ty, CollTy):
                    raise self.error("{} must be annotated with a collection type", colon)
                e = SEmpty(ty)
            self.expect(")")
            return e
        if self.at("{"):
            return self.braces()
        if self.at("let") or self.at("if") or self.at("for") or self.at("sum"):
            return self.expr()
        raise self.error(f"unexpected {t.text or 'end of input'!r}")

    def braces(self) -> Expr:
        self.expect("{")
        if self.at("}"):
            self.i += 1
            return SEmpty()
        nxt = self.peek()
        if self.tok.kind in ("ident", "int", "kw") and nxt.text == ":" and nxt.kind == "op":
            fields: list[tuple[str, Expr]] = []
            while True:
                name_tok = self.tok
                name = self.field_name()
                if any(n == name for n, _ in fields):
                    raise self.error(f"duplicate field {name}", name_tok)
                self.expect(":")
                fields.append((name, self.expr()))
                if self.at(","):
                    self.i += 1
                    continue
                break
            self.expect("}")
            return SRecord(tuple(fields))
        e = self.expr()
        if self.at("|"):
            self.i += 1
            x = self.ident()
            self.expect("in")
            src = self.expr()
            self.expect("}")
            return SCompr(e, x, src)
        self.expect("}")
        return SSingle(e)

    def type_(self) -> Type:
        if self.at("int"):
            self.i += 1
            return INT
        if self.at("bool"):
            self.i += 1
            return BOOL
        if self.at("{"):
            self.i += 1
            t = self.type_()
            self.expect("}")
            return CollTy(t)
        if self.at("("):
            self.i += 1
            fields: list[tuple[str, Type]] = []
            while not self.at(")"):
                name = self.field_name()
                self.expect(":")
                fields.append((name, self.type_()))
                if not self.at(","):
                    break
                self.i += 1
            self.expect(")")
            try:
                return RecTy(tuple(fields))
            except ValueError as exc:
                raise self.error(str(exc)) from None
        raise self.error("expected a type")


def parse(text: str) -> Expr:
    return Parser(text).parse_top()


def parse_type(text: str) -> Type:
    p = Parser(text)
    t = p.type_()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r}")
    return t


# Printer


def type_str(t: Type) -> str:
    if isinstance(t, RecTy):
        return "(" + ", ".join(f"{n}: {type_str(f)}" for n, f in t.fields) + ")"
    if isinstance(t, CollTy):
        return "{" + type_str(t.elem) + "}"
    return str(t)


def label_str(name: str, bound: frozenset[str] = frozenset()) -> str:
    return name if is_ident(name) and name not in bound else "@" + name


_LEVEL = {SUnion: 1, SAnd: 2, SEq: 3, SPlus: 4, SNot: 5}


def _level(e: Expr) -> int:
    if isinstance(e, (SLet, SIf, SFor, SSum)):
        return 0
    return _LEVEL.get(type(e), 7)


def pretty(e: Expr, bound: frozenset[str] = frozenset()) -> str:
    def wrap(sub: Expr, need: int, b: frozenset[str]) -> str:
        s = pretty(sub, b)
        return f"({s})" if _level(sub) < need else s

    if isinstance(e, SVar):
        return e.name
    if isinstance(e, SLabel):
        return label_str(e.name, bound)
    if isinstance(e, SInt):
        return str(e.n)
    if isinstance(e, SBool):
        return "true" if e.b else "false"
    if isinstance(e, SLet):
        inner = bound | {e.x}
        return f"let {e.x} = {pretty(e.e1, bound)} in {pretty(e.e2, inner)}"
    if isinstance(e, SIf):
        return f"if {pretty(e.c, bound)} then {pretty(e.t, bound)} else {pretty(e.f, bound)}"
    if isinstance(e, (SFor, SSum)):
        kw = "for" if isinstance(e, SFor) else "sum"
        return f"{kw} ({e.x} in {pretty(e.src, bound)}) {pretty(e.body, bound | {e.x})}"
    if isinstance(e, SRecord):
        return "{" + ", ".join(f"{n}: {pretty(f, bound)}" for n, f in e.fields) + "}"
    if isinstance(e, SProj):
        return f"{wrap(e.e, 7, bound)}.{e.field}"
    if isinstance(e, SNot):
        return "!" + wrap(e.e, 5, bound)
    if isinstance(e, SEmpty):
        return "{}" if e.ty is None else f"({{}} : {type_str(e.ty)})"
    if isinstance(e, SSingle):
        return "{" + pretty(e.e, bound) + "}"
    if isinstance(e, SIsEmpty):
        return f"empty({pretty(e.e, bound)})"
    if isinstance(e, SCompr):
        return "{" + f"{pretty(e.body, bound | {e.x})} | {e.x} in {pretty(e.src, bound)}" + "}"
    ops = {SUnion: (" union ", 1), SAnd: (" && ", 2), SEq: (" == ", 3), SPlus: (" + ", 4)}
    if type(e) in ops:
        sym, lvl = ops[type(e)]
        # left-assoc: right operand of the same level needs parens, == is non-assoc
        return wrap(e.a, lvl + (1 if isinstance(e, SEq) else 0), bound) + sym + wrap(e.b, lvl + 1, bound)
    raise TypeError(e)


# Name resolution


class ResolveError(Exception):
    pass


def resolve(
    e: Expr,
    binds: Mapping[str, str] | None = None,
    root_fields: Mapping[str, str] | None = None,
    labels: Callable[[str], bool] | None = None,
    scope: frozenset[str] = frozenset(),
) -> Expr:
    """Turn free variables into labels: explicit binds, then root-record fields, then same-named labels."""
    binds = binds or {}
    root_fields = root_fields or {}

    def lookup(name: str) -> str:
        if name in binds:
            return binds[name]
        if name in root_fields:
            return root_fields[name]
        if labels is not None and labels(name):
            return name
        raise ResolveError(f"unbound name {name}")

    def go(e: Expr, scope: frozenset[str]) -> Expr:
        if isinstance(e, SVar):
            return e if e.name in scope else SLabel(lookup(e.name))
        if isinstance(e, SLet):
            return SLet(e.x, go(e.e1, scope), go(e.e2, scope | {e.x}))
        if isinstance(e, SFor):
            return SFor(e.x, go(e.src, scope), go(e.body, scope | {e.x}))
        if isinstance(e, SSum):
            return SSum(e.x, go(e.src, scope), go(e.body, scope | {e.x}))
        if isinstance(e, SCompr):
            return SCompr(go(e.body, scope | {e.x}), e.x, go(e.src, scope))
        return map_children(e, lambda c: go(c, scope))

    return go(e, frozenset(scope))


def map_children(e: Expr, f: Callable[[Expr], Expr]) -> Expr:
    if isinstance(e, (SVar, SLabel, SInt, SBool, SEmpty)):
        return e
    if isinstance(e, SLet):
        return SLet(e.x, f(e.e1), f(e.e2))
    if isinstance(e, SRecord):
        return SRecord(tuple((n, f(x)) for n, x in e.fields))
    if isinstance(e, SProj):
        return SProj(f(e.e), e.field)
    if isinstance(e, (SNot, SSingle, SIsEmpty)):
        return type(e)(f(e.e))
    if isinstance(e, (SAnd, SUnion, SPlus, SEq)):
        return type(e)(f(e.a), f(e.b))
    if isinstance(e, SIf):
        return SIf(f(e.c), f(e.t), f(e.f))
    if isinstance(e, (SFor, SSum)):
        return type(e)(e.x, f(e.src), f(e.body))
    if isinstance(e, SCompr):
        return SCompr(f(e.body), e.x, f(e.src))
    raise TypeError(e)


def desugar(e: Expr) -> Expr:
    if isinstance(e, SCompr):
        return SFor(e.x, desugar(e.src), SSingle(desugar(e.body)))
    return map_children(e, desugar)


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, SVar):
        return {e.name}
    if isinstance(e, SLet):
        return free_vars(e.e1) | (free_vars(e.e2) - {e.x})
    if isinstance(e, (SFor, SSum)):
        return free_vars(e.src) | (free_vars(e.body) - {e.x})
    if isinstance(e, SCompr):
        return free_vars(e.src) | (free_vars(e.body) - {e.x})
    out: set[str] = set()
    map_children(e, lambda c: out.update(free_vars(c)) or c)
    return out


def free_labels(e: Expr) -> set[str]:
    if isinstance(e, SLabel):
        return {e.name}
    out: set[str] = set()
    map_children(e, lambda c: out.update(free_labels(c)) or c)
    return out


def all_names(e: Expr) -> set[str]:
    """Every variable name occurring in e, bound or free."""
    out: set[str] = set()
    if isinstance(e, SVar):
        out.add(e.name)
    if isinstance(e, (SLet, SFor, SSum, SCompr)):
        out.add(e.x)
    map_children(e, lambda c: out.update(all_names(c)) or c)
    return out

