"""Trace text format (printer and parser), lossless JSON, and DOT export."""

from __future__ import annotations

import re

from .core import CoreExpr, parse_core, pretty
from .store import (
    And,
    BoolT,
    Copy,
    EmptyT,
    Eq,
    IntT,
    IsEmpty,
    Lab,
    Not,
    Plus,
    RecordT,
    Single,
    Term,
    Union,
    term_labels,
)
from .trace import Assign, CompT, Cond, Entry, Loop, ProjT, Seq, SumT, Trace, flatten_seq, make_theta, out
from .types import type_from_json, type_to_json

LABEL_RE = re.compile(r"[A-Za-z_%][A-Za-z0-9_'%]*")
_RESERVED = frozenset({"true", "false", "union", "U"})


def label_text(l: str) -> str:
    return "@" + l if l in _RESERVED else l


def term_text(t: Term) -> str:
    L = [label_text(x) for x in term_labels(t)]
    if isinstance(t, Copy):
        return L[0]
    if isinstance(t, IntT):
        return str(t.n)
    if isinstance(t, BoolT):
        return "true" if t.b else "false"
    if isinstance(t, Plus):
        return f"{L[0]} + {L[1]}"
    if isinstance(t, Eq):
        return f"{L[0]} == {L[1]}"
    if isinstance(t, And):
        return f"{L[0]} && {L[1]}"
    if isinstance(t, Union):
        return f"{L[0]} union {L[1]}"
    if isinstance(t, Not):
        return f"!{L[0]}"
    if isinstance(t, IsEmpty):
        return f"empty({L[0]})"
    if isinstance(t, Single):
        return "{" + L[0] + "}"
    if isinstance(t, EmptyT):
        return "{}"
    if isinstance(t, RecordT):
        return "(" + ",".join(f"{n}:{label_text(a.name)}" for n, a in t.fields) + ")"
    raise TypeError(t)


def trace_text(T: Trace, indent: int = 0, exprs: bool = True) -> str:
    """Render T; exprs=False drops the stored branch and body expressions."""
    pad = " " * indent
    parts = flatten_seq(T)
    if len(parts) > 1:
        return (";\n" + pad).join(trace_text(p, indent, exprs) for p in parts)
    if isinstance(T, Assign):
        return f"{label_text(T.l)} <- {term_text(T.t)}"
    if isinstance(T, ProjT):
        return f"{label_text(T.l)} <- proj_{T.field}({label_text(T.rec)},{label_text(T.fl)})"
    if isinstance(T, Cond):
        head = f"cond({label_text(T.test)}, {'t' if T.b else 'f'}, "
        body = trace_text(T.body, indent + len(head), exprs)
        alts = ""
        if exprs and T.et is not None and T.ef is not None:
            alts = f" | {pretty(T.et)} | {pretty(T.ef)}"
        return f"{head}{body}{alts}) @ {label_text(T.l)}"
    if isinstance(T, Loop):
        kw = "comp" if isinstance(T, CompT) else "sum"
        head = f"{label_text(T.l)} <- {kw}({label_text(T.src)}, {{"
        lines = []
        for en in T.theta:
            tag = f"[{label_text(en.label)}] "
            body = trace_text(en.trace, indent + 2 + len(tag), exprs)
            mult = f" : {en.m}" if en.m != 1 else ""
            lines.append(f"{pad}  {tag}{body}{mult}")
        inner = ("\n" + ",\n".join(lines) + "}") if lines else "}"
        tail = f", {T.x}. {pretty(T.body, frozenset({T.x}))}" if exprs and T.body is not None and T.x is not None else ""
        return f"{head}{inner}{tail})"
    raise TypeError(T)


class TraceSyntaxError(Exception):
    pass


class _P:
    def __init__(self, text: str) -> None:
        self.s = text
        self.i = 0

    def err(self, msg: str) -> TraceSyntaxError:
        line = self.s.count("\n", 0, self.i) + 1
        col = self.i - (self.s.rfind("\n", 0, self.i) + 1) + 1
        return TraceSyntaxError(f"{line}:{col}: {msg}")

    def ws(self) -> None:
        while self.i < len(self.s) and self.s[self.i].isspace():
            self.i += 1

    def looking(self, lit: str) -> bool:
        self.ws()
        return self.s.startswith(lit, self.i)

    def word(self, w: str) -> bool:
        self.ws()
        if self.s.startswith(w, self.i):
            j = self.i + len(w)
            if j >= len(self.s) or not re.match(r"[A-Za-z0-9_'%]", self.s[j]):
                return True
        return False

    def take(self, lit: str) -> None:
        if not self.looking(lit):
            near = self.s[self.i : self.i + 12]
            raise self.err(f"expected {lit!r} near {near!r}")
        self.i += len(lit)

    def label(self) -> str:
        self.ws()
        if self.s.startswith("@", self.i):
            self.i += 1
        m = LABEL_RE.match(self.s, self.i)
        if not m:
            raise self.err("expected a label")
        self.i = m.end()
        return m.group()

    def integer(self) -> int:
        self.ws()
        m = re.compile(r"-?[0-9]+").match(self.s, self.i)
        if not m:
            raise self.err("expected an integer")
        self.i = m.end()
        return int(m.group())

    def expr_until(self, stops: str, bound: frozenset[str] = frozenset()) -> CoreExpr:
        self.ws()
        depth, j = 0, self.i
        while j < len(self.s):
            c = self.s[j]
            if depth == 0 and c in stops:
                break
            if c in "({[":
                depth += 1
            elif c in ")}]":
                depth -= 1
            j += 1
        text = self.s[self.i : j]
        self.i = j
        try:
            return parse_core(text, bound=bound)
        except Exception as exc:
            raise self.err(f"bad expression {text.strip()!r}: {exc}") from None

    def trace(self) -> Trace:
        items = [self.item()]
        while self.looking(";"):
            self.i += 1
            self.ws()
            if self.i >= len(self.s) or self.s[self.i] in "}),|:":
                break
            items.append(self.item())
        t = items[-1]
        for p in reversed(items[:-1]):
            t = Seq(p, t)
        return t

    def item(self) -> Trace:
        if self.looking("cond("):
            return self.cond()
        l = self.label()
        self.take("<-")
        self.ws()
        m = re.compile(r"proj_([A-Za-z0-9_']+)\(").match(self.s, self.i)
        if m:
            self.i = m.end()
            rec = self.label()
            self.take(",")
            fl = self.label()
            self.take(")")
            return ProjT(l, m.group(1), rec, fl)
        for kw, ctor in (("comp(", CompT), ("sum(", SumT)):
            if self.looking(kw):
                self.i += len(kw)
                return self.loop(l, ctor)
        return Assign(l, self.term())

    def term(self) -> Term:
        self.ws()
        if re.match(r"-?[0-9]", self.s[self.i : self.i + 2]):
            return IntT(self.integer())
        if self.word("true") or self.word("false"):
            b = self.s.startswith("true", self.i)
            self.i += 4 if b else 5
            return BoolT(b)
        if self.looking("{"):
            self.i += 1
            if self.looking("}"):
                self.i += 1
                return EmptyT()
            a = self.label()
            self.take("}")
            return Single(Lab(a))
        if self.looking("("):
            self.i += 1
            fields = []
            while not self.looking(")"):
                self.ws()
                m = re.compile(r"[A-Za-z0-9_']+").match(self.s, self.i)
                if not m:
                    raise self.err("expected a field name")
                self.i = m.end()
                self.take(":")
                fields.append((m.group(), Lab(self.label())))
                if not self.looking(","):
                    break
                self.i += 1
            self.take(")")
            return RecordT(tuple(fields))
        if self.looking("!"):
            self.i += 1
            return Not(Lab(self.label()))
        if self.looking("empty("):
            self.i += len("empty(")
            a = self.label()
            self.take(")")
            return IsEmpty(Lab(a))
        a = Lab(self.label())
        for op, ctor in (("==", Eq), ("=", Eq), ("+", Plus), ("&&", And)):
            if self.looking(op):
                self.i += len(op)
                return ctor(a, Lab(self.label()))
        if self.word("union") or self.word("U"):
            self.i += 5 if self.s.startswith("union", self.i) else 1
            return Union(a, Lab(self.label()))
        return Copy(a)

    def cond(self) -> Trace:
        self.take("cond(")
        test = self.label()
        self.take(",")
        self.ws()
        m = re.compile(r"(true|false|t|f)\b").match(self.s, self.i)
        if not m:
            raise self.err("expected t or f")
        self.i = m.end()
        b = m.group(1) in ("t", "true")
        self.take(",")
        body = self.trace()
        et = ef = None
        if self.looking("|"):
            self.i += 1
            et = self.expr_until("|")
            self.take("|")
            ef = self.expr_until(")")
        self.take(")")
        l = out(body)
        if self.looking("@"):
            self.i += 1
            l = self.label()
        return Cond(l, test, b, body, et, ef)

    def loop(self, l: str, ctor) -> Trace:
        src = self.label()
        self.take(",")
        self.take("{")
        entries = []
        while not self.looking("}"):
            self.take("[")
            li = self.label()
            self.take("]")
            T = self.trace()
            m = 1
            if self.looking(":"):
                self.i += 1
                m = self.integer()
            entries.append(Entry(li, T, m))
            if not self.looking(","):
                break
            self.i += 1
        self.take("}")
        x = body = None
        if self.looking(","):
            self.i += 1
            self.ws()
            mm = re.compile(r"[A-Za-z_][A-Za-z0-9_']*").match(self.s, self.i)
            if not mm:
                raise self.err("expected a bound variable")
            x = mm.group()
            self.i = mm.end()
            self.take(".")
            body = self.expr_until(")", frozenset({x}))
        self.take(")")
        try:
            theta = make_theta(entries)
        except ValueError as exc:
            raise self.err(str(exc)) from None
        return ctor(l, src, theta, x, body)


def parse_trace(text: str) -> Trace:
    p = _P(text)
    T = p.trace()
    p.ws()
    if p.i != len(p.s):
        raise p.err(f"unexpected {p.s[p.i:p.i + 12]!r}")
    return T


# JSON

_TERM_KINDS = {
    Copy: "copy",
    Plus: "plus",
    Eq: "eq",
    And: "and",
    Not: "not",
    Union: "union",
    Single: "single",
    IsEmpty: "isempty",
}
_KIND_TERMS = {v: k for k, v in _TERM_KINDS.items()}


def term_to_json(t: Term) -> dict:
    if isinstance(t, IntT):
        return {"kind": "int", "value": t.n}
    if isinstance(t, BoolT):
        return {"kind": "bool", "value": t.b}
    if isinstance(t, EmptyT):
        return {"kind": "empty", "elem": None if t.elem is None else type_to_json(t.elem)}
    if isinstance(t, RecordT):
        return {"kind": "record", "fields": [[n, a.name] for n, a in t.fields]}
    return {"kind": _TERM_KINDS[type(t)], "args": term_labels(t)}


def term_from_json(obj: dict) -> Term:
    k = obj["kind"]
    if k == "int":
        return IntT(int(obj["value"]))
    if k == "bool":
        return BoolT(bool(obj["value"]))
    if k == "empty":
        return EmptyT(None if obj.get("elem") is None else type_from_json(obj["elem"]))
    if k == "record":
        return RecordT(tuple((n, Lab(a)) for n, a in obj["fields"]))
    return _KIND_TERMS[k](*(Lab(a) for a in obj["args"]))


def _expr_json(e: CoreExpr | None, bound: frozenset[str] = frozenset()) -> str | None:
    return None if e is None else pretty(e, bound)


def _expr_from(s: str | None, bound: frozenset[str] = frozenset()) -> CoreExpr | None:
    return None if s is None else parse_core(s, bound=bound)


def trace_to_json(T: Trace) -> dict:
    if isinstance(T, Seq):
        return {"node": "seq", "items": [trace_to_json(p) for p in flatten_seq(T)]}
    if isinstance(T, Assign):
        return {"node": "assign", "l": T.l, "term": term_to_json(T.t)}
    if isinstance(T, ProjT):
        return {"node": "proj", "l": T.l, "field": T.field, "rec": T.rec, "fl": T.fl}
    if isinstance(T, Cond):
        return {
            "node": "cond",
            "l": T.l,
            "test": T.test,
            "b": T.b,
            "body": trace_to_json(T.body),
            "et": _expr_json(T.et),
            "ef": _expr_json(T.ef),
        }
    if isinstance(T, Loop):
        return {
            "node": "comp" if isinstance(T, CompT) else "sum",
            "l": T.l,
            "src": T.src,
            "theta": [{"in": en.label, "m": en.m, "trace": trace_to_json(en.trace)} for en in T.theta],
            "x": T.x,
            "body": _expr_json(T.body, frozenset({T.x} if T.x else ())),
        }
    raise TypeError(T)


def trace_from_json(obj: dict) -> Trace:
    n = obj["node"]
    if n == "seq":
        items = [trace_from_json(p) for p in obj["items"]]
        t = items[-1]
        for p in reversed(items[:-1]):
            t = Seq(p, t)
        return t
    if n == "assign":
        return Assign(obj["l"], term_from_json(obj["term"]))
    if n == "proj":
        return ProjT(obj["l"], obj["field"], obj["rec"], obj["fl"])
    if n == "cond":
        return Cond(
            obj["l"], obj["test"], bool(obj["b"]), trace_from_json(obj["body"]), _expr_from(obj["et"]), _expr_from(obj["ef"])
        )
    if n in ("comp", "sum"):
        theta = make_theta(Entry(en["in"], trace_from_json(en["trace"]), int(en["m"])) for en in obj["theta"])
        ctor = CompT if n == "comp" else SumT
        x = obj.get("x")
        return ctor(obj["l"], obj["src"], theta, x, _expr_from(obj.get("body"), frozenset({x} if x else ())))
    raise ValueError(f"unknown trace node {n!r}")


# DOT


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def trace_dot(T: Trace, dimmed: set[str] | None = None) -> str:
    """Labels as nodes, data-flow edges, one cluster per cond or loop node."""
    dimmed = dimmed or set()
    lines = ["digraph trace {", "  rankdir=LR;", "  node [shape=box, fontname=monospace];"]
    nodes: set[str] = set()
    edges: list[tuple[str, str, str]] = []
    counter = [0]

    def node(l: str) -> None:
        nodes.add(l)

    def walk(T: Trace, ind: str) -> list[str]:
        body: list[str] = []
        for p in flatten_seq(T):
            if isinstance(p, Assign):
                node(p.l)
                body.append(f"{ind}{_q(p.l)};")
                for a in term_labels(p.t):
                    node(a)
                    edges.append((a, p.l, ""))
            elif isinstance(p, ProjT):
                node(p.l)
                body.append(f"{ind}{_q(p.l)};")
                edges.append((p.rec, p.l, f"proj_{p.field}"))
                edges.append((p.fl, p.l, ""))
                node(p.rec)
                node(p.fl)
            elif isinstance(p, Cond):
                counter[0] += 1
                body.append(f"{ind}subgraph cluster_{counter[0]} {{")
                caption = f"cond {p.test}={'t' if p.b else 'f'}"
                body.append(f"{ind}  label={_q(caption)};")
                body.extend(walk(p.body, ind + "  "))
                body.append(f"{ind}}}")
                node(p.test)
                edges.append((p.test, p.l, "test"))
            elif isinstance(p, Loop):
                counter[0] += 1
                kw = "comp" if isinstance(p, CompT) else "sum"
                body.append(f"{ind}subgraph cluster_{counter[0]} {{")
                body.append(f"{ind}  label={_q(f'{kw} over {p.src}')};")
                for en in p.theta:
                    body.extend(walk(en.trace, ind + "  "))
                    edges.append((out(en.trace), p.l, f"[{en.label}]"))
                body.append(f"{ind}}}")
                node(p.l)
                node(p.src)
                body.append(f"{ind}{_q(p.l)};")
                edges.append((p.src, p.l, kw))
        return body

    body = walk(T, "  ")
    for l in sorted(nodes):
        style = ', style=dashed, color=gray, fontcolor=gray' if l in dimmed else ""
        lines.append(f"  {_q(l)} [label={_q(l)}{style}];")
    lines.extend(body)
    for a, b, lab in edges:
        attr = f" [label={_q(lab)}]" if lab else ""
        lines.append(f"  {_q(a)} -> {_q(b)}{attr};")
    lines.append("}")
    return "\n".join(lines) + "\n"
