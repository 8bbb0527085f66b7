"""Backward and forward trace slicing, plus a readable simplified view."""

from __future__ import annotations

import re
from collections.abc import Iterable
from dataclasses import dataclass

from .store import (
    And,
    BoolC,
    BoolT,
    CollC,
    Constructor,
    Copy,
    EmptyT,
    Eq,
    IntC,
    IntT,
    IsEmpty,
    Not,
    Plus,
    RecordC,
    RecordT,
    Single,
    Store,
    Term,
    Union,
    flatten,
    lookup,
    op_eval,
    sum_ints,
    term_labels,
)
from .trace import Assign, CompT, Cond, Entry, Loop, ProjT, Seq, Trace, make_theta, out, out_star, seq, subtraces


class SliceError(Exception):
    pass


@dataclass(frozen=True)
class SliceCriterion:
    direction: str
    focus: frozenset[str]

    def __post_init__(self) -> None:
        if self.direction not in ("backward", "forward"):
            raise ValueError(f"unknown slice direction {self.direction!r}")


# Dependency graph: label -> labels it was computed from


def dependency_edges(T: Trace) -> dict[str, set[str]]:
    deps: dict[str, set[str]] = {}

    def add(l: str, srcs: Iterable[str]) -> None:
        deps.setdefault(l, set()).update(srcs)

    for node in subtraces(T):
        if isinstance(node, Assign):
            add(node.l, term_labels(node.t))
        elif isinstance(node, ProjT):
            add(node.l, [node.rec, node.fl])
        elif isinstance(node, Cond):
            add(node.l, [node.test])
        elif isinstance(node, Loop):
            add(node.l, [node.src] + [out(en.trace) for en in node.theta])
    return deps


def _close(graph: dict[str, set[str]], start: Iterable[str]) -> set[str]:
    seen = set(start)
    todo = list(seen)
    while todo:
        x = todo.pop()
        for y in graph.get(x, ()):
            if y not in seen:
                seen.add(y)
                todo.append(y)
    return seen


def backward_closure(T: Trace, focus: Iterable[str]) -> set[str]:
    return _close(dependency_edges(T), focus)


def forward_closure(T: Trace, sources: Iterable[str]) -> set[str]:
    inverse: dict[str, set[str]] = {}
    for l, srcs in dependency_edges(T).items():
        for s in srcs:
            inverse.setdefault(s, set()).add(l)
    return _close(inverse, sources)


def _known_labels(T: Trace) -> set[str]:
    known = set()
    for l, srcs in dependency_edges(T).items():
        known.add(l)
        known |= srcs
    for node in subtraces(T):
        if isinstance(node, Loop):
            known |= {en.label for en in node.theta}
    return known


def _check_focus(T: Trace, focus: Iterable[str], store: Iterable[str] = ()) -> frozenset[str]:
    focus = frozenset(focus)
    unknown = focus - _known_labels(T) - set(store)
    if unknown:
        raise SliceError(f"labels not in the trace: {', '.join(sorted(unknown))}")
    return focus


# Pruning


def _is_leaf(T: Trace) -> bool:
    return isinstance(T, (Assign, ProjT))


def _prune(T: Trace, keep: set[str]) -> Trace | None:
    """Keep leaves writing a label in `keep`; Cond and loop nodes survive as containers."""
    if _is_leaf(T):
        return T if T.l in keep else None
    if isinstance(T, Seq):
        parts = [p for p in (_prune(T.t1, keep), _prune(T.t2, keep)) if p is not None]
        return seq(parts) if parts else None
    if isinstance(T, Cond):
        body = _prune(T.body, keep)
        if body is None:
            return None
        return Cond(T.l, T.test, T.b, body, T.et, T.ef)
    if isinstance(T, Loop):
        theta = []
        for en in T.theta:
            sub = _prune(en.trace, keep)
            if sub is not None:
                theta.append(Entry(en.label, sub, en.m))
        if not theta and T.l not in keep:
            return None
        return type(T)(T.l, T.src, make_theta(theta), T.x, T.body)
    raise TypeError(T)


def _conds_with_kept(T: Trace, keep: set[str]) -> set[str]:
    found = set()
    for node in subtraces(T):
        if isinstance(node, Cond) and any(_is_leaf(n) and n.l in keep for n in subtraces(node.body)):
            found.add(node.l)
    return found


def _backward_keep(T: Trace, focus: Iterable[str]) -> set[str]:
    graph = dependency_edges(T)
    keep = _close(graph, focus)
    while True:
        extra = _conds_with_kept(T, keep) - keep
        if not extra:
            return keep
        keep = _close(graph, keep | extra)


def backward_slice(T: Trace, focus: Iterable[str], store: Iterable[str] = ()) -> Trace | None:
    """Nodes the focus labels depend on, plus the decisions that led to them. None if nothing remains."""
    focus = _check_focus(T, focus, store)
    return _prune(T, _backward_keep(T, focus))


def replay_slice(sigma: Store, S: Trace, focus: Iterable[str]) -> dict[str, Constructor]:
    """Recompute a backward slice over sigma, which must bind every label the slice reads.

    A loop kept only to hold retained entries does not rewrite its own label, since
    the entries it would need may have been dropped.
    """
    st = dict(sigma)
    _replay(st, S, _backward_keep(S, focus))
    return st


def _replay(st: dict[str, Constructor], T: Trace, keep: set[str]) -> None:
    if isinstance(T, Assign):
        st[T.l] = op_eval(T.t, st)
    elif isinstance(T, ProjT):
        rec = lookup(st, T.rec)
        if not isinstance(rec, RecordC):
            raise SliceError(f"{T.rec} is not a record")
        st[T.l] = lookup(st, rec.get(T.field))
    elif isinstance(T, Seq):
        _replay(st, T.t1, keep)
        _replay(st, T.t2, keep)
    elif isinstance(T, Cond):
        if lookup(st, T.test) != BoolC(T.b):
            raise SliceError(f"test {T.test} no longer takes the recorded branch")
        _replay(st, T.body, keep)
    elif isinstance(T, Loop):
        for en in T.theta:
            _replay(st, en.trace, keep)
        if T.l in keep:
            L = out_star(T.theta)
            st[T.l] = CollC(flatten(st, L)) if isinstance(T, CompT) else IntC(sum_ints(st, L))
    else:
        raise TypeError(T)


def forward_slice(T: Trace, sources: Iterable[str], store: Iterable[str] = ()) -> Trace | None:
    """Nodes reachable from the source labels. None if nothing is affected."""
    sources = _check_focus(T, sources, store)
    keep = forward_closure(T, sources) - set(sources)
    return _prune(T, keep)


def slice_trace(T: Trace, crit: SliceCriterion, store: Iterable[str] = ()) -> Trace | None:
    if crit.direction == "backward":
        return backward_slice(T, crit.focus, store)
    return forward_slice(T, crit.focus, store)


def is_subtrace(small: Trace | None, big: Trace) -> bool:
    """small is big with some nodes removed."""
    if small is None:
        return True
    if _is_leaf(small):
        return any(n == small for n in _leaves(big))
    return _sub(small, big)


def _leaves(T: Trace) -> list[Trace]:
    return [n for n in subtraces(T) if _is_leaf(n)]


def _sub(a: Trace, b: Trace) -> bool:
    from .trace import flatten_seq

    items_a, items_b = flatten_seq(a), flatten_seq(b)
    j = 0
    for x in items_a:
        while j < len(items_b) and not _node_sub(x, items_b[j]):
            j += 1
        if j == len(items_b):
            return False
        j += 1
    return True


def _node_sub(a: Trace, b: Trace) -> bool:
    if _is_leaf(a):
        return a == b
    if isinstance(a, Cond) and isinstance(b, Cond):
        return (a.l, a.test, a.b) == (b.l, b.test, b.b) and _sub(a.body, b.body)
    if isinstance(a, Loop) and type(a) is type(b):
        if (a.l, a.src) != (b.l, b.src):
            return False
        bmap = {en.label: en for en in b.theta}
        return all(en.label in bmap and en.m == bmap[en.label].m and _sub(en.trace, bmap[en.label].trace) for en in a.theta)
    return False


# Simplified view


class RExpr:
    prec = 9


@dataclass(frozen=True)
class RLab(RExpr):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class RConst(RExpr):
    text: str

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class ROp(RExpr):
    op: str
    args: tuple[RExpr, ...]

    @property
    def prec(self) -> int:
        return {"U": 1, "&&": 2, "=": 3, "+": 4, "!": 5, "empty": 5}[self.op]

    def __str__(self) -> str:
        def wrap(a: RExpr) -> str:
            return f"({a})" if a.prec <= self.prec and a.prec < 9 else str(a)

        if self.op in ("!", "empty"):
            return f"{self.op}{wrap(self.args[0])}" if self.op == "!" else f"empty({self.args[0]})"
        if not self.args:
            return "{}" if self.op == "U" else "0"
        return f" {self.op} ".join(wrap(a) for a in self.args)


@dataclass(frozen=True)
class RRecord(RExpr):
    fields: tuple[tuple[str, RExpr], ...]

    def __str__(self) -> str:
        return "(" + ",".join(f"{n}:{v}" for n, v in self.fields) + ")"


@dataclass(frozen=True)
class RSingle(RExpr):
    elem: RExpr

    def __str__(self) -> str:
        return "{" + str(self.elem) + "}"


_BINOP = {Plus: "+", Eq: "=", And: "&&", Union: "U"}


def _term_expr(t: Term, env: dict[str, RExpr]) -> RExpr:
    def at(a) -> RExpr:
        return env.get(a.name, RLab(a.name))

    if isinstance(t, IntT):
        return RConst(str(t.n))
    if isinstance(t, BoolT):
        return RConst("true" if t.b else "false")
    if isinstance(t, EmptyT):
        return ROp("U", ())
    if isinstance(t, Copy):
        return at(t.a)
    if isinstance(t, Not):
        return ROp("!", (at(t.a),))
    if isinstance(t, IsEmpty):
        return ROp("empty", (at(t.a),))
    if isinstance(t, Single):
        return RSingle(at(t.a))
    if type(t) in _BINOP:
        return ROp(_BINOP[type(t)], (at(t.a), at(t.b)))
    if isinstance(t, RecordT):
        return RRecord(tuple((n, at(a)) for n, a in t.fields))
    raise TypeError(t)


_SCALAR = (IntT, BoolT, Copy, Not, IsEmpty, Plus, Eq, And)


class View:
    pass


@dataclass(frozen=True)
class VAssign(View):
    l: str
    expr: RExpr

    def render(self, indent: int) -> str:
        return f"{self.l} <- {self.expr}"


@dataclass(frozen=True)
class VCond(View):
    test: RExpr
    b: bool
    body: tuple[View, ...]

    def render(self, indent: int) -> str:
        head = f"cond({self.test}, {'t' if self.b else 'f'}, "
        return head + _render_items(self.body, indent + len(head)) + ")"


@dataclass(frozen=True)
class VLoop(View):
    kind: str
    l: str
    src: str
    entries: tuple[tuple[str, tuple[View, ...], int], ...]

    def render(self, indent: int) -> str:
        head = f"{self.l} <- {self.kind}({self.src}, {{"
        lines = []
        for label, items, m in self.entries:
            tag = f"[{label}] "
            body = _render_items(items, indent + len(head) + len(tag))
            lines.append(tag + body + (f" : {m}" if m != 1 else ""))
        return head + (",\n" + " " * (indent + len(head))).join(lines) + "})"


def _render_items(items: tuple[View, ...], indent: int) -> str:
    return (";\n" + " " * indent).join(v.render(indent) for v in items)


@dataclass(frozen=True)
class SimplifiedView:
    items: tuple[View, ...]

    def __str__(self) -> str:
        return _render_items(self.items, 0)


def simplify(T: Trace) -> SimplifiedView:
    """Inline projections and scalar steps, keeping constructors, decisions and loops."""
    env: dict[str, RExpr] = {}
    return SimplifiedView(tuple(_simp(T, env, keep_out=True)))


def _simp(T: Trace, env: dict[str, RExpr], keep_out: bool) -> list[View]:
    from .trace import flatten_seq

    parts = flatten_seq(T)
    views: list[View] = []
    for i, node in enumerate(parts):
        is_out = keep_out and i == len(parts) - 1
        if isinstance(node, ProjT):
            e = env.get(node.fl, RLab(node.fl))
            env[node.l] = e
            if is_out:
                views.append(VAssign(node.l, e))
        elif isinstance(node, Assign):
            e = _term_expr(node.t, env)
            if isinstance(node.t, _SCALAR) and not is_out:
                env[node.l] = e
            else:
                views.append(VAssign(node.l, e))
        elif isinstance(node, Cond):
            test = env.get(node.test, RLab(node.test))
            body = _simp(node.body, env, keep_out=True)
            views.append(VCond(test, node.b, tuple(body)))
        elif isinstance(node, Loop):
            kind = "comp" if isinstance(node, CompT) else "sum"
            entries = tuple((en.label, tuple(_simp(en.trace, env, keep_out=True)), en.m) for en in node.theta)
            views.append(VLoop(kind, node.l, node.src, entries))
        else:
            raise TypeError(node)
    return views


def residue(T: Trace, label: str | None = None) -> RExpr:
    """An expression over input labels computing `label` (default out(T)) along the recorded path."""
    defs: dict[str, Trace] = {}
    for node in subtraces(T):
        if isinstance(node, (Assign, ProjT, Loop)):
            defs[node.l] = node
    memo: dict[str, RExpr] = {}

    def go(l: str) -> RExpr:
        if l not in memo:
            memo[l] = _residue_of(defs.get(l), l, go)
        return memo[l]

    return go(label if label is not None else out(T))


class _Lazy(dict):
    """Label environment that resolves every label through a function."""

    def __init__(self, f) -> None:
        super().__init__()
        self.f = f

    def get(self, key, default=None):
        return self.f(key)


def _residue_of(node: Trace | None, l: str, go) -> RExpr:
    if node is None:
        return RLab(l)
    if isinstance(node, ProjT):
        return go(node.fl)
    if isinstance(node, Assign):
        r = _term_expr(node.t, _Lazy(go))
        return _union(list(r.args)) if isinstance(r, ROp) and r.op == "U" else r
    parts = [go(out(en.trace)) for en in node.theta for _ in range(en.m)]
    if isinstance(node, CompT):
        return _union(parts)
    parts = [p for p in parts if p != RConst("0")]
    if not parts:
        return RConst("0")
    return parts[0] if len(parts) == 1 else ROp("+", tuple(parts))


def _union(parts: list[RExpr]) -> RExpr:
    flat: list[RExpr] = []
    for p in parts:
        if isinstance(p, ROp) and p.op == "U":
            flat.extend(p.args)
        else:
            flat.append(p)
    return flat[0] if len(flat) == 1 else ROp("U", tuple(flat))


# Comparing rendered text up to renaming of computed labels

_TOKEN = re.compile(r"[A-Za-z_%][A-Za-z0-9_'%]*|<-|\S")
_KEYWORDS = {"comp", "sum", "cond", "t", "f", "true", "false", "U", "union", "empty"}


def canonical_form(text: str, frontier: Iterable[str]) -> str:
    """Whitespace-free text with every label outside the frontier renamed by first occurrence."""
    frontier = set(frontier)
    text = text.replace("==", "=").replace(" union ", " U ")
    toks = _TOKEN.findall(text)
    names: dict[str, str] = {}
    outp = []
    for i, tok in enumerate(toks):
        ident = re.fullmatch(r"[A-Za-z_%][A-Za-z0-9_'%]*", tok) is not None
        field = i + 1 < len(toks) and toks[i + 1] == ":" and i > 0 and toks[i - 1] in "(,"
        if ident and tok not in _KEYWORDS and tok not in frontier and not field and not tok.startswith("proj_"):
            tok = names.setdefault(tok, f"#{len(names)}")
        outp.append(tok)
    return " ".join(outp)
