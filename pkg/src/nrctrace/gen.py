"""Random well-typed stores and programs for property tests."""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import syntax as S
from .core import CoreExpr, anormalize
from .store import BoolC, CollC, Constructor, IntC, LabelMultiset, RecordC
from .types import BOOL, INT, CollTy, RecTy, Type

ROW = RecTy((("A", INT), ("B", INT)))
ROWS = CollTy(ROW)
INTS = CollTy(INT)
NESTED = CollTy(INTS)
ELEM_TYPES = (INT, ROW, INTS)


@dataclass(frozen=True)
class Case:
    """One random program together with the store it runs against."""

    sigma: dict[str, Constructor]
    inputs: dict[str, Type]
    surface: S.Expr
    core: CoreExpr
    ty: Type


def random_store(rng: random.Random, max_labels: int = 12) -> tuple[dict[str, Constructor], dict[str, Type]]:
    """Ints, a bool, a table of rows and a bag of ints, sharing labels; at most max_labels labels."""
    sigma: dict[str, Constructor] = {}
    n_ints = rng.randint(2, 4)
    ints = [f"i{k}" for k in range(1, n_ints + 1)]
    for l in ints:
        sigma[l] = IntC(rng.randint(-2, 5))
    sigma["b1"] = BoolC(rng.random() < 0.5)
    n_rows = rng.randint(1, min(3, max_labels - len(sigma) - 2))
    rows = []
    for k in range(1, n_rows + 1):
        rl = f"row{k}"
        sigma[rl] = RecordC((("A", rng.choice(ints)), ("B", rng.choice(ints))))
        rows.append((rl, rng.choice([1, 1, 1, 2])))
    sigma["t"] = CollC(LabelMultiset.of(rows))
    picks = rng.sample(ints, rng.randint(0, len(ints)))
    sigma["c"] = CollC(LabelMultiset.of((l, rng.choice([1, 1, 2, 3])) for l in picks))
    assert len(sigma) <= max_labels
    inputs = {l: INT for l in ints} | {"b1": BOOL, "t": ROWS, "c": INTS} | {rl: ROW for rl, _ in rows}
    return sigma, inputs


class ProgramGen:
    def __init__(self, rng: random.Random, inputs: dict[str, Type]) -> None:
        self.rng = rng
        self.inputs = inputs
        self.counter = 0

    def var(self) -> str:
        self.counter += 1
        return f"v{self.counter}"

    def atoms(self, ty: Type, env: dict[str, Type]) -> list[S.Expr]:
        out: list[S.Expr] = [S.SVar(x) for x, t in env.items() if t == ty]
        out += [S.SLabel(l) for l, t in self.inputs.items() if t == ty]
        return out

    def leaf(self, ty: Type, env: dict[str, Type], budget: int) -> S.Expr:
        """An expression of depth at most budget, preferring atoms."""
        r = self.rng
        cands = self.atoms(ty, env)
        if ty == INT:
            return r.choice(cands) if cands and r.random() < 0.7 else S.SInt(r.randint(-2, 5))
        if ty == BOOL:
            return r.choice(cands) if cands and r.random() < 0.5 else S.SBool(r.random() < 0.5)
        if cands and (budget == 0 or r.random() < 0.7):
            return r.choice(cands)
        if isinstance(ty, CollTy) and (budget == 0 or r.random() < 0.4):
            return S.SEmpty(ty)
        if budget == 0:
            raise ValueError(f"no atom of type {ty}")
        if isinstance(ty, RecTy):
            return S.SRecord(tuple((n, self.leaf(t, env, budget - 1)) for n, t in ty.fields))
        if isinstance(ty, CollTy):
            return S.SSingle(self.leaf(ty.elem, env, budget - 1))
        raise TypeError(ty)

    def expr(self, ty: Type, env: dict[str, Type], budget: int) -> S.Expr:
        """An expression of type ty and depth at most budget."""
        r = self.rng
        if budget <= 1 or r.random() < 0.2:
            return self.leaf(ty, env, budget)
        b = budget - 1
        shared = r.random()
        if shared < 0.1:
            t1 = r.choice([INT, BOOL, ROW, INTS, ROWS])
            x = self.var()
            return S.SLet(x, self.expr(t1, env, b), self.expr(ty, {**env, x: t1}, b))
        if shared < 0.2:
            return S.SIf(self.expr(BOOL, env, b), self.expr(ty, env, b), self.expr(ty, env, b))
        if ty == INT:
            k = r.randrange(4)
            if k == 0:
                return S.SPlus(self.expr(INT, env, b), self.expr(INT, env, b))
            if k == 1:
                return S.SProj(self.expr(ROW, env, b), r.choice(["A", "B"]))
            if k == 2:
                et = r.choice(ELEM_TYPES)
                x = self.var()
                return S.SSum(x, self.expr(CollTy(et), env, b), self.expr(INT, {**env, x: et}, b))
            return self.leaf(INT, env, budget)
        if ty == BOOL:
            k = r.randrange(4)
            if k == 0:
                return S.SEq(self.expr(INT, env, b), self.expr(INT, env, b))
            if k == 1:
                return S.SAnd(self.expr(BOOL, env, b), self.expr(BOOL, env, b))
            if k == 2:
                return S.SNot(self.expr(BOOL, env, b))
            return S.SIsEmpty(self.expr(CollTy(r.choice(ELEM_TYPES)), env, b))
        if isinstance(ty, RecTy):
            return S.SRecord(tuple((n, self.expr(t, env, b)) for n, t in ty.fields))
        if isinstance(ty, CollTy):
            k = r.randrange(4)
            if k == 0:
                return S.SSingle(self.expr(ty.elem, env, b))
            if k == 1:
                return S.SUnion(self.expr(ty, env, b), self.expr(ty, env, b))
            et = r.choice(ELEM_TYPES)
            x = self.var()
            src = self.expr(CollTy(et), env, b)
            if k == 2:
                return S.SFor(x, src, self.expr(ty, {**env, x: et}, b))
            return S.SCompr(self.expr(ty.elem, {**env, x: et}, b), x, src)
        raise TypeError(ty)


RESULT_TYPES = (INT, BOOL, ROW, INTS, ROWS, NESTED)


def random_case(seed: int, result: Type | None = None, max_depth: int = 4) -> Case:
    from .core import typecheck
    from .store import infer_store_type

    rng = random.Random(seed)
    sigma, inputs = random_store(rng)
    ty = result if result is not None else rng.choice(RESULT_TYPES)
    g = ProgramGen(rng, inputs)
    surface = g.expr(ty, {}, max_depth)
    for _ in range(20):
        if depth(surface) >= min(2, max_depth):
            break
        surface = g.expr(ty, {}, max_depth)
    core = anormalize(surface)
    typecheck(infer_store_type(sigma, hints=inputs), core)
    return Case(sigma, inputs, surface, core, ty)


ATOMS = (S.SVar, S.SLabel, S.SInt, S.SBool, S.SEmpty)


def depth(e: S.Expr) -> int:
    """Nesting depth of operators and binders; atoms have depth 0."""
    if isinstance(e, ATOMS):
        return 0
    kids: list[S.Expr] = []
    S.map_children(e, lambda c: kids.append(c) or c)
    return 1 + max((depth(k) for k in kids), default=0)
