"""Seeded generator of well-typed modules for the fuzz campaigns.

Generation is type-directed: expressions are grown against a target
type, statements keep the stack balanced, and loops always run on a
reserved bounded counter so generated programs terminate on their own
(fuel stays a backstop, not the common case).  Every output passes
validate_module; the generator test suite asserts exactly that.
"""

from __future__ import annotations

import random
from typing import Optional

from .ast import (
    F32,
    F64,
    HANDLE,
    I32,
    I64,
    DataDecl,
    ExportDecl,
    Func,
    FuncImport,
    FuncType,
    GlobalDecl,
    GlobalImport,
    ImportDecl,
    Instr,
    Module,
    TableDecl,
    ValueType,
)

NUMERIC = (I32, I64, F32, F64)
ALL_TYPES = (I32, I64, F32, F64, HANDLE)

_N_COUNTERS = 3  # reserved i32 loop counters per function


class _FuncPlan:
    def __init__(self, type: FuncType, leaf: bool):
        self.type = type
        self.leaf = leaf


class _BodyGen:
    def __init__(
        self,
        rng: random.Random,
        budget: int,
        locals_: list[ValueType],
        counters: list[int],
        globals_: list[tuple[bool, ValueType]],
        callables: list[tuple[int, FuncType]],
        table_types: list[FuncType],
        has_memory: bool,
        results: tuple[ValueType, ...],
        leaf: bool,
    ):
        self.rng = rng
        self.budget = budget
        self.locals = locals_
        self.counters = counters  # reserved counter local indices
        self.globals = globals_
        self.callables = callables  # (index, type) callable without recursion
        self.table_types = table_types
        self.has_memory = has_memory
        self.results = results
        self.leaf = leaf
        self.free_counters = list(counters)

    def spend(self, n: int = 1) -> bool:
        self.budget -= n
        return self.budget >= 0

    # -- expressions ----------------------------------------------------

    def const(self, t: ValueType) -> list[Instr]:
        r = self.rng
        if t is I32:
            return [Instr("const", ty=I32, imm=r.choice((0, 1, 2, 3, 4, 7, 8, 16, 64, 255)))]
        if t is I64:
            return [Instr("const", ty=I64, imm=r.randrange(0, 1 << 10))]
        if t is F32:
            return [Instr("const", ty=F32, imm=float(r.randrange(-8, 9)) / 2)]
        if t is F64:
            return [Instr("const", ty=F64, imm=float(r.randrange(-64, 65)) / 4)]
        return [Instr("h.null")]

    def _locals_of(self, t: ValueType) -> list[int]:
        return [
            i
            for i, lt in enumerate(self.locals)
            if lt is t and i not in self.counters
        ]

    def _globals_of(self, t: ValueType, need_mut: bool = False) -> list[int]:
        return [
            i
            for i, (mut, gt) in enumerate(self.globals)
            if gt is t and (mut or not need_mut)
        ]

    def expr(self, t: ValueType, depth: int = 0) -> list[Instr]:
        r = self.rng
        if depth > 3 or not self.spend():
            return self.trivial(t)
        choices = ["const", "const"]
        if self._locals_of(t):
            choices += ["local", "local"]
        if self._globals_of(t):
            choices.append("global")
        if t in (I32, I64):
            choices += ["arith", "arith", "cmpsrc"] if t is I32 else ["arith"]
        if t in (F32, F64):
            choices.append("arith")
        if t is I32:
            choices += ["cmp", "eqz"]
        if t is HANDLE:
            choices += ["alloc", "alloc", "alloc", "hadd", "setbounds"]
            choices.append("segload_h")
        else:
            choices.append("segload")
        if self.has_memory and t in (I32, I64):
            choices.append("linload")
        calls = [c for c in self.callables if c[1].results == (t,)]
        if calls and not self.leaf:
            choices += ["call", "call"]
        itargets = [ft for ft in self.table_types if ft.results == (t,)]
        if itargets and not self.leaf:
            choices.append("call_indirect")
        choices.append("select")
        choices.append("if")

        kind = r.choice(choices)
        if kind == "const":
            return self.const(t)
        if kind == "local":
            return [Instr("local.get", imm=r.choice(self._locals_of(t)))]
        if kind == "global":
            return [Instr("global.get", imm=r.choice(self._globals_of(t)))]
        if kind == "arith":
            op = r.choice(("add", "sub", "mul", "shl")) if t in (I32, I64) else "add"
            return (
                self.expr(t, depth + 1)
                + self.expr(t, depth + 1)
                + [Instr(op, ty=t)]
            )
        if kind == "cmp":
            st = r.choice((I32, I64))
            op = r.choice(("eq", "lt_u", "ge_u"))
            return (
                self.expr(st, depth + 1)
                + self.expr(st, depth + 1)
                + [Instr(op, ty=st)]
            )
        if kind == "eqz":
            st = r.choice((I32, I64))
            return self.expr(st, depth + 1) + [Instr("eqz", ty=st)]
        if kind == "cmpsrc":
            return self.expr(I32, depth + 1)
        if kind == "alloc":
            return [
                Instr("const", ty=I32, imm=r.choice((0, 1, 4, 8, 16, 32, 64))),
                Instr("segalloc"),
            ]
        if kind == "hadd":
            delta = r.choice((0, 1, 2, 4, 8, -4, 12, 1 << 20, 0x7FFFFFF0))
            return self.expr(HANDLE, depth + 1) + [
                Instr("const", ty=I32, imm=delta & 0xFFFFFFFF),
                Instr("h.add"),
            ]
        if kind == "setbounds":
            op = r.choice(("slice", "handle.setbounds"))
            return self.expr(HANDLE, depth + 1) + [
                Instr("const", ty=I32, imm=r.choice((0, 1, 4, 8, 16))),
                Instr(op),
            ]
        if kind == "segload_h":
            return self.expr(HANDLE, depth + 1) + [
                Instr("segload", ty=HANDLE, off=r.choice((0, 16)))
            ]
        if kind == "segload":
            off = r.choice((0, 0, 4, 8))
            if t is I32 and r.random() < 0.3:
                return self.expr(HANDLE, depth + 1) + [Instr("segload8_u", off=off)]
            return self.expr(HANDLE, depth + 1) + [Instr("segload", ty=t, off=off)]
        if kind == "linload":
            return self.expr(I32, depth + 1) + [Instr("load", ty=t)]
        if kind == "call":
            idx, ft = r.choice(calls)
            out: list[Instr] = []
            for p in ft.params:
                out += self.expr(p, depth + 1)
            out.append(Instr("call", imm=idx))
            return out
        if kind == "call_indirect":
            ft = r.choice(itargets)
            out = []
            for p in ft.params:
                out += self.expr(p, depth + 1)
            out += self.expr(I32, depth + 1)
            out.append(Instr("call_indirect", imm=ft))
            return out
        if kind == "select":
            return (
                self.expr(t, depth + 1)
                + self.expr(t, depth + 1)
                + self.expr(I32, depth + 1)
                + [Instr("select")]
            )
        if kind == "if":
            return self.expr(I32, depth + 1) + [
                Instr(
                    "if",
                    bt=t,
                    body=tuple(self.expr(t, depth + 1)),
                    orelse=tuple(self.expr(t, depth + 1)),
                )
            ]
        return self.trivial(t)

    def trivial(self, t: ValueType) -> list[Instr]:
        lo = self._locals_of(t)
        if lo and self.rng.random() < 0.5:
            return [Instr("local.get", imm=self.rng.choice(lo))]
        return self.const(t)

    # -- statements -------------------------------------------------------

    def statement(self, depth: int = 0) -> list[Instr]:
        r = self.rng
        if not self.spend():
            return [Instr("nop")]
        kinds = ["drop", "localset", "segstore", "segstore", "nop"]
        if any(m for m, _ in self.globals):
            kinds.append("globalset")
        if self.has_memory:
            kinds.append("linstore")
        kinds += ["segfree", "block", "if"]
        if depth < 2 and self.free_counters:
            kinds += ["loop", "loop"]
        calls = [c for c in self.callables if not self.leaf]
        if calls:
            kinds.append("call")

        kind = r.choice(kinds)
        if kind == "drop":
            t = r.choice(ALL_TYPES)
            return self.expr(t, depth) + [Instr("drop")]
        if kind == "localset":
            candidates = [
                i for i in range(len(self.locals)) if i not in self.counters
            ]
            if not candidates:
                return [Instr("nop")]
            i = r.choice(candidates)
            op = "local.set" if r.random() < 0.8 else "local.tee"
            out = self.expr(self.locals[i], depth) + [Instr(op, imm=i)]
            if op == "local.tee":
                out.append(Instr("drop"))
            return out
        if kind == "globalset":
            muts = [
                (i, t) for i, (m, t) in enumerate(self.globals) if m
            ]
            if not muts:
                return [Instr("nop")]
            i, t = r.choice(muts)
            return self.expr(t, depth) + [Instr("global.set", imm=i)]
        if kind == "segstore":
            t = r.choice(ALL_TYPES)
            out = self.expr(HANDLE, depth)
            if t is I32 and r.random() < 0.3:
                out += self.expr(I32, depth)
                out.append(Instr("segstore8", off=r.choice((0, 1, 3))))
            else:
                out += self.expr(t, depth)
                out.append(Instr("segstore", ty=t, off=r.choice((0, 0, 4))))
            return out
        if kind == "linstore":
            t = r.choice((I32, I64))
            return (
                self.expr(I32, depth)
                + self.expr(t, depth)
                + [Instr("store", ty=t)]
            )
        if kind == "segfree":
            return self.expr(HANDLE, depth) + [Instr("segfree")]
        if kind == "block":
            body: list[Instr] = []
            for _ in range(r.randrange(1, 3)):
                body += self.statement(depth + 1)
            return [Instr("block", body=tuple(body))]
        if kind == "if":
            then: list[Instr] = []
            other: list[Instr] = []
            for _ in range(r.randrange(1, 3)):
                then += self.statement(depth + 1)
            if r.random() < 0.5:
                other = self.statement(depth + 1)
            return self.expr(I32, depth) + [
                Instr("if", body=tuple(then), orelse=tuple(other))
            ]
        if kind == "loop":
            c = self.free_counters.pop()
            iters = r.randrange(1, 8)
            body: list[Instr] = []
            for _ in range(r.randrange(1, 3)):
                body += self.statement(depth + 1)
            body += [
                Instr("local.get", imm=c),
                Instr("const", ty=I32, imm=1),
                Instr("sub", ty=I32),
                Instr("local.tee", imm=c),
                Instr("br_if", imm=0),
            ]
            self.free_counters.append(c)
            return [
                Instr("const", ty=I32, imm=iters),
                Instr("local.set", imm=c),
                Instr("loop", body=tuple(body)),
            ]
        if kind == "call":
            idx, ft = r.choice(self.callables)
            out = []
            for p in ft.params:
                out += self.expr(p, depth)
            out.append(Instr("call", imm=idx))
            for _ in ft.results:
                out.append(Instr("drop"))
            return out
        return [Instr("nop")]

    def body(self) -> tuple[Instr, ...]:
        out: list[Instr] = []
        for _ in range(self.rng.randrange(1, 5)):
            out += self.statement()
            if self.budget <= 0:
                break
        for t in self.results:
            out += self.expr(t)
        return tuple(out)


def _gen_functype(r: random.Random, max_params: int = 3) -> FuncType:
    params = tuple(
        r.choice(ALL_TYPES) for _ in range(r.randrange(0, max_params + 1))
    )
    results = (r.choice(ALL_TYPES),) if r.random() < 0.7 else ()
    return FuncType(params, results)


def generate_module(
    seed: int,
    budget: int = 40,
    profile: str = "closed",
) -> Module:
    """Generate one well-typed module.

    Profiles:
      closed          no imports, a start function, all functions exported
      attacker_func   no imports; exports a nullary "g" plus helpers
      attacker_module imports handle globals and host closures; has start
    """
    r = random.Random(seed)
    imports: list[ImportDecl] = []
    iglobals: list[tuple[bool, ValueType]] = []
    ifuncs: list[FuncType] = []

    if profile == "attacker_module":
        for k in range(r.randrange(1, 3)):
            mut = r.random() < 0.5
            imports.append(
                ImportDecl("victim", f"h{k}", GlobalImport(mut, HANDLE))
            )
            iglobals.append((mut, HANDLE))
        for k in range(r.randrange(0, 3)):
            ft = FuncType(
                tuple(r.choice((I32, HANDLE)) for _ in range(r.randrange(0, 2))),
                (I32,) if r.random() < 0.5 else (),
            )
            imports.append(ImportDecl("victim", f"c{k}", FuncImport(ft)))
            ifuncs.append(ft)

    n_leaf = r.randrange(0, 3)
    n_main = r.randrange(1, 4)
    plans: list[_FuncPlan] = []
    for _ in range(n_leaf):
        plans.append(_FuncPlan(_gen_functype(r, max_params=2), leaf=True))
    for _ in range(n_main):
        plans.append(_FuncPlan(_gen_functype(r), leaf=False))
    if profile == "attacker_func":
        g_index = len(plans)
        plans.append(_FuncPlan(FuncType((), ()), leaf=False))

    has_memory = r.random() < 0.4
    globals_: list[GlobalDecl] = []
    gtypes = list(iglobals)
    for _ in range(r.randrange(0, 4)):
        t = r.choice(ALL_TYPES)
        mut = r.random() < 0.7
        if t is HANDLE:
            init = Instr("h.null")
        elif t in (I32, I64):
            init = Instr("const", ty=t, imm=r.randrange(0, 100))
        else:
            init = Instr("const", ty=t, imm=float(r.randrange(0, 8)))
        globals_.append(GlobalDecl(mut, t, init))
        gtypes.append((mut, t))

    # Table entries index leaf functions only: bodies without calls keep
    # indirect dispatch recursion-free.
    leaf_indices = [len(ifuncs) + i for i, p in enumerate(plans) if p.leaf]
    tables: list[TableDecl] = []
    if leaf_indices and r.random() < 0.5:
        entries = tuple(
            r.choice(leaf_indices) for _ in range(r.randrange(1, 4))
        )
        tables.append(TableDecl(entries))
    table_types = (
        [plans[i - len(ifuncs)].type for i in set(tables[0].entries)] if tables else []
    )

    funcs: list[Func] = []
    all_types = ifuncs + [p.type for p in plans]
    for pi, plan in enumerate(plans):
        n_locals = r.randrange(0, 4)
        locals_extra = [r.choice(ALL_TYPES) for _ in range(n_locals)]
        counters_base = len(plan.type.params) + n_locals
        locals_all = (
            list(plan.type.params) + locals_extra + [I32] * _N_COUNTERS
        )
        counters = list(range(counters_base, counters_base + _N_COUNTERS))
        # Callable targets: earlier module functions (no cycles) plus any
        # imported closure.
        callables = [(k, ifuncs[k]) for k in range(len(ifuncs))]
        callables += [(len(ifuncs) + k, plans[k].type) for k in range(pi)]
        gen = _BodyGen(
            rng=r,
            budget=max(4, budget // max(1, len(plans))),
            locals_=locals_all,
            counters=counters,
            globals_=gtypes,
            callables=[] if plan.leaf else callables,
            table_types=[] if plan.leaf else table_types,
            has_memory=has_memory,
            results=plan.type.results,
            leaf=plan.leaf,
        )
        funcs.append(
            Func(plan.type, tuple(locals_extra) + (I32,) * _N_COUNTERS, gen.body())
        )

    exports = [
        ExportDecl(f"f{i}", "func", len(ifuncs) + i) for i in range(len(plans))
    ]
    start: Optional[int] = None
    data: list[DataDecl] = []
    if profile in ("closed", "attacker_module"):
        start_ft = FuncType((), ())
        gen = _BodyGen(
            rng=r,
            budget=max(4, budget // 2),
            locals_=[I32] * _N_COUNTERS,
            counters=list(range(_N_COUNTERS)),
            globals_=gtypes,
            callables=[(k, t) for k, t in enumerate(all_types) if t.params == ()],
            table_types=table_types,
            has_memory=has_memory,
            results=(),
            leaf=False,
        )
        funcs.append(Func(start_ft, (I32,) * _N_COUNTERS, gen.body()))
        start = len(ifuncs) + len(plans)
    if profile == "attacker_func":
        exports = [ExportDecl("g", "func", len(ifuncs) + g_index)] + [
            e for e in exports if e.index != len(ifuncs) + g_index
        ]
        seen = set()
        uniq = []
        for e in exports:
            if e.name not in seen:
                uniq.append(e)
                seen.add(e.name)
        exports = uniq
    if has_memory and r.random() < 0.5:
        raw = bytes(r.randrange(0, 256) for _ in range(r.randrange(1, 16)))
        data.append(
            DataDecl(Instr("const", ty=I32, imm=r.randrange(0, 256)), raw)
        )

    return Module(
        funcs=tuple(funcs),
        globals=tuple(globals_),
        tables=tuple(tables),
        memory=1 if has_memory else None,
        imports=tuple(imports),
        exports=tuple(exports),
        start=start,
        data=tuple(data),
    )


def generate_well_typed(seed: int, budget: int = 40) -> Module:
    """Closed well-typed module with a start function (campaign form)."""
    if budget <= 0:
        return Module(
            funcs=(Func(FuncType((), ()), (), ()),),
            exports=(ExportDecl("f0", "func", 0),),
        )
    return generate_module(seed, budget, profile="closed")
