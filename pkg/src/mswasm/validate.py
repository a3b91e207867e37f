"""Syntactic type checking for modules.

Standard stack validation with handle as a first-class value type and
one extra rule: handles never flow into linear memory.  Validation
accumulates errors across items; inside one function body checking
stops at the first error (later stack shapes would be speculative).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .ast import (
    F32,
    F64,
    HANDLE,
    I32,
    I64,
    Func,
    FuncImport,
    FuncType,
    GlobalImport,
    Instr,
    MemoryImport,
    Module,
    TableImport,
    TypingContext,
    ValueType,
)


@dataclass(frozen=True, slots=True)
class TypeErrorRecord:
    func: int  # function index, -1 for module-level errors
    offset: int  # pre-order instruction ordinal within the body, -1 if n/a
    code: str
    message: str

    def to_json(self) -> dict:
        return {
            "func": self.func,
            "offset": self.offset,
            "code": self.code,
            "message": self.message,
        }


class ValidationError(Exception):
    def __init__(self, errors: list[TypeErrorRecord]):
        self.errors = errors
        summary = "; ".join(f"[{e.func}@{e.offset}] {e.code}: {e.message}" for e in errors)
        super().__init__(summary or "validation failed")


@dataclass(frozen=True)
class TypedModule:
    """A module annotated with its resolved index spaces."""

    module: Module
    func_types: tuple[FuncType, ...]  # full function index space
    global_types: tuple[tuple[bool, ValueType], ...]  # (mut, ty), full space
    n_imported_funcs: int
    n_imported_globals: int
    n_imported_tables: int
    n_imported_mems: int
    n_tables: int
    has_memory: bool


@dataclass
class StackShape:
    """Value-stack shape at one program point (innermost block)."""

    types: list[Optional[ValueType]]  # None = polymorphic slot
    unreachable: bool


class _Err(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        self.message = message


class _Ctrl:
    __slots__ = ("op", "result", "height", "unreachable")

    def __init__(self, op: str, result: Optional[ValueType], height: int):
        self.op = op
        self.result = result
        self.height = height
        self.unreachable = False

    @property
    def label_arity(self) -> tuple[ValueType, ...]:
        # br to a loop targets its start and carries nothing (MVP blocks
        # have no parameters); br to a block/if carries its result.
        if self.op == "loop" or self.result is None:
            return ()
        return (self.result,)


def _tyname(t) -> str:
    return "any" if t is None else t.value


class _Checker:
    def __init__(self, ctx: TypingContext):
        self.ctx = ctx
        self.vals: list[Optional[ValueType]] = []
        self.ctrls: list[_Ctrl] = [_Ctrl("func", None, 0)]
        self.offset = -1  # pre-order ordinal of the instruction in flight

    # -- stack primitives ----------------------------------------------

    def push(self, t: Optional[ValueType]) -> None:
        self.vals.append(t)

    def pop(self, expect: Optional[ValueType] = None) -> Optional[ValueType]:
        c = self.ctrls[-1]
        if len(self.vals) == c.height:
            if c.unreachable:
                return expect
            raise _Err("stack-underflow", "pop from empty stack")
        t = self.vals.pop()
        if expect is not None and t is not None and t is not expect:
            raise _Err(
                "type-mismatch", f"expected {expect.value}, got {_tyname(t)}"
            )
        return t if t is not None else expect

    def pop_many(self, types: tuple[ValueType, ...]) -> None:
        for t in reversed(types):
            self.pop(t)

    def push_ctrl(self, op: str, result: Optional[ValueType]) -> None:
        self.ctrls.append(_Ctrl(op, result, len(self.vals)))

    def pop_ctrl(self) -> None:
        c = self.ctrls[-1]
        if c.result is not None:
            self.pop(c.result)
        if len(self.vals) != c.height:
            raise _Err(
                "unbalanced-stack",
                f"{len(self.vals) - c.height} extra value(s) at end of {c.op}",
            )
        self.ctrls.pop()
        if c.result is not None:
            self.push(c.result)

    def mark_unreachable(self) -> None:
        c = self.ctrls[-1]
        del self.vals[c.height :]
        c.unreachable = True

    def shape(self) -> StackShape:
        c = self.ctrls[-1]
        return StackShape(list(self.vals[c.height :]), c.unreachable)

    # -- instruction dispatch --------------------------------------------

    def check_seq(self, instrs: tuple[Instr, ...]) -> None:
        for ins in instrs:
            self.offset += 1
            self.check_instr(ins)

    def check_instr(self, ins: Instr) -> None:
        op = ins.op
        ctx = self.ctx
        if op == "const":
            self.push(ins.ty)
        elif op in ("add", "sub", "mul", "shl"):
            if ins.ty not in (I32, I64) and not (op == "add" and ins.ty in (F32, F64)):
                raise _Err("type-mismatch", f"{op} not defined for {_tyname(ins.ty)}")
            self.pop(ins.ty)
            self.pop(ins.ty)
            self.push(ins.ty)
        elif op in ("eq", "lt_u", "ge_u"):
            if ins.ty not in (I32, I64):
                raise _Err("type-mismatch", f"{op} not defined for {_tyname(ins.ty)}")
            self.pop(ins.ty)
            self.pop(ins.ty)
            self.push(I32)
        elif op == "eqz":
            if ins.ty not in (I32, I64):
                raise _Err("type-mismatch", f"eqz not defined for {_tyname(ins.ty)}")
            self.pop(ins.ty)
            self.push(I32)
        elif op == "drop":
            self.pop()
        elif op == "select":
            self.pop(I32)
            t1 = self.pop()
            t2 = self.pop()
            if t1 is not None and t2 is not None and t1 is not t2:
                raise _Err(
                    "type-mismatch",
                    f"select operands differ: {t1.value} vs {t2.value}",
                )
            self.push(t1 if t1 is not None else t2)
        elif op == "nop":
            pass
        elif op == "unreachable":
            self.mark_unreachable()
        elif op == "local.get":
            self.push(self._local(ins.imm))
        elif op == "local.set":
            self.pop(self._local(ins.imm))
        elif op == "local.tee":
            t = self._local(ins.imm)
            self.pop(t)
            self.push(t)
        elif op == "global.get":
            self.push(self._global(ins.imm)[1])
        elif op == "global.set":
            mut, t = self._global(ins.imm)
            if not mut:
                raise _Err("immutable-global", f"global {ins.imm} is immutable")
            self.pop(t)
        elif op == "call":
            ft = self._func(ins.imm)
            self.pop_many(ft.params)
            for r in ft.results:
                self.push(r)
        elif op == "call_indirect":
            if not ctx.has_table:
                raise _Err("unknown-table", "call_indirect without a table")
            ft = ins.imm
            self.pop(I32)
            self.pop_many(ft.params)
            for r in ft.results:
                self.push(r)
        elif op in ("load", "store"):
            if not ctx.has_memory:
                raise _Err("unknown-memory", f"{op} without a linear memory")
            if ins.ty not in (I32, I64):
                code = (
                    "handle-in-linear-memory" if ins.ty is HANDLE else "type-mismatch"
                )
                raise _Err(code, f"linear {op} of {_tyname(ins.ty)}")
            if op == "load":
                self.pop(I32)
                self.push(ins.ty)
            else:
                top = self.ctrls[-1]
                # Specific diagnostic when a handle would flow into
                # linear memory: inspect the value operand before popping.
                if len(self.vals) > top.height and self.vals[-1] is HANDLE:
                    raise _Err(
                        "handle-in-linear-memory",
                        "a handle cannot be stored in the linear memory",
                    )
                self.pop(ins.ty)
                self.pop(I32)
        elif op == "segload":
            self.pop(HANDLE)
            self.push(ins.ty)
        elif op == "segstore":
            self.pop(ins.ty)
            self.pop(HANDLE)
        elif op == "segload8_u":
            self.pop(HANDLE)
            self.push(I32)
        elif op == "segstore8":
            self.pop(I32)
            self.pop(HANDLE)
        elif op == "segalloc":
            self.pop(I32)
            self.push(HANDLE)
        elif op == "segfree":
            self.pop(HANDLE)
        elif op == "h.null":
            self.push(HANDLE)
        elif op == "h.add":
            self.pop(I32)
            self.pop(HANDLE)
            self.push(HANDLE)
        elif op in ("slice", "handle.setbounds"):
            self.pop(I32)
            self.pop(HANDLE)
            self.push(HANDLE)
        elif op in ("block", "loop"):
            self.push_ctrl(op, ins.bt)
            self._with_labels(ins.bt if op == "block" else None, ins.body)
            self.pop_ctrl()
        elif op == "if":
            self.pop(I32)
            if ins.bt is not None and not ins.orelse:
                raise _Err(
                    "type-mismatch", "if with a result requires an else branch"
                )
            self.push_ctrl("if", ins.bt)
            self._with_labels(ins.bt, ins.body)
            self.pop_ctrl()
            if ins.bt is not None:
                self.pop(ins.bt)  # else branch must produce it as well
            self.push_ctrl("if", ins.bt)
            self._with_labels(ins.bt, ins.orelse)
            self.pop_ctrl()
        elif op == "br":
            self.pop_many(self._label(ins.imm))
            self.mark_unreachable()
        elif op == "br_if":
            self.pop(I32)
            lt = self._label(ins.imm)
            self.pop_many(lt)
            for t in lt:
                self.push(t)
        elif op == "return":
            self.pop_many(self.ctx.results)
            self.mark_unreachable()
        else:
            raise _Err("unknown-instruction", f"unknown instruction {op!r}")

    def _with_labels(self, label_ty: Optional[ValueType], body) -> None:
        saved = self.ctx.labels
        self.ctx.labels = (label_ty,) + saved
        try:
            self.check_seq(body)
        finally:
            self.ctx.labels = saved

    def _local(self, i) -> ValueType:
        if not isinstance(i, int) or not 0 <= i < len(self.ctx.locals):
            raise _Err("unknown-local", f"unknown local {i}")
        return self.ctx.locals[i]

    def _global(self, i) -> tuple[bool, ValueType]:
        if not isinstance(i, int) or not 0 <= i < len(self.ctx.globals):
            raise _Err("unknown-global", f"unknown global {i}")
        return self.ctx.globals[i]

    def _func(self, i) -> FuncType:
        if not isinstance(i, int) or not 0 <= i < len(self.ctx.funcs):
            raise _Err("unknown-function", f"unknown function {i}")
        return self.ctx.funcs[i]

    def _label(self, depth) -> tuple[ValueType, ...]:
        # labels: innermost block first; depth beyond blocks targets the
        # function itself (branch to return).
        if not isinstance(depth, int) or depth < 0:
            raise _Err("unknown-label", f"bad label depth {depth}")
        n_blocks = len(self.ctrls) - 1
        if depth < n_blocks:
            return self.ctrls[len(self.ctrls) - 1 - depth].label_arity
        if depth == n_blocks:
            return self.ctx.results
        raise _Err("unknown-label", f"label depth {depth} exceeds nesting")


def check_body(
    ctx: TypingContext,
    instrs: tuple[Instr, ...],
    expected: tuple[ValueType, ...],
) -> None:
    """Check one instruction sequence against an expected result stack.

    Raises ValidationError (one record, func index -1) on failure.
    """
    checker = _Checker(ctx)
    try:
        checker.check_seq(instrs)
        checker.pop_many(expected)
        c = checker.ctrls[-1]
        if len(checker.vals) != c.height and not c.unreachable:
            raise _Err(
                "unbalanced-stack",
                f"{len(checker.vals) - c.height} extra value(s) on exit",
            )
    except _Err as e:
        raise ValidationError(
            [TypeErrorRecord(-1, checker.offset, e.code, e.message)]
        ) from None


def _resolve_spaces(m: Module, errors: list[TypeErrorRecord]):
    func_types: list[FuncType] = []
    global_types: list[tuple[bool, ValueType]] = []
    n_it = n_im = 0
    for imp in m.imports:
        d = imp.desc
        if isinstance(d, FuncImport):
            func_types.append(d.type)
        elif isinstance(d, GlobalImport):
            global_types.append((d.mut, d.ty))
        elif isinstance(d, TableImport):
            n_it += 1
        elif isinstance(d, MemoryImport):
            n_im += 1
    n_if, n_ig = len(func_types), len(global_types)
    func_types.extend(f.type for f in m.funcs)
    global_types.extend((g.mut, g.ty) for g in m.globals)
    n_tables = n_it + len(m.tables)
    if n_tables > 1:
        errors.append(
            TypeErrorRecord(-1, -1, "unknown-table", "at most one table is supported")
        )
    n_mems = n_im + (1 if m.memory is not None else 0)
    if n_mems > 1:
        errors.append(
            TypeErrorRecord(-1, -1, "unknown-memory", "at most one linear memory")
        )
    return (
        tuple(func_types),
        tuple(global_types),
        n_if,
        n_ig,
        n_it,
        n_im,
        n_tables,
        n_mems > 0,
    )


def _check_init(
    ins: Instr,
    want: ValueType,
    global_types,
    n_imported_globals: int,
    what: str,
    errors: list[TypeErrorRecord],
) -> None:
    if ins.op == "const":
        if ins.ty is not want:
            errors.append(
                TypeErrorRecord(
                    -1, -1, "type-mismatch",
                    f"{what} initializer is {ins.ty.value}, want {want.value}",
                )
            )
    elif ins.op == "h.null":
        if want is not HANDLE:
            errors.append(
                TypeErrorRecord(
                    -1, -1, "type-mismatch", f"{what} initializer is handle, want {want.value}"
                )
            )
    elif ins.op == "global.get":
        i = ins.imm
        if not isinstance(i, int) or not 0 <= i < n_imported_globals:
            errors.append(
                TypeErrorRecord(
                    -1, -1, "bad-global-init",
                    f"{what} initializer must reference an imported global",
                )
            )
            return
        mut, ty = global_types[i]
        if mut:
            errors.append(
                TypeErrorRecord(
                    -1, -1, "bad-global-init",
                    f"{what} initializer references mutable global {i}",
                )
            )
        if ty is not want:
            errors.append(
                TypeErrorRecord(
                    -1, -1, "type-mismatch",
                    f"{what} initializer is {ty.value}, want {want.value}",
                )
            )
    else:
        errors.append(
            TypeErrorRecord(
                -1, -1, "bad-global-init",
                f"{what} initializer must be const, h.null or global.get",
            )
        )


def validate_module(m: Module) -> TypedModule:
    """Full module validation.  Raises ValidationError carrying every
    diagnostic found; returns the annotated module on success."""
    errors: list[TypeErrorRecord] = []
    (
        func_types,
        global_types,
        n_if,
        n_ig,
        n_it,
        n_im,
        n_tables,
        has_memory,
    ) = _resolve_spaces(m, errors)

    for gi, g in enumerate(m.globals):
        _check_init(g.init, g.ty, global_types, n_ig, f"global {n_ig + gi}", errors)

    for t in m.tables:
        for e in t.entries:
            if not 0 <= e < len(func_types):
                errors.append(
                    TypeErrorRecord(
                        -1, -1, "unknown-function", f"table entry {e} out of range"
                    )
                )

    for d in m.data:
        if not has_memory:
            errors.append(
                TypeErrorRecord(-1, -1, "unknown-memory", "data segment without memory")
            )
        _check_init(d.offset, I32, global_types, n_ig, "data offset", errors)

    seen_exports: set[str] = set()
    for e in m.exports:
        if e.name in seen_exports:
            errors.append(
                TypeErrorRecord(-1, -1, "duplicate-export", f"export {e.name!r}")
            )
        seen_exports.add(e.name)
        space = {
            "func": len(func_types),
            "global": len(global_types),
            "table": n_tables,
            "memory": 1 if has_memory else 0,
        }.get(e.kind, 0)
        if not 0 <= e.index < space:
            errors.append(
                TypeErrorRecord(
                    -1, -1, f"unknown-{e.kind}", f"export {e.name!r} index {e.index}"
                )
            )

    if m.start is not None:
        if not 0 <= m.start < len(func_types):
            errors.append(
                TypeErrorRecord(-1, -1, "unknown-function", f"start {m.start}")
            )
        elif func_types[m.start] != FuncType((), ()):
            errors.append(
                TypeErrorRecord(
                    -1, -1, "start-signature",
                    f"start function must be [] -> [], got {func_types[m.start]}",
                )
            )

    for fi, fn in enumerate(m.funcs):
        ctx = TypingContext(
            funcs=func_types,
            locals=fn.type.params + fn.locals,
            globals=global_types,
            labels=(),
            results=fn.type.results,
            has_table=n_tables > 0,
            has_memory=has_memory,
        )
        checker = _Checker(ctx)
        try:
            checker.check_seq(fn.body)
            checker.pop_many(fn.type.results)
            c = checker.ctrls[-1]
            if len(checker.vals) != c.height and not c.unreachable:
                raise _Err(
                    "unbalanced-stack",
                    f"{len(checker.vals) - c.height} extra value(s) on exit",
                )
        except _Err as e:
            errors.append(
                TypeErrorRecord(n_if + fi, checker.offset, e.code, e.message)
            )

    if errors:
        raise ValidationError(errors)
    return TypedModule(
        module=m,
        func_types=func_types,
        global_types=global_types,
        n_imported_funcs=n_if,
        n_imported_globals=n_ig,
        n_imported_tables=n_it,
        n_imported_mems=n_im,
        n_tables=n_tables,
        has_memory=has_memory,
    )
