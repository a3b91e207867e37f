"""Abstract syntax for memory-safe WebAssembly modules.

Value types, handle values, instructions and the module record.  All
nodes are immutable; structural equality is the round-trip contract of
the text frontend.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union


class ValueType(enum.Enum):
    I32 = "i32"
    I64 = "i64"
    F32 = "f32"
    F64 = "f64"
    HANDLE = "handle"

    def __repr__(self):
        return self.value

    @property
    def is_numeric(self) -> bool:
        return self is not ValueType.HANDLE

    @property
    def width(self) -> int:
        return _WIDTHS[self]


I32 = ValueType.I32
I64 = ValueType.I64
F32 = ValueType.F32
F64 = ValueType.F64
HANDLE = ValueType.HANDLE

# Serialized width of a handle inside a segment.  Handle segment
# accesses must be aligned to this.
HANDLE_WIDTH = 16

_WIDTHS = {I32: 4, I64: 8, F32: 4, F64: 8, HANDLE: HANDLE_WIDTH}

_BY_NAME = {t.value: t for t in ValueType}


def valuetype(name: str) -> ValueType:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ValueError(f"unknown value type {name!r}") from None


@dataclass(frozen=True, slots=True)
class HandleValue:
    """Fat pointer: base+offset window into a segment, plus identity.

    offset is a signed i32 and may wander out of range; bounds are
    enforced at access time only.  The null handle is all-zero/invalid.
    """

    base: int = 0
    offset: int = 0
    bound: int = 0
    valid: bool = False
    id: int = 0

    def moved(self, delta: int) -> "HandleValue":
        off = (self.offset + delta + 0x80000000) % 0x100000000 - 0x80000000
        return HandleValue(self.base, off, self.bound, self.valid, self.id)

    def serialize(self) -> bytes:
        return struct.pack(
            "<IiII", self.base & 0xFFFFFFFF, self.offset, self.bound, self.id
        )

    @staticmethod
    def deserialize(raw: bytes, valid: bool = False) -> "HandleValue":
        base, offset, bound, hid = struct.unpack("<IiII", raw)
        return HandleValue(base, offset, bound, valid, hid)


NULL_HANDLE = HandleValue()


@dataclass(frozen=True, slots=True)
class Value:
    """A tagged runtime scalar (boundary representation)."""

    type: ValueType
    payload: Union[int, float, HandleValue]

    def __repr__(self):
        return f"{self.type.value}:{self.payload!r}"


def i32(n: int) -> Value:
    return Value(I32, n & 0xFFFFFFFF)


def i64(n: int) -> Value:
    return Value(I64, n & 0xFFFFFFFFFFFFFFFF)


def f32(x: float) -> Value:
    return Value(F32, round_f32(x))


def f64(x: float) -> Value:
    return Value(F64, float(x))


def handle(h: HandleValue) -> Value:
    return Value(HANDLE, h)


def round_f32(x: float) -> float:
    """Round a Python float to the nearest representable f32."""
    return struct.unpack("<f", struct.pack("<f", x))[0]


class FuncType(NamedTuple):
    params: tuple[ValueType, ...]
    results: tuple[ValueType, ...]

    def __str__(self):
        p = " ".join(t.value for t in self.params)
        r = " ".join(t.value for t in self.results)
        return f"[{p}] -> [{r}]"


@dataclass(frozen=True, slots=True)
class Instr:
    """One instruction.  Immediate fields are used per opcode:

    ty      value type for const / arithmetic / loads / stores
    imm     numeric immediate (const value, index, branch depth) or the
            inline FuncType of call_indirect
    off     static byte offset for segment accesses
    bt      block result type (None = empty) for block/loop/if
    body    nested body for block/loop/if
    orelse  else branch for if
    """

    op: str
    ty: Optional[ValueType] = None
    imm: Union[int, float, FuncType, None] = None
    off: int = 0
    bt: Optional[ValueType] = None
    body: tuple["Instr", ...] = ()
    orelse: tuple["Instr", ...] = ()


@dataclass(frozen=True, slots=True)
class Func:
    type: FuncType
    locals: tuple[ValueType, ...] = ()
    body: tuple[Instr, ...] = ()


@dataclass(frozen=True, slots=True)
class GlobalDecl:
    mut: bool
    ty: ValueType
    init: Instr


@dataclass(frozen=True, slots=True)
class TableDecl:
    entries: tuple[int, ...]


@dataclass(frozen=True, slots=True)
class FuncImport:
    type: FuncType


@dataclass(frozen=True, slots=True)
class GlobalImport:
    mut: bool
    ty: ValueType


@dataclass(frozen=True, slots=True)
class TableImport:
    min: int


@dataclass(frozen=True, slots=True)
class MemoryImport:
    min_pages: int


ImportDesc = Union[FuncImport, GlobalImport, TableImport, MemoryImport]


@dataclass(frozen=True, slots=True)
class ImportDecl:
    module: str
    name: str
    desc: ImportDesc


@dataclass(frozen=True, slots=True)
class ExportDecl:
    name: str
    kind: str  # func | global | table | memory
    index: int


@dataclass(frozen=True, slots=True)
class DataDecl:
    offset: Instr
    bytes: bytes


@dataclass(frozen=True, slots=True)
class Module:
    funcs: tuple[Func, ...] = ()
    globals: tuple[GlobalDecl, ...] = ()
    tables: tuple[TableDecl, ...] = ()
    memory: Optional[int] = None  # min pages
    imports: tuple[ImportDecl, ...] = ()
    exports: tuple[ExportDecl, ...] = ()
    start: Optional[int] = None
    data: tuple[DataDecl, ...] = ()


PAGE_SIZE = 65536


class SignatureError(Exception):
    """An instruction references an index its context cannot resolve."""


class TypingContext:
    """Index spaces an instruction may reference while being typed.

    Imported items come first in each index space, own declarations
    after, mirroring instantiation order.
    """

    def __init__(
        self,
        funcs: tuple[FuncType, ...] = (),
        locals: tuple[ValueType, ...] = (),
        globals: tuple[tuple[bool, ValueType], ...] = (),
        labels: tuple[Optional[ValueType], ...] = (),
        results: tuple[ValueType, ...] = (),
        has_table: bool = False,
        has_memory: bool = False,
    ):
        self.funcs = funcs
        self.locals = locals
        self.globals = globals
        self.labels = labels  # innermost first
        self.results = results
        self.has_table = has_table
        self.has_memory = has_memory

    def local(self, i: int) -> ValueType:
        if not 0 <= i < len(self.locals):
            raise SignatureError(f"unknown local {i}")
        return self.locals[i]

    def global_(self, i: int) -> tuple[bool, ValueType]:
        if not 0 <= i < len(self.globals):
            raise SignatureError(f"unknown global {i}")
        return self.globals[i]

    def func(self, i: int) -> FuncType:
        if not 0 <= i < len(self.funcs):
            raise SignatureError(f"unknown function {i}")
        return self.funcs[i]

    def label(self, depth: int) -> Optional[ValueType]:
        if not 0 <= depth < len(self.labels):
            raise SignatureError(f"unknown label depth {depth}")
        return self.labels[depth]


class _AnyType:
    """Placeholder for one polymorphic value type (all occurrences equal)."""

    def __repr__(self):
        return "any"


ANY = _AnyType()

# Fixed-arity table: op -> (inputs, outputs).  ANY marks drop/select
# polymorphism; unreachable/br/return report their minimal stack effect
# and the validator applies the usual stack polymorphism on top.
_FIXED = {
    "nop": ((), ()),
    "drop": ((ANY,), ()),
    "select": ((ANY, ANY, I32), (ANY,)),
    "unreachable": ((), ()),
    "h.null": ((), (HANDLE,)),
    "segalloc": ((I32,), (HANDLE,)),
    "segfree": ((HANDLE,), ()),
    "h.add": ((HANDLE, I32), (HANDLE,)),
    "slice": ((HANDLE, I32), (HANDLE,)),
    "handle.setbounds": ((HANDLE, I32), (HANDLE,)),
    "segload8_u": ((HANDLE,), (I32,)),
    "segstore8": ((HANDLE, I32), ()),
}

_INT = (I32, I64)
_ARITH_BIN = ("add", "sub", "mul", "shl")
_CMP_BIN = ("eq", "lt_u", "ge_u")


def instruction_signature(
    instr: Instr, ctx: TypingContext
) -> tuple[tuple[ValueType, ...], tuple[ValueType, ...]]:
    """Exact stack consumption/production of one instruction.

    Raises SignatureError for indices the context cannot resolve.
    Polymorphic ops (drop/select) report their shape with the concrete
    type left to the checker and are not returned here; callers that
    need them use the validator directly.
    """
    op = instr.op
    fixed = _FIXED.get(op)
    if fixed is not None:
        return fixed
    if op == "const":
        return (), (instr.ty,)
    if op in _ARITH_BIN:
        if instr.ty in _INT or (op == "add" and instr.ty in (F32, F64)):
            return (instr.ty, instr.ty), (instr.ty,)
        raise SignatureError(f"{op} not defined for {instr.ty}")
    if op in _CMP_BIN:
        if instr.ty in _INT:
            return (instr.ty, instr.ty), (I32,)
        raise SignatureError(f"{op} not defined for {instr.ty}")
    if op == "eqz":
        if instr.ty in _INT:
            return (instr.ty,), (I32,)
        raise SignatureError(f"eqz not defined for {instr.ty}")
    if op == "local.get":
        return (), (ctx.local(instr.imm),)
    if op == "local.set":
        return (ctx.local(instr.imm),), ()
    if op == "local.tee":
        t = ctx.local(instr.imm)
        return (t,), (t,)
    if op == "global.get":
        return (), (ctx.global_(instr.imm)[1],)
    if op == "global.set":
        return (ctx.global_(instr.imm)[1],), ()
    if op == "call":
        ft = ctx.func(instr.imm)
        return ft.params, ft.results
    if op == "call_indirect":
        ft = instr.imm
        return ft.params + (I32,), ft.results
    if op == "load":
        return (I32,), (instr.ty,)
    if op == "store":
        return (I32, instr.ty), ()
    if op == "segload":
        return (HANDLE,), (instr.ty,)
    if op == "segstore":
        return (HANDLE, instr.ty), ()
    if op == "br":
        bt = ctx.label(instr.imm)
        return (() if bt is None else (bt,)), ()
    if op == "br_if":
        bt = ctx.label(instr.imm)
        ins = ((I32,) if bt is None else (bt, I32))
        return ins, (() if bt is None else (bt,))
    if op == "return":
        return ctx.results, ()
    if op in ("block", "loop", "if"):
        ins = (I32,) if op == "if" else ()
        outs = () if instr.bt is None else (instr.bt,)
        return ins, outs
    raise SignatureError(f"unknown instruction {op!r}")
