"""Small-step interpreter over (store, frames, value stack, control).

Traps are well-defined outcomes; Stuck is reachable only for
non-validated input and signals a semantics bug when it shows up for a
validated module (the never-stuck campaign tests exactly that).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .ast import (
    F32,
    F64,
    HANDLE,
    I32,
    I64,
    FuncType,
    HandleValue,
    Instr,
    NULL_HANDLE,
    Value,
    ValueType,
    round_f32,
)
from .store import (
    MSWasmTrap,
    Store,
    Trap,
    TrapKind,
    bits_to_payload,
    handle_add,
    handle_setbounds,
    payload_to_bits,
)

DEFAULT_FUEL = 10_000_000

_MASK = {I32: 0xFFFFFFFF, I64: 0xFFFFFFFFFFFFFFFF}
_SHIFT = {I32: 32, I64: 64}

_ZERO = {I32: 0, I64: 0, F32: 0.0, F64: 0.0, HANDLE: NULL_HANDLE}


@dataclass(frozen=True, slots=True)
class Values:
    values: tuple[Value, ...]


@dataclass(frozen=True, slots=True)
class Trapped:
    trap: Trap


@dataclass(frozen=True, slots=True)
class FuelExhausted:
    pass


@dataclass(frozen=True, slots=True)
class Stuck:
    description: str


Outcome = Union[Values, Trapped, FuelExhausted, Stuck]


class _StuckError(Exception):
    pass


class _Act:
    """One activation of an instruction sequence (function body or block)."""

    __slots__ = ("body", "pc", "height", "arity", "is_loop")

    def __init__(self, body, height, arity, is_loop=False):
        self.body = body
        self.pc = 0
        self.height = height
        self.arity = arity
        self.is_loop = is_loop


class _Frame:
    __slots__ = ("locals", "instance", "arity", "height", "acts")

    def __init__(self, locals_, instance, arity, height, body):
        self.locals = locals_
        self.instance = instance
        self.arity = arity
        self.height = height
        self.acts = [_Act(body, height, arity)]


class Config:
    """One in-flight execution: store + frame stack + operand stack."""

    def __init__(self, store: Store, debug: bool = False):
        self.store = store
        self.values: list = []
        self.frames: list[_Frame] = []
        self.result_types: tuple[ValueType, ...] = ()
        self.debug = debug

    @classmethod
    def call(cls, store: Store, fi, args: list, debug: bool = False) -> "Config":
        cfg = cls(store, debug)
        cfg.result_types = fi.type.results
        locals_ = list(args) + [_ZERO[t] for t in fi.locals]
        cfg.frames.append(_Frame(locals_, fi.instance, len(fi.type.results), 0, fi.body))
        return cfg

    def check_shape(self) -> None:
        """Debug-mode representation check: every operand is a machine
        value and activation heights stay below the stack top."""
        for v in self.values:
            if not isinstance(v, (int, float, HandleValue)):
                raise _StuckError(f"non-value on operand stack: {v!r}")
        for frame in self.frames:
            if frame.height > len(self.values):
                raise _StuckError("frame floor above the operand stack")
            for act in frame.acts:
                if act.height > len(self.values) and act is frame.acts[-1]:
                    raise _StuckError("activation floor above the operand stack")

    @property
    def done(self) -> bool:
        return not self.frames

    def outcome_values(self) -> Values:
        vals = tuple(
            Value(t, v) for t, v in zip(self.result_types, self.values)
        )
        return Values(vals)


def step(cfg: Config) -> None:
    """Execute exactly one instruction or one administrative reduction."""
    frame = cfg.frames[-1]
    act = frame.acts[-1]
    if act.pc >= len(act.body):
        _end_of_body(cfg, frame)
        return
    ins = act.body[act.pc]
    act.pc += 1
    _dispatch(cfg, frame, ins)


def _end_of_body(cfg: Config, frame: _Frame) -> None:
    if len(frame.acts) > 1:
        frame.acts.pop()
        return
    # Function return: keep the top `arity` values above the frame floor.
    vals = cfg.values
    results = vals[len(vals) - frame.arity :] if frame.arity else []
    del vals[frame.height :]
    vals.extend(results)
    cfg.frames.pop()


def _branch(cfg: Config, frame: _Frame, depth: int) -> None:
    acts = frame.acts
    idx = len(acts) - 1 - depth
    if idx < 0:
        raise _StuckError(f"branch depth {depth} exceeds nesting")
    target = acts[idx]
    vals = cfg.values
    if target.is_loop:
        del acts[idx + 1 :]
        del vals[target.height :]
        target.pc = 0
    else:
        carried = vals[len(vals) - target.arity :] if target.arity else []
        del acts[idx + 1 :]
        del vals[target.height :]
        vals.extend(carried)
        target.pc = len(target.body)


def _enter_call(cfg: Config, fi, ins_name: str) -> None:
    if getattr(fi, "is_host", False):
        n = len(fi.type.params)
        vals = cfg.values
        raw = vals[len(vals) - n :] if n else []
        del vals[len(vals) - n :]
        args = [Value(t, v) for t, v in zip(fi.type.params, raw)]
        results = fi.call_host(cfg.store, args)
        vals.extend(v.payload for v in results)
        return
    n = len(fi.type.params)
    vals = cfg.values
    args = vals[len(vals) - n :] if n else []
    del vals[len(vals) - n :]
    locals_ = args + [_ZERO[t] for t in fi.locals]
    cfg.frames.append(
        _Frame(locals_, fi.instance, len(fi.type.results), len(vals), fi.body)
    )


def _dispatch(cfg: Config, frame: _Frame, ins: Instr) -> None:
    op = ins.op
    vals = cfg.values
    store = cfg.store

    if op == "const":
        vals.append(ins.imm)
    elif op == "add" or op == "sub" or op == "mul":
        b = vals.pop()
        a = vals.pop()
        ty = ins.ty
        if ty is F32:
            vals.append(round_f32(a + b if op == "add" else 0.0))
        elif ty is F64:
            vals.append(a + b)
        else:
            m = _MASK[ty]
            if op == "add":
                vals.append((a + b) & m)
            elif op == "sub":
                vals.append((a - b) & m)
            else:
                vals.append((a * b) & m)
    elif op == "shl":
        b = vals.pop()
        a = vals.pop()
        w = _SHIFT[ins.ty]
        vals.append((a << (b % w)) & _MASK[ins.ty])
    elif op == "eqz":
        vals.append(1 if vals.pop() == 0 else 0)
    elif op == "eq":
        vals.append(1 if vals.pop() == vals.pop() else 0)
    elif op == "lt_u":
        b = vals.pop()
        a = vals.pop()
        vals.append(1 if a < b else 0)
    elif op == "ge_u":
        b = vals.pop()
        a = vals.pop()
        vals.append(1 if a >= b else 0)
    elif op == "drop":
        vals.pop()
    elif op == "select":
        c = vals.pop()
        v2 = vals.pop()
        v1 = vals.pop()
        vals.append(v1 if c != 0 else v2)
    elif op == "nop":
        pass
    elif op == "local.get":
        vals.append(frame.locals[ins.imm])
    elif op == "local.set":
        frame.locals[ins.imm] = vals.pop()
    elif op == "local.tee":
        frame.locals[ins.imm] = vals[-1]
    elif op == "global.get":
        vals.append(frame.instance.globals[ins.imm].value)
    elif op == "global.set":
        frame.instance.globals[ins.imm].value = vals.pop()
    elif op == "block":
        frame.acts.append(_Act(ins.body, len(vals), 1 if ins.bt else 0))
    elif op == "loop":
        frame.acts.append(
            _Act(ins.body, len(vals), 1 if ins.bt else 0, is_loop=True)
        )
    elif op == "if":
        c = vals.pop()
        body = ins.body if c != 0 else ins.orelse
        frame.acts.append(_Act(body, len(vals), 1 if ins.bt else 0))
    elif op == "br":
        _branch(cfg, frame, ins.imm)
    elif op == "br_if":
        if vals.pop() != 0:
            _branch(cfg, frame, ins.imm)
    elif op == "return":
        _branch(cfg, frame, len(frame.acts) - 1)
    elif op == "call":
        _enter_call(cfg, frame.instance.funcs[ins.imm], "call")
    elif op == "call_indirect":
        idx = vals.pop()
        table = frame.instance.table
        if table is None or not 0 <= idx < len(table.entries):
            raise MSWasmTrap(
                TrapKind.INDIRECT_CALL_TYPE_MISMATCH, f"table index {idx} out of range"
            )
        fi = table.entries[idx]
        if fi is None:
            raise MSWasmTrap(
                TrapKind.INDIRECT_CALL_TYPE_MISMATCH, f"null table entry {idx}"
            )
        if fi.type != ins.imm:
            raise MSWasmTrap(
                TrapKind.INDIRECT_CALL_TYPE_MISMATCH,
                f"declared {ins.imm}, entry has {fi.type}",
            )
        _enter_call(cfg, fi, "call_indirect")
    elif op == "load":
        addr = vals.pop()
        bits = store.linear_load(addr, ins.ty.width)
        vals.append(bits)
    elif op == "store":
        v = vals.pop()
        addr = vals.pop()
        store.linear_store(addr, ins.ty.width, v)
    elif op == "segload":
        h = vals.pop()
        ty = ins.ty
        if ty is HANDLE:
            vals.append(store.seg_load_handle(h, ins.off))
        else:
            bits = store.seg_load_scalar(h, ty.width, ins.off)
            vals.append(bits_to_payload(ty, bits))
    elif op == "segstore":
        v = vals.pop()
        h = vals.pop()
        ty = ins.ty
        if ty is HANDLE:
            store.seg_store_handle(h, v, ins.off)
        else:
            store.seg_store_scalar(h, ty.width, payload_to_bits(ty, v), ins.off)
    elif op == "segload8_u":
        h = vals.pop()
        vals.append(store.seg_load_scalar(h, 1, ins.off))
    elif op == "segstore8":
        v = vals.pop()
        h = vals.pop()
        store.seg_store_scalar(h, 1, v & 0xFF, ins.off)
    elif op == "segalloc":
        size = vals.pop()
        vals.append(store.seg_alloc(size))
    elif op == "segfree":
        store.seg_free(vals.pop())
    elif op == "h.null":
        vals.append(NULL_HANDLE)
    elif op == "h.add":
        delta = vals.pop()
        vals.append(handle_add(vals.pop(), delta))
    elif op == "slice" or op == "handle.setbounds":
        length = vals.pop()
        vals.append(handle_setbounds(vals.pop(), length))
    elif op == "unreachable":
        raise MSWasmTrap(TrapKind.UNREACHABLE, "unreachable executed")
    else:
        raise _StuckError(f"unknown instruction {op!r}")


def run(cfg: Config, fuel: int = DEFAULT_FUEL) -> Outcome:
    """Drive a configuration to an outcome under a step budget."""
    try:
        debug = cfg.debug
        while fuel > 0:
            if cfg.done:
                return cfg.outcome_values()
            step(cfg)
            if debug:
                cfg.check_shape()
            fuel -= 1
        return cfg.outcome_values() if cfg.done else FuelExhausted()
    except MSWasmTrap as t:
        return Trapped(t.trap)
    except _StuckError as e:
        return Stuck(str(e))
    except RecursionError:
        return Stuck("interpreter recursion limit")
    except (IndexError, KeyError, TypeError, AttributeError, ValueError) as e:
        # Any representation error is a stuck state, not a crash: the
        # never-stuck campaign turns these into test failures.
        return Stuck(f"{type(e).__name__}: {e}")


class HostCallError(Exception):
    """Arguments do not match the target signature (host-side error)."""


def _resolve_export(instance, name_or_index):
    if isinstance(name_or_index, int):
        return instance.funcs[name_or_index]
    item = instance.exports.get(name_or_index)
    if item is None:
        raise HostCallError(f"no export named {name_or_index!r}")
    return item


def invoke(instance, name_or_index, args=(), fuel: int = DEFAULT_FUEL) -> Outcome:
    """Call an exported function with typed arguments."""
    fi = _resolve_export(instance, name_or_index)
    ft = getattr(fi, "type", None)
    if not isinstance(ft, FuncType):
        raise HostCallError(f"{name_or_index!r} is not a function export")
    if len(args) != len(ft.params) or any(
        a.type is not p for a, p in zip(args, ft.params)
    ):
        raise HostCallError(
            f"arguments {[a.type.value for a in args]} do not match {ft}"
        )
    if getattr(fi, "is_host", False):
        try:
            return Values(tuple(fi.call_host(instance.store, list(args))))
        except MSWasmTrap as t:
            return Trapped(t.trap)
    cfg = Config.call(instance.store, fi, [a.payload for a in args])
    return run(cfg, fuel)


def invoke_with_trace(
    instance, name_or_index, args=(), fuel: int = DEFAULT_FUEL
) -> tuple[Outcome, tuple]:
    """invoke plus the ordered segment/linear access trace."""
    store = instance.store
    prev = store.trace
    store.trace = []
    try:
        outcome = invoke(instance, name_or_index, args, fuel)
        return outcome, tuple(store.trace)
    finally:
        store.trace = prev
