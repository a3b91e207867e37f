"""Module instantiation and linking.

Imports resolve by (module-name, item-name); global cells are shared by
reference, which is what makes handle import/export through globals
observable.  A failed instantiation (including a trap in the start
function) rolls the store back to its pre-instantiation snapshot.
"""

from __future__ import annotations

from typing import Mapping, Optional

from .ast import (
    HANDLE,
    I32,
    FuncImport,
    FuncType,
    GlobalImport,
    HandleValue,
    Instr,
    MemoryImport,
    Module,
    NULL_HANDLE,
    PAGE_SIZE,
    TableImport,
    Value,
)
from .interp import DEFAULT_FUEL, Config, Outcome, Trapped, Values, run
from .store import (
    GlobalCell,
    MSWasmTrap,
    Store,
    Table,
    TrapKind,
    handle_add,
    handle_setbounds,
)
from .validate import TypedModule


class LinkError(Exception):
    pass


class StartFailure(Exception):
    """The start function did not run to completion; carries the outcome.

    The store has been rolled back when this is raised."""

    def __init__(self, outcome: Outcome):
        self.outcome = outcome
        super().__init__(f"start function failed: {outcome!r}")


class Memory:
    """Marker for an importable/exportable linear memory binding."""

    __slots__ = ("store",)

    def __init__(self, store: Store):
        self.store = store

    @property
    def pages(self) -> int:
        mem = self.store.linear
        return 0 if mem is None else mem.size // PAGE_SIZE


class FuncInstance:
    """An instantiated module function; closes over its instance."""

    is_host = False
    __slots__ = ("type", "locals", "body", "instance", "index")

    def __init__(self, type: FuncType, locals_, body, index: int):
        self.type = type
        self.locals = locals_
        self.body = body
        self.instance: Optional["Instance"] = None
        self.index = index


class HostForgeryError(MSWasmTrap):
    def __init__(self, detail: str):
        super().__init__(TrapKind.TAG_FORGERY, detail)


class StoreView:
    """Checked store access for host functions.

    Every handle a host touches must have been granted (argument,
    capture, or derived through this view); anything else is treated as
    a forged handle and refused.
    """

    def __init__(self, store: Store, granted=()):
        self.store = store
        self.granted: set[HandleValue] = {NULL_HANDLE}
        for h in granted:
            self.grant(h)

    def grant(self, h: HandleValue) -> None:
        self.granted.add(h)

    def _require(self, h: HandleValue) -> HandleValue:
        if h not in self.granted:
            raise HostForgeryError(
                f"host used a handle it was never given (id {h.id})"
            )
        return h

    def check_returnable(self, h: HandleValue) -> None:
        if h not in self.granted:
            raise HostForgeryError(
                f"host returned a fabricated handle (id {h.id})"
            )

    def seg_alloc(self, size: int) -> HandleValue:
        h = self.store.seg_alloc(size)
        self.grant(h)
        return h

    def seg_free(self, h: HandleValue) -> None:
        self.store.seg_free(self._require(h))

    def seg_load(self, h: HandleValue, ty, static_off: int = 0) -> Value:
        v = self.store.seg_load(self._require(h), ty, static_off)
        if v.type is HANDLE:
            self.grant(v.payload)
        return v

    def seg_load_scalar(self, h: HandleValue, width: int, static_off: int = 0) -> int:
        return self.store.seg_load_scalar(self._require(h), width, static_off)

    def seg_store_scalar(
        self, h: HandleValue, width: int, value: int, static_off: int = 0
    ) -> None:
        self.store.seg_store_scalar(self._require(h), width, value, static_off)

    def seg_store(self, h: HandleValue, v: Value, static_off: int = 0) -> None:
        if v.type is HANDLE:
            self._require(v.payload)
        self.store.seg_store(self._require(h), v, static_off)

    def handle_add(self, h: HandleValue, delta: int) -> HandleValue:
        out = handle_add(self._require(h), delta)
        self.grant(out)
        return out

    def handle_setbounds(self, h: HandleValue, length: int) -> HandleValue:
        out = handle_setbounds(self._require(h), length)
        self.grant(out)
        return out

    def linear_load(self, addr: int, width: int) -> int:
        return self.store.linear_load(addr, width)

    def linear_store(self, addr: int, width: int, value: int) -> None:
        self.store.linear_store(addr, width, value)


class HostFunction:
    """Imported native closure.  The callback receives (view, args) and
    returns a list of Values; it can only reach the store through the
    checked view, so it cannot fabricate handles."""

    is_host = True

    def __init__(self, type: FuncType, fn, captures=(), name: str = "host"):
        self.type = type
        self.fn = fn
        self.captures = tuple(captures)
        self.name = name

    def call_host(self, store: Store, args: list[Value]) -> list[Value]:
        view = StoreView(
            store,
            [a.payload for a in args if a.type is HANDLE] + list(self.captures),
        )
        results = self.fn(view, args)
        results = list(results) if results is not None else []
        if len(results) != len(self.type.results) or any(
            r.type is not t for r, t in zip(results, self.type.results)
        ):
            raise LinkError(
                f"host function {self.name!r} returned "
                f"{[r.type.value for r in results]}, want {self.type}"
            )
        for r in results:
            if r.type is HANDLE:
                view.check_returnable(r.payload)
        return results


class Instance:
    """Runtime form of a module: resolved index spaces plus exports."""

    def __init__(self, store: Store, typed: TypedModule):
        self.store = store
        self.typed = typed
        self.funcs: list = []
        self.globals: list[GlobalCell] = []
        self.table: Optional[Table] = None
        self.memory: Optional[Memory] = None
        self.exports: dict[str, object] = {}

    def export(self, name: str):
        return self.exports[name]


def _eval_init(ins: Instr, globals_: list[GlobalCell]):
    if ins.op == "const":
        return ins.imm
    if ins.op == "h.null":
        return NULL_HANDLE
    if ins.op == "global.get":
        return globals_[ins.imm].value
    raise LinkError(f"unsupported initializer {ins.op!r}")


def instantiate(
    store: Store,
    typed: TypedModule,
    imports: Optional[Mapping] = None,
    fuel: int = DEFAULT_FUEL,
) -> Instance:
    """Instantiate a validated module.

    Raises LinkError on resolution/declaration problems, MSWasmTrap if
    the start function traps, StartFailure for other start outcomes.
    The store is rolled back whenever no Instance is returned.
    """
    imports = imports or {}
    m = typed.module
    snap = store.snapshot()
    try:
        inst = Instance(store, typed)

        for imp in m.imports:
            key = (imp.module, imp.name)
            item = imports.get(key)
            if item is None:
                raise LinkError(f"missing import {imp.module}.{imp.name}")
            d = imp.desc
            if isinstance(d, FuncImport):
                if not isinstance(item, (FuncInstance, HostFunction)):
                    raise LinkError(f"{imp.module}.{imp.name} is not a function")
                if item.type != d.type:
                    raise LinkError(
                        f"{imp.module}.{imp.name} has type {item.type}, want {d.type}"
                    )
                inst.funcs.append(item)
            elif isinstance(d, GlobalImport):
                if not isinstance(item, GlobalCell):
                    raise LinkError(f"{imp.module}.{imp.name} is not a global")
                if item.mut != d.mut or item.ty is not d.ty:
                    raise LinkError(
                        f"{imp.module}.{imp.name} is "
                        f"{'mut ' if item.mut else ''}{item.ty.value}, want "
                        f"{'mut ' if d.mut else ''}{d.ty.value}"
                    )
                inst.globals.append(item)
            elif isinstance(d, TableImport):
                if not isinstance(item, Table):
                    raise LinkError(f"{imp.module}.{imp.name} is not a table")
                if len(item.entries) < d.min:
                    raise LinkError(
                        f"{imp.module}.{imp.name} has {len(item.entries)} entries, "
                        f"need {d.min}"
                    )
                inst.table = item
            elif isinstance(d, MemoryImport):
                if not isinstance(item, Memory) or item.store is not store:
                    raise LinkError(f"{imp.module}.{imp.name} is not a memory")
                if item.pages < d.min_pages:
                    raise LinkError(
                        f"{imp.module}.{imp.name} has {item.pages} pages, "
                        f"need {d.min_pages}"
                    )
                inst.memory = item

        for fi, fn in enumerate(m.funcs):
            f = FuncInstance(fn.type, fn.locals, fn.body, typed.n_imported_funcs + fi)
            f.instance = inst
            store.register_func(f)
            inst.funcs.append(f)

        for g in m.globals:
            value = _eval_init(g.init, inst.globals)
            inst.globals.append(store.new_global(g.mut, g.ty, value))

        if m.memory is not None:
            store.ensure_linear(m.memory)
            inst.memory = Memory(store)

        for t in m.tables:
            inst.table = store.new_table([inst.funcs[i] for i in t.entries])

        for d in m.data:
            addr = _eval_init(d.offset, inst.globals)
            try:
                store.linear_init(addr, d.bytes)
            except MSWasmTrap:
                raise LinkError(
                    f"data segment [{addr}, {addr + len(d.bytes)}) out of linear bounds"
                ) from None

        for e in m.exports:
            if e.kind == "func":
                inst.exports[e.name] = inst.funcs[e.index]
            elif e.kind == "global":
                inst.exports[e.name] = inst.globals[e.index]
            elif e.kind == "table":
                inst.exports[e.name] = inst.table
            elif e.kind == "memory":
                inst.exports[e.name] = inst.memory

        # Global-variable machinery: a handle global exported as
        # "cglobal:<name>:<size>" is backed by a fresh zeroed segment at
        # instantiation (the C backend binds the same window to a C
        # object's storage).
        for e in m.exports:
            if e.kind == "global" and e.name.startswith("cglobal:"):
                parts = e.name.split(":")
                if len(parts) != 3 or not parts[2].isdigit():
                    raise LinkError(f"malformed cglobal export {e.name!r}")
                cell = inst.globals[e.index]
                if cell.ty is not HANDLE:
                    raise LinkError(f"cglobal export {e.name!r} is not a handle")
                if e.index >= typed.n_imported_globals:
                    cell.value = store.seg_alloc(int(parts[2]))

        if m.start is not None:
            fi = inst.funcs[m.start]
            if getattr(fi, "is_host", False):
                fi.call_host(store, [])
            else:
                outcome = run(Config.call(store, fi, []), fuel)
                if isinstance(outcome, Trapped):
                    store.restore(snap)
                    raise MSWasmTrap(outcome.trap.kind, outcome.trap.detail)
                if not isinstance(outcome, Values):
                    store.restore(snap)
                    raise StartFailure(outcome)
        return inst
    except (LinkError, MSWasmTrap, StartFailure):
        store.restore(snap)
        raise


def link_chain(
    store: Store,
    modules: list[tuple[str, TypedModule]],
    base_imports: Optional[Mapping] = None,
    fuel: int = DEFAULT_FUEL,
) -> list[Instance]:
    """Left-to-right instantiation; later modules see earlier exports
    under (module-name, item-name)."""
    registry = dict(base_imports or {})
    instances = []
    for name, typed in modules:
        inst = instantiate(store, typed, registry, fuel)
        instances.append(inst)
        for ename, item in inst.exports.items():
            registry[(name, ename)] = item
    return instances


# -- built-in host functions -------------------------------------------------

def host_memcpy() -> HostFunction:
    """Byte-copying memcpy over handles; traps on any out-of-window byte."""

    def fn(view: StoreView, args: list[Value]):
        dst, src, n = args[0].payload, args[1].payload, args[2].payload
        for k in range(n):
            view.seg_store_scalar(dst, 1, view.seg_load_scalar(src, 1, k), k)
        return [Value(HANDLE, dst)]

    return HostFunction(
        FuncType((HANDLE, HANDLE, I32), (HANDLE,)), fn, name="memcpy"
    )


def host_abort() -> HostFunction:
    def fn(view, args):
        raise MSWasmTrap(TrapKind.UNREACHABLE, "abort called")

    return HostFunction(FuncType((), ()), fn, name="abort")


BUILTIN_HOSTS = {"memcpy": host_memcpy, "abort": host_abort}
