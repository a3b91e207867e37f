"""Translator from validated modules to bounds-checked C sources.

Each function lowers through static stack elaboration: stack slots
become typed local temporaries, control flow becomes labels and gotos,
and every memory access goes through a checked runtime accessor.  The
default "plain" mode targets any C11 toolchain plus the support
runtime; "checkedc" mode swaps the runtime surface for Checked C
spellings (array_ptr / dynamic_check) and is emitted-text only.
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
    PAGE_SIZE,
    Value,
    ValueType,
)
from .validate import TypedModule

PHYSICAL_MEMORY_IMPORT = ("env", "_physical_memory")
CGLOBAL_PREFIX = "cglobal:"


class CodegenError(Exception):
    pass


@dataclass(frozen=True)
class CodegenOptions:
    mode: str = "plain"  # plain | checkedc
    module_prefix: str = "w2c_"
    emit_wrappers: bool = True
    weak_wrapper_linkage: bool = True
    trap_behavior: str = "abort"  # abort | return-error
    arena_size: int = 1 << 20
    wrapper_modules: tuple[str, ...] = ("env",)


@dataclass(frozen=True)
class EmittedUnit:
    name: str
    source: str
    header: str
    wrappers: str
    wrapper_protos: tuple[str, ...]
    global_inits: tuple[str, ...]


CTY = {I32: "u32", I64: "u64", F32: "f32", F64: "f64", HANDLE: "Handle"}
SUF = {I32: "i32", I64: "i64", F32: "f32", F64: "f64", HANDLE: "h"}
NATIVE_TY = {I32: "u32", I64: "u64", F32: "f32", F64: "f64", HANDLE: "void *"}

# Accessor spellings per mode; checkedc mode follows the handle_store()
# naming of the Checked C runtime surface.
_ACCESSORS = {
    "plain": {
        "load": "mswasm_rt_load_",
        "store": "mswasm_rt_store_",
        "load_handle": "mswasm_rt_load_handle",
        "store_handle": "mswasm_rt_store_handle",
    },
    "checkedc": {
        "load": "handle_load_",
        "store": "handle_store_",
        "load_handle": "handle_load",
        "store_handle": "handle_store",
    },
}


def sanitize(name: str) -> str:
    out = []
    for c in name:
        if c.isalnum() or c == "_":
            out.append(c)
        else:
            out.append(f"_x{ord(c) & 0xFF:02x}")
    s = "".join(out)
    if not s or s[0].isdigit():
        s = "_" + s
    return s


def _float_lit(x: float, ty: ValueType) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        raise CodegenError("non-finite float constants are not supported")
    return x.hex() + ("f" if ty is F32 else "")


def _default_lit(ty: ValueType) -> str:
    if ty is HANDLE:
        return "mswasm_null_handle()"
    if ty is F32:
        return "0.0f"
    if ty is F64:
        return "0.0"
    return "0u" if ty is I32 else "0ull"


def _zero_return(ty: Optional[ValueType]) -> str:
    return "return;" if ty is None else f"return {_default_lit(ty)};"


class _Names:
    """Deterministic symbol names for one module."""

    def __init__(self, unit_name: str, typed: TypedModule, opts: CodegenOptions):
        self.prefix = opts.module_prefix + sanitize(unit_name) + "_"
        self.typed = typed
        m = typed.module
        self.func_export: dict[int, str] = {}
        self.global_export: dict[int, str] = {}
        for e in m.exports:
            if e.kind == "func":
                self.func_export.setdefault(e.index, e.name)
            elif e.kind == "global":
                self.global_export.setdefault(e.index, e.name)
        self.func_imports: list[tuple[str, str, FuncType]] = []
        self.global_imports: list[tuple[str, str, GlobalImport]] = []
        for imp in m.imports:
            if isinstance(imp.desc, FuncImport):
                self.func_imports.append((imp.module, imp.name, imp.desc.type))
            elif isinstance(imp.desc, GlobalImport):
                self.global_imports.append((imp.module, imp.name, imp.desc))

    def func(self, idx: int) -> str:
        n_if = self.typed.n_imported_funcs
        if idx < n_if:
            mod, item, _ = self.func_imports[idx]
            return "w2c_" + sanitize(mod) + "_" + sanitize(item)
        own = idx - n_if
        exported = self.func_export.get(idx)
        local = sanitize(exported) if exported is not None else f"f{idx}"
        return self.prefix + local

    def func_is_public(self, idx: int) -> bool:
        return idx in self.func_export

    def global_(self, idx: int) -> str:
        n_ig = self.typed.n_imported_globals
        if idx < n_ig:
            mod, item, _ = self.global_imports[idx]
            return "w2c_" + sanitize(mod) + "_" + sanitize(item)
        exported = self.global_export.get(idx)
        local = sanitize(exported) if exported is not None else f"g{idx}"
        return self.prefix + local

    def global_is_public(self, idx: int) -> bool:
        return idx in self.global_export

    @property
    def table(self) -> str:
        return self.prefix + "table"

    @property
    def instantiate(self) -> str:
        return self.prefix + "instantiate"


def _signature(name: str, ft: FuncType, param_prefix: str = "w2c_p") -> str:
    ret = CTY[ft.results[0]] if ft.results else "void"
    if ft.params:
        ps = ", ".join(
            f"{CTY[t]} {param_prefix}{i}" for i, t in enumerate(ft.params)
        )
    else:
        ps = "void"
    return f"{ret} {name}({ps})"


def _cast_for(ft: FuncType) -> str:
    ret = CTY[ft.results[0]] if ft.results else "void"
    ps = ", ".join(CTY[t] for t in ft.params) if ft.params else "void"
    return f"({ret} (*)({ps}))"


class _Block:
    __slots__ = ("kind", "label", "bt", "height")

    def __init__(self, kind: str, label: int, bt: Optional[ValueType], height: int):
        self.kind = kind
        self.label = label
        self.bt = bt
        self.height = height


class _FuncEmitter:
    def __init__(self, names: _Names, typed: TypedModule, fn: Func, acc: dict,
                 type_ids: dict):
        self.names = names
        self.typed = typed
        self.fn = fn
        self.acc = acc
        self.type_ids = type_ids
        self.lines: list[str] = []
        self.stack: list[ValueType] = []
        self.blocks: list[_Block] = []
        self.temps: set[tuple[int, ValueType]] = set()
        self.labels = 0
        self.used_labels: set[str] = set()
        self.label_lines: list[tuple[int, str]] = []
        self.dead = False

    # -- plumbing ---------------------------------------------------------

    def out(self, line: str) -> None:
        self.lines.append("  " + line)

    def slot(self, depth: int, ty: ValueType) -> str:
        self.temps.add((depth, ty))
        return f"s{depth}_{SUF[ty]}"

    def push(self, ty: ValueType) -> str:
        name = self.slot(len(self.stack), ty)
        self.stack.append(ty)
        return name

    def pop(self) -> tuple[str, ValueType]:
        ty = self.stack.pop()
        return f"s{len(self.stack)}_{SUF[ty]}", ty

    def top(self, k: int = 0) -> tuple[str, ValueType]:
        ty = self.stack[-1 - k]
        d = len(self.stack) - 1 - k
        return f"s{d}_{SUF[ty]}", ty

    def new_label(self) -> int:
        self.labels += 1
        return self.labels

    def mark_label(self, tag: str) -> None:
        self.label_lines.append((len(self.lines), tag))
        self.lines.append(f"{tag}:;")

    def local_var(self, idx: int) -> str:
        n_params = len(self.fn.type.params)
        return f"w2c_p{idx}" if idx < n_params else f"w2c_l{idx}"

    # -- branches -----------------------------------------------------------

    def _branch_stmts(self, depth: int) -> list[str]:
        if depth >= len(self.blocks):
            if self.fn.type.results:
                v, _ = self.top()
                return [f"return {v};"]
            return ["return;"]
        target = self.blocks[len(self.blocks) - 1 - depth]
        if target.kind == "loop":
            self.used_labels.add(f"L{target.label}_start")
            return [f"goto L{target.label}_start;"]
        stmts = []
        if target.bt is not None:
            v, ty = self.top()
            dst = self.slot(target.height, ty)
            if dst != v:
                stmts.append(f"{dst} = {v};")
        self.used_labels.add(f"L{target.label}_end")
        stmts.append(f"goto L{target.label}_end;")
        return stmts

    # -- emission -------------------------------------------------------------

    def seq(self, body: tuple[Instr, ...]) -> None:
        for ins in body:
            if self.dead:
                return
            self.emit(ins)

    def emit(self, ins: Instr) -> None:
        op = ins.op
        names = self.names

        if op == "const":
            ty = ins.ty
            if ty is I32:
                self.out(f"{self.push(ty)} = {ins.imm}u;")
            elif ty is I64:
                self.out(f"{self.push(ty)} = {ins.imm}ull;")
            else:
                self.out(f"{self.push(ty)} = {_float_lit(ins.imm, ty)};")
        elif op in ("add", "sub", "mul"):
            b, _ = self.pop()
            a, _ = self.top()
            sym = {"add": "+", "sub": "-", "mul": "*"}[op]
            self.out(f"{a} = {a} {sym} {b};")
        elif op == "shl":
            b, _ = self.pop()
            a, ty = self.top()
            self.out(f"{a} = {a} << ({b} % {64 if ty is I64 else 32}u);")
        elif op == "eqz":
            v, ty = self.pop()
            r = self.push(I32)
            self.out(f"{r} = ({v} == 0u);")
        elif op in ("eq", "lt_u", "ge_u"):
            b, _ = self.pop()
            a, _ = self.pop()
            r = self.push(I32)
            sym = {"eq": "==", "lt_u": "<", "ge_u": ">="}[op]
            self.out(f"{r} = ({a} {sym} {b});")
        elif op == "drop":
            self.pop()
        elif op == "select":
            c, _ = self.pop()
            v2, _ = self.pop()
            v1, _ = self.top()
            self.out(f"{v1} = {c} ? {v1} : {v2};")
        elif op == "nop":
            pass
        elif op == "local.get":
            t = (self.fn.type.params + self.fn.locals)[ins.imm]
            self.out(f"{self.push(t)} = {self.local_var(ins.imm)};")
        elif op == "local.set":
            v, _ = self.pop()
            self.out(f"{self.local_var(ins.imm)} = {v};")
        elif op == "local.tee":
            v, _ = self.top()
            self.out(f"{self.local_var(ins.imm)} = {v};")
        elif op == "global.get":
            _, t = self.typed.global_types[ins.imm]
            self.out(f"{self.push(t)} = {names.global_(ins.imm)};")
        elif op == "global.set":
            v, _ = self.pop()
            self.out(f"{names.global_(ins.imm)} = {v};")
        elif op == "call":
            self._call(names.func(ins.imm), self.typed.func_types[ins.imm])
        elif op == "call_indirect":
            ft = ins.imm
            idx, _ = self.pop()
            tid = self.type_ids[ft]
            target = (
                f"({_cast_for(ft)}mswasm_rt_table_lookup(&{names.table}, "
                f"{idx}, {tid}u))"
            )
            self._call(target, ft)
        elif op == "load":
            a, _ = self.pop()
            r = self.push(ins.ty)
            w = "u64" if ins.ty is I64 else "u32"
            self.out(f"{r} = mswasm_rt_linear_load_{w}({a});")
        elif op == "store":
            v, ty = self.pop()
            a, _ = self.pop()
            w = "u64" if ty is I64 else "u32"
            self.out(f"mswasm_rt_linear_store_{w}({a}, {v});")
        elif op == "segload":
            h, _ = self.pop()
            r = self.push(ins.ty)
            if ins.ty is HANDLE:
                self.out(f"{r} = {self.acc['load_handle']}({h}, {ins.off}u);")
            else:
                self.out(
                    f"{r} = {self.acc['load']}{self._scalar_suffix(ins.ty)}"
                    f"({h}, {ins.off}u);"
                )
        elif op == "segstore":
            v, ty = self.pop()
            h, _ = self.pop()
            if ty is HANDLE:
                self.out(f"{self.acc['store_handle']}({h}, {ins.off}u, {v});")
            else:
                self.out(
                    f"{self.acc['store']}{self._scalar_suffix(ty)}"
                    f"({h}, {ins.off}u, {v});"
                )
        elif op == "segload8_u":
            h, _ = self.pop()
            r = self.push(I32)
            self.out(f"{r} = {self.acc['load']}u8({h}, {ins.off}u);")
        elif op == "segstore8":
            v, _ = self.pop()
            h, _ = self.pop()
            self.out(f"{self.acc['store']}u8({h}, {ins.off}u, {v});")
        elif op == "segalloc":
            v, _ = self.pop()
            r = self.push(HANDLE)
            self.out(f"{r} = mswasm_rt_segalloc({v});")
        elif op == "segfree":
            h, _ = self.pop()
            self.out(f"mswasm_rt_segfree({h});")
        elif op == "h.null":
            self.out(f"{self.push(HANDLE)} = mswasm_null_handle();")
        elif op == "h.add":
            d, _ = self.pop()
            h, _ = self.top()
            self.out(f"{h} = mswasm_rt_handle_add({h}, {d});")
        elif op in ("slice", "handle.setbounds"):
            n, _ = self.pop()
            h, _ = self.top()
            self.out(f"{h} = mswasm_rt_setbounds({h}, {n});")
        elif op == "unreachable":
            self.out('mswasm_rt_trap(MSWASM_TRAP_UNREACHABLE, "unreachable");')
            self.dead = True
        elif op == "block":
            label = self.new_label()
            self.blocks.append(_Block("block", label, ins.bt, len(self.stack)))
            self.seq(ins.body)
            self._end_block(ins.bt)
        elif op == "loop":
            label = self.new_label()
            self.mark_label(f"L{label}_start")
            self.blocks.append(_Block("loop", label, ins.bt, len(self.stack)))
            self.seq(ins.body)
            blk = self.blocks.pop()
            del self.stack[blk.height:]
            if ins.bt is not None:
                self.push(ins.bt)
            # falling off a loop is the only exit; dead stays as-is
        elif op == "if":
            c, _ = self.pop()
            label = self.new_label()
            height = len(self.stack)
            if ins.orelse:
                self.used_labels.add(f"L{label}_else")
                self.out(f"if (!({c})) goto L{label}_else;")
            else:
                self.used_labels.add(f"L{label}_end")
                self.out(f"if (!({c})) goto L{label}_end;")
            self.blocks.append(_Block("if", label, ins.bt, height))
            self.seq(ins.body)
            then_dead = self.dead
            self.dead = False
            if ins.orelse:
                if not then_dead:
                    self.used_labels.add(f"L{label}_end")
                    self.out(f"goto L{label}_end;")
                self.mark_label(f"L{label}_else")
                del self.stack[height:]
                self.seq(ins.orelse)
                else_dead = self.dead
                self.dead = False
            else:
                else_dead = False
            blk = self.blocks.pop()
            self.mark_label(f"L{label}_end")
            del self.stack[height:]
            if ins.bt is not None:
                self.push(ins.bt)
            self.dead = then_dead and else_dead and f"L{label}_end" not in self.used_labels
        elif op == "br":
            for s in self._branch_stmts(ins.imm):
                self.out(s)
            self.dead = True
        elif op == "br_if":
            c, _ = self.pop()
            stmts = self._branch_stmts(ins.imm)
            if len(stmts) == 1:
                self.out(f"if ({c}) {{ {stmts[0]} }}")
            else:
                self.out(f"if ({c}) {{")
                for s in stmts:
                    self.out("  " + s)
                self.out("}")
        elif op == "return":
            for s in self._branch_stmts(len(self.blocks)):
                self.out(s)
            self.dead = True
        else:
            raise CodegenError(f"unsupported instruction {op!r}")

    def _scalar_suffix(self, ty: ValueType) -> str:
        return {I32: "u32", I64: "u64", F32: "f32", F64: "f64"}[ty]

    def _call(self, target: str, ft: FuncType) -> None:
        args = []
        for _ in ft.params:
            args.append(self.pop()[0])
        args.reverse()
        call = f"{target}({', '.join(args)})"
        if ft.results:
            r = self.push(ft.results[0])
            self.out(f"{r} = {call};")
        else:
            self.out(f"{call};")

    def _end_block(self, bt: Optional[ValueType]) -> None:
        blk = self.blocks.pop()
        self.mark_label(f"L{blk.label}_end")
        del self.stack[blk.height:]
        if bt is not None:
            self.push(bt)
        if self.dead:
            self.dead = f"L{blk.label}_end" not in self.used_labels

    def render(self, name: str, public: bool) -> str:
        self.seq(self.fn.body)
        ft = self.fn.type
        if not self.dead:
            if ft.results:
                v, _ = self.top()
                self.out(f"return {v};")
            else:
                self.out("return;")
        elif ft.results:
            self.out("/* unreachable */")
            self.out(_zero_return(ft.results[0]))

        # drop labels nothing branches to
        drop = {
            i for i, tag in self.label_lines if tag not in self.used_labels
        }
        body = [l for i, l in enumerate(self.lines) if i not in drop]

        decl: list[str] = []
        n_params = len(ft.params)
        for i, t in enumerate(self.fn.locals):
            decl.append(f"  {CTY[t]} w2c_l{n_params + i} = {_default_lit(t)};")
        for d, t in sorted(self.temps, key=lambda x: (x[0], SUF[x[1]])):
            decl.append(f"  {CTY[t]} s{d}_{SUF[t]} = {_default_lit(t)};")
        silence = [
            f"  (void)w2c_p{i};" for i in range(n_params)
        ] + [
            f"  (void)w2c_l{n_params + i};" for i in range(len(self.fn.locals))
        ] + [
            f"  (void)s{d}_{SUF[t]};"
            for d, t in sorted(self.temps, key=lambda x: (x[0], SUF[x[1]]))
        ]
        linkage = "" if public else "static "
        head = linkage + _signature(name, ft)
        return "\n".join([head + " {"] + decl + silence + body + ["}"])


def _collect_type_ids(typed: TypedModule) -> dict[FuncType, int]:
    ids: dict[FuncType, int] = {}

    def intern(ft: FuncType) -> None:
        if ft not in ids:
            ids[ft] = len(ids)

    for ft in typed.func_types:
        intern(ft)

    def scan(body):
        for ins in body:
            if ins.op == "call_indirect":
                intern(ins.imm)
            scan(ins.body)
            scan(ins.orelse)

    for fn in typed.module.funcs:
        scan(fn.body)
    return ids


def _parse_cglobal(name: str) -> Optional[tuple[str, int]]:
    """cglobal:<name>:<size> export naming convention for the global
    variable machinery (a C object backs the handle's segment)."""
    if not name.startswith(CGLOBAL_PREFIX):
        return None
    parts = name.split(":")
    if len(parts) != 3:
        raise CodegenError(f"malformed cglobal export {name!r}")
    try:
        size = int(parts[2])
    except ValueError:
        raise CodegenError(f"malformed cglobal size in {name!r}") from None
    return sanitize(parts[1]), size


def _bytes_lit(raw: bytes) -> str:
    return ", ".join(str(b) for b in raw)


def emit_global_machinery(
    typed: TypedModule, names: _Names
) -> tuple[list[str], list[str], list[str]]:
    """(definitions, init functions, init calls) for cglobal exports."""
    defs: list[str] = []
    inits: list[str] = []
    calls: list[str] = []
    m = typed.module
    n_ig = typed.n_imported_globals
    for e in m.exports:
        if e.kind != "global":
            continue
        parsed = _parse_cglobal(e.name)
        if parsed is None:
            continue
        cname, size = parsed
        gi = e.index
        if gi < n_ig:
            continue  # importer side: extern declaration only
        decl = m.globals[gi - n_ig]
        if decl.ty is not HANDLE:
            raise CodegenError(f"cglobal export {e.name!r} is not a handle global")
        storage = names.prefix + cname + "_storage"
        init_fn = names.prefix + "init_" + cname
        defs.append(f"u8 {storage}[{max(1, size)}];")
        inits.append(
            f"static void {init_fn}(void) {{\n"
            f"  {names.global_(gi)} = mswasm_rt_bind_static({storage}, {size}u);\n"
            f"}}"
        )
        calls.append(f"{init_fn}();")
    return defs, inits, calls


def lower_physical_memory(
    typed: TypedModule, names: _Names, opts: CodegenOptions
) -> tuple[list[str], list[str]]:
    """(definitions, instantiate statements) binding _physical_memory to
    the test arena when that import is present."""
    for imp in typed.module.imports:
        if (imp.module, imp.name) == PHYSICAL_MEMORY_IMPORT:
            if not isinstance(imp.desc, GlobalImport) or imp.desc.ty is not HANDLE:
                raise CodegenError("_physical_memory must be a handle global import")
            sym = "w2c_" + sanitize(imp.module) + "_" + sanitize(imp.name)
            defs = [f"__attribute__((weak)) Handle {sym};"]
            stmts = [f"{sym} = mswasm_rt_physmem({opts.arena_size}u);"]
            return defs, stmts
    return [], []


_CHECKEDC_PRELUDE = """\
/* Checked C runtime surface (requires a Checked C toolchain).
 * The handle is a checked fat pointer; every accessor states its
 * spatial condition as a dynamic_check the compiler may discharge
 * statically or enforce at runtime. */
#include <stdchecked.h>
#include <stdint.h>

typedef uint8_t u8;
typedef uint32_t u32;
typedef uint64_t u64;
typedef int32_t s32;
typedef float f32;
typedef double f64;

typedef struct Handle {
  array_ptr<u8> data : byte_count(bound);
  u32 offset;
  u32 bound;
  u8 valid;
  u32 id;
} Handle;

static inline u32 handle_load_u32(Handle h, u32 off) {
  dynamic_check(h.valid);
  dynamic_check((s32)h.offset >= 0);
  dynamic_check((u64)h.offset + off + sizeof(u32) <= h.bound);
  return *((ptr<u32>)(h.data + h.offset + off));
}

static inline void handle_store_u32(Handle h, u32 off, u32 v) {
  dynamic_check(h.valid);
  dynamic_check((s32)h.offset >= 0);
  dynamic_check((u64)h.offset + off + sizeof(u32) <= h.bound);
  *((ptr<u32>)(h.data + h.offset + off)) = v;
}

static inline void handle_store(Handle h, u32 off, Handle v) {
  dynamic_check(h.valid);
  dynamic_check((u64)h.offset + off + sizeof(Handle) <= h.bound);
  *((ptr<Handle>)(h.data + h.offset + off)) = v;
}

static inline Handle handle_load(Handle h, u32 off) {
  dynamic_check(h.valid);
  dynamic_check((u64)h.offset + off + sizeof(Handle) <= h.bound);
  return *((ptr<Handle>)(h.data + h.offset + off));
}
"""


def codegen_module(
    typed: TypedModule, opts: CodegenOptions = CodegenOptions(), name: str = "m0"
) -> EmittedUnit:
    """Emit one compilable unit (header, source, weak wrappers)."""
    if opts.mode not in ("plain", "checkedc"):
        raise CodegenError(f"unknown mode {opts.mode!r}")
    if typed.n_imported_tables or typed.n_imported_mems:
        raise CodegenError("table/memory imports are not supported by codegen")
    m = typed.module
    names = _Names(name, typed, opts)
    acc = _ACCESSORS[opts.mode]
    type_ids = _collect_type_ids(typed)
    guard = "MSWASM_GEN_" + sanitize(name).upper() + "_H"
    n_if = typed.n_imported_funcs
    n_ig = typed.n_imported_globals

    # ---- header -----------------------------------------------------------
    h: list[str] = [
        "/* Generated by mswasm codegen; do not edit. */",
        f"#ifndef {guard}",
        f"#define {guard}",
        "",
    ]
    if opts.mode == "plain":
        h.append('#include "mswasm_rt.h"')
    else:
        h.append(_CHECKEDC_PRELUDE)
    h.append("")
    h.append(f"void {names.instantiate}(void);")
    for idx in sorted(names.func_export):
        h.append(_signature(names.func(idx), typed.func_types[idx]) + ";")
    for idx in sorted(names.global_export):
        _, ty = typed.global_types[idx]
        if idx >= n_ig:
            h.append(f"extern {CTY[ty]} {names.global_(idx)};")
    h += ["", f"#endif /* {guard} */", ""]

    # ---- source ------------------------------------------------------------
    s: list[str] = [
        "/* Generated by mswasm codegen; do not edit. */",
        f'#include "{name}.h"',
        "",
    ]
    # imported symbols
    wrapper_protos: list[str] = []
    for mod, item, ft in names.func_imports:
        sym = "w2c_" + sanitize(mod) + "_" + sanitize(item)
        proto = _signature(sym, ft)
        s.append(f"extern {proto};")
        wrapper_protos.append(proto + ";")
    phys_defs, phys_stmts = lower_physical_memory(typed, names, opts)
    for mod, item, d in names.global_imports:
        if (mod, item) == PHYSICAL_MEMORY_IMPORT:
            continue
        sym = "w2c_" + sanitize(mod) + "_" + sanitize(item)
        s.append(f"extern {CTY[d.ty]} {sym};")
    s += phys_defs
    if names.func_imports or names.global_imports:
        s.append("")

    # globals
    own_globals = []
    for gi in range(n_ig, len(typed.global_types)):
        _, ty = typed.global_types[gi]
        linkage = "" if names.global_is_public(gi) else "static "
        s.append(f"{linkage}{CTY[ty]} {names.global_(gi)};")
        own_globals.append(gi)
    cg_defs, cg_inits, cg_calls = emit_global_machinery(typed, names)
    s += cg_defs
    if own_globals or cg_defs:
        s.append("")

    # table
    has_table = typed.n_tables > 0 and m.tables
    if has_table:
        entries = m.tables[0].entries
        s.append(f"static mswasm_funcref {names.table}_entries[{max(1, len(entries))}];")
        s.append(
            f"static mswasm_table {names.table} = "
            f"{{{names.table}_entries, {len(entries)}u}};"
        )
        s.append("")
    elif any(
        True
        for fn in m.funcs
        for _ in _iter_ops(fn.body, "call_indirect")
    ):
        raise CodegenError("call_indirect requires a module-defined table")

    # prototypes for private functions
    for fi, fn in enumerate(m.funcs):
        idx = n_if + fi
        if not names.func_is_public(idx):
            s.append("static " + _signature(names.func(idx), fn.type) + ";")
    s.append("")

    # bodies
    for fi, fn in enumerate(m.funcs):
        idx = n_if + fi
        em = _FuncEmitter(names, typed, fn, acc, type_ids)
        s.append(em.render(names.func(idx), names.func_is_public(idx)))
        s.append("")

    s += cg_inits
    if cg_inits:
        s.append("")

    # instantiate
    s.append(f"void {names.instantiate}(void) {{")
    s.append("  static int done = 0;")
    s.append("  if (done) return;")
    s.append("  done = 1;")
    s.append("  mswasm_rt_init();")
    if m.memory is not None:
        s.append(f"  mswasm_rt_linear_ensure({m.memory * PAGE_SIZE}u);")
    for di, d in enumerate(m.data):
        s.append(f"  static const u8 data{di}[] = {{{_bytes_lit(d.bytes)}}};")
        off = _init_expr_c(d.offset, names)
        s.append(f"  mswasm_rt_linear_write({off}, data{di}, {len(d.bytes)}u);")
    for stmt in phys_stmts:
        s.append("  " + stmt)
    for gi in own_globals:
        decl = m.globals[gi - n_ig]
        s.append(f"  {names.global_(gi)} = {_init_expr_c(decl.init, names)};")
    for call in cg_calls:
        s.append("  " + call)
    if has_table:
        s.append(f"  (void){names.table};")
        for k, fidx in enumerate(m.tables[0].entries):
            ft = typed.func_types[fidx]
            s.append(
                f"  {names.table}_entries[{k}] = (mswasm_funcref){{"
                f"(mswasm_anyfunc)&{names.func(fidx)}, {type_ids[ft]}u}};"
            )
    if m.start is not None:
        s.append(f"  {names.func(m.start)}();")
    s.append("}")
    s.append("")

    wrappers = emit_wrappers(typed, names, opts) if opts.emit_wrappers else ""
    return EmittedUnit(
        name=name,
        source="\n".join(s),
        header="\n".join(h),
        wrappers=wrappers,
        wrapper_protos=tuple(wrapper_protos),
        global_inits=tuple(
            line.split("(")[0].split()[-1] for line in cg_calls
        ),
    )


def _iter_ops(body, op):
    for ins in body:
        if ins.op == op:
            yield ins
        yield from _iter_ops(ins.body, op)
        yield from _iter_ops(ins.orelse, op)


def _init_expr_c(ins: Instr, names: _Names) -> str:
    if ins.op == "const":
        if ins.ty is I32:
            return f"{ins.imm}u"
        if ins.ty is I64:
            return f"{ins.imm}ull"
        return _float_lit(ins.imm, ins.ty)
    if ins.op == "h.null":
        return "mswasm_null_handle()"
    if ins.op == "global.get":
        return names.global_(ins.imm)
    raise CodegenError(f"unsupported initializer {ins.op!r}")


_KNOWN_LIBC = {"memcpy", "memset", "memmove", "abort", "free"}


def emit_wrapper(
    mod: str, item: str, ft: FuncType, weak: bool = True
) -> str:
    """One boundary wrapper: handles become raw pointers for the native
    callee; returned pointers come back as infinite-bounds handles."""
    for t in ft.params + ft.results:
        if t not in CTY:
            raise CodegenError(
                f"cannot wrap {mod}.{item}: unsupported type; write the "
                f"wrapper by hand"
            )
    sym = "w2c_" + sanitize(mod) + "_" + sanitize(item)
    native = sanitize(item)
    lines = []
    if native not in _KNOWN_LIBC:
        ret_t = NATIVE_TY[ft.results[0]] if ft.results else "void"
        ps = ", ".join(NATIVE_TY[t] for t in ft.params) if ft.params else "void"
        lines.append(f"extern {ret_t} {native}({ps});")
    if weak:
        lines.append("__attribute__((weak))")
    lines.append(_signature(sym, ft) + " {")
    args = []
    for i, t in enumerate(ft.params):
        if t is HANDLE:
            lines.append(f"  void *n{i} = mswasm_rt_handle_to_ptr(w2c_p{i});")
            args.append(f"n{i}")
        else:
            args.append(f"w2c_p{i}")
    call = f"{native}({', '.join(args)})"
    if not ft.results:
        lines.append(f"  {call};")
        lines.append("  return;")
    elif ft.results[0] is HANDLE:
        lines.append(f"  return mswasm_rt_wrap_native({call});")
    else:
        lines.append(f"  return ({CTY[ft.results[0]]}){call};")
    lines.append("}")
    return "\n".join(lines)


def emit_wrappers(typed: TypedModule, names: _Names, opts: CodegenOptions) -> str:
    """Weak wrappers for every function import in the native namespaces."""
    todo = [
        (mod, item, ft)
        for mod, item, ft in names.func_imports
        if mod in opts.wrapper_modules and (mod, item) != PHYSICAL_MEMORY_IMPORT
    ]
    if not todo:
        return ""
    out = [
        "/* Generated boundary wrappers (weak: a strong definition from",
        " * another unit takes priority at link time). */",
        '#include "mswasm_rt.h"',
        "#include <stdlib.h>",
        "#include <string.h>",
        "",
    ]
    for mod, item, ft in todo:
        out.append(emit_wrapper(mod, item, ft, weak=opts.weak_wrapper_linkage))
        out.append("")
    return "\n".join(out)


def emit_driver(
    unit_names: list[str],
    target_unit: str,
    export_name: str,
    args: list[Value],
    result_types: tuple[ValueType, ...],
    export_symbol: str,
) -> str:
    """A main() that instantiates every unit in order, invokes one
    export, and prints the canonical outcome lines the interpreter CLI
    prints, so differential comparison is text equality."""
    lines = [
        "/* Generated differential-test driver. */",
        "#include <stdio.h>",
        "#include <string.h>",
    ]
    for n in unit_names:
        lines.append(f'#include "{n}.h"')
    lines += ["", "int main(void) {"]
    for n in unit_names:
        lines.append(f"  w2c_{sanitize(n)}_instantiate();")
    cargs = []
    for i, a in enumerate(args):
        if a.type is HANDLE:
            lines.append(f"  Handle a{i} = mswasm_null_handle();")
            cargs.append(f"a{i}")
        elif a.type is I32:
            cargs.append(f"{a.payload}u")
        elif a.type is I64:
            cargs.append(f"{a.payload}ull")
        else:
            cargs.append(_float_lit(a.payload, a.type))
    call = f"{export_symbol}({', '.join(cargs)})"
    if result_types:
        rt = result_types[0]
        lines.append(f"  {CTY[rt]} r0 = {call};")
    else:
        lines.append(f"  {call};")
    lines.append('  printf("outcome: values\\n");')
    if result_types:
        rt = result_types[0]
        if rt is I32:
            lines.append('  printf("i32 %u\\n", r0);')
        elif rt is I64:
            lines.append('  printf("i64 %llu\\n", (unsigned long long)r0);')
        elif rt is F32:
            lines.append("  u32 b0; memcpy(&b0, &r0, 4);")
            lines.append('  printf("f32 0x%08x\\n", b0);')
        elif rt is F64:
            lines.append("  u64 b0; memcpy(&b0, &r0, 8);")
            lines.append('  printf("f64 0x%016llx\\n", (unsigned long long)b0);')
        else:
            lines.append(
                '  printf("handle valid=%d offset=%d bound=%u\\n", '
                "r0.valid ? 1 : 0, (s32)r0.offset, r0.bound);"
            )
    lines += ["  return 0;", "}", ""]
    return "\n".join(lines)
