"""S-expression text format for modules (`.msw`) and scripts (`.msws`).

The grammar is documented in docs/text-format.md.  parse and pretty are
inverses on ASTs: parse_module(pretty(m)) == m for every module m.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .ast import (
    DataDecl,
    ExportDecl,
    Func,
    FuncImport,
    FuncType,
    GlobalDecl,
    GlobalImport,
    ImportDecl,
    Instr,
    MemoryImport,
    Module,
    TableDecl,
    TableImport,
    Value,
    ValueType,
    f32,
    f64,
    i32,
    i64,
    valuetype,
)
from . import ast


@dataclass(frozen=True, slots=True)
class SourceSpan:
    start: int
    end: int
    line: int
    col: int

    def __str__(self):
        return f"{self.line}:{self.col}"


class ParseError(Exception):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{span}: {message}")
        self.message = message
        self.span = span


_NOWHERE = SourceSpan(0, 0, 0, 0)


@dataclass(frozen=True, slots=True)
class _Atom:
    text: str
    span: SourceSpan
    is_string: bool = False
    string_bytes: bytes = b""


@dataclass(frozen=True, slots=True)
class _List:
    items: tuple
    span: SourceSpan


def _tokenize(text: str):
    """Yield (_Atom | '(' | ')') tokens with spans."""
    i, n = 0, len(text)
    line, linestart = 1, 0
    toks = []
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
            linestart = i
            continue
        if c in " \t\r":
            i += 1
            continue
        if c == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        span_start = i
        col = i - linestart + 1
        if c in "()":
            toks.append((c, SourceSpan(i, i + 1, line, col)))
            i += 1
            continue
        if c == '"':
            raw = []
            i += 1
            while True:
                if i >= n:
                    raise ParseError(
                        "unterminated string", SourceSpan(span_start, n, line, col)
                    )
                c = text[i]
                if c == '"':
                    i += 1
                    break
                if c == "\n":
                    raise ParseError(
                        "newline in string", SourceSpan(span_start, i, line, col)
                    )
                if c == "\\":
                    if i + 1 >= n:
                        raise ParseError(
                            "unterminated escape", SourceSpan(i, n, line, col)
                        )
                    e = text[i + 1]
                    if e == "n":
                        raw.append(0x0A)
                        i += 2
                    elif e == "t":
                        raw.append(0x09)
                        i += 2
                    elif e == "r":
                        raw.append(0x0D)
                        i += 2
                    elif e in ('"', "\\"):
                        raw.append(ord(e))
                        i += 2
                    else:
                        hx = text[i + 1 : i + 3]
                        if len(hx) == 2 and all(h in "0123456789abcdefABCDEF" for h in hx):
                            raw.append(int(hx, 16))
                            i += 3
                        else:
                            raise ParseError(
                                f"bad escape \\{e}", SourceSpan(i, i + 2, line, col)
                            )
                else:
                    raw.append(ord(c))
                    i += 1
            span = SourceSpan(span_start, i, line, col)
            b = bytes(raw)
            toks.append(
                (_Atom(b.decode("latin-1"), span, True, b), span)
            )
            continue
        j = i
        while j < n and text[j] not in ' \t\r\n();"':
            j += 1
        span = SourceSpan(i, j, line, col)
        toks.append((_Atom(text[i:j], span), span))
        i = j
    return toks


def _read_sexprs(text: str) -> list[Union[_Atom, _List]]:
    toks = _tokenize(text)
    stack: list[list] = [[]]
    opens: list[SourceSpan] = []
    for tok, span in toks:
        if tok == "(":
            stack.append([])
            opens.append(span)
        elif tok == ")":
            if len(stack) == 1:
                raise ParseError("unbalanced ')'", span)
            items = stack.pop()
            open_span = opens.pop()
            full = SourceSpan(open_span.start, span.end, open_span.line, open_span.col)
            stack[-1].append(_List(tuple(items), full))
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise ParseError("unclosed '('", opens[-1])
    return stack[0]


def _expect_list(x, what: str) -> _List:
    if not isinstance(x, _List):
        raise ParseError(f"expected {what}", x.span)
    return x


def _head(lst: _List) -> str:
    if not lst.items or not isinstance(lst.items[0], _Atom) or lst.items[0].is_string:
        raise ParseError("expected a keyword", lst.span)
    return lst.items[0].text


def _parse_int(atom, lo: int, hi: int, what: str) -> int:
    if not isinstance(atom, _Atom) or atom.is_string:
        raise ParseError(f"expected {what}", atom.span)
    try:
        v = int(atom.text, 0)
    except ValueError:
        raise ParseError(f"bad {what} literal {atom.text!r}", atom.span) from None
    if not lo <= v < hi:
        raise ParseError(f"{what} literal {atom.text} out of range", atom.span)
    return v


def _parse_float(atom) -> float:
    if not isinstance(atom, _Atom) or atom.is_string:
        raise ParseError("expected a float literal", atom.span)
    try:
        return float(atom.text)
    except ValueError:
        raise ParseError(f"bad float literal {atom.text!r}", atom.span) from None


def _parse_valuetype(atom) -> ValueType:
    if not isinstance(atom, _Atom) or atom.is_string:
        raise ParseError("expected a value type", atom.span)
    try:
        return valuetype(atom.text)
    except ValueError:
        raise ParseError(f"unknown type {atom.text!r}", atom.span) from None


def _parse_index(atom) -> int:
    return _parse_int(atom, 0, 1 << 32, "index")


_NO_IMM = {
    "drop",
    "select",
    "nop",
    "unreachable",
    "return",
    "h.null",
    "segalloc",
    "segfree",
    "h.add",
    "slice",
    "handle.setbounds",
}
_TYPED = {"add", "sub", "mul", "shl", "eqz", "eq", "lt_u", "ge_u", "load", "store"}
_INDEXED = {
    "local.get",
    "local.set",
    "local.tee",
    "global.get",
    "global.set",
    "br",
    "br_if",
    "call",
}


def _parse_offset_imm(items, pos, span) -> int:
    """Parse an optional trailing offset=N immediate."""
    if pos == len(items):
        return 0
    a = items[pos]
    if (
        isinstance(a, _Atom)
        and not a.is_string
        and a.text.startswith("offset=")
        and pos + 1 == len(items)
    ):
        try:
            v = int(a.text[7:], 0)
        except ValueError:
            raise ParseError(f"bad offset {a.text!r}", a.span) from None
        if not 0 <= v < 1 << 32:
            raise ParseError("offset out of range", a.span)
        return v
    raise ParseError("unexpected operand", a.span)


def _parse_functype_items(items, pos) -> tuple[FuncType, int]:
    params: list[ValueType] = []
    results: list[ValueType] = []
    while pos < len(items) and isinstance(items[pos], _List):
        grp = items[pos]
        h = _head(grp)
        if h == "param":
            if results:
                raise ParseError("params after results", grp.span)
            params.extend(_parse_valuetype(a) for a in grp.items[1:])
        elif h == "result":
            results.extend(_parse_valuetype(a) for a in grp.items[1:])
        else:
            break
        pos += 1
    return FuncType(tuple(params), tuple(results)), pos


def _parse_instr(lst: _List) -> Instr:
    op = _head(lst)
    items = lst.items
    rest = items[1:]
    if op == "const":
        # (const N) is i32; (const <type> N) otherwise.
        if len(rest) == 1:
            return Instr("const", ty=ast.I32, imm=_parse_int(rest[0], -(1 << 31), 1 << 32, "i32") & 0xFFFFFFFF)
        if len(rest) == 2:
            ty = _parse_valuetype(rest[0])
            if ty is ast.I32:
                v = _parse_int(rest[1], -(1 << 31), 1 << 32, "i32") & 0xFFFFFFFF
            elif ty is ast.I64:
                v = _parse_int(rest[1], -(1 << 63), 1 << 64, "i64") & 0xFFFFFFFFFFFFFFFF
            elif ty is ast.F32:
                v = ast.round_f32(_parse_float(rest[1]))
            elif ty is ast.F64:
                v = _parse_float(rest[1])
            else:
                raise ParseError("const cannot produce a handle (use h.null)", lst.span)
            return Instr("const", ty=ty, imm=v)
        raise ParseError("const takes one literal", lst.span)
    if op in _NO_IMM:
        if rest:
            raise ParseError(f"{op} takes no operands", lst.span)
        return Instr(op)
    if op in _TYPED:
        if len(rest) != 1:
            raise ParseError(f"{op} takes a type", lst.span)
        ty = _parse_valuetype(rest[0])
        if op in ("load", "store") and ty not in (ast.I32, ast.I64):
            raise ParseError(f"linear {op} supports i32/i64 only", lst.span)
        if ty is ast.HANDLE:
            raise ParseError(f"{op} not defined for handle", lst.span)
        if ty in (ast.F32, ast.F64) and op != "add":
            raise ParseError(f"{op} not defined for {ty.value}", lst.span)
        return Instr(op, ty=ty)
    if op in _INDEXED:
        if len(rest) != 1:
            raise ParseError(f"{op} takes an index", lst.span)
        return Instr(op, imm=_parse_index(rest[0]))
    if op in ("segload", "segstore"):
        if not rest:
            raise ParseError(f"{op} takes a type", lst.span)
        ty = _parse_valuetype(rest[0])
        off = _parse_offset_imm(rest, 1, lst.span)
        return Instr(op, ty=ty, off=off)
    if op in ("segload8_u", "segstore8"):
        off = _parse_offset_imm(rest, 0, lst.span)
        return Instr(op, off=off)
    if op == "call_indirect":
        ft, pos = _parse_functype_items(rest, 0)
        if pos != len(rest):
            raise ParseError("unexpected operand", rest[pos].span)
        return Instr("call_indirect", imm=ft)
    if op in ("block", "loop"):
        bt, pos = _parse_blocktype(rest)
        body = tuple(_parse_instr(_expect_list(x, "an instruction")) for x in rest[pos:])
        return Instr(op, bt=bt, body=body)
    if op == "if":
        bt, pos = _parse_blocktype(rest)
        if pos >= len(rest):
            raise ParseError("if needs a (then ...) branch", lst.span)
        then_l = _expect_list(rest[pos], "(then ...)")
        if _head(then_l) != "then":
            raise ParseError("if needs a (then ...) branch", then_l.span)
        body = tuple(
            _parse_instr(_expect_list(x, "an instruction")) for x in then_l.items[1:]
        )
        orelse: tuple[Instr, ...] = ()
        pos += 1
        if pos < len(rest):
            else_l = _expect_list(rest[pos], "(else ...)")
            if _head(else_l) != "else":
                raise ParseError("expected (else ...)", else_l.span)
            orelse = tuple(
                _parse_instr(_expect_list(x, "an instruction"))
                for x in else_l.items[1:]
            )
            pos += 1
        if pos != len(rest):
            raise ParseError("unexpected operand after else", rest[pos].span)
        return Instr("if", bt=bt, body=body, orelse=orelse)
    raise ParseError(f"unknown mnemonic {op!r}", lst.span)


def _parse_blocktype(items) -> tuple[Optional[ValueType], int]:
    if (
        items
        and isinstance(items[0], _List)
        and items[0].items
        and isinstance(items[0].items[0], _Atom)
        and items[0].items[0].text == "result"
    ):
        grp = items[0]
        if len(grp.items) != 2:
            raise ParseError("block result takes one type", grp.span)
        return _parse_valuetype(grp.items[1]), 1
    return None, 0


def _parse_initexpr(x) -> Instr:
    lst = _expect_list(x, "an initializer expression")
    ins = _parse_instr(lst)
    if ins.op not in ("const", "h.null", "global.get"):
        raise ParseError("initializer must be const, h.null or global.get", lst.span)
    return ins


def _parse_globaltype(x) -> tuple[bool, ValueType]:
    if isinstance(x, _List):
        if _head(x) != "mut" or len(x.items) != 2:
            raise ParseError("expected (mut <type>) or <type>", x.span)
        return True, _parse_valuetype(x.items[1])
    return False, _parse_valuetype(x)


def _parse_string(x) -> str:
    if not isinstance(x, _Atom) or not x.is_string:
        raise ParseError("expected a string", x.span)
    return x.text


def parse_module(text: str) -> Module:
    exprs = _read_sexprs(text)
    if len(exprs) != 1:
        span = exprs[1].span if len(exprs) > 1 else _NOWHERE
        raise ParseError("expected exactly one (module ...)", span)
    return _parse_module_sexpr(_expect_list(exprs[0], "(module ...)"))


def _parse_module_sexpr(lst: _List) -> Module:
    if _head(lst) != "module":
        raise ParseError("expected (module ...)", lst.span)
    funcs: list[Func] = []
    globals_: list[GlobalDecl] = []
    tables: list[TableDecl] = []
    memory: Optional[int] = None
    imports: list[ImportDecl] = []
    exports: list[ExportDecl] = []
    start: Optional[int] = None
    data: list[DataDecl] = []
    # Imported items occupy the front of each index space.
    n_ifuncs = n_iglobals = n_itables = n_imems = 0
    own_funcs = own_globals = own_tables = own_mems = 0

    def inline_export(items, pos, kind, index):
        while (
            pos < len(items)
            and isinstance(items[pos], _List)
            and items[pos].items
            and isinstance(items[pos].items[0], _Atom)
            and items[pos].items[0].text == "export"
        ):
            grp = items[pos]
            if len(grp.items) != 2:
                raise ParseError("inline export takes a name", grp.span)
            exports.append(ExportDecl(_parse_string(grp.items[1]), kind, index))
            pos += 1
        return pos

    for field in lst.items[1:]:
        fl = _expect_list(field, "a module field")
        h = _head(fl)
        items = fl.items
        if h == "func":
            pos = inline_export(items, 1, "func", n_ifuncs + own_funcs)
            ft, pos = _parse_functype_items(items, pos)
            locals_: list[ValueType] = []
            while (
                pos < len(items)
                and isinstance(items[pos], _List)
                and items[pos].items
                and isinstance(items[pos].items[0], _Atom)
                and items[pos].items[0].text == "local"
            ):
                locals_.extend(_parse_valuetype(a) for a in items[pos].items[1:])
                pos += 1
            body = tuple(
                _parse_instr(_expect_list(x, "an instruction")) for x in items[pos:]
            )
            funcs.append(Func(ft, tuple(locals_), body))
            own_funcs += 1
        elif h == "global":
            pos = inline_export(items, 1, "global", n_iglobals + own_globals)
            if len(items) - pos != 2:
                raise ParseError("global takes a type and an initializer", fl.span)
            mut, ty = _parse_globaltype(items[pos])
            globals_.append(GlobalDecl(mut, ty, _parse_initexpr(items[pos + 1])))
            own_globals += 1
        elif h == "table":
            pos = inline_export(items, 1, "table", n_itables + own_tables)
            entries = tuple(_parse_index(a) for a in items[pos:])
            tables.append(TableDecl(entries))
            own_tables += 1
        elif h == "memory":
            pos = inline_export(items, 1, "memory", n_imems + own_mems)
            if memory is not None or own_mems + n_imems > 0:
                raise ParseError("at most one linear memory", fl.span)
            if len(items) - pos != 1:
                raise ParseError("memory takes a page count", fl.span)
            memory = _parse_int(items[pos], 0, 1 << 16, "page count")
            own_mems += 1
        elif h == "import":
            if len(items) != 4:
                raise ParseError('import takes "module" "name" and a descriptor', fl.span)
            mod = _parse_string(items[1])
            name = _parse_string(items[2])
            d = _expect_list(items[3], "an import descriptor")
            dh = _head(d)
            if dh == "func":
                ft, pos = _parse_functype_items(d.items, 1)
                if pos != len(d.items):
                    raise ParseError("unexpected operand", d.items[pos].span)
                desc = FuncImport(ft)
                n_ifuncs += 1
            elif dh == "global":
                if len(d.items) != 2:
                    raise ParseError("global import takes a type", d.span)
                mut, ty = _parse_globaltype(d.items[1])
                desc = GlobalImport(mut, ty)
                n_iglobals += 1
            elif dh == "table":
                desc = TableImport(_parse_int(d.items[1], 0, 1 << 32, "table size"))
                n_itables += 1
            elif dh == "memory":
                if n_imems + own_mems > 0 or memory is not None:
                    raise ParseError("at most one linear memory", d.span)
                desc = MemoryImport(_parse_int(d.items[1], 0, 1 << 16, "page count"))
                n_imems += 1
            else:
                raise ParseError(f"unknown import kind {dh!r}", d.span)
            imports.append(ImportDecl(mod, name, desc))
        elif h == "export":
            if len(items) != 3:
                raise ParseError('export takes "name" and a descriptor', fl.span)
            name = _parse_string(items[1])
            d = _expect_list(items[2], "an export descriptor")
            kind = _head(d)
            if kind not in ("func", "global", "table", "memory") or len(d.items) != 2:
                raise ParseError("bad export descriptor", d.span)
            exports.append(ExportDecl(name, kind, _parse_index(d.items[1])))
        elif h == "start":
            if len(items) != 2:
                raise ParseError("start takes a function index", fl.span)
            start = _parse_index(items[1])
        elif h == "data":
            if len(items) != 3:
                raise ParseError("data takes an offset and a string", fl.span)
            off = _parse_initexpr(items[1])
            s = items[2]
            if not isinstance(s, _Atom) or not s.is_string:
                raise ParseError("expected a string of bytes", s.span)
            data.append(DataDecl(off, s.string_bytes))
        else:
            raise ParseError(f"unknown module field {h!r}", fl.span)

    return Module(
        funcs=tuple(funcs),
        globals=tuple(globals_),
        tables=tuple(tables),
        memory=memory,
        imports=tuple(imports),
        exports=tuple(exports),
        start=start,
        data=tuple(data),
    )


# ---------------------------------------------------------------------------
# scripts

TRAP_NAMES = (
    "spatial",
    "temporal",
    "invalid-handle",
    "tag-forgery",
    "linear-oob",
    "indirect-call-type-mismatch",
    "unreachable",
    "misaligned",
)


@dataclass(frozen=True, slots=True)
class Invoke:
    module: Optional[int]  # ordinal; None = most recent
    name: str
    args: tuple[Value, ...]


@dataclass(frozen=True, slots=True)
class AssertReturn:
    invoke: Invoke
    expected: tuple[Value, ...]


@dataclass(frozen=True, slots=True)
class AssertTrap:
    invoke: Invoke
    kind: str


@dataclass(frozen=True, slots=True)
class AssertInvalid:
    module: Module
    code: str


Directive = Union[Module, Invoke, AssertReturn, AssertTrap, AssertInvalid]


def _parse_script_value(x) -> Value:
    lst = _expect_list(x, "a value literal like (i32 5)")
    h = _head(lst)
    if h == "h.null":
        return Value(ast.HANDLE, ast.NULL_HANDLE)
    if len(lst.items) != 2:
        raise ParseError("value literal takes one literal", lst.span)
    if h == "i32":
        return i32(_parse_int(lst.items[1], -(1 << 31), 1 << 32, "i32"))
    if h == "i64":
        return i64(_parse_int(lst.items[1], -(1 << 63), 1 << 64, "i64"))
    if h == "f32":
        return f32(_parse_float(lst.items[1]))
    if h == "f64":
        return f64(_parse_float(lst.items[1]))
    raise ParseError(f"unknown value type {h!r}", lst.span)


def _parse_invoke(x) -> Invoke:
    lst = _expect_list(x, "(invoke ...)")
    if _head(lst) != "invoke":
        raise ParseError("expected (invoke ...)", lst.span)
    items = lst.items[1:]
    mod: Optional[int] = None
    if items and isinstance(items[0], _Atom) and not items[0].is_string:
        mod = _parse_index(items[0])
        items = items[1:]
    if not items:
        raise ParseError("invoke needs an export name", lst.span)
    name = _parse_string(items[0])
    args = tuple(_parse_script_value(a) for a in items[1:])
    return Invoke(mod, name, args)


def parse_script(text: str) -> list[Directive]:
    out: list[Directive] = []
    for x in _read_sexprs(text):
        lst = _expect_list(x, "a directive")
        h = _head(lst)
        if h == "module":
            out.append(_parse_module_sexpr(lst))
        elif h == "invoke":
            out.append(_parse_invoke(lst))
        elif h == "assert_return":
            if len(lst.items) < 2:
                raise ParseError("assert_return takes an invoke", lst.span)
            inv = _parse_invoke(lst.items[1])
            expected = tuple(_parse_script_value(a) for a in lst.items[2:])
            out.append(AssertReturn(inv, expected))
        elif h == "assert_trap":
            if len(lst.items) != 3:
                raise ParseError("assert_trap takes an invoke and a trap kind", lst.span)
            inv = _parse_invoke(lst.items[1])
            kind = lst.items[2]
            if not isinstance(kind, _Atom) or kind.text not in TRAP_NAMES:
                raise ParseError(
                    f"unknown trap kind (one of {', '.join(TRAP_NAMES)})", kind.span
                )
            out.append(AssertTrap(inv, kind.text))
        elif h == "assert_invalid":
            if len(lst.items) != 3:
                raise ParseError(
                    "assert_invalid takes a module and an error code", lst.span
                )
            m = _parse_module_sexpr(_expect_list(lst.items[1], "(module ...)"))
            code = lst.items[2]
            if not isinstance(code, _Atom):
                raise ParseError("expected an error code", code.span)
            out.append(AssertInvalid(m, code.text))
        else:
            raise ParseError(f"unknown directive {h!r}", lst.span)
    return out


# ---------------------------------------------------------------------------
# printing

def _fmt_int(v: int) -> str:
    return str(v)


def _fmt_float(v: float) -> str:
    return repr(v)


def _fmt_const(ins: Instr) -> str:
    if ins.ty is ast.I32:
        return f"(const {_fmt_int(ins.imm)})"
    if ins.ty is ast.I64:
        return f"(const i64 {_fmt_int(ins.imm)})"
    return f"(const {ins.ty.value} {_fmt_float(ins.imm)})"


def _fmt_functype(ft: FuncType) -> str:
    parts = []
    if ft.params:
        parts.append("(param " + " ".join(t.value for t in ft.params) + ")")
    if ft.results:
        parts.append("(result " + " ".join(t.value for t in ft.results) + ")")
    return " ".join(parts)


def _fmt_offset(off: int) -> str:
    return f" offset={off}" if off else ""


def _instr_lines(ins: Instr, indent: str, out: list[str]) -> None:
    op = ins.op
    if op == "const":
        out.append(indent + _fmt_const(ins))
    elif op in _NO_IMM:
        out.append(indent + f"({op})")
    elif op in _TYPED:
        out.append(indent + f"({op} {ins.ty.value})")
    elif op in _INDEXED:
        out.append(indent + f"({op} {ins.imm})")
    elif op in ("segload", "segstore"):
        out.append(indent + f"({op} {ins.ty.value}{_fmt_offset(ins.off)})")
    elif op in ("segload8_u", "segstore8"):
        out.append(indent + f"({op}{_fmt_offset(ins.off)})")
    elif op == "call_indirect":
        ft = _fmt_functype(ins.imm)
        out.append(indent + ("(call_indirect " + ft + ")" if ft else "(call_indirect)"))
    elif op in ("block", "loop"):
        bt = f" (result {ins.bt.value})" if ins.bt else ""
        out.append(indent + f"({op}{bt}")
        for b in ins.body:
            _instr_lines(b, indent + "  ", out)
        out[-1] += ")"
    elif op == "if":
        bt = f" (result {ins.bt.value})" if ins.bt else ""
        out.append(indent + f"(if{bt}")
        out.append(indent + "  (then")
        for b in ins.body:
            _instr_lines(b, indent + "    ", out)
        out[-1] += ")"
        if ins.orelse:
            out.append(indent + "  (else")
            for b in ins.orelse:
                _instr_lines(b, indent + "    ", out)
            out[-1] += ")"
        out[-1] += ")"
    else:
        raise ValueError(f"cannot print instruction {op!r}")


def _fmt_string(b: bytes) -> str:
    parts = ['"']
    for c in b:
        if c == 0x22:
            parts.append('\\"')
        elif c == 0x5C:
            parts.append("\\\\")
        elif 0x20 <= c < 0x7F:
            parts.append(chr(c))
        else:
            parts.append(f"\\{c:02x}")
    parts.append('"')
    return "".join(parts)


def _fmt_name(s: str) -> str:
    return _fmt_string(s.encode("latin-1", errors="replace"))


def pretty_module(m: Module) -> str:
    lines = ["(module"]
    ind = "  "
    for imp in m.imports:
        d = imp.desc
        if isinstance(d, FuncImport):
            ft = _fmt_functype(d.type)
            dtxt = "(func " + ft + ")" if ft else "(func)"
        elif isinstance(d, GlobalImport):
            g = f"(mut {d.ty.value})" if d.mut else d.ty.value
            dtxt = f"(global {g})"
        elif isinstance(d, TableImport):
            dtxt = f"(table {d.min})"
        else:
            dtxt = f"(memory {d.min_pages})"
        lines.append(f"{ind}(import {_fmt_name(imp.module)} {_fmt_name(imp.name)} {dtxt})")
    if m.memory is not None:
        lines.append(f"{ind}(memory {m.memory})")
    for t in m.tables:
        entries = (" " + " ".join(map(str, t.entries))) if t.entries else ""
        lines.append(f"{ind}(table{entries})")
    for g in m.globals:
        gt = f"(mut {g.ty.value})" if g.mut else g.ty.value
        init: list[str] = []
        _instr_lines(g.init, "", init)
        lines.append(f"{ind}(global {gt} {init[0]})")
    for fn in m.funcs:
        head = f"{ind}(func"
        ft = _fmt_functype(fn.type)
        if ft:
            head += " " + ft
        if fn.locals:
            head += " (local " + " ".join(t.value for t in fn.locals) + ")"
        if not fn.body:
            lines.append(head + ")")
        else:
            lines.append(head)
            for insn in fn.body:
                _instr_lines(insn, ind + "  ", lines)
            lines[-1] += ")"
    for e in m.exports:
        lines.append(f"{ind}(export {_fmt_name(e.name)} ({e.kind} {e.index}))")
    if m.start is not None:
        lines.append(f"{ind}(start {m.start})")
    for d in m.data:
        off: list[str] = []
        _instr_lines(d.offset, "", off)
        lines.append(f"{ind}(data {off[0]} {_fmt_string(d.bytes)})")
    lines[-1] += ")"
    return "\n".join(lines) + "\n"


def pretty_instr(ins: Instr) -> str:
    out: list[str] = []
    _instr_lines(ins, "", out)
    return "\n".join(out)


def pretty(x) -> str:
    """Render a module or a single instruction as canonical text."""
    if isinstance(x, Module):
        return pretty_module(x)
    if isinstance(x, Instr):
        return pretty_instr(x)
    raise TypeError(f"cannot pretty-print {type(x).__name__}")
