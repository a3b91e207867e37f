"""Validator: typing rules, error accumulation, determinism."""

import pytest

from mswasm.ast import (
    HANDLE,
    I32,
    I64,
    ExportDecl,
    Func,
    FuncType,
    GlobalDecl,
    Instr,
    Module,
    TypingContext,
)
from mswasm.text import parse_module
from mswasm.validate import ValidationError, check_body, validate_module


def errors_of(m):
    with pytest.raises(ValidationError) as e:
        validate_module(m)
    return e.value.errors


def codes_of(m):
    return {e.code for e in errors_of(m)}


class TestValidateModule:
    def test_empty_module(self):
        tm = validate_module(Module())
        assert tm.func_types == ()

    def test_handle_into_linear_memory(self):
        m = parse_module(
            """(module (memory 1)
                 (func (param handle) (const 0) (local.get 0) (store i32)))"""
        )
        assert "handle-in-linear-memory" in codes_of(m)

    def test_isolation_module_validates(self):
        from conftest import CORPUS

        m = parse_module((CORPUS / "isolation.msw").read_text())
        tm = validate_module(m)
        assert tm.func_types[0] == FuncType((), ())  # imported g

    def test_all_errors_reported(self):
        m = Module(
            funcs=(
                Func(FuncType((), (I32,)), (), (Instr("h.null"),)),
                Func(FuncType((), ()), (), (Instr("local.get", imm=9), Instr("drop"))),
            ),
            exports=(
                ExportDecl("a", "func", 0),
                ExportDecl("a", "func", 1),
                ExportDecl("b", "func", 7),
            ),
        )
        errs = errors_of(m)
        assert len(errs) >= 3  # one per function plus export problems
        funcs_with_errors = {e.func for e in errs if e.func >= 0}
        assert funcs_with_errors == {0, 1}

    def test_error_payload_shape(self):
        m = Module(funcs=(Func(FuncType((), ()), (), (Instr("drop"),)),))
        (err,) = errors_of(m)
        assert err.func == 0 and err.offset == 0
        assert err.to_json()["code"] == "stack-underflow"

    def test_deterministic_and_function_order_independent(self):
        f_bad = Func(FuncType((), ()), (), (Instr("drop"),))
        f_ok = Func(FuncType((), (I32,)), (), (Instr("const", ty=I32, imm=1),))
        e1 = errors_of(Module(funcs=(f_bad, f_ok)))
        e2 = errors_of(Module(funcs=(f_ok, f_bad)))
        assert {e.code for e in e1} == {e.code for e in e2}
        assert errors_of(Module(funcs=(f_bad, f_ok))) == e1

    def test_start_signature(self):
        m = parse_module("(module (func (param i32)) (start 0))")
        assert "start-signature" in codes_of(m)

    def test_immutable_global_write(self):
        m = parse_module(
            "(module (global i32 (const 0)) (func (const 1) (global.set 0)))"
        )
        assert "immutable-global" in codes_of(m)

    def test_handle_global_initializers(self):
        validate_module(
            parse_module("(module (global (mut handle) (h.null)))")
        )
        m = parse_module(
            """(module (import "e" "h" (global handle))
                 (global handle (global.get 0)))"""
        )
        validate_module(m)

    def test_handle_global_bad_init(self):
        m = Module(
            globals=(GlobalDecl(False, HANDLE, Instr("const", ty=I32, imm=0)),)
        )
        assert "type-mismatch" in codes_of(m)

    def test_table_entry_out_of_range(self):
        m = parse_module("(module (table 3))")
        assert "unknown-function" in codes_of(m)

    def test_call_indirect_needs_table(self):
        m = parse_module(
            "(module (func (const 0) (call_indirect (result i32)) (drop)))"
        )
        assert "unknown-table" in codes_of(m)

    def test_memory_ops_need_memory(self):
        m = parse_module("(module (func (result i32) (const 0) (load i32)))")
        assert "unknown-memory" in codes_of(m)

    def test_data_needs_memory(self):
        from mswasm.ast import DataDecl

        m = Module(data=(DataDecl(Instr("const", ty=I32, imm=0), b"x"),))
        assert "unknown-memory" in codes_of(m)


class TestCheckBody:
    def ctx(self, **kw):
        return TypingContext(**kw)

    def test_null_then_segload_types_ok(self):
        # Traps at runtime, but the types check (theorem premise only
        # requires well-typedness; the trap is a well-defined outcome).
        check_body(
            self.ctx(results=(I32,)),
            (Instr("h.null"), Instr("segload", ty=I32)),
            (I32,),
        )
        from mswasm.interp import Trapped, invoke
        from mswasm.link import instantiate
        from mswasm.store import Store, TrapKind

        m = Module(
            funcs=(
                Func(
                    FuncType((), (I32,)),
                    (),
                    (Instr("h.null"), Instr("segload", ty=I32)),
                ),
            ),
            exports=(ExportDecl("f", "func", 0),),
        )
        out = invoke(instantiate(Store(), validate_module(m)), "f", [])
        assert isinstance(out, Trapped)
        assert out.trap.kind is TrapKind.INVALID_HANDLE

    def test_missing_handle_operand(self):
        with pytest.raises(ValidationError) as e:
            check_body(
                self.ctx(),
                (Instr("const", ty=I32, imm=1), Instr("h.add"), Instr("drop")),
                (),
            )
        assert e.value.errors[0].code in ("stack-underflow", "type-mismatch")

    def test_alloc_free_balanced(self):
        check_body(
            self.ctx(),
            (Instr("const", ty=I32, imm=4), Instr("segalloc"), Instr("segfree")),
            (),
        )

    def test_expected_mismatch(self):
        with pytest.raises(ValidationError):
            check_body(self.ctx(), (Instr("h.null"),), (I32,))

    def test_polymorphic_after_unreachable(self):
        check_body(
            self.ctx(results=(I32,)),
            (Instr("unreachable"), Instr("add", ty=I64), Instr("drop")),
            (I32,),
        )

    def test_branch_depths(self):
        body = (
            Instr(
                "block",
                bt=I32,
                body=(
                    Instr("const", ty=I32, imm=1),
                    Instr("br", imm=0),
                ),
            ),
        )
        check_body(self.ctx(results=(I32,)), body, (I32,))
        bad = (Instr("br", imm=3),)
        with pytest.raises(ValidationError) as e:
            check_body(self.ctx(), bad, ())
        assert e.value.errors[0].code == "unknown-label"
