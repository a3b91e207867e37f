"""Value model and the instruction signature table."""

import pytest

from mswasm.ast import (
    ANY,
    F32,
    HANDLE,
    I32,
    I64,
    FuncType,
    HandleValue,
    Instr,
    NULL_HANDLE,
    SignatureError,
    TypingContext,
    instruction_signature,
)


def sig(instr, **ctx):
    return instruction_signature(instr, TypingContext(**ctx))


class TestHandleValue:
    def test_null_is_all_zero_invalid(self):
        assert NULL_HANDLE == HandleValue(0, 0, 0, False, 0)

    def test_serialize_round_trip(self):
        h = HandleValue(base=4, offset=-2, bound=16, valid=True, id=9)
        back = HandleValue.deserialize(h.serialize(), valid=True)
        assert back == h

    def test_serialized_width(self):
        assert len(NULL_HANDLE.serialize()) == 16

    def test_moved_wraps_i32(self):
        h = HandleValue(0, 2**31 - 1, 0, True, 1)
        assert h.moved(1).offset == -(2**31)


class TestSignatures:
    def test_hnull_produces_handle(self):
        assert sig(Instr("h.null")) == ((), (HANDLE,))

    def test_segalloc(self):
        assert sig(Instr("segalloc")) == ((I32,), (HANDLE,))

    def test_hadd(self):
        assert sig(Instr("h.add")) == ((HANDLE, I32), (HANDLE,))

    def test_setbounds_pair(self):
        for op in ("slice", "handle.setbounds"):
            assert sig(Instr(op)) == ((HANDLE, I32), (HANDLE,))

    def test_const(self):
        assert sig(Instr("const", ty=I64, imm=0)) == ((), (I64,))

    def test_locals_need_context(self):
        assert sig(Instr("local.get", imm=0), locals=(F32,)) == ((), (F32,))
        with pytest.raises(SignatureError):
            sig(Instr("local.get", imm=3), locals=(F32,))

    def test_call_uses_context(self):
        ft = FuncType((I32, HANDLE), (I64,))
        assert sig(Instr("call", imm=0), funcs=(ft,)) == (ft.params, ft.results)

    def test_call_indirect_inline_type(self):
        ft = FuncType((I32,), (I32,))
        ins, outs = sig(Instr("call_indirect", imm=ft))
        assert ins == (I32, I32) and outs == (I32,)

    def test_polymorphic_markers(self):
        assert sig(Instr("drop")) == ((ANY,), ())
        assert sig(Instr("select"))[0] == (ANY, ANY, I32)

    def test_total_on_every_opcode(self):
        ctx = TypingContext(
            funcs=(FuncType((), ()),),
            locals=(I32,),
            globals=((True, I32),),
            labels=(None,),
            results=(),
            has_table=True,
            has_memory=True,
        )
        ops = [
            Instr("const", ty=I32, imm=0),
            Instr("add", ty=I32),
            Instr("sub", ty=I64),
            Instr("mul", ty=I32),
            Instr("shl", ty=I64),
            Instr("eqz", ty=I32),
            Instr("eq", ty=I64),
            Instr("lt_u", ty=I32),
            Instr("ge_u", ty=I32),
            Instr("drop"),
            Instr("select"),
            Instr("nop"),
            Instr("unreachable"),
            Instr("return"),
            Instr("local.get", imm=0),
            Instr("local.set", imm=0),
            Instr("local.tee", imm=0),
            Instr("global.get", imm=0),
            Instr("global.set", imm=0),
            Instr("block"),
            Instr("loop"),
            Instr("if"),
            Instr("br", imm=0),
            Instr("br_if", imm=0),
            Instr("call", imm=0),
            Instr("call_indirect", imm=FuncType((), ())),
            Instr("load", ty=I32),
            Instr("store", ty=I64),
            Instr("segload", ty=HANDLE),
            Instr("segstore", ty=F32),
            Instr("segload8_u"),
            Instr("segstore8"),
            Instr("slice"),
            Instr("handle.setbounds"),
            Instr("segalloc"),
            Instr("segfree"),
            Instr("h.null"),
            Instr("h.add"),
        ]
        for ins in ops:
            first = instruction_signature(ins, ctx)
            assert first == instruction_signature(ins, ctx)  # deterministic

    def test_signature_matches_execution(self):
        """Cross-check arity against the interpreter on value producers."""
        from mswasm.interp import Values, invoke
        from mswasm.link import instantiate
        from mswasm.store import Store
        from mswasm.validate import validate_module
        from mswasm.ast import Func, Module, ExportDecl

        import random

        rng = random.Random(3)
        for _ in range(50):
            delta = rng.randrange(0, 2**32)
            body = (
                Instr("const", ty=I32, imm=rng.randrange(0, 64)),
                Instr("segalloc"),
                Instr("const", ty=I32, imm=delta),
                Instr("h.add"),
            )
            m = Module(
                funcs=(Func(FuncType((), (HANDLE,)), (), body),),
                exports=(ExportDecl("f", "func", 0),),
            )
            inst = instantiate(Store(), validate_module(m))
            out = invoke(inst, "f", [])
            assert isinstance(out, Values)
            assert out.values[0].type is HANDLE
            ins, outs = sig(Instr("h.add"))
            assert len(outs) == 1 and outs[0] is HANDLE
