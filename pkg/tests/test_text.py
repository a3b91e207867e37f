"""Text frontend: parsing, printing, spans, and the round-trip law."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mswasm import text
from mswasm.ast import I32, Instr, Module
from mswasm.generator import generate_module, generate_well_typed
from mswasm.text import ParseError, parse_module, parse_script, pretty


class TestParseModule:
    def test_minimal(self):
        m = parse_module("(module (func (result i32) (const 1)))")
        assert len(m.funcs) == 1
        assert m.funcs[0].body == (Instr("const", ty=I32, imm=1),)

    def test_paper_listing_body(self):
        src = """
        (module
          (import "att" "g" (func))
          (func (export "main") (result i32) (local handle)
            (const 4) (segalloc) (local.tee 0)
            (const 7) (segstore i32)
            (call 0)
            (local.get 0) (segload i32)
            (const 7) (sub i32) (eqz i32)
            (if (result i32) (then (const 1)) (else (const 0)))))
        """
        m = parse_module(src)
        # Top-level transcription of the listing: 12 instructions (the
        # nested then/else arms bring the flat count to 14).
        assert len(m.funcs[0].body) == 12
        flat = 0

        def count(body):
            nonlocal flat
            for i in body:
                flat += 1
                count(i.body)
                count(i.orelse)

        count(m.funcs[0].body)
        assert flat == 14

    def test_unknown_type_is_parse_error(self):
        with pytest.raises(ParseError) as e:
            parse_module("(module (func (segstore i33)))")
        assert "i33" in str(e.value)

    def test_unbalanced(self):
        with pytest.raises(ParseError) as e:
            parse_module("(module (func)")
        assert e.value.span is not None

    def test_out_of_range_literal(self):
        with pytest.raises(ParseError):
            parse_module("(module (func (const 4294967296) (drop)))")
        parse_module("(module (func (const 4294967295) (drop)))")

    def test_unknown_mnemonic(self):
        with pytest.raises(ParseError) as e:
            parse_module("(module (func (frobnicate)))")
        assert "frobnicate" in str(e.value)

    def test_spans_carry_position(self):
        try:
            parse_module("(module\n  (func (bogus)))")
        except ParseError as e:
            assert e.value if False else e.span.line == 2
        else:
            pytest.fail("expected ParseError")

    def test_imports_exports_memory_table(self):
        m = parse_module(
            """
            (module
              (import "env" "f" (func (param i32) (result i32)))
              (import "env" "g" (global (mut handle)))
              (memory 2)
              (table 0 0)
              (func (export "id") (param i32) (result i32) (local.get 0))
              (export "g2" (global 0))
              (start 1)
              (data (const 8) "hi\\00"))
            """
        )
        assert m.memory == 2
        assert m.tables[0].entries == (0, 0)
        assert m.data[0].bytes == b"hi\x00"
        assert m.start == 1
        assert {e.name for e in m.exports} == {"id", "g2"}

    def test_offset_immediate(self):
        m = parse_module("(module (func (h.null) (segload i32 offset=8) (drop)))")
        assert m.funcs[0].body[1].off == 8


class TestFixedRenderings:
    def test_hnull(self):
        assert pretty(Instr("h.null")) == "(h.null)"

    def test_segload(self):
        assert pretty(Instr("segload", ty=I32)) == "(segload i32)"

    def test_const(self):
        assert pretty(Instr("const", ty=I32, imm=4)) == "(const 4)"


class TestParseScript:
    def test_assert_trap(self):
        s = parse_script('(assert_trap (invoke "f") spatial)')
        assert isinstance(s[0], text.AssertTrap)
        assert s[0].kind == "spatial"

    def test_assert_return(self):
        s = parse_script('(assert_return (invoke "g" (i32 5)) (i32 1))')
        d = s[0]
        assert isinstance(d, text.AssertReturn)
        assert d.invoke.args[0].payload == 5
        assert d.expected[0].payload == 1

    def test_forge_script_shape(self):
        from conftest import CORPUS

        s = parse_script((CORPUS / "forge.msws").read_text())
        assert len([d for d in s if isinstance(d, Module)]) == 1
        asserts = [
            d
            for d in s
            if isinstance(d, (text.AssertReturn, text.AssertTrap))
        ]
        assert len(asserts) == 2

    def test_unknown_trap_kind(self):
        with pytest.raises(ParseError):
            parse_script('(assert_trap (invoke "f") bogus)')


class TestRoundTrip:
    def test_generated_modules(self):
        for seed in range(150):
            m = generate_well_typed(seed, budget=40)
            assert parse_module(pretty(m)) == m

    def test_attacker_profiles(self):
        for seed in range(50):
            for profile in ("attacker_func", "attacker_module"):
                m = generate_module(seed, 25, profile)
                assert parse_module(pretty(m)) == m

    def test_corpus_round_trip(self):
        from conftest import CORPUS

        for p in sorted(CORPUS.rglob("*.msw")):
            m = parse_module(p.read_text())
            assert parse_module(pretty(m)) == m, p.name

    def test_pretty_deterministic(self):
        m = generate_well_typed(1, 40)
        assert pretty(m) == pretty(m)


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="()\"\\ \n;abc0123456789.-xi", max_size=80))
def test_parser_never_panics(junk):
    """Arbitrary text yields a Module or a ParseError, never a crash."""
    try:
        parse_module(junk)
    except ParseError:
        pass
    try:
        parse_script(junk)
    except ParseError:
        pass
