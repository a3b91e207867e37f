"""The typed-program generator: self-check and structural properties."""

from mswasm.generator import generate_module, generate_well_typed
from mswasm.text import parse_module, pretty
from mswasm.validate import validate_module


def test_budget_zero_single_empty_function():
    m = generate_well_typed(12345, budget=0)
    assert len(m.funcs) == 1
    assert m.funcs[0].body == ()
    validate_module(m)


def test_all_seeds_validate():
    # generator self-test: 1000 seeds at budget 50, all validate
    for seed in range(1000):
        validate_module(generate_well_typed(seed, budget=50))


def test_profiles_validate():
    for seed in range(150):
        validate_module(generate_module(seed, 30, "attacker_func"))
        validate_module(generate_module(seed, 30, "attacker_module"))


def test_deterministic():
    assert generate_well_typed(7, 40) == generate_well_typed(7, 40)


def test_closed_modules_have_start_and_exports():
    for seed in range(30):
        m = generate_well_typed(seed, 40)
        assert m.start is not None
        assert m.imports == ()
        assert any(e.kind == "func" for e in m.exports)


def test_attacker_func_exports_nullary_g():
    for seed in range(30):
        m = generate_module(seed, 25, "attacker_func")
        g = next(e for e in m.exports if e.name == "g")
        assert m.funcs[g.index - sum(1 for _ in ())].type.params == ()


def test_attacker_module_imports_handles():
    for seed in range(30):
        m = generate_module(seed, 25, "attacker_module")
        assert m.imports
        assert m.start is not None


def test_round_trips_through_text():
    for seed in range(100):
        m = generate_well_typed(seed, 40)
        assert parse_module(pretty(m)) == m
