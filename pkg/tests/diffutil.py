"""Shared differential-testing machinery (interpreter vs compiled)."""

import subprocess
from pathlib import Path

from conftest import CORPUS, CRUNTIME
from mswasm.ast import Module, Value, I32
from mswasm.cli import compiled_outcome_lines, outcome_lines
from mswasm.codegen import CodegenOptions, codegen_module, emit_driver, sanitize
from mswasm.interp import invoke
from mswasm.link import BUILTIN_HOSTS, instantiate
from mswasm.store import Store
from mswasm.text import AssertReturn, AssertTrap, parse_module, parse_script
from mswasm.validate import validate_module

# (script, skipped invoke names): one entry per corpus program.
DIFF_SCRIPTS = [
    ("arith_i32.msws", ()),
    ("arith_i64.msws", ()),
    ("control.msws", ()),
    ("control2.msws", ()),
    ("calls.msws", ()),
    ("indirect.msws", ()),
    ("linear_memory.msws", ()),
    ("segments_basic.msws", ()),
    ("seg_bounds.msws", ()),
    ("seg_free.msws", ()),
    ("handle_slots.msws", ()),
    ("setbounds.msws", ()),
    ("forge.msws", ()),
    ("floats.msws", ()),
    ("select_drop.msws", ()),
    ("heartbleed.msws", ()),
    ("memcpy_host.msws", ("overcopy",)),  # native memcpy is unchecked
    ("locals_globals.msws", ("bump",)),  # cross-invoke state
]

MODULE_CASES = [
    (("memcpy_lib.msw", "memcpy_main.msw"), "copy_test", [], 1),
    (("cglobal.msw",), "bump", [], 0),
    (("physmem.msw",), "poke", [Value(I32, 256), Value(I32, 77)], 0),
    (("bench/matmul.msw",), "matmul", [Value(I32, 8), Value(I32, 1)], 0),
    (("bench/sum.msw",), "sum", [Value(I32, 100), Value(I32, 2)], 0),
    (("bench/bytecopy.msw",), "bytecopy", [Value(I32, 64), Value(I32, 2)], 0),
]

FUEL = 10_000_000


def cc_run(args):
    proc = subprocess.run(["cc", *args], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


def build_rt_obj(wd: Path) -> Path:
    obj = wd / "mswasm_rt.o"
    cc_run(["-std=c11", "-O2", "-Wall", "-Werror", f"-I{CRUNTIME}",
            "-c", "-o", str(obj), str(CRUNTIME / "mswasm_rt.c")])
    return obj


class CompiledProgram:
    """Script modules compiled once; per-directive drivers link fast."""

    def __init__(self, typeds, wd: Path, rt_obj: Path, unit_names=None):
        self.typeds = typeds
        self.wd = wd
        self.rt_obj = rt_obj
        self.objs = []
        self.unit_names = []
        for i, typed in enumerate(typeds):
            name = unit_names[i] if unit_names else f"m{i}"
            self.unit_names.append(name)
            unit = codegen_module(typed, CodegenOptions(), name)
            (wd / f"{name}.c").write_text(unit.source)
            (wd / f"{name}.h").write_text(unit.header)
            for src in [f"{name}.c"] + (
                [f"{name}_wrappers.c"] if unit.wrappers else []
            ):
                if src.endswith("_wrappers.c"):
                    (wd / src).write_text(unit.wrappers)
                obj = wd / (src[:-2] + ".o")
                cc_run(["-std=c11", "-O2", "-Wall", "-Werror", f"-I{CRUNTIME}",
                        f"-I{wd}", "-c", "-o", str(obj), str(wd / src)])
                self.objs.append(obj)

    def run(self, unit_idx, export, args, result_types):
        name = self.unit_names[unit_idx]
        symbol = f"w2c_{name}_{sanitize(export)}"
        driver = emit_driver(
            self.unit_names, name, export, list(args), result_types, symbol
        )
        (self.wd / "main.c").write_text(driver)
        binary = self.wd / "prog"
        cc_run(["-std=c11", "-O2", "-Wall", "-Werror", f"-I{CRUNTIME}",
                f"-I{self.wd}", "-o", str(binary), str(self.wd / "main.c"),
                *map(str, self.objs), str(self.rt_obj)])
        run = subprocess.run(
            [str(binary)], capture_output=True, text=True, timeout=120
        )
        return compiled_outcome_lines(run.returncode, run.stdout, run.stderr)


def interp_fresh(typeds, unit_idx, export, args, unit_names=None):
    store = Store()
    registry = {("env", n): BUILTIN_HOSTS[n]() for n in ("memcpy", "abort")}
    for imp_holder in typeds:
        for imp in imp_holder.module.imports:
            if (imp.module, imp.name) == ("env", "_physical_memory"):
                key = ("env", "_physical_memory")
                if key not in registry:
                    arena = store.seg_alloc(1 << 20)
                    from mswasm.ast import HANDLE

                    registry[key] = store.new_global(False, HANDLE, arena)
    instances = []
    for i, typed in enumerate(typeds):
        inst = instantiate(store, typed, registry, FUEL)
        instances.append(inst)
        name = unit_names[i] if unit_names else f"m{i}"
        for ename, item in inst.exports.items():
            registry[(name, ename)] = item
    out = invoke(instances[unit_idx], export, list(args), FUEL)
    return outcome_lines(out)


def script_cases(script_name, skips):
    directives = parse_script((CORPUS / script_name).read_text())
    typeds = [validate_module(d) for d in directives if isinstance(d, Module)]
    cases = []
    for d in directives:
        if isinstance(d, (AssertReturn, AssertTrap)):
            inv = d.invoke
            if inv.name in skips:
                continue
            unit = inv.module if inv.module is not None else len(typeds) - 1
            cases.append((unit, inv.name, inv.args))
    return typeds, cases


def result_types_of(typed, export):
    return next(
        typed.func_types[e.index]
        for e in typed.module.exports
        if e.kind == "func" and e.name == export
    ).results


def run_program_diff(script_name, skips, wd: Path, rt_obj: Path):
    """Diff one corpus script; returns the number of directives compared."""
    typeds, cases = script_cases(script_name, skips)
    prog = CompiledProgram(typeds, wd, rt_obj)
    for unit_idx, export, args in cases:
        interp_lines = interp_fresh(typeds, unit_idx, export, args)
        rts = result_types_of(typeds[unit_idx], export)
        compiled_lines = prog.run(unit_idx, export, args, rts)
        assert compiled_lines == interp_lines, (
            f"{script_name}:{export}{[a.payload for a in args]}: "
            f"interp={interp_lines} compiled={compiled_lines}"
        )
    return len(cases)


def run_module_diff(files, export, args, unit_idx, wd: Path, rt_obj: Path):
    typeds = [
        validate_module(parse_module((CORPUS / f).read_text())) for f in files
    ]
    names = [sanitize(Path(f).stem) for f in files]
    prog = CompiledProgram(typeds, wd, rt_obj, unit_names=names)
    interp_lines = interp_fresh(typeds, unit_idx, export, args, names)
    rts = result_types_of(typeds[unit_idx], export)
    compiled_lines = prog.run(unit_idx, export, args, rts)
    assert compiled_lines == interp_lines, (files, export)
