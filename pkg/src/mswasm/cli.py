"""Command line tool: check, run, script, reach, isolate, codegen, diff, fuzz.

Exit codes are a stable contract: 0 success/values, 1 link or host
error, 2 validation failure, 3 trap, 4 fuel exhausted, 5 stuck,
64 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import struct
import subprocess
import sys
import tempfile
from pathlib import Path

from . import text
from .ast import (
    F32,
    F64,
    HANDLE,
    I32,
    I64,
    GlobalImport,
    NULL_HANDLE,
    Value,
)
from .campaigns import (
    run_isolation_functions,
    run_isolation_modules,
    run_never_stuck,
)
from .codegen import CodegenError, CodegenOptions, codegen_module, emit_driver, sanitize
from .generator import generate_module
from .interp import (
    DEFAULT_FUEL,
    FuelExhausted,
    Trapped,
    Values,
    invoke,
    invoke_with_trace,
)
from .isolation import (
    Isolated,
    TrappedVerdict,
    reachable,
    run_function_experiment,
)
from .link import (
    BUILTIN_HOSTS,
    LinkError,
    StartFailure,
    instantiate,
)
from .store import MSWasmTrap, Store
from .validate import ValidationError, validate_module

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2
EXIT_TRAP = 3
EXIT_FUEL = 4
EXIT_STUCK = 5
EXIT_USAGE = 64

PHYSMEM_DEFAULT = 1 << 20


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_ERROR):
        super().__init__(message)
        self.code = code


def load_config(path: str | None) -> dict:
    """key=value config: fuel, arena_size, handle_width (sanity)."""
    cfg = {"fuel": DEFAULT_FUEL, "arena_size": PHYSMEM_DEFAULT}
    if path is None:
        return cfg
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value", EXIT_USAGE)
        key, value = (s.strip() for s in line.split("=", 1))
        if key in ("fuel", "arena_size"):
            cfg[key] = int(value, 0)
        elif key == "handle_width":
            if int(value, 0) != 16:
                raise CliError(
                    f"{path}:{lineno}: handle_width must be 16", EXIT_USAGE
                )
        else:
            raise CliError(f"{path}:{lineno}: unknown key {key!r}", EXIT_USAGE)
    return cfg


def parse_value_arg(tok: str) -> Value:
    if tok == "null":
        return Value(HANDLE, NULL_HANDLE)
    if ":" in tok:
        ty, lit = tok.split(":", 1)
        if ty == "i32":
            return Value(I32, int(lit, 0) & 0xFFFFFFFF)
        if ty == "i64":
            return Value(I64, int(lit, 0) & 0xFFFFFFFFFFFFFFFF)
        if ty == "f32":
            from .ast import round_f32

            return Value(F32, round_f32(float(lit)))
        if ty == "f64":
            return Value(F64, float(lit))
        raise CliError(f"bad value argument {tok!r}", EXIT_USAGE)
    return Value(I32, int(tok, 0) & 0xFFFFFFFF)


def outcome_lines(outcome) -> list[str]:
    """Canonical outcome text, shared with the generated C drivers."""
    if isinstance(outcome, Values):
        lines = ["outcome: values"]
        for v in outcome.values:
            if v.type is I32:
                lines.append(f"i32 {v.payload}")
            elif v.type is I64:
                lines.append(f"i64 {v.payload}")
            elif v.type is F32:
                bits = struct.unpack("<I", struct.pack("<f", v.payload))[0]
                lines.append(f"f32 0x{bits:08x}")
            elif v.type is F64:
                bits = struct.unpack("<Q", struct.pack("<d", v.payload))[0]
                lines.append(f"f64 0x{bits:016x}")
            else:
                h = v.payload
                lines.append(
                    f"handle valid={int(h.valid)} offset={h.offset} bound={h.bound}"
                )
        return lines
    if isinstance(outcome, Trapped):
        return ["outcome: trap", f"kind: {outcome.trap.kind.value}"]
    if isinstance(outcome, FuelExhausted):
        return ["outcome: fuel-exhausted"]
    return ["outcome: stuck", f"detail: {outcome.description}"]


def outcome_json(outcome) -> dict:
    if isinstance(outcome, Values):
        vals = []
        for v in outcome.values:
            if v.type in (I32, I64):
                vals.append({"type": v.type.value, "value": v.payload})
            elif v.type in (F32, F64):
                vals.append({"type": v.type.value, "value": v.payload})
            else:
                h = v.payload
                vals.append(
                    {
                        "type": "handle",
                        "valid": h.valid,
                        "offset": h.offset,
                        "bound": h.bound,
                    }
                )
        return {"outcome": "values", "values": vals}
    if isinstance(outcome, Trapped):
        return {
            "outcome": "trap",
            "kind": outcome.trap.kind.value,
            "detail": outcome.trap.detail,
        }
    if isinstance(outcome, FuelExhausted):
        return {"outcome": "fuel-exhausted"}
    return {"outcome": "stuck", "detail": outcome.description}


def outcome_exit_code(outcome) -> int:
    if isinstance(outcome, Values):
        return EXIT_OK
    if isinstance(outcome, Trapped):
        return EXIT_TRAP
    if isinstance(outcome, FuelExhausted):
        return EXIT_FUEL
    return EXIT_STUCK


def _load_typed(path: str):
    try:
        module = text.parse_module(Path(path).read_text())
    except text.ParseError as e:
        raise CliError(f"{path}: {e}", EXIT_INVALID)
    try:
        return validate_module(module)
    except ValidationError as e:
        raise CliError(
            f"{path}: validation failed:\n"
            + "\n".join(
                json.dumps(err.to_json()) for err in e.errors
            ),
            EXIT_INVALID,
        )


def _base_imports(store: Store, typed_modules, hosts: list[str], arena_size: int):
    imports = {}
    for name in hosts:
        if name not in BUILTIN_HOSTS:
            raise CliError(
                f"unknown host function {name!r} "
                f"(available: {', '.join(sorted(BUILTIN_HOSTS))})",
                EXIT_USAGE,
            )
        imports[("env", name)] = BUILTIN_HOSTS[name]()
    for typed in typed_modules:
        for imp in typed.module.imports:
            if (imp.module, imp.name) == ("env", "_physical_memory"):
                if ("env", "_physical_memory") not in imports:
                    arena = store.seg_alloc(arena_size)
                    d = imp.desc
                    mut = d.mut if isinstance(d, GlobalImport) else False
                    imports[("env", "_physical_memory")] = store.new_global(
                        mut, HANDLE, arena
                    )
    return imports


def _instantiate_chain(store, paths, hosts, fuel, arena_size):
    """Instantiate --link modules then the main module; returns the main
    instance.  Chain modules export under their file stem, or under an
    explicit name given as name=file."""
    typeds = []
    for p in paths:
        if "=" in p and not Path(p).exists():
            name, _, path = p.partition("=")
            typeds.append((name, _load_typed(path)))
        else:
            typeds.append((Path(p).stem, _load_typed(p)))
    registry = _base_imports(store, [t for _, t in typeds], hosts, arena_size)
    inst = None
    for name, typed in typeds:
        inst = instantiate(store, typed, registry, fuel)
        for ename, item in inst.exports.items():
            registry[(name, ename)] = item
    return inst


def cmd_check(args) -> int:
    try:
        module = text.parse_module(Path(args.file).read_text())
    except text.ParseError as e:
        if args.json:
            print(json.dumps({"func": -1, "offset": -1, "code": "parse-error",
                              "message": str(e)}))
        else:
            print(f"parse error: {e}", file=sys.stderr)
        return EXIT_INVALID
    try:
        typed = validate_module(module)
    except ValidationError as e:
        for err in e.errors:
            if args.json:
                print(json.dumps(err.to_json()))
            else:
                print(
                    f"func {err.func} offset {err.offset}: "
                    f"{err.code}: {err.message}",
                    file=sys.stderr,
                )
        return EXIT_INVALID
    n = len(typed.module.funcs)
    if args.json:
        print(json.dumps({"ok": True, "functions": n}))
    else:
        print(f"ok: {n} function(s)")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    fuel = args.fuel if args.fuel is not None else cfg["fuel"]
    store = Store()
    try:
        inst = _instantiate_chain(
            store,
            args.link + [args.file],
            args.host.split(",") if args.host else [],
            fuel,
            cfg["arena_size"],
        )
    except MSWasmTrap as t:
        out = Trapped(t.trap)
        _print_outcome(out, args.json, prefix="start ")
        return EXIT_TRAP
    except StartFailure as s:
        _print_outcome(s.outcome, args.json, prefix="start ")
        return outcome_exit_code(s.outcome)
    except LinkError as e:
        print(f"link error: {e}", file=sys.stderr)
        return EXIT_ERROR

    if args.invoke is None:
        if args.dump_store:
            print(store.dump(), end="")
        if args.json:
            print(json.dumps({"outcome": "instantiated"}))
        else:
            print("instantiated")
        return EXIT_OK
    try:
        vals = [parse_value_arg(a) for a in args.args]
        if args.trace:
            outcome, trace = invoke_with_trace(inst, args.invoke, vals, fuel)
        else:
            outcome = invoke(inst, args.invoke, vals, fuel)
    except Exception as e:  # noqa: BLE001 - host-level errors
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    if args.dump_store:
        print(store.dump(), end="")
    if args.trace:
        print(json.dumps([list(e) for e in trace]))
    _print_outcome(outcome, args.json)
    return outcome_exit_code(outcome)


def _print_outcome(outcome, as_json: bool, prefix: str = "") -> None:
    if as_json:
        print(json.dumps(outcome_json(outcome)))
    else:
        for line in outcome_lines(outcome):
            print(prefix + line if line.startswith("outcome") else line)


def run_script(path: str, fuel: int = DEFAULT_FUEL, arena_size: int = PHYSMEM_DEFAULT):
    """Execute a .msws script; returns (results, failures) line reports."""
    directives = text.parse_script(Path(path).read_text())
    store = Store()
    instances = []
    registry = {}
    results: list[str] = []
    failures: list[str] = []

    def do_invoke(inv: text.Invoke):
        if not instances:
            raise CliError("invoke before any module", EXIT_USAGE)
        target = instances[inv.module] if inv.module is not None else instances[-1]
        return invoke(target, inv.name, list(inv.args), fuel)

    modnum = 0
    for d in directives:
        if isinstance(d, text.AssertInvalid):
            try:
                validate_module(d.module)
                failures.append(f"assert_invalid: module validated ({d.code})")
                results.append("assert_invalid FAILED")
            except ValidationError as e:
                codes = {err.code for err in e.errors}
                if d.code in codes:
                    results.append(f"assert_invalid ok ({d.code})")
                else:
                    failures.append(
                        f"assert_invalid: wanted {d.code}, got {sorted(codes)}"
                    )
                    results.append("assert_invalid FAILED")
            continue
        if isinstance(d, text.Module):
            typed = validate_module(d)
            hosts = _base_imports(store, [typed], ["memcpy", "abort"], arena_size)
            registry.update(hosts)
            inst = instantiate(store, typed, registry, fuel)
            instances.append(inst)
            for ename, item in inst.exports.items():
                registry[(f"m{modnum}", ename)] = item
            modnum += 1
            results.append(f"module m{modnum - 1} instantiated")
            continue
        if isinstance(d, text.Invoke):
            outcome = do_invoke(d)
            results.append(f"invoke {d.name}: {outcome_lines(outcome)[0]}")
            continue
        if isinstance(d, text.AssertReturn):
            outcome = do_invoke(d.invoke)
            want = Values(tuple(d.expected))
            if outcome == want:
                results.append(f"assert_return {d.invoke.name} ok")
            else:
                failures.append(
                    f"assert_return {d.invoke.name}: got {outcome!r}, "
                    f"want {want!r}"
                )
                results.append(f"assert_return {d.invoke.name} FAILED")
            continue
        if isinstance(d, text.AssertTrap):
            outcome = do_invoke(d.invoke)
            if isinstance(outcome, Trapped) and outcome.trap.kind.value == d.kind:
                results.append(f"assert_trap {d.invoke.name} ok ({d.kind})")
            else:
                failures.append(
                    f"assert_trap {d.invoke.name}: wanted {d.kind}, "
                    f"got {outcome!r}"
                )
                results.append(f"assert_trap {d.invoke.name} FAILED")
    return results, failures


def cmd_script(args) -> int:
    cfg = load_config(args.config)
    results, failures = run_script(args.file, cfg["fuel"], cfg["arena_size"])
    if args.json:
        print(json.dumps({"results": results, "failures": failures}))
    else:
        for r in results:
            print(r)
        for f in failures:
            print(f"FAIL: {f}", file=sys.stderr)
    return EXIT_OK if not failures else EXIT_ERROR


def cmd_reach(args) -> int:
    cfg = load_config(args.config)
    store = Store()
    inst = _instantiate_chain(
        store, args.link + [args.file], [], cfg["fuel"], cfg["arena_size"]
    )
    roots = []
    for name in args.roots.split(",") if args.roots else []:
        item = inst.exports.get(name)
        if item is None:
            raise CliError(f"no export named {name!r}", EXIT_USAGE)
        roots.append(item.value)
    segset = reachable(store, roots)
    print(json.dumps({"reachable": sorted(segset)}))
    return EXIT_OK


def cmd_isolate(args) -> int:
    cfg = load_config(args.config)
    fuel = args.fuel if args.fuel is not None else cfg["fuel"]
    store = Store()
    subject = _load_typed(args.file)

    imports = {}
    if args.attacker.startswith("builtin:random"):
        attacker = validate_module(
            generate_module(args.seed, budget=30, profile="attacker_func")
        )
        att_inst = instantiate(store, attacker, {}, fuel)
    else:
        att_inst = instantiate(store, _load_typed(args.attacker), {}, fuel)
    for imp in subject.module.imports:
        item = att_inst.exports.get(imp.name)
        if item is None:
            raise CliError(
                f"attacker does not export {imp.name!r}", EXIT_USAGE
            )
        imports[(imp.module, imp.name)] = item

    inst = instantiate(store, subject, imports, fuel)
    extra_roots = []
    for name in args.roots.split(",") if args.roots else []:
        item = inst.exports.get(name)
        if item is None:
            raise CliError(f"no export named {name!r}", EXIT_USAGE)
        extra_roots.append(item.value)
    verdict = run_function_experiment(
        inst, args.invoke, [], fuel, paranoid=args.paranoid,
        extra_roots=extra_roots,
    )
    if isinstance(verdict, Isolated):
        payload = {"verdict": "isolated", **outcome_json(verdict.outcome)}
        code = EXIT_OK
    elif isinstance(verdict, TrappedVerdict):
        payload = {"verdict": "trapped", "kind": verdict.trap.kind.value}
        code = EXIT_TRAP
    else:
        payload = {
            "verdict": "violated",
            "segment": verdict.segment,
            "offset": verdict.offset,
        }
        code = EXIT_ERROR
    print(json.dumps(payload))
    return code


def cmd_codegen(args) -> int:
    cfg = load_config(args.config)
    typed = _load_typed(args.file)
    name = args.name or sanitize(Path(args.file).stem)
    opts = CodegenOptions(
        mode=args.mode,
        module_prefix=args.prefix,
        arena_size=cfg["arena_size"],
    )
    try:
        unit = codegen_module(typed, opts, name)
    except CodegenError as e:
        print(f"codegen error: {e}", file=sys.stderr)
        return EXIT_ERROR
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / f"{name}.c").write_text(unit.source)
    (outdir / f"{name}.h").write_text(unit.header)
    written = [f"{name}.c", f"{name}.h"]
    if unit.wrappers:
        (outdir / f"{name}_wrappers.c").write_text(unit.wrappers)
        written.append(f"{name}_wrappers.c")
    print(json.dumps({"written": written, "dir": str(outdir)}))
    return EXIT_OK


def _cc() -> str | None:
    from shutil import which

    return which(os.environ.get("CC", "cc"))


def rt_dir() -> Path:
    override = os.environ.get("MSWASM_RT_DIR")
    if override:
        return Path(override)
    return Path(__file__).resolve().parents[2] / "cruntime"


def compile_and_run(units, target_unit, export, args_vals, result_types, workdir):
    """codegen+cc+execute; returns (exit code, stdout, stderr)."""
    cc = _cc()
    if cc is None:
        raise CliError("no C compiler found", EXIT_ERROR)
    rt = rt_dir()
    wd = Path(workdir)
    sources = [str(rt / "mswasm_rt.c")]
    export_symbol = None
    for name, typed in units:
        unit = codegen_module(typed, CodegenOptions(), name)
        (wd / f"{name}.c").write_text(unit.source)
        (wd / f"{name}.h").write_text(unit.header)
        sources.append(str(wd / f"{name}.c"))
        if unit.wrappers:
            (wd / f"{name}_wrappers.c").write_text(unit.wrappers)
            sources.append(str(wd / f"{name}_wrappers.c"))
        if name == target_unit:
            for e in typed.module.exports:
                if e.kind == "func" and e.name == export:
                    export_symbol = (
                        "w2c_" + sanitize(name) + "_" + sanitize(export)
                    )
    if export_symbol is None:
        raise CliError(f"unit {target_unit} does not export {export!r}")
    driver = emit_driver(
        [n for n, _ in units], target_unit, export, args_vals, result_types,
        export_symbol,
    )
    (wd / "main.c").write_text(driver)
    sources.append(str(wd / "main.c"))
    binary = wd / "prog"
    cmd = [cc, "-std=c11", "-Wall", "-Werror", "-O2", f"-I{rt}", "-o", str(binary)]
    cmd += sources
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise CliError(f"cc failed:\n{proc.stderr}", EXIT_ERROR)
    run = subprocess.run([str(binary)], capture_output=True, text=True, timeout=60)
    return run.returncode, run.stdout, run.stderr


def compiled_outcome_lines(code: int, stdout: str, stderr: str) -> list[str]:
    if code == EXIT_TRAP or "mswasm trap:" in stderr:
        kind = "unknown"
        for line in stderr.splitlines():
            if line.startswith("mswasm trap:"):
                kind = line.split(":")[1].strip()
        return ["outcome: trap", f"kind: {kind}"]
    return [l for l in stdout.splitlines() if l.strip()]


def cmd_diff(args) -> int:
    cfg = load_config(args.config)
    fuel = args.fuel if args.fuel is not None else cfg["fuel"]
    paths = args.link + [args.file]
    units = [(sanitize(Path(p).stem), _load_typed(p)) for p in paths]
    target_unit = units[-1][0]

    store = Store()
    registry = _base_imports(store, [t for _, t in units], [], cfg["arena_size"])
    inst = None
    for name, typed in units:
        inst = instantiate(store, typed, registry, fuel)
        for ename, item in inst.exports.items():
            registry[(name, ename)] = item
    vals = [parse_value_arg(a) for a in args.args]
    outcome = invoke(inst, args.invoke, vals, fuel)
    interp_lines = outcome_lines(outcome)

    fi = inst.exports[args.invoke]
    with tempfile.TemporaryDirectory(prefix="mswasm-diff-") as wd:
        code, out, err = compile_and_run(
            units, target_unit, args.invoke, vals, fi.type.results, wd
        )
    compiled_lines = compiled_outcome_lines(code, out, err)
    match = interp_lines == compiled_lines
    if args.json:
        print(
            json.dumps(
                {
                    "interpreter": interp_lines,
                    "compiled": compiled_lines,
                    "match": match,
                }
            )
        )
    else:
        print("interpreter : " + " | ".join(interp_lines))
        print("compiled    : " + " | ".join(compiled_lines))
        print("match" if match else "MISMATCH")
    return EXIT_OK if match else EXIT_ERROR


def cmd_fuzz(args) -> int:
    if args.theorem == 1:
        report = run_never_stuck(
            args.cases, args.seed, args.budget, args.fuel, args.jobs
        )
    elif args.theorem == 3:
        report = run_isolation_functions(
            args.cases, args.seed, args.fuel, args.paranoid, args.jobs
        )
    elif args.theorem == 4:
        report = run_isolation_modules(args.cases, args.seed, args.fuel, args.jobs)
    else:
        raise CliError("supported campaigns: --theorem 1|3|4", EXIT_USAGE)
    if args.json:
        print(json.dumps(report.to_json()))
    else:
        r = report.to_json()
        print(
            f"cases={r['cases']} values={r['values']} trapped={r['trapped']} "
            f"fuel={r['fuel_exhausted']} stuck={r['stuck']} "
            f"violated={r['violated']} zero_returns={r['zero_returns']}"
        )
        for f in r["failures"]:
            print(f"FAIL: {f}", file=sys.stderr)
    return EXIT_OK if report.clean else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mswasm",
        description="Memory-safe WebAssembly toolkit: validate, run, "
        "isolate, and translate to bounds-checked C.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--json", action="store_true", help="JSON output")
        sp.add_argument("--config", default=None, help="key=value config file")

    sp = sub.add_parser("check", help="validate a module")
    sp.add_argument("file")
    common(sp)
    sp.set_defaults(fn=cmd_check)

    sp = sub.add_parser("run", help="instantiate and invoke")
    sp.add_argument("file")
    sp.add_argument("--link", action="append", default=[], metavar="FILE",
                    help="instantiate FILE first (repeatable, in order)")
    sp.add_argument("--invoke", default=None, metavar="EXPORT")
    sp.add_argument("--args", nargs="*", default=[], metavar="VALUE",
                    help="arguments like 5, i64:9, f32:1.5, null")
    sp.add_argument("--host", default=None, help="builtin host imports, e.g. memcpy,abort")
    sp.add_argument("--fuel", type=int, default=None)
    sp.add_argument("--dump-store", action="store_true")
    sp.add_argument("--trace", action="store_true",
                    help="print the memory access trace as JSON")
    common(sp)
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("script", help="run a .msws assertion script")
    sp.add_argument("file")
    common(sp)
    sp.set_defaults(fn=cmd_script)

    sp = sub.add_parser("reach", help="print the reachable segment set")
    sp.add_argument("file")
    sp.add_argument("--link", action="append", default=[])
    sp.add_argument("--roots", default="", help="comma-separated exported globals")
    common(sp)
    sp.set_defaults(fn=cmd_reach)

    sp = sub.add_parser("isolate", help="local-memory isolation experiment")
    sp.add_argument("file", help="subject module importing the attacker")
    sp.add_argument("--attacker", required=True,
                    help="attacker module file or builtin:random")
    sp.add_argument("--roots", default="",
                    help="exported globals treated as extra roots of E")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--invoke", default="main")
    sp.add_argument("--paranoid", action="store_true",
                    help="digest local memory after every step")
    sp.add_argument("--fuel", type=int, default=None)
    common(sp)
    sp.set_defaults(fn=cmd_isolate)

    sp = sub.add_parser("codegen", help="emit bounds-checked C")
    sp.add_argument("file")
    sp.add_argument("-o", "--outdir", required=True)
    sp.add_argument("--mode", choices=("plain", "checkedc"), default="plain")
    sp.add_argument("--prefix", default="w2c_")
    sp.add_argument("--name", default=None, help="unit name (default: file stem)")
    common(sp)
    sp.set_defaults(fn=cmd_codegen)

    sp = sub.add_parser("diff", help="interpreter vs compiled differential run")
    sp.add_argument("file")
    sp.add_argument("--link", action="append", default=[])
    sp.add_argument("--invoke", required=True)
    sp.add_argument("--args", nargs="*", default=[], metavar="VALUE")
    sp.add_argument("--fuel", type=int, default=None)
    common(sp)
    sp.set_defaults(fn=cmd_diff)

    sp = sub.add_parser("fuzz", help="seeded property campaigns")
    sp.add_argument("--theorem", type=int, required=True, choices=(1, 3, 4))
    sp.add_argument("--cases", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--budget", type=int, default=40)
    sp.add_argument("--fuel", type=int, default=100_000)
    sp.add_argument("--paranoid", action="store_true")
    sp.add_argument("--jobs", type=int, default=1,
                    help="run campaign cases across N processes")
    common(sp)
    sp.set_defaults(fn=cmd_fuzz)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (LinkError, MSWasmTrap, StartFailure) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR if isinstance(e, LinkError) else EXIT_TRAP
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
