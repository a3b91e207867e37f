"""Seeded property campaigns shared by the CLI and the acceptance suite.

Campaign 1 (type safety): validator-accepted closed modules never reach
a stuck state: every observation ends in values, a trap, or fuel
exhaustion.

Campaign 3 (local handle isolation): the stored-value check program
linked against arbitrary generated attackers either returns 1 or traps;
its local segment never changes and 0 is never returned.

Campaign 4 (module isolation): instantiating arbitrary generated
modules against a victim store never writes segments outside the
reachable set of their imports.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .ast import (
    F32,
    F64,
    HANDLE,
    I32,
    I64,
    FuncType,
    NULL_HANDLE,
    Value,
)
from .generator import generate_module, generate_well_typed
from .interp import FuelExhausted, Stuck, Trapped, Values, invoke
from .isolation import (
    Isolated,
    TrappedVerdict,
    Violated,
    run_function_experiment,
    run_module_experiment,
)
from .link import HostFunction, StartFailure, instantiate
from .store import MSWasmTrap, Store, StoreLimits
from .text import parse_module
from .validate import validate_module

# The stored-value isolation subject: allocate, store a sentinel, hand
# control to an arbitrary imported attacker, then check the sentinel.
ISOLATION_SUBJECT = """\
(module
  (import "att" "g" (func))
  (func (export "main") (result i32) (local handle)
    (const 4)
    (segalloc)
    (local.tee 0)
    (const 7)
    (segstore i32)
    (call 0)
    (local.get 0)
    (segload i32)
    (const 7)
    (sub i32)
    (eqz i32)
    (if (result i32)
      (then (const 1))
      (else (const 0)))))
"""


def _arg_for(t, rng: random.Random) -> Value:
    if t is I32:
        return Value(I32, rng.randrange(0, 256))
    if t is I64:
        return Value(I64, rng.randrange(0, 1 << 40))
    if t is F32:
        return Value(F32, 0.5)
    if t is F64:
        return Value(F64, 0.25)
    return Value(HANDLE, NULL_HANDLE)


@dataclass
class CampaignReport:
    cases: int = 0
    values: int = 0
    trapped: int = 0
    fuel_exhausted: int = 0
    stuck: int = 0
    violated: int = 0
    zero_returns: int = 0
    failures: list = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.failures and self.stuck == 0 and self.violated == 0

    def to_json(self) -> dict:
        return {
            "cases": self.cases,
            "values": self.values,
            "trapped": self.trapped,
            "fuel_exhausted": self.fuel_exhausted,
            "stuck": self.stuck,
            "violated": self.violated,
            "zero_returns": self.zero_returns,
            "failures": [str(f) for f in self.failures[:20]],
        }


def _record(report: CampaignReport, seed: int, outcome) -> None:
    if isinstance(outcome, Values):
        report.values += 1
    elif isinstance(outcome, Trapped):
        report.trapped += 1
    elif isinstance(outcome, FuelExhausted):
        report.fuel_exhausted += 1
    elif isinstance(outcome, Stuck):
        report.stuck += 1
        report.failures.append(f"seed {seed}: stuck: {outcome.description}")


def never_stuck_case(seed: int, budget: int = 40, fuel: int = 100_000) -> list:
    """All observations for one generated closed module."""
    module = generate_well_typed(seed, budget)
    typed = validate_module(module)
    store = Store(StoreLimits(max_live_bytes=64 * 1024 * 1024))
    rng = random.Random(seed ^ 0x5EED)
    outcomes = []
    try:
        inst = instantiate(store, typed, fuel=fuel)
    except MSWasmTrap as t:
        return [Trapped(t.trap)]
    except StartFailure as s:
        return [s.outcome]
    for e in typed.module.exports:
        if e.kind != "func":
            continue
        fi = inst.exports[e.name]
        args = [_arg_for(t, rng) for t in fi.type.params]
        outcomes.append(invoke(inst, e.name, args, fuel))
    return outcomes


def _map_cases(fn, seeds, jobs: int):
    """One case per seed, optionally across processes.  Results arrive
    in seed order either way, so reports stay deterministic."""
    if jobs <= 1:
        for s in seeds:
            yield s, fn(s)
        return
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from zip(seeds, pool.map(fn, seeds, chunksize=8))


def run_never_stuck(
    cases: int, seed: int = 0, budget: int = 40, fuel: int = 100_000,
    jobs: int = 1,
) -> CampaignReport:
    from functools import partial

    report = CampaignReport()
    fn = partial(never_stuck_case, budget=budget, fuel=fuel)
    for case_seed, outcomes in _map_cases(fn, range(seed, seed + cases), jobs):
        for outcome in outcomes:
            report.cases += 1
            _record(report, case_seed, outcome)
    return report


def isolation_function_case(seed: int, fuel: int = 100_000, paranoid: bool = False):
    """Link one generated attacker as g and run the subject experiment."""
    subject = validate_module(parse_module(ISOLATION_SUBJECT))
    attacker = validate_module(generate_module(seed, budget=30, profile="attacker_func"))
    store = Store(StoreLimits(max_live_bytes=64 * 1024 * 1024))
    try:
        att_inst = instantiate(store, attacker, fuel=fuel)
    except MSWasmTrap as t:
        return TrappedVerdict(t.trap)
    except StartFailure as s:
        if isinstance(s.outcome, FuelExhausted):
            return Isolated(s.outcome)
        raise
    main_inst = instantiate(
        store, subject, {("att", "g"): att_inst.exports["g"]}, fuel=fuel
    )
    return run_function_experiment(main_inst, "main", [], fuel, paranoid)


def run_isolation_functions(
    cases: int, seed: int = 0, fuel: int = 100_000, paranoid: bool = False,
    jobs: int = 1,
) -> CampaignReport:
    from functools import partial

    report = CampaignReport()
    one = Values((Value(I32, 1),))
    zero = Values((Value(I32, 0),))
    fn = partial(isolation_function_case, fuel=fuel, paranoid=paranoid)
    for case_seed, verdict in _map_cases(fn, range(seed, seed + cases), jobs):
        report.cases += 1
        if isinstance(verdict, Violated):
            report.violated += 1
            report.failures.append(
                f"seed {case_seed}: local memory changed "
                f"(segment {verdict.segment}, offset {verdict.offset})"
            )
        elif isinstance(verdict, TrappedVerdict):
            report.trapped += 1
        elif isinstance(verdict, Isolated):
            if verdict.outcome == zero:
                report.zero_returns += 1
                report.failures.append(
                    f"seed {case_seed}: subject returned 0 (sentinel changed)"
                )
            elif verdict.outcome == one:
                report.values += 1
            elif isinstance(verdict.outcome, FuelExhausted):
                report.fuel_exhausted += 1
            elif isinstance(verdict.outcome, Stuck):
                report.stuck += 1
                report.failures.append(f"seed {case_seed}: stuck")
            else:
                report.failures.append(
                    f"seed {case_seed}: unexpected outcome {verdict.outcome!r}"
                )
    return report


def isolation_module_case(seed: int, fuel: int = 100_000):
    """Instantiate one generated attacker module against a victim store."""
    rng = random.Random(seed ^ 0xA771C8)
    store = Store(StoreLimits(max_live_bytes=64 * 1024 * 1024))
    exported = store.seg_alloc(32)
    local_secret = store.seg_alloc(16)
    store.seg_store_scalar(local_secret, 4, 0xDEAD)
    store.seg_store_scalar(exported, 4, 0xBEEF)
    module = generate_module(seed, budget=30, profile="attacker_module")
    typed = validate_module(module)

    def host_fn(ft: FuncType):
        def fn(view, args):
            # a closure that exercises its own granted capabilities
            for a in args:
                if a.type is HANDLE and a.payload.valid:
                    try:
                        view.seg_load_scalar(a.payload, 1, 0)
                    except MSWasmTrap:
                        pass
            return [_arg_for(t, rng) for t in ft.results]

        return fn

    imports = {}
    for imp in module.imports:
        key = (imp.module, imp.name)
        d = imp.desc
        if hasattr(d, "ty"):  # GlobalImport
            imports[key] = store.new_global(d.mut, HANDLE, exported)
        else:
            imports[key] = HostFunction(
                d.type, host_fn(d.type), captures=(exported,), name=imp.name
            )
    return run_module_experiment(store, typed, imports, fuel)


def run_isolation_modules(
    cases: int, seed: int = 0, fuel: int = 100_000, jobs: int = 1
) -> CampaignReport:
    from functools import partial

    report = CampaignReport()
    fn = partial(isolation_module_case, fuel=fuel)
    for case_seed, verdict in _map_cases(fn, range(seed, seed + cases), jobs):
        report.cases += 1
        if isinstance(verdict, Violated):
            report.violated += 1
            report.failures.append(
                f"seed {case_seed}: local memory changed "
                f"(segment {verdict.segment}, offset {verdict.offset})"
            )
        elif isinstance(verdict, TrappedVerdict):
            report.trapped += 1
        elif isinstance(verdict, Isolated):
            if isinstance(verdict.outcome, FuelExhausted):
                report.fuel_exhausted += 1
            else:
                report.values += 1
    return report
