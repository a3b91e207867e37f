"""Isolation lab: reachability over handles, memory partition, digests,
and the local-memory-unchanged experiment drivers.

An experiment partitions the live segments into exported memory E
(reachable from the roots) and local memory L (the rest), digests L,
runs the subject, and reports Violated if any byte, tag or slot of L
changed.  Only no-write is checked; reads are not observable here.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional, Union

from .ast import HANDLE, HandleValue, Value
from .interp import (
    Config,
    DEFAULT_FUEL,
    FuelExhausted,
    Outcome,
    Stuck,
    Trapped,
    Values,
    invoke,
    run,
    step,
)
from .link import HostFunction, Instance, instantiate, StartFailure
from .store import LINEAR_ID, MSWasmTrap, Store, Trap
from .validate import TypedModule

SegSet = frozenset


def _live_handle(store: Store, h: HandleValue) -> bool:
    return h.valid and h.id != LINEAR_ID and h.id in store.live


def _root_handles(roots) -> list[HandleValue]:
    out = []
    for r in roots:
        if isinstance(r, HandleValue):
            out.append(r)
        elif isinstance(r, Value) and r.type is HANDLE:
            out.append(r.payload)
    return out


def reachable(store: Store, roots) -> SegSet:
    """Maximal reachable segment set: live handles in roots contribute
    their segment; intact embedded handles extend transitively."""
    work = [h for h in _root_handles(roots) if _live_handle(store, h)]
    seen: set[int] = set()
    while work:
        h = work.pop()
        if h.id in seen:
            continue
        seen.add(h.id)
        seg = store.segments[h.id]
        for _addr, embedded in seg.slot_items():
            if _live_handle(store, embedded) and embedded.id not in seen:
                work.append(embedded)
    return frozenset(seen)


def partition(store: Store, roots) -> tuple[SegSet, SegSet]:
    """(E, L): exported = reachable(roots), local = other live segments.

    The reserved linear segment stays outside both sets: it is shared
    per store and not addressable through handles."""
    e = reachable(store, roots)
    live = frozenset(sid for sid in store.live if sid != LINEAR_ID)
    return e, live - e


@dataclass(frozen=True)
class MemoryDigest:
    segset: SegSet
    hashes: dict  # sid -> hex digest
    copies: Optional[dict] = None  # sid -> full snapshot, in debug mode

    def __eq__(self, other):
        return (
            isinstance(other, MemoryDigest)
            and self.segset == other.segset
            and self.hashes == other.hashes
        )


def digest(store: Store, segset: SegSet, keep_copies: bool = False) -> MemoryDigest:
    hashes = {}
    copies = {} if keep_copies else None
    for sid in sorted(segset):
        seg = store.segments.get(sid)
        if seg is None:
            hashes[sid] = "<freed>"
            if copies is not None:
                copies[sid] = None
            continue
        raw, tags, slots = seg.snapshot()
        h = hashlib.sha256()
        h.update(raw)
        h.update(tags)
        for addr, hv in slots:
            h.update(f"{addr}:{hv.base}:{hv.offset}:{hv.bound}:{hv.valid}:{hv.id};".encode())
        hashes[sid] = h.hexdigest()
        if copies is not None:
            copies[sid] = (raw, tags, slots)
    return MemoryDigest(segset, hashes, copies)


def first_difference(before: MemoryDigest, after: MemoryDigest) -> tuple[int, int]:
    """(segment id, first differing byte offset); offset -1 when the
    difference is liveness or metadata only."""
    for sid in sorted(before.segset):
        if before.hashes[sid] == after.hashes.get(sid):
            continue
        if before.copies and after.copies:
            b = before.copies.get(sid)
            a = after.copies.get(sid)
            if a is None or b is None:
                return sid, -1
            for k, (x, y) in enumerate(zip(b[0], a[0])):
                if x != y:
                    return sid, k
            for k, (x, y) in enumerate(zip(b[1], a[1])):
                if x != y:
                    return sid, k
        return sid, -1
    return -1, -1


@dataclass(frozen=True)
class Isolated:
    outcome: Outcome


@dataclass(frozen=True)
class Violated:
    segment: int
    offset: int


@dataclass(frozen=True)
class TrappedVerdict:
    trap: Trap


Verdict = Union[Isolated, Violated, TrappedVerdict]


class ExperimentError(Exception):
    """Experiment preconditions violated (not a verdict)."""


def _check_local(store: Store, lset: SegSet, before: MemoryDigest) -> Optional[Violated]:
    after = digest(store, lset, keep_copies=True)
    if after != before:
        sid, off = first_difference(before, after)
        return Violated(sid, off)
    return None


def _wrap_host_with_digest(hf: HostFunction, store, lset, before) -> HostFunction:
    def fn(view, args):
        bad = _check_local(store, lset, before)
        if bad is not None:
            raise _ViolationSignal(bad)
        out = hf.fn(view, args)
        bad = _check_local(store, lset, before)
        if bad is not None:
            raise _ViolationSignal(bad)
        return out

    return HostFunction(hf.type, fn, hf.captures, hf.name)


class _ViolationSignal(Exception):
    def __init__(self, violated: Violated):
        self.violated = violated


def run_function_experiment(
    instance: Instance,
    func_name_or_index,
    args=(),
    fuel: int = DEFAULT_FUEL,
    paranoid: bool = False,
    extra_roots=(),
) -> Verdict:
    """Local-memory invariance for one call.

    Roots: the call arguments plus the instance's own globals (module
    state the callee can reach without being handed anything) plus any
    explicitly provided extra roots.
    """
    store = instance.store
    roots = list(args) + [c.value for c in instance.globals] + list(extra_roots)
    _e, lset = partition(store, roots)
    before = digest(store, lset, keep_copies=True)

    fi = instance.exports.get(func_name_or_index)
    if fi is None and isinstance(func_name_or_index, int):
        fi = instance.funcs[func_name_or_index]
    if fi is None:
        raise ExperimentError(f"no function {func_name_or_index!r}")

    # Digest-check L at every host-function boundary for the duration.
    saved_funcs = list(instance.funcs)
    for k, item in enumerate(instance.funcs):
        if isinstance(item, HostFunction):
            instance.funcs[k] = _wrap_host_with_digest(item, store, lset, before)

    try:
        if paranoid:
            cfg = Config.call(store, fi, [a.payload for a in args])
            outcome: Outcome = FuelExhausted()
            steps = fuel
            while steps > 0:
                if cfg.done:
                    outcome = cfg.outcome_values()
                    break
                try:
                    step(cfg)
                except MSWasmTrap as t:
                    outcome = Trapped(t.trap)
                    break
                bad = _check_local(store, lset, before)
                if bad is not None:
                    return bad
                steps -= 1
        else:
            outcome = invoke(instance, func_name_or_index, list(args), fuel)
    except _ViolationSignal as v:
        return v.violated
    finally:
        instance.funcs[:] = saved_funcs

    bad = _check_local(store, lset, before)
    if bad is not None:
        return bad
    for sid in lset:
        if sid not in store.live:
            return Violated(sid, -1)
    if isinstance(outcome, Trapped):
        return TrappedVerdict(outcome.trap)
    return Isolated(outcome)


def closure_roots(item) -> list[HandleValue]:
    """Handles reachable through a closure import: declared captures for
    host functions, instance globals for module functions."""
    if isinstance(item, HostFunction):
        return list(item.captures)
    inst = getattr(item, "instance", None)
    if inst is not None:
        return _root_handles([c.value for c in inst.globals])
    return []


def run_module_experiment(
    store: Store,
    typed: TypedModule,
    imports,
    fuel: int = DEFAULT_FUEL,
) -> Verdict:
    """Local-memory invariance across instantiation (start included).

    The module under test must import no linear memory and no table;
    roots are the imported global values plus handles reachable through
    imported closures."""
    from .ast import MemoryImport, TableImport, GlobalImport, FuncImport

    roots: list = []
    for imp in typed.module.imports:
        d = imp.desc
        if isinstance(d, (MemoryImport, TableImport)):
            raise ExperimentError(
                "module experiment requires no memory/table imports"
            )
        item = imports.get((imp.module, imp.name))
        if item is None:
            raise ExperimentError(f"missing import {imp.module}.{imp.name}")
        if isinstance(d, GlobalImport):
            roots.append(item.value)
        elif isinstance(d, FuncImport):
            roots.extend(closure_roots(item))

    _e, lset = partition(store, roots)
    before = digest(store, lset, keep_copies=True)

    wrapped = {}
    for key, item in imports.items():
        if isinstance(item, HostFunction):
            wrapped[key] = _wrap_host_with_digest(item, store, lset, before)
        else:
            wrapped[key] = item

    try:
        instantiate(store, typed, wrapped, fuel)
        outcome: Outcome = Values(())
    except _ViolationSignal as v:
        return v.violated
    except MSWasmTrap as t:
        outcome = Trapped(t.trap)
    except StartFailure as s:
        outcome = s.outcome
        if isinstance(outcome, Stuck):
            raise ExperimentError(f"stuck during instantiation: {outcome}")

    bad = _check_local(store, lset, before)
    if bad is not None:
        return bad
    for sid in lset:
        if sid not in store.live:
            return Violated(sid, -1)
    if isinstance(outcome, Trapped):
        return TrappedVerdict(outcome.trap)
    return Isolated(outcome)
