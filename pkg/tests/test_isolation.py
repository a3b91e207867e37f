"""Reachability, partition, digests, and the isolation experiments."""

import random

import pytest

from mswasm.ast import FuncType, HANDLE, I32, NULL_HANDLE, HandleValue, Value
from mswasm.interp import Values
from mswasm.isolation import (
    ExperimentError,
    Isolated,
    TrappedVerdict,
    Violated,
    digest,
    partition,
    reachable,
    run_function_experiment,
    run_module_experiment,
)
from mswasm.link import HostFunction, instantiate
from mswasm.store import Store
from mswasm.text import parse_module
from mswasm.validate import validate_module


def typed(src):
    return validate_module(parse_module(src))


def naive_closure(store, roots):
    """Independent oracle: explicit edge list + iterated set union."""
    def live(h):
        return h.valid and h.id in store.live and h.id != 0

    edges = set()
    for sid, seg in store.segments.items():
        if sid == 0 or sid not in store.live:
            continue
        for _addr, h in seg.slot_items():
            if live(h):
                edges.add((sid, h.id))
    current = {h.id for h in roots if isinstance(h, HandleValue) and live(h)}
    while True:
        grown = set(current)
        for a, b in edges:
            if a in grown:
                grown.add(b)
        if grown == current:
            return frozenset(current)
        current = grown


class TestReachable:
    def test_null_roots_empty(self, store):
        store.seg_alloc(4)
        assert reachable(store, [NULL_HANDLE]) == frozenset()

    def test_embedded_handle_extends(self, store):
        s1 = store.seg_alloc(32)
        s2 = store.seg_alloc(8)
        store.seg_store_handle(s1, s2)
        assert reachable(store, [s1]) == {s1.id, s2.id}

    def test_shattered_slot_does_not_extend(self, store):
        s1 = store.seg_alloc(32)
        s2 = store.seg_alloc(8)
        store.seg_store_handle(s1, s2)
        store.seg_store_scalar(s1, 1, 0, 5)
        assert reachable(store, [s1]) == {s1.id}

    def test_dead_embedded_handle_does_not_extend(self, store):
        s1 = store.seg_alloc(32)
        s2 = store.seg_alloc(8)
        store.seg_store_handle(s1, s2)
        store.seg_free(s2)
        assert reachable(store, [s1]) == {s1.id}

    def random_store(self, seed):
        rng = random.Random(seed)
        store = Store()
        handles = [store.seg_alloc(rng.choice((16, 32, 48))) for _ in range(rng.randrange(1, 16))]
        for h in handles:
            for _ in range(rng.randrange(0, 3)):
                target = rng.choice(handles)
                slot = rng.randrange(0, h.bound // 16) * 16 if h.bound >= 16 else None
                if slot is not None:
                    store.seg_store_handle(h, target, slot)
        for h in rng.sample(handles, k=rng.randrange(0, len(handles) // 3 + 1)):
            try:
                store.seg_free(h)
            except Exception:
                pass
        roots = rng.sample(handles, k=rng.randrange(0, len(handles) + 1))
        # some invalid/perturbed roots contribute nothing
        roots += [NULL_HANDLE, HandleValue(0, 0, 8, False, 2)]
        return store, roots

    def test_matches_naive_closure(self):
        for seed in range(150):
            store, roots = self.random_store(seed)
            assert reachable(store, roots) == naive_closure(store, roots), seed

    def test_monotone_and_idempotent(self):
        for seed in range(40):
            store, roots = self.random_store(seed)
            r1 = reachable(store, roots)
            sub = reachable(store, roots[: len(roots) // 2])
            assert sub <= r1
            embedded = [
                h
                for sid in r1
                for _a, h in store.segments[sid].slot_items()
            ]
            assert reachable(store, roots + embedded) == r1


class TestPartition:
    def test_no_roots_everything_local(self, store):
        ids = {store.seg_alloc(8).id for _ in range(4)}
        e, l = partition(store, [])
        assert e == frozenset() and l == ids

    def test_all_roots_no_local(self, store):
        hs = [store.seg_alloc(8) for _ in range(4)]
        e, l = partition(store, hs)
        assert l == frozenset() and e == {h.id for h in hs}

    def test_disjoint_cover(self):
        t = TestReachable()
        for seed in range(60):
            store, roots = t.random_store(seed)
            e, l = partition(store, roots)
            assert e & l == frozenset()
            assert e | l == frozenset(sid for sid in store.live if sid != 0)


class TestDigest:
    def test_detects_one_byte(self, store):
        h = store.seg_alloc(16)
        seg_set = frozenset([h.id])
        d0 = digest(store, seg_set, keep_copies=True)
        store.seg_store_scalar(h, 1, 1, 7)
        d1 = digest(store, seg_set, keep_copies=True)
        assert d0 != d1

    def test_detects_tag_only_change(self, store):
        h = store.seg_alloc(32)
        store.seg_store_handle(h, NULL_HANDLE)
        seg_set = frozenset([h.id])
        d0 = digest(store, seg_set)
        # overwrite with the identical bytes as data: tags change
        raw = store.segments[h.id].read_bytes(0, 16)
        for i, b in enumerate(raw):
            store.seg_store_scalar(h, 1, b, i)
        assert digest(store, seg_set) != d0


class TestFunctionExperiment:
    SUBJECT = """(module
        (import "att" "g" (func))
        (func (export "main") (result i32) (local handle)
          (const 4) (segalloc) (local.tee 0)
          (const 7) (segstore i32)
          (call 0)
          (local.get 0) (segload i32)
          (const 7) (sub i32) (eqz i32)
          (if (result i32) (then (const 1)) (else (const 0)))))"""

    def run_with(self, host_fn, paranoid=False):
        store = Store()
        g = HostFunction(FuncType((), ()), host_fn, name="g")
        inst = instantiate(store, typed(self.SUBJECT), {("att", "g"): g})
        return run_function_experiment(inst, "main", [], 100_000, paranoid)

    def test_benign_isolated_returns_one(self):
        v = self.run_with(lambda view, args: [])
        assert isinstance(v, Isolated)
        assert v.outcome == Values((Value(I32, 1),))

    def test_attacker_own_allocs_isolated(self):
        def g(view, args):
            h = view.seg_alloc(64)
            view.seg_store_scalar(h, 4, 123, 8)
            view.seg_free(h)
            return []

        v = self.run_with(g)
        assert isinstance(v, Isolated)

    def test_fabrication_refused_l_unchanged(self):
        def g(view, args):
            fake = HandleValue(0, 0, 4, True, 1)
            view.seg_store_scalar(fake, 4, 0)
            return []

        v = self.run_with(g)
        assert isinstance(v, TrappedVerdict)

    def test_paranoid_mode(self):
        v = self.run_with(lambda view, args: [], paranoid=True)
        assert isinstance(v, Isolated)

    def test_writes_into_e_are_permitted(self):
        src = """(module
            (func (export "write_arg") (param handle)
              (local.get 0) (const 5) (segstore i32)))"""
        store = Store()
        inst = instantiate(store, typed(src))
        target = store.seg_alloc(8)
        v = run_function_experiment(
            inst, "write_arg", [Value(HANDLE, target)], 100_000
        )
        assert isinstance(v, Isolated)
        assert store.seg_load_scalar(target, 4) == 5

    def test_direct_violation_detected(self):
        """The harness itself must detect an actual local write (we
        simulate a semantics bug by mutating L behind the runtime)."""
        store = Store()
        inst = instantiate(store, typed(self.SUBJECT.replace(
            '(import "att" "g" (func))', '(import "att" "g" (func))')), {
                ("att", "g"): HostFunction(
                    FuncType((), ()),
                    lambda view, args: store.segments[
                        secret.id
                    ].write_scalar(0, 1, 9),  # bypasses every check
                    name="g",
                )
            })
        secret = store.seg_alloc(4)
        v = run_function_experiment(inst, "main", [], 100_000)
        assert isinstance(v, Violated)
        assert v.segment == secret.id
        assert v.offset == 0


class TestHandleIntegrityCorollary:
    """An attacker-returned handle, dereferenced by the caller, either
    works inside E or traps; local memory is never touched."""

    SUBJECT = """(module
        (import "att" "g" (func (result handle)))
        (func (export "main") (result i32)
          (call 0) (segload i32)))"""

    def test_random_attacker_outputs(self):
        import random

        rng = random.Random(41)
        for case in range(50):
            store = Store()
            secret = store.seg_alloc(16)
            store.seg_store_scalar(secret, 4, 0xAB)

            def g(view, args, rng=rng):
                choice = rng.randrange(4)
                if choice == 0:
                    return [Value(HANDLE, NULL_HANDLE)]
                if choice == 1:
                    h = view.seg_alloc(rng.choice((0, 4, 16)))
                    return [Value(HANDLE, h)]
                if choice == 2:
                    h = view.seg_alloc(16)
                    return [Value(HANDLE, view.handle_add(h, rng.choice((-4, 13, 5))))]
                h = view.seg_alloc(32)
                return [Value(HANDLE, view.handle_setbounds(h, 8))]

            hf = HostFunction(FuncType((), (HANDLE,)), g, name="g")
            inst = instantiate(store, typed(self.SUBJECT), {("att", "g"): hf})
            v = run_function_experiment(inst, "main", [], 100_000)
            assert not isinstance(v, Violated), case
            assert store.seg_load_scalar(secret, 4) == 0xAB


class TestSmuggledHandle:
    """A handle smuggled to the attacker through a shared global lets it
    free the caller's segment, which can only surface as a trap."""

    SUBJECT = """(module
        (import "env" "shared" (global (mut handle)))
        (import "att" "g" (func))
        (func (export "main") (result i32) (local handle)
          (const 4) (segalloc) (local.tee 0)
          (const 7) (segstore i32)
          (local.get 0) (global.set 0)
          (call 0)
          (local.get 0) (segload i32)
          (const 7) (sub i32) (eqz i32)
          (if (result i32) (then (const 1)) (else (const 0)))))"""

    ATTACKER = """(module
        (import "env" "shared" (global (mut handle)))
        (func (export "g")
          (global.get 0) (segfree)))"""

    def test_free_causes_trap_never_zero(self):
        from mswasm.store import TrapKind

        store = Store()
        cell = store.new_global(True, HANDLE, NULL_HANDLE)
        att = instantiate(store, typed(self.ATTACKER), {("env", "shared"): cell})
        inst = instantiate(
            store,
            typed(self.SUBJECT),
            {("env", "shared"): cell, ("att", "g"): att.exports["g"]},
        )
        v = run_function_experiment(inst, "main", [], 100_000)
        assert isinstance(v, TrappedVerdict)
        assert v.trap.kind is TrapKind.TEMPORAL


class TestModuleExperiment:
    def test_module_with_clean_start(self):
        store = Store()
        keeper = store.seg_alloc(16)
        src = """(module
            (func (local handle)
              (const 8) (segalloc) (local.tee 0)
              (const 3) (segstore i32))
            (start 0))"""
        v = run_module_experiment(store, typed(src), {})
        assert isinstance(v, Isolated)

    def test_imported_handle_writable(self):
        store = Store()
        target = store.seg_alloc(16)
        src = """(module
            (import "v" "h" (global handle))
            (func (global.get 0) (const 9) (segstore i32))
            (start 0))"""
        cell = store.new_global(False, HANDLE, target)
        v = run_module_experiment(store, typed(src), {("v", "h"): cell})
        assert isinstance(v, Isolated)
        assert store.seg_load_scalar(target, 4) == 9

    def test_memory_import_refused(self):
        store = Store()
        src = '(module (import "v" "m" (memory 1)))'
        with pytest.raises(ExperimentError):
            run_module_experiment(store, typed(src), {})
