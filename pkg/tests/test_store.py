"""Runtime store semantics, checked against explicit predicate oracles."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mswasm.ast import HANDLE, HANDLE_WIDTH, I32, NULL_HANDLE, HandleValue, Value
from mswasm.store import (
    MSWasmTrap,
    ResourceLimitError,
    Store,
    StoreLimits,
    TrapKind,
    handle_add,
    handle_setbounds,
)


def trap_kind(fn, *args):
    with pytest.raises(MSWasmTrap) as e:
        fn(*args)
    return e.value.trap.kind


def access_ok(store, h, width, off=0):
    """Attempt an access; returns the trap kind or None on success."""
    try:
        store.seg_load_scalar(h, width, off)
        return None
    except MSWasmTrap as t:
        return t.trap.kind


def spatial_predicate(h, live_ids, width, off=0, seg_size=None):
    """The explicit access predicate from the semantics."""
    a = h.offset + off
    if not h.valid or h.id == 0:
        return TrapKind.INVALID_HANDLE
    if h.id not in live_ids:
        return TrapKind.TEMPORAL
    if a < 0 or a + width > h.bound:
        return TrapKind.SPATIAL
    if seg_size is not None and h.base + a + width > seg_size:
        return TrapKind.SPATIAL
    return None


class TestAlloc:
    def test_alloc_shape(self, store):
        h = store.seg_alloc(4)
        assert (h.base, h.offset, h.bound, h.valid) == (0, 0, 4, True)

    def test_alloc_zero(self, store):
        h = store.seg_alloc(0)
        assert h.valid and h.bound == 0
        assert access_ok(store, h, 1) is TrapKind.SPATIAL

    def test_fresh_ids(self, store):
        seen = set()
        for _ in range(100):
            h = store.seg_alloc(random.randrange(0, 16))
            assert h.id not in seen
            seen.add(h.id)

    def test_budget(self):
        s = Store(StoreLimits(max_live_bytes=1024))
        with pytest.raises(ResourceLimitError):
            s.seg_alloc(2048)
        # freed bytes return to the budget
        h = s.seg_alloc(1024)
        s.seg_free(h)
        s.seg_alloc(1024)


class TestFree:
    def test_free_then_use_traps_temporal(self, store):
        h = store.seg_alloc(4)
        store.seg_free(h)
        assert access_ok(store, h, 4) is TrapKind.TEMPORAL

    def test_free_null(self, store):
        assert trap_kind(store.seg_free, NULL_HANDLE) is TrapKind.INVALID_HANDLE

    def test_double_free(self, store):
        h = store.seg_alloc(4)
        store.seg_free(h)
        assert trap_kind(store.seg_free, h) is TrapKind.TEMPORAL

    def test_free_off_base(self, store):
        h = store.seg_alloc(8)
        assert trap_kind(store.seg_free, handle_add(h, 4)) is TrapKind.SPATIAL

    def test_ids_never_reused(self, store):
        h1 = store.seg_alloc(4)
        store.seg_free(h1)
        h2 = store.seg_alloc(4)
        assert h2.id != h1.id


class TestScalarAccess:
    def test_round_trip(self, store):
        h = store.seg_alloc(4)
        store.seg_store_scalar(h, 4, 0xDEADBEEF)
        assert store.seg_load_scalar(h, 4) == 0xDEADBEEF

    def test_boundary_off_by_one(self, store):
        h = store.seg_alloc(8)
        store.seg_store_scalar(h, 4, 1, 4)  # a+w == bound: fine
        assert trap_kind(store.seg_load_scalar, h, 4, 5) is TrapKind.SPATIAL

    def test_typed_value_surface(self, store):
        h = store.seg_alloc(8)
        store.seg_store(h, Value(I32, 7))
        assert store.seg_load(h, I32) == Value(I32, 7)

    def test_spatial_iff_predicate_randomized(self, store):
        """Access succeeds exactly when the explicit predicate holds."""
        rng = random.Random(7)
        segs = {}
        for _ in range(8):
            size = rng.randrange(0, 65)
            segs[store.seg_alloc(size).id] = size
        freed = set()
        ids = list(segs)
        for sid in ids[:3]:
            store.seg_free(HandleValue(0, 0, segs[sid], True, sid))
            freed.add(sid)
        live = {sid for sid in segs if sid not in freed}
        for _ in range(3000):
            sid = rng.choice(ids)
            bound = segs[sid]
            h = HandleValue(
                base=0,
                offset=rng.randrange(-70, 70),
                bound=bound,
                valid=rng.random() < 0.9,
                id=sid,
            )
            w = rng.choice((1, 4, 8))
            off = rng.choice((0, 1, 4))
            want = spatial_predicate(h, live, w, off, seg_size=bound)
            assert access_ok(store, h, w, off) is want


class TestHandleArithmetic:
    def test_add_moves_offset(self):
        h = HandleValue(0, 0, 16, True, 3)
        assert handle_add(h, 12).offset == 12

    def test_add_inverse(self):
        h = HandleValue(0, 5, 16, True, 3)
        for d in (1, 7, 2**31 - 1, -3):
            assert handle_add(handle_add(h, d), -d) == h

    def test_add_never_traps_checks_at_access(self, store):
        h = store.seg_alloc(16)
        rng = random.Random(5)
        for _ in range(500):
            d = rng.randrange(-(2**31), 2**31)
            moved = handle_add(h, d)
            want = spatial_predicate(moved, store.live, 4, seg_size=16)
            assert access_ok(store, moved, 4) is want


class TestSetBounds:
    def test_formula(self, store):
        h = handle_add(store.seg_alloc(16), 4)
        out = handle_setbounds(h, 8)
        assert out == HandleValue(base=4, offset=0, bound=8, valid=True, id=h.id)
        # old tail [12..16) is gone from the new window
        assert access_ok(store, handle_add(out, 8), 4) is TrapKind.SPATIAL
        store.seg_store_scalar(out, 4, 9, 4)  # [8..12) of the segment

    def test_identity_window(self, store):
        h = store.seg_alloc(16)
        assert handle_setbounds(h, 16) == h

    def test_monotonic_shrink(self, store):
        h = store.seg_alloc(16)
        assert trap_kind(handle_setbounds, h, 17) is TrapKind.SPATIAL
        assert (
            trap_kind(handle_setbounds, handle_add(h, 12), 5) is TrapKind.SPATIAL
        )

    def test_invalid(self):
        assert trap_kind(handle_setbounds, NULL_HANDLE, 0) is TrapKind.INVALID_HANDLE

    def test_lineage_never_escapes_storage(self, store):
        """alloc/add/setbounds chains keep base+bound inside the segment."""
        rng = random.Random(11)
        for _ in range(200):
            size = rng.randrange(1, 64)
            h = store.seg_alloc(size)
            for _ in range(rng.randrange(1, 6)):
                if rng.random() < 0.5:
                    h = handle_add(h, rng.randrange(-4, 8))
                else:
                    length = rng.randrange(0, h.bound + 2)
                    try:
                        h = handle_setbounds(h, length)
                    except MSWasmTrap:
                        continue
                assert h.base + h.bound <= size


class TestHandleSlots:
    def test_store_load_intact(self, store):
        seg = store.seg_alloc(64)
        target = store.seg_alloc(8)
        store.seg_store_handle(seg, target, 16)
        assert store.seg_load_handle(seg, 16) == target

    def test_misaligned(self, store):
        seg = store.seg_alloc(64)
        assert (
            trap_kind(store.seg_store_handle, seg, NULL_HANDLE, 4)
            is TrapKind.MISALIGNED
        )
        assert trap_kind(store.seg_load_handle, seg, 4) is TrapKind.MISALIGNED

    def test_absolute_alignment_after_setbounds(self, store):
        seg = store.seg_alloc(64)
        target = store.seg_alloc(8)
        shifted = handle_setbounds(handle_add(seg, 4), 60)  # base 4
        # offset 12 -> absolute 16: aligned even though 12 % 16 != 0
        store.seg_store_handle(shifted, target, 12)
        assert store.seg_load_handle(seg, 16) == target

    def test_shatter_single_byte(self, store):
        seg = store.seg_alloc(32)
        target = store.seg_alloc(8)
        store.seg_store_handle(seg, target)
        store.seg_store_scalar(seg, 1, 0xFF, 3)
        loaded = store.seg_load_handle(seg)
        assert not loaded.valid
        assert access_ok(store, loaded, 1) is TrapKind.INVALID_HANDLE

    def test_shatter_is_not_a_trap(self, store):
        seg = store.seg_alloc(32)
        store.seg_store_handle(seg, store.seg_alloc(8))
        store.seg_store_scalar(seg, 4, 0)  # overwriting a slot is legal

    def test_wide_write_shatters_two_slots(self, store):
        seg = store.seg_alloc(48)
        a, b = store.seg_alloc(4), store.seg_alloc(4)
        store.seg_store_handle(seg, a, 0)
        store.seg_store_handle(seg, b, 16)
        store.seg_store_scalar(seg, 8, 0, 12)  # spans both windows
        assert not store.seg_load_handle(seg, 0).valid
        assert not store.seg_load_handle(seg, 16).valid

    def test_tag_coherence_after_random_trace(self, store):
        """Full-rescan oracle after arbitrary op interleavings."""
        rng = random.Random(23)
        seg = store.seg_alloc(128)
        handles = [store.seg_alloc(4) for _ in range(3)]
        for _ in range(2000):
            op = rng.randrange(3)
            try:
                if op == 0:
                    store.seg_store_scalar(
                        seg, rng.choice((1, 4, 8)), rng.randrange(0, 256),
                        rng.randrange(0, 128),
                    )
                elif op == 1:
                    store.seg_store_handle(
                        seg, rng.choice(handles), rng.randrange(0, 8) * 16
                    )
                else:
                    store.seg_load_handle(seg, rng.randrange(0, 8) * 16)
            except MSWasmTrap:
                pass
        store.segments[seg.id].check_coherence()

    def test_recomputed_tags_match(self, store):
        """Oracle: recompute the tag map from the slot map from scratch."""
        rng = random.Random(29)
        seg = store.seg_alloc(96)
        target = store.seg_alloc(4)
        for _ in range(500):
            if rng.random() < 0.5:
                store.seg_store_handle(seg, target, rng.randrange(0, 6) * 16)
            else:
                store.seg_store_scalar(
                    seg, rng.choice((1, 4)), 7, rng.randrange(0, 92)
                )
        kernel = store.segments[seg.id]
        expect = bytearray(96)
        for addr, _h in kernel.slot_items():
            expect[addr : addr + HANDLE_WIDTH] = b"\x01" * HANDLE_WIDTH
        assert bytes(kernel.tags) == bytes(expect)


class TestForgery:
    def test_every_byte_perturbation_invalidates(self, store):
        for k in range(HANDLE_WIDTH):
            seg = store.seg_alloc(32)
            target = store.seg_alloc(8)
            store.seg_store_scalar(target, 4, 77)
            store.seg_store_handle(seg, target)
            store.seg_store_scalar(seg, 1, 0xAB, k)
            loaded = store.seg_load_handle(seg)
            assert not loaded.valid, f"byte {k} perturbation left handle valid"
            assert access_ok(store, loaded, 1) is TrapKind.INVALID_HANDLE

    def test_field_mutation_fails_or_identity(self, store):
        """Adversarial single-field mutations never grant access."""
        rng = random.Random(31)
        for _ in range(300):
            size = rng.randrange(4, 64)
            h = store.seg_alloc(size)
            field = rng.choice(("base", "offset", "bound", "valid", "id"))
            if field == "valid":
                mutant = HandleValue(h.base, h.offset, h.bound, False, h.id)
                probe_off = 0
            elif field == "id":
                bad_id = rng.choice(
                    [store.next_id + rng.randrange(1, 100), 0]
                )
                mutant = HandleValue(h.base, h.offset, h.bound, True, bad_id)
                probe_off = 0
            elif field == "base":
                delta = rng.randrange(1, 2**16)
                mutant = HandleValue(h.base + delta, h.offset, h.bound, True, h.id)
                probe_off = h.bound - 1  # boundary probe exits storage
            elif field == "bound":
                grow = rng.randrange(1, 2**16)
                mutant = HandleValue(h.base, h.offset, h.bound + grow, True, h.id)
                probe_off = h.bound + grow - 1  # exercise claimed authority
            else:  # offset outside the window
                off = rng.choice(
                    [-rng.randrange(1, 2**20), h.bound + rng.randrange(0, 2**20)]
                )
                mutant = HandleValue(h.base, off, h.bound, True, h.id)
                probe_off = 0
            if mutant == h:
                continue
            assert access_ok(store, mutant, 1, probe_off) is not None, field


class TestLinear:
    def test_round_trip(self, store):
        store.ensure_linear(1)
        store.linear_store(0, 4, 99)
        assert store.linear_load(0, 4) == 99

    def test_boundary(self, store):
        store.ensure_linear(1)
        store.linear_store(65532, 4, 1)
        assert trap_kind(store.linear_load, 65533, 4) is TrapKind.LINEAR_OOB

    def test_no_memory(self, store):
        assert trap_kind(store.linear_load, 0, 4) is TrapKind.LINEAR_OOB

    def test_init_bytes_readable(self, store):
        store.ensure_linear(1)
        store.linear_init(16, b"\x07\x00\x00\x00")
        assert store.linear_load(16, 4) == 7


class TestSnapshot:
    def test_restore_round_trip(self, store):
        h = store.seg_alloc(16)
        store.seg_store_scalar(h, 4, 123)
        cell = store.new_global(True, I32, 5)
        snap = store.snapshot()
        store.seg_store_scalar(h, 4, 999)
        h2 = store.seg_alloc(8)
        cell.value = 6
        store.restore(snap)
        assert store.seg_load_scalar(h, 4) == 123
        assert h2.id not in store.live
        assert cell.value == 5

    def test_dump_deterministic(self, store):
        h = store.seg_alloc(16)
        store.seg_store_handle(h, NULL_HANDLE)
        assert store.dump() == store.dump()
        assert "slot 0" in store.dump()


@settings(max_examples=200, deadline=None)
@given(
    size=st.integers(0, 64),
    offset=st.integers(-80, 80),
    width=st.sampled_from([1, 4, 8]),
)
def test_access_predicate_property(size, offset, width):
    store = Store()
    h = handle_add(store.seg_alloc(size), offset)
    ok = 0 <= offset and offset + width <= size
    got = access_ok(store, h, width)
    assert (got is None) == ok


@settings(max_examples=300, deadline=None)
@given(
    base=st.integers(0, 2**32 - 1),
    offset=st.integers(-(2**31), 2**31 - 1),
    bound=st.integers(0, 2**32 - 1),
    valid=st.booleans(),
    hid=st.integers(0, 2**32 - 1),
)
def test_handle_serialization_round_trip(base, offset, bound, valid, hid):
    h = HandleValue(base, offset, bound, valid, hid)
    assert HandleValue.deserialize(h.serialize(), valid=valid) == h


@settings(max_examples=300, deadline=None)
@given(
    start=st.integers(-(2**31), 2**31 - 1),
    d1=st.integers(0, 2**32 - 1),
    d2=st.integers(0, 2**32 - 1),
)
def test_handle_add_is_associative_wrapping(start, d1, d2):
    h = HandleValue(0, start, 64, True, 1)
    both = handle_add(handle_add(h, d1), d2)
    merged = handle_add(h, (d1 + d2) & 0xFFFFFFFF)
    assert both == merged
