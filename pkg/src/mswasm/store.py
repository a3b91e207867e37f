"""Mutable machine state: linear memory, tagged segments, allocator.

All checked segment/linear accesses live here with their exact trap
semantics.  Trapping operations are atomic: every check runs before the
first byte is written.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Optional

from .ast import (
    F32,
    F64,
    HANDLE,
    HANDLE_WIDTH,
    HandleValue,
    PAGE_SIZE,
    Value,
    ValueType,
)
from .segmem import SegmentKernel

LINEAR_ID = 0  # reserved allocator id for the linear-memory segment


class TrapKind(enum.Enum):
    SPATIAL = "spatial"
    TEMPORAL = "temporal"
    INVALID_HANDLE = "invalid-handle"
    TAG_FORGERY = "tag-forgery"
    LINEAR_OOB = "linear-oob"
    INDIRECT_CALL_TYPE_MISMATCH = "indirect-call-type-mismatch"
    UNREACHABLE = "unreachable"
    MISALIGNED = "misaligned"


@dataclass(frozen=True, slots=True)
class Trap:
    kind: TrapKind
    detail: str = ""

    def __str__(self):
        return f"{self.kind.value}: {self.detail}" if self.detail else self.kind.value


class MSWasmTrap(Exception):
    def __init__(self, kind: TrapKind, detail: str = ""):
        self.trap = Trap(kind, detail)
        super().__init__(str(self.trap))


class ResourceLimitError(Exception):
    """Allocation beyond the configured memory budget (not a trap)."""


def _trap(kind: TrapKind, detail: str = ""):
    raise MSWasmTrap(kind, detail)


class GlobalCell:
    """One global variable; shared by reference across instances."""

    __slots__ = ("mut", "ty", "value")

    def __init__(self, mut: bool, ty: ValueType, value):
        self.mut = mut
        self.ty = ty
        self.value = value

    def __repr__(self):
        return f"GlobalCell({'mut ' if self.mut else ''}{self.ty.value}, {self.value!r})"


class Table:
    """Function table; entries are function instances or None."""

    __slots__ = ("entries",)

    def __init__(self, entries: list):
        self.entries = entries

    def __len__(self):
        return len(self.entries)


@dataclass
class StoreLimits:
    max_live_bytes: int = 256 * 1024 * 1024
    max_segments: int = 1 << 20


class Store:
    """Runtime store: one linear memory, tagged segments, allocator,
    plus registries for globals, tables and function instances."""

    def __init__(self, limits: Optional[StoreLimits] = None):
        self.limits = limits or StoreLimits()
        self.segments: dict[int, SegmentKernel] = {}
        self.live: dict[int, tuple[int, int]] = {}  # id -> (base, size)
        self.next_id = 1
        self.live_bytes = 0
        self.globals: list[GlobalCell] = []
        self.tables: list[Table] = []
        self.funcs: list = []
        self.trace: Optional[list] = None

    # -- linear memory ------------------------------------------------

    @property
    def linear(self) -> Optional[SegmentKernel]:
        return self.segments.get(LINEAR_ID)

    def ensure_linear(self, pages: int) -> None:
        size = pages * PAGE_SIZE
        cur = self.segments.get(LINEAR_ID)
        if cur is None:
            self._charge(size)
            self.segments[LINEAR_ID] = SegmentKernel(size)
            self.live[LINEAR_ID] = (0, size)
        elif cur.size < size:
            self._charge(size - cur.size)
            grown = SegmentKernel(size)
            grown.data[0 : cur.size] = cur.data
            grown.tags[0 : cur.size] = cur.tags
            grown.slots.update(cur.slots)
            self.segments[LINEAR_ID] = grown
            self.live[LINEAR_ID] = (0, size)

    def linear_load(self, addr: int, width: int) -> int:
        mem = self.segments.get(LINEAR_ID)
        if mem is None or addr < 0 or addr + width > mem.size:
            _trap(TrapKind.LINEAR_OOB, f"load {width} at {addr}")
        if self.trace is not None:
            self.trace.append(("load", LINEAR_ID, addr, width))
        return mem.read_scalar(addr, width)

    def linear_store(self, addr: int, width: int, value: int) -> None:
        mem = self.segments.get(LINEAR_ID)
        if mem is None or addr < 0 or addr + width > mem.size:
            _trap(TrapKind.LINEAR_OOB, f"store {width} at {addr}")
        if self.trace is not None:
            self.trace.append(("store", LINEAR_ID, addr, width))
        mem.write_scalar(addr, width, value)

    def linear_init(self, addr: int, raw: bytes) -> None:
        mem = self.segments.get(LINEAR_ID)
        if mem is None or addr < 0 or addr + len(raw) > mem.size:
            _trap(TrapKind.LINEAR_OOB, f"data segment [{addr}, {addr + len(raw)})")
        mem.write_bytes(addr, raw)

    # -- segments -----------------------------------------------------

    def _charge(self, nbytes: int) -> None:
        if self.live_bytes + nbytes > self.limits.max_live_bytes:
            raise ResourceLimitError(
                f"allocation of {nbytes} bytes exceeds the memory budget"
            )
        if len(self.segments) + 1 > self.limits.max_segments:
            raise ResourceLimitError("segment count limit reached")
        self.live_bytes += nbytes

    def seg_alloc(self, size: int) -> HandleValue:
        self._charge(size)
        sid = self.next_id
        self.next_id += 1
        self.segments[sid] = SegmentKernel(size)
        self.live[sid] = (0, size)
        if self.trace is not None:
            self.trace.append(("alloc", sid, 0, size))
        return HandleValue(base=0, offset=0, bound=size, valid=True, id=sid)

    def seg_free(self, h: HandleValue) -> None:
        if not h.valid:
            _trap(TrapKind.INVALID_HANDLE, "free through invalid handle")
        if h.id == LINEAR_ID:
            _trap(TrapKind.INVALID_HANDLE, "linear memory is not freeable")
        if h.id not in self.live:
            _trap(TrapKind.TEMPORAL, f"free of dead segment {h.id}")
        if h.offset != 0:
            _trap(TrapKind.SPATIAL, f"free at offset {h.offset} (must be 0)")
        seg = self.segments.pop(h.id)
        del self.live[h.id]
        self.live_bytes -= seg.size
        if self.trace is not None:
            self.trace.append(("free", h.id, 0, seg.size))

    def _check_access(
        self, h: HandleValue, static_off: int, width: int, align: bool = False
    ) -> tuple[SegmentKernel, int]:
        """The access predicate: valid & live & in-window (& aligned).

        Returns the segment kernel and the physical address.  The final
        physical-range conjunct can only fail for handles whose base or
        bound were forged; alloc/setbounds lineage keeps base+bound
        inside the segment.
        """
        if not h.valid:
            _trap(TrapKind.INVALID_HANDLE, "access through invalid handle")
        if h.id == LINEAR_ID:
            # No alloc lineage ever yields a valid handle to the reserved
            # linear segment; such a handle is forged by construction.
            _trap(TrapKind.INVALID_HANDLE, "handle to reserved segment id 0")
        seg = self.segments.get(h.id)
        if h.id not in self.live or seg is None:
            _trap(TrapKind.TEMPORAL, f"segment {h.id} is not live")
        a = h.offset + static_off
        if a < 0 or a + width > h.bound:
            _trap(
                TrapKind.SPATIAL,
                f"access [{a}, {a + width}) outside bound {h.bound}",
            )
        phys = h.base + a
        if align and phys % HANDLE_WIDTH != 0:
            _trap(TrapKind.MISALIGNED, f"handle access at address {phys}")
        if phys + width > seg.size:
            _trap(
                TrapKind.SPATIAL,
                f"address [{phys}, {phys + width}) outside segment of size {seg.size}",
            )
        return seg, phys

    def seg_load_scalar(self, h: HandleValue, width: int, static_off: int = 0) -> int:
        seg, phys = self._check_access(h, static_off, width)
        if self.trace is not None:
            self.trace.append(("segload", h.id, phys, width))
        return seg.read_scalar(phys, width)

    def seg_store_scalar(
        self, h: HandleValue, width: int, value: int, static_off: int = 0
    ) -> None:
        seg, phys = self._check_access(h, static_off, width)
        if self.trace is not None:
            self.trace.append(("segstore", h.id, phys, width))
        seg.write_scalar(phys, width, value)

    def seg_load_handle(self, h: HandleValue, static_off: int = 0) -> HandleValue:
        seg, phys = self._check_access(h, static_off, HANDLE_WIDTH, align=True)
        if self.trace is not None:
            self.trace.append(("segload", h.id, phys, HANDLE_WIDTH))
        loaded, _intact = seg.read_handle(phys)
        return loaded

    def seg_store_handle(
        self, h: HandleValue, value: HandleValue, static_off: int = 0
    ) -> None:
        seg, phys = self._check_access(h, static_off, HANDLE_WIDTH, align=True)
        if self.trace is not None:
            self.trace.append(("segstore", h.id, phys, HANDLE_WIDTH))
        seg.write_handle(phys, value)

    def seg_load(self, h: HandleValue, ty: ValueType, static_off: int = 0) -> Value:
        if ty is HANDLE:
            return Value(HANDLE, self.seg_load_handle(h, static_off))
        bits = self.seg_load_scalar(h, ty.width, static_off)
        return Value(ty, bits_to_payload(ty, bits))

    def seg_store(self, h: HandleValue, v: Value, static_off: int = 0) -> None:
        if v.type is HANDLE:
            self.seg_store_handle(h, v.payload, static_off)
        else:
            self.seg_store_scalar(
                h, v.type.width, payload_to_bits(v.type, v.payload), static_off
            )

    # -- snapshot / restore --------------------------------------------

    def snapshot(self):
        segs = {sid: k.snapshot() for sid, k in self.segments.items()}
        return (
            segs,
            dict(self.live),
            self.next_id,
            self.live_bytes,
            [c.value for c in self.globals],
            [list(t.entries) for t in self.tables],
            len(self.funcs),
        )

    def restore(self, snap) -> None:
        segs, live, next_id, live_bytes, gvalues, tentries, nfuncs = snap
        self.segments = {
            sid: _kernel_from_snapshot(s) for sid, s in segs.items()
        }
        self.live = dict(live)
        self.next_id = next_id
        self.live_bytes = live_bytes
        for cell, v in zip(self.globals, gvalues):
            cell.value = v
        del self.globals[len(gvalues):]
        for table, entries in zip(self.tables, tentries):
            table.entries[:] = entries
        del self.tables[len(tentries):]
        del self.funcs[nfuncs:]

    # -- registries -----------------------------------------------------

    def new_global(self, mut: bool, ty: ValueType, value) -> GlobalCell:
        cell = GlobalCell(mut, ty, value)
        self.globals.append(cell)
        return cell

    def new_table(self, entries: list) -> Table:
        table = Table(entries)
        self.tables.append(table)
        return table

    def register_func(self, fn) -> None:
        self.funcs.append(fn)

    # -- diagnostics ----------------------------------------------------

    def dump(self) -> str:
        """Deterministic, newline-delimited byte+tag listing."""
        lines = ["store"]
        for sid in sorted(self.segments):
            seg = self.segments[sid]
            tag = " linear" if sid == LINEAR_ID else ""
            lines.append(f"segment {sid} size {seg.size}{tag}")
            raw = bytes(seg.data)
            tags = bytes(seg.tags)
            for off in range(0, len(raw), 32):
                chunk = raw[off : off + 32]
                tchunk = "".join("H" if t else "D" for t in tags[off : off + 32])
                lines.append(f"  {off:08x} {chunk.hex()} {tchunk}")
            for addr, h in seg.slot_items():
                lines.append(
                    f"  slot {addr} base={h.base} offset={h.offset} "
                    f"bound={h.bound} valid={int(h.valid)} id={h.id}"
                )
        lines.append(f"globals {len(self.globals)}")
        for i, c in enumerate(self.globals):
            lines.append(f"  global {i} {'mut ' if c.mut else ''}{c.ty.value} {c.value!r}")
        lines.append("end")
        return "\n".join(lines) + "\n"


def _kernel_from_snapshot(snap) -> SegmentKernel:
    raw, tags, slots = snap
    k = SegmentKernel(len(raw))
    k.data[:] = raw
    k.tags[:] = tags
    k.slots.update(dict(slots))
    return k


# -- pure handle operations -------------------------------------------------

def handle_add(h: HandleValue, delta: int) -> HandleValue:
    """Move the offset (wrapping i32); never traps, checks happen at access."""
    if delta >= 1 << 31:
        delta -= 1 << 32
    return h.moved(delta)


def handle_setbounds(h: HandleValue, length: int) -> HandleValue:
    """CSetBounds-style monotone shrink of the accessible window."""
    if not h.valid:
        _trap(TrapKind.INVALID_HANDLE, "setbounds on invalid handle")
    if h.offset < 0 or h.offset + length > h.bound:
        _trap(
            TrapKind.SPATIAL,
            f"setbounds to [{h.offset}, {h.offset + length}) escapes bound {h.bound}",
        )
    return HandleValue(
        base=h.base + h.offset, offset=0, bound=length, valid=True, id=h.id
    )


# -- scalar payload <-> stored bits -----------------------------------------

def bits_to_payload(ty: ValueType, bits: int):
    if ty is F32:
        return struct.unpack("<f", struct.pack("<I", bits))[0]
    if ty is F64:
        return struct.unpack("<d", struct.pack("<Q", bits))[0]
    return bits


def payload_to_bits(ty: ValueType, payload) -> int:
    if ty is F32:
        return struct.unpack("<I", struct.pack("<f", payload))[0]
    if ty is F64:
        return struct.unpack("<Q", struct.pack("<d", payload))[0]
    return payload
