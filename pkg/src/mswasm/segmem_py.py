"""Pure-Python segment memory kernel.

One segment = raw bytes + a per-byte tag shadow (0 = data, 1 = handle
byte) + a slot shadow mapping each 16-aligned offset that holds a
serialized handle to its full identity.  Any data write into a slot's
16-byte window shatters it: the slot is dropped and the window retagged
as data.  The compiled kernel in _segcore.pyx implements the same
surface; callers perform all bounds/validity checks before calling in.
"""

from __future__ import annotations

from .ast import HANDLE_WIDTH, HandleValue

TAG_D = 0
TAG_H = 1

_ALL_H = bytes([TAG_H]) * HANDLE_WIDTH


class SegmentKernel:
    __slots__ = ("data", "tags", "slots")

    def __init__(self, size: int):
        self.data = bytearray(size)
        self.tags = bytearray(size)  # TAG_D-filled
        self.slots: dict[int, HandleValue] = {}

    @property
    def size(self) -> int:
        return len(self.data)

    def _shatter(self, addr: int, n: int) -> None:
        first = (addr // HANDLE_WIDTH) * HANDLE_WIDTH
        last = ((addr + n - 1) // HANDLE_WIDTH) * HANDLE_WIDTH
        for block in range(first, last + HANDLE_WIDTH, HANDLE_WIDTH):
            if self.slots.pop(block, None) is not None:
                self.tags[block : block + HANDLE_WIDTH] = bytes(HANDLE_WIDTH)

    def read_scalar(self, addr: int, width: int) -> int:
        return int.from_bytes(self.data[addr : addr + width], "little")

    def write_scalar(self, addr: int, width: int, value: int) -> None:
        if self.slots:
            self._shatter(addr, width)
        self.data[addr : addr + width] = value.to_bytes(width, "little")

    def read_bytes(self, addr: int, n: int) -> bytes:
        return bytes(self.data[addr : addr + n])

    def write_bytes(self, addr: int, raw: bytes) -> None:
        if not raw:
            return
        if self.slots:
            self._shatter(addr, len(raw))
        self.data[addr : addr + len(raw)] = raw

    def write_handle(self, addr: int, h: HandleValue) -> None:
        # addr is HANDLE_WIDTH-aligned (checked by the store layer).
        self.data[addr : addr + HANDLE_WIDTH] = h.serialize()
        self.tags[addr : addr + HANDLE_WIDTH] = _ALL_H
        self.slots[addr] = h

    def read_handle(self, addr: int) -> tuple[HandleValue, bool]:
        slot = self.slots.get(addr)
        if slot is not None:
            return slot, True
        raw = bytes(self.data[addr : addr + HANDLE_WIDTH])
        return HandleValue.deserialize(raw, valid=False), False

    def slot_items(self) -> list[tuple[int, HandleValue]]:
        return sorted(self.slots.items())

    def snapshot(self) -> tuple[bytes, bytes, tuple]:
        return bytes(self.data), bytes(self.tags), tuple(self.slot_items())

    def check_coherence(self) -> None:
        """Full rescan: slots exist exactly where 16 H-tagged bytes sit."""
        size = len(self.data)
        for addr, h in self.slots.items():
            assert addr % HANDLE_WIDTH == 0, f"slot {addr} misaligned"
            assert addr + HANDLE_WIDTH <= size, f"slot {addr} out of segment"
            window = self.tags[addr : addr + HANDLE_WIDTH]
            assert window == _ALL_H, f"slot {addr} over non-H tags"
            assert (
                bytes(self.data[addr : addr + HANDLE_WIDTH]) == h.serialize()
            ), f"slot {addr} bytes diverge from shadow"
        for addr in range(0, size):
            if self.tags[addr] == TAG_H:
                block = (addr // HANDLE_WIDTH) * HANDLE_WIDTH
                assert block in self.slots, f"H tag at {addr} without a slot"
