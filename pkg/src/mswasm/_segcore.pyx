# cython: boundscheck=False, wraparound=False, language_level=3
"""Compiled segment memory kernel: byte/tag/slot bookkeeping hot path.

Mirrors segmem_py.SegmentKernel exactly; the store layer performs all
bounds and validity checks before calling in.
"""

from .ast import HandleValue

cdef int HANDLE_WIDTH = 16
cdef int TAG_D = 0
cdef int TAG_H = 1


cdef class SegmentKernel:
    cdef bytearray _data
    cdef bytearray _tags
    cdef dict _slots
    cdef unsigned char[::1] _dview
    cdef unsigned char[::1] _tview

    def __init__(self, int size):
        self._data = bytearray(size)
        self._tags = bytearray(size)
        self._slots = {}
        if size > 0:
            self._dview = self._data
            self._tview = self._tags

    property data:
        def __get__(self):
            return self._data

    property tags:
        def __get__(self):
            return self._tags

    property slots:
        def __get__(self):
            return self._slots

    @property
    def size(self):
        return len(self._data)

    cdef void _shatter(self, Py_ssize_t addr, Py_ssize_t n):
        cdef Py_ssize_t first = (addr // HANDLE_WIDTH) * HANDLE_WIDTH
        cdef Py_ssize_t last = ((addr + n - 1) // HANDLE_WIDTH) * HANDLE_WIDTH
        cdef Py_ssize_t block, k
        for block in range(first, last + HANDLE_WIDTH, HANDLE_WIDTH):
            if self._slots.pop(block, None) is not None:
                for k in range(block, block + HANDLE_WIDTH):
                    self._tview[k] = TAG_D

    def read_scalar(self, Py_ssize_t addr, int width):
        cdef unsigned long long v = 0
        cdef int k
        for k in range(width - 1, -1, -1):
            v = (v << 8) | self._dview[addr + k]
        return v

    def write_scalar(self, Py_ssize_t addr, int width, value):
        if len(self._slots) > 0:
            self._shatter(addr, width)
        cdef unsigned long long v = value
        cdef int k
        for k in range(width):
            self._dview[addr + k] = <unsigned char> (v & 0xFF)
            v >>= 8

    def read_bytes(self, Py_ssize_t addr, Py_ssize_t n):
        return bytes(self._data[addr : addr + n])

    def write_bytes(self, Py_ssize_t addr, raw):
        cdef Py_ssize_t n = len(raw)
        if n == 0:
            return
        if len(self._slots) > 0:
            self._shatter(addr, n)
        self._data[addr : addr + n] = raw

    def write_handle(self, Py_ssize_t addr, h):
        self._data[addr : addr + HANDLE_WIDTH] = h.serialize()
        cdef Py_ssize_t k
        for k in range(addr, addr + HANDLE_WIDTH):
            self._tview[k] = TAG_H
        self._slots[addr] = h

    def read_handle(self, Py_ssize_t addr):
        slot = self._slots.get(addr)
        if slot is not None:
            return slot, True
        raw = bytes(self._data[addr : addr + HANDLE_WIDTH])
        return HandleValue.deserialize(raw, valid=False), False

    def slot_items(self):
        return sorted(self._slots.items())

    def snapshot(self):
        return bytes(self._data), bytes(self._tags), tuple(self.slot_items())

    def check_coherence(self):
        cdef Py_ssize_t size = len(self._data)
        cdef Py_ssize_t addr, block
        for addr, h in self._slots.items():
            assert addr % HANDLE_WIDTH == 0, f"slot {addr} misaligned"
            assert addr + HANDLE_WIDTH <= size, f"slot {addr} out of segment"
            assert bytes(self._tags[addr : addr + HANDLE_WIDTH]) == bytes([TAG_H]) * HANDLE_WIDTH
            assert bytes(self._data[addr : addr + HANDLE_WIDTH]) == h.serialize()
        for addr in range(size):
            if self._tags[addr] == TAG_H:
                block = (addr // HANDLE_WIDTH) * HANDLE_WIDTH
                assert block in self._slots, f"H tag at {addr} without a slot"
