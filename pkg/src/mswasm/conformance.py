"""Driver for the neutral conformance tables (cruntime/conformance/).

The same tables run against this runtime store and against the C
support runtime; both drivers print identical canonical lines, so
pairwise equivalence is plain text comparison.  Lines may carry an
inline expectation after "=>" which the driver verifies itself.
"""

from __future__ import annotations

import struct

from .ast import NULL_HANDLE, HandleValue
from .store import MSWasmTrap, Store, handle_add, handle_setbounds

_WIDTHS = {"8": 1, "32": 4, "64": 8}


def _fmt_handle(h: HandleValue) -> str:
    return f"handle valid={int(h.valid)} offset={h.offset} bound={h.bound}"


def run_table(store: Store, text: str) -> tuple[list[str], list[str]]:
    """Execute a table; returns (canonical output lines, failures)."""
    env: dict[str, HandleValue] = {}
    out: list[str] = []
    failures: list[str] = []

    def handle(tok: str) -> HandleValue:
        if tok not in env:
            raise ValueError(f"undefined handle variable {tok}")
        return env[tok]

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        expected = None
        if "=>" in line:
            line, expected = (s.strip() for s in line.split("=>", 1))
        toks = line.split()
        op, args = toks[0], toks[1:]
        try:
            if op == "linear":  # argument is a page count (64 KiB pages)
                store.ensure_linear(int(args[0], 0))
                result = "ok"
            elif op == "alloc":
                env[args[0]] = store.seg_alloc(int(args[1], 0))
                result = "ok"
            elif op == "null":
                env[args[0]] = NULL_HANDLE
                result = "ok"
            elif op == "free":
                store.seg_free(handle(args[0]))
                result = "ok"
            elif op == "add":
                env[args[0]] = handle_add(handle(args[1]), int(args[2], 0))
                result = "ok"
            elif op in ("setbounds", "slice"):
                env[args[0]] = handle_setbounds(handle(args[1]), int(args[2], 0))
                result = "ok"
            elif op.startswith("store") and op[5:] in _WIDTHS:
                w = _WIDTHS[op[5:]]
                store.seg_store_scalar(
                    handle(args[0]), w, int(args[2], 0) & ((1 << (8 * w)) - 1),
                    int(args[1], 0),
                )
                result = "ok"
            elif op in ("storef32", "storef64"):
                x = float(args[2])
                bits = (
                    struct.unpack("<I", struct.pack("<f", x))[0]
                    if op.endswith("32")
                    else struct.unpack("<Q", struct.pack("<d", x))[0]
                )
                store.seg_store_scalar(
                    handle(args[0]), 4 if op.endswith("32") else 8, bits,
                    int(args[1], 0),
                )
                result = "ok"
            elif op == "storeh":
                store.seg_store_handle(
                    handle(args[0]), handle(args[2]), int(args[1], 0)
                )
                result = "ok"
            elif op.startswith("load") and op[4:] in _WIDTHS:
                w = _WIDTHS[op[4:]]
                v = store.seg_load_scalar(handle(args[0]), w, int(args[1], 0))
                result = f"val {v}"
            elif op in ("loadf32", "loadf64"):
                w = 4 if op.endswith("32") else 8
                bits = store.seg_load_scalar(handle(args[0]), w, int(args[1], 0))
                result = f"val 0x{bits:0{2 * w}x}"
            elif op == "loadh":
                got = store.seg_load_handle(handle(args[1]), int(args[2], 0))
                env[args[0]] = got
                result = _fmt_handle(got)
            elif op in ("linstore32", "linstore64"):
                w = 4 if op.endswith("32") else 8
                store.linear_store(int(args[0], 0), w, int(args[1], 0))
                result = "ok"
            elif op in ("linload32", "linload64"):
                w = 4 if op.endswith("32") else 8
                result = f"val {store.linear_load(int(args[0], 0), w)}"
            else:
                raise ValueError(f"unknown conformance op {op!r}")
        except MSWasmTrap as t:
            result = f"trap {t.trap.kind.value}"
        out.append(f"{lineno}: {result}")
        if expected is not None and result != expected:
            failures.append(f"line {lineno}: got {result!r}, want {expected!r}")
    return out, failures
