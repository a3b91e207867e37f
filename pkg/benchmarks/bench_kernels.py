#!/usr/bin/env python3
"""Benchmark: compiled segment kernel vs the pure-Python fallback.

Times raw kernel operations and one end-to-end interpreted workload
under each backend.  Run from the repository root:

    python3 benchmarks/bench_kernels.py
"""

import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from mswasm.ast import HandleValue, I32, Value  # noqa: E402
from mswasm.segmem_py import SegmentKernel as PyKernel  # noqa: E402

try:
    from mswasm._segcore import SegmentKernel as CKernel
except ImportError:
    CKernel = None


def timeit(fn, *args):
    best = float("inf")
    for _ in range(5):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def scalar_stores(kernel_cls, n=200_000):
    k = kernel_cls(4096)
    for i in range(n):
        k.write_scalar((i * 4) % 4092, 4, i & 0xFFFFFFFF)


def scalar_loads(kernel_cls, n=200_000):
    k = kernel_cls(4096)
    total = 0
    for i in range(n):
        total += k.read_scalar((i * 4) % 4092, 4)
    return total


def handle_churn(kernel_cls, n=50_000):
    k = kernel_cls(4096)
    h = HandleValue(0, 0, 16, True, 7)
    for i in range(n):
        addr = (i % 256) * 16
        k.write_handle(addr, h)
        k.read_handle(addr)
        k.write_scalar(addr + 1, 1, 0xFF)  # shatter


def interpreted_sum(kernel_cls):
    import mswasm.store as st

    prev = st.SegmentKernel
    st.SegmentKernel = kernel_cls
    try:
        from mswasm.interp import invoke
        from mswasm.link import instantiate
        from mswasm.text import parse_module
        from mswasm.validate import validate_module

        src = (
            Path(__file__).resolve().parents[1] / "corpus" / "bench" / "sum.msw"
        ).read_text()
        inst = instantiate(st.Store(), validate_module(parse_module(src)))
        out = invoke(inst, "sum", [Value(I32, 20_000), Value(I32, 2)])
        assert hasattr(out, "values")
    finally:
        st.SegmentKernel = prev


def main():
    if CKernel is None:
        print("compiled kernel not built (pip install -e .); nothing to compare")
        return 1
    rows = [
        ("scalar stores (200k x u32)", scalar_stores),
        ("scalar loads  (200k x u32)", scalar_loads),
        ("handle store/load/shatter (50k)", handle_churn),
        ("interpreted array sum (40k element-ops)", interpreted_sum),
    ]
    print(f"{'benchmark':<42}{'python':>10}{'compiled':>10}{'speedup':>9}")
    for name, fn in rows:
        t_py = timeit(fn, PyKernel)
        t_c = timeit(fn, CKernel)
        print(
            f"{name:<42}{t_py * 1000:>8.1f}ms{t_c * 1000:>8.1f}ms"
            f"{t_py / t_c:>8.2f}x"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
