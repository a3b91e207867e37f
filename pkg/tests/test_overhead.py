"""Overhead sanity: checked translations vs unchecked native twins.

Loose bound only: the checked/unchecked wall-time ratio must stay under
10x on three micro-kernels; measured ratios are printed for the CI log.
"""

import subprocess
import time

import pytest

from conftest import CORPUS, CRUNTIME, requires_cc
from mswasm.ast import I32, Value
from mswasm.codegen import CodegenOptions, codegen_module, emit_driver
from mswasm.text import parse_module
from mswasm.validate import validate_module

KERNELS = [
    ("matmul", "bench/matmul.msw", "bench/baseline_matmul.c", (160, 2)),
    ("sum", "bench/sum.msw", "bench/baseline_sum.c", (2_000_000, 40)),
    ("bytecopy", "bench/bytecopy.msw", "bench/baseline_bytecopy.c", (1_000_000, 120)),
]

RATIO_BOUND = 10.0


def _cc(*args):
    proc = subprocess.run(["cc", *map(str, args)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


def _best_of(cmd, runs=3):
    best, out = 1e9, None
    for _ in range(runs):
        t0 = time.perf_counter()
        out = subprocess.run(cmd, capture_output=True, text=True, timeout=300)
        best = min(best, time.perf_counter() - t0)
    return best, out.stdout.strip().splitlines()[-1]


@requires_cc
@pytest.mark.parametrize("name,msw,baseline,params", KERNELS, ids=[k[0] for k in KERNELS])
def test_overhead_under_bound(name, msw, baseline, params, tmp_path):
    n, reps = params
    typed = validate_module(parse_module((CORPUS / msw).read_text()))
    unit = codegen_module(typed, CodegenOptions(), name)
    (tmp_path / f"{name}.c").write_text(unit.source)
    (tmp_path / f"{name}.h").write_text(unit.header)
    driver = emit_driver(
        [name], name, name, [Value(I32, n), Value(I32, reps)], (I32,),
        f"w2c_{name}_{name}",
    )
    (tmp_path / "main.c").write_text(driver)
    checked = tmp_path / "checked"
    native = tmp_path / "native"
    _cc("-std=c11", "-O2", "-Wall", "-Werror", f"-I{CRUNTIME}", "-o", checked,
        tmp_path / f"{name}.c", tmp_path / "main.c", CRUNTIME / "mswasm_rt.c")
    _cc("-std=c11", "-O2", "-o", native, CORPUS / baseline)

    t_checked, v_checked = _best_of([str(checked)])
    t_native, v_native = _best_of([str(native), str(n), str(reps)])
    assert v_checked == v_native, "kernels disagree on the result"
    ratio = t_checked / t_native
    print(
        f"\noverhead {name}: checked={t_checked * 1000:.1f}ms "
        f"native={t_native * 1000:.1f}ms ratio={ratio:.2f}x "
        f"(bound {RATIO_BOUND:.0f}x)"
    )
    assert ratio < RATIO_BOUND, f"{name}: {ratio:.2f}x exceeds {RATIO_BOUND}x"
