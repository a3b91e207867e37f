"""Differential testing: compiled output vs the interpreter, program by
program.  Each directive runs in a fresh store on the interpreter side
and as a fresh process on the compiled side; stateful directives (those
relying on earlier invokes) are skipped by allowlist."""

import pytest

from conftest import has_cc, requires_cc
from diffutil import (
    DIFF_SCRIPTS,
    MODULE_CASES,
    build_rt_obj,
    run_module_diff,
    run_program_diff,
)


@pytest.fixture(scope="module")
def rt_obj(tmp_path_factory):
    if not has_cc():
        pytest.skip("no C compiler")
    return build_rt_obj(tmp_path_factory.mktemp("rtobj"))


@requires_cc
@pytest.mark.parametrize(
    "script_name,skips", DIFF_SCRIPTS, ids=[s for s, _ in DIFF_SCRIPTS]
)
def test_script_differential(script_name, skips, tmp_path, rt_obj):
    assert run_program_diff(script_name, skips, tmp_path, rt_obj) > 0


@requires_cc
@pytest.mark.parametrize(
    "files,export,args,unit_idx", MODULE_CASES, ids=[c[1] for c in MODULE_CASES]
)
def test_module_differential(files, export, args, unit_idx, tmp_path, rt_obj):
    run_module_diff(files, export, args, unit_idx, tmp_path, rt_obj)


def test_corpus_counts_twenty_programs():
    assert len(DIFF_SCRIPTS) + len(MODULE_CASES) >= 20
