"""End-to-end CLI coverage; exit codes are a stable contract."""

import json

from conftest import CORPUS, requires_cc
from mswasm.cli import main


def run_cli(*argv, capsys=None):
    code = main(list(argv))
    if capsys is None:
        return code, "", ""
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestCheck:
    def test_valid(self, capsys):
        code, out, _ = run_cli("check", str(CORPUS / "isolation.msw"), capsys=capsys)
        assert code == 0 and "ok" in out

    def test_invalid_exits_2_with_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.msw"
        bad.write_text(
            """(module (memory 1)
                 (func (param handle) (const 0) (local.get 0) (store i32)))"""
        )
        code, out, _ = run_cli("check", str(bad), "--json", capsys=capsys)
        assert code == 2
        diags = [json.loads(l) for l in out.splitlines()]
        assert any(d["code"] == "handle-in-linear-memory" for d in diags)

    def test_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.msw"
        bad.write_text("(module (func (wat)))")
        code, _, err = run_cli("check", str(bad), capsys=capsys)
        assert code == 2


class TestRun:
    def test_values_exit_0(self, capsys):
        code, out, _ = run_cli(
            "run", str(CORPUS / "cglobal.msw"), "--invoke", "bump",
            capsys=capsys,
        )
        assert code == 0 and "i32 1" in out

    def test_trap_exit_3(self, tmp_path, capsys):
        p = tmp_path / "t.msw"
        p.write_text('(module (func (export "f") (h.null) (segload i32) (drop)))')
        code, out, _ = run_cli("run", str(p), "--invoke", "f", capsys=capsys)
        assert code == 3 and "invalid-handle" in out

    def test_fuel_exit_4(self, tmp_path, capsys):
        p = tmp_path / "t.msw"
        p.write_text('(module (func (export "f") (loop (br 0))))')
        code, out, _ = run_cli(
            "run", str(p), "--invoke", "f", "--fuel", "500", capsys=capsys
        )
        assert code == 4 and "fuel" in out

    def test_link_chain_and_args(self, capsys):
        code, out, _ = run_cli(
            "run", str(CORPUS / "memcpy_main.msw"),
            "--link", str(CORPUS / "memcpy_lib.msw"),
            "--invoke", "copy_test", capsys=capsys,
        )
        assert code == 0 and "i32 77" in out

    def test_isolation_example_with_attacker(self, capsys):
        code, out, _ = run_cli(
            "run", str(CORPUS / "isolation.msw"),
            "--link", str(CORPUS / "attacker_writer.msw"),
            "--invoke", "main", capsys=capsys,
        )
        # linking under the name "attacker_writer" does not satisfy
        # ("att", "g"): expect a clean link error, not a crash
        assert code == 1

    def test_named_link_attacker(self, capsys):
        code, out, _ = run_cli(
            "run", str(CORPUS / "isolation.msw"),
            "--link", f"att={CORPUS / 'attacker_benign.msw'}",
            "--invoke", "main", capsys=capsys,
        )
        assert code == 0 and "i32 1" in out
        code, out, _ = run_cli(
            "run", str(CORPUS / "isolation.msw"),
            "--link", f"att={CORPUS / 'attacker_trapper.msw'}",
            "--invoke", "main", capsys=capsys,
        )
        assert code == 3

    def test_start_trap_exit_3(self, capsys):
        code, _, err = run_cli(
            "run", str(CORPUS / "start_trap.msw"), capsys=capsys
        )
        assert code == 3

    def test_dump_store(self, capsys):
        code, out, _ = run_cli(
            "run", str(CORPUS / "cglobal.msw"), "--invoke", "bump",
            "--dump-store", capsys=capsys,
        )
        assert code == 0 and out.startswith("store\n")

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "cfg"
        cfg.write_text("fuel=400\nhandle_width=16\n")
        p = tmp_path / "t.msw"
        p.write_text('(module (func (export "f") (loop (br 0))))')
        code, _, _ = run_cli(
            "run", str(p), "--invoke", "f", "--config", str(cfg), capsys=capsys
        )
        assert code == 4

    def test_bad_handle_width_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg"
        cfg.write_text("handle_width=8\n")
        code, _, err = run_cli(
            "run", str(CORPUS / "cglobal.msw"), "--config", str(cfg),
            capsys=capsys,
        )
        assert code == 64


class TestScript:
    def test_green_script(self, capsys):
        code, out, _ = run_cli(
            "script", str(CORPUS / "forge.msws"), capsys=capsys
        )
        assert code == 0 and "ok" in out

    def test_failing_assert_exits_1(self, tmp_path, capsys):
        s = tmp_path / "s.msws"
        s.write_text(
            """(module (func (export "f") (result i32) (const 2)))
               (assert_return (invoke "f") (i32 3))"""
        )
        code, _, err = run_cli("script", str(s), capsys=capsys)
        assert code == 1 and "FAIL" in err


class TestReach:
    def test_reports_segset(self, tmp_path, capsys):
        p = tmp_path / "m.msw"
        p.write_text(
            """(module
                 (global (export "root") (mut handle) (h.null))
                 (global (mut handle) (h.null))
                 (func (const 8) (segalloc) (global.set 0)
                       (const 8) (segalloc) (global.set 1))
                 (start 0))"""
        )
        code, out, _ = run_cli(
            "reach", str(p), "--roots", "root", capsys=capsys
        )
        assert code == 0
        payload = json.loads(out)
        assert len(payload["reachable"]) == 1


class TestIsolate:
    def test_builtin_random_attacker(self, capsys):
        code, out, _ = run_cli(
            "isolate", str(CORPUS / "isolation.msw"),
            "--attacker", "builtin:random", "--seed", "3",
            "--fuel", "100000", capsys=capsys,
        )
        payload = json.loads(out)
        assert payload["verdict"] in ("isolated", "trapped")
        assert code in (0, 3)

    def test_file_attacker_paranoid(self, capsys):
        code, out, _ = run_cli(
            "isolate", str(CORPUS / "isolation.msw"),
            "--attacker", str(CORPUS / "attacker_writer.msw"),
            "--paranoid", capsys=capsys,
        )
        payload = json.loads(out)
        assert payload["verdict"] == "isolated"
        assert code == 0


class TestCodegen:
    def test_writes_units(self, tmp_path, capsys):
        code, out, _ = run_cli(
            "codegen", str(CORPUS / "heartbleed_module.msw")
            if (CORPUS / "heartbleed_module.msw").exists()
            else str(CORPUS / "isolation.msw"),
            "-o", str(tmp_path), capsys=capsys,
        )
        assert code == 0
        payload = json.loads(out)
        assert any(n.endswith(".c") for n in payload["written"])
        assert (tmp_path / "isolation.h").exists()

    def test_checkedc_mode(self, tmp_path, capsys):
        code, _, _ = run_cli(
            "codegen", str(CORPUS / "isolation.msw"),
            "-o", str(tmp_path), "--mode", "checkedc", capsys=capsys,
        )
        assert code == 0
        assert "array_ptr" in (tmp_path / "isolation.h").read_text()


class TestDiff:
    @requires_cc
    def test_match(self, capsys):
        code, out, _ = run_cli(
            "diff", str(CORPUS / "cglobal.msw"), "--invoke", "bump",
            capsys=capsys,
        )
        assert code == 0 and "match" in out


class TestFuzz:
    def test_theorem_1_small(self, capsys):
        code, out, _ = run_cli(
            "fuzz", "--theorem", "1", "--cases", "25", "--seed", "11",
            "--json", capsys=capsys,
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["stuck"] == 0

    def test_theorem_3_small(self, capsys):
        code, out, _ = run_cli(
            "fuzz", "--theorem", "3", "--cases", "10", "--seed", "2",
            "--json", capsys=capsys,
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["violated"] == 0 and payload["zero_returns"] == 0

    def test_theorem_4_small(self, capsys):
        code, out, _ = run_cli(
            "fuzz", "--theorem", "4", "--cases", "8", "--json", capsys=capsys
        )
        assert code == 0

    def test_usage_error(self, capsys):
        assert run_cli("fuzz", "--theorem", "9", capsys=capsys)[0] == 64

    def test_jobs_matches_serial(self, capsys):
        _, a, _ = run_cli(
            "fuzz", "--theorem", "1", "--cases", "16", "--seed", "4",
            "--json", capsys=capsys,
        )
        _, b, _ = run_cli(
            "fuzz", "--theorem", "1", "--cases", "16", "--seed", "4",
            "--jobs", "2", "--json", capsys=capsys,
        )
        assert a == b

    def test_determinism(self, capsys):
        _, a, _ = run_cli(
            "fuzz", "--theorem", "1", "--cases", "10", "--seed", "5",
            "--json", capsys=capsys,
        )
        _, b, _ = run_cli(
            "fuzz", "--theorem", "1", "--cases", "10", "--seed", "5",
            "--json", capsys=capsys,
        )
        assert a == b


def test_usage_exit_64(capsys):
    assert run_cli("frobnicate", capsys=capsys)[0] == 64
