"""Command-line interface."""

import json
import shutil
import subprocess
import sys
import time

import pytest

from pnpdr.cli import main

from .conftest import CVC5, FIXTURES


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestCheck:
    def test_parity_saturation(self, capsys, tmp_path):
        cert = tmp_path / "parity.cert"
        code, out, _ = run(
            capsys,
            "check",
            "--net",
            str(FIXTURES / "parity.net"),
            "--property",
            "p >= 1",
            "--strategy",
            "saturation",
            "--certificate-out",
            str(cert),
        )
        assert code == 0
        assert "verdict: INVARIANT" in out.splitlines()
        assert "[PDR] Certificate of invariance" in out
        assert cert.read_text().startswith("[PDR] Certificate of invariance")
        script = cert.with_suffix(".smt2").read_text()
        answers = subprocess.run(["z3", "-in"], input=script, capture_output=True, text=True).stdout.split()
        assert answers == ["initial", "unsat", "inductive", "unsat", "entails", "unsat"]

    def test_parity_reachable(self, capsys, tmp_path):
        trace = tmp_path / "trace.txt"
        code, out, _ = run(
            capsys, "check", "--net", str(FIXTURES / "parity2.net"), "--property", "p >= 1", "--trace-out", str(trace)
        )
        assert code == 0
        assert "verdict: REACHABLE" in out
        assert "trace: t_dec" in trace.read_text()

    def test_property_file(self, capsys):
        code, out, _ = run(capsys, "check", "--property-file", str(FIXTURES / "mutex_broken.prop"))
        assert code == 0
        assert "verdict: REACHABLE" in out

    def test_unknown_exit_code(self, capsys):
        code, out, _ = run(
            capsys, "check", "--net", str(FIXTURES / "parity.net"), "--property", "p >= 1",
            "--strategy", "hurdle", "--max-witnesses", "2",
        )
        assert code == 2
        assert "verdict: UNKNOWN" in out
        assert "reason: witness cap reached" in out

    def test_validate_oars_flag(self, capsys):
        code, out, _ = run(
            capsys, "check", "--property-file", str(FIXTURES / "mutex_exclusion.prop"), "--validate-oars"
        )
        assert code == 0

    def test_no_arguments(self, capsys):
        code, _, err = run(capsys, "check")
        assert code == 1
        assert "usage" in err

    def test_no_command(self, capsys):
        code, _, err = run(capsys)
        assert code == 1
        assert "usage" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "check", "--net", str(tmp_path / "none.net"), "--property", "p >= 1")
        assert code == 1
        assert "error" in err

    def test_bad_property(self, capsys):
        code, _, err = run(capsys, "check", "--net", str(FIXTURES / "parity.net"), "--property", "q >= 1")
        assert code == 1
        assert "unknown place" in err

    def test_bad_solver(self, capsys):
        code, _, err = run(
            capsys, "check", "--net", str(FIXTURES / "parity.net"), "--property", "p >= 1",
            "--solver-cmd", "no-such-solver-binary",
        )
        assert code == 1
        assert "cannot start solver" in err

    def test_state_strategy_on_non_monotonic(self, capsys):
        code, _, err = run(
            capsys, "check", "--net", str(FIXTURES / "parity.net"), "--property", "p >= 1", "--strategy", "state"
        )
        assert code == 1

    def test_second_solver(self, capsys):
        pytest.importorskip("cvc5")
        code, out, _ = run(
            capsys, "check", "--net", str(FIXTURES / "parity.net"), "--property", "p >= 1",
            "--strategy", "saturation", "--solver-cmd", CVC5,
        )
        assert code == 0
        assert "verdict: INVARIANT" in out


class TestCertify:
    def certify(self, capsys, cert_text, tmp_path, prop="p >= 1"):
        cert = tmp_path / "c.cert"
        cert.write_text(cert_text)
        return run(
            capsys, "certify", "--net", str(FIXTURES / "parity.net"), "--property", prop, "--certificate", str(cert)
        )

    def test_parity_certificate(self, capsys, tmp_path):
        text = "[PDR] Certificate of invariance\n# (p >= 1)\n# (forall k . (p < 2*k + 2 or p >= 2*k + 3))\n"
        code, out, _ = self.certify(capsys, text, tmp_path)
        assert code == 0
        assert "certificate: VALID" in out

    def test_true_is_rejected(self, capsys, tmp_path):
        code, out, _ = self.certify(capsys, "# true\n", tmp_path)
        assert code != 0
        assert "entails: FAILED" in out

    def test_corrupted(self, capsys, tmp_path):
        code, _, _ = self.certify(capsys, "# (p >= \n", tmp_path)
        assert code == 1


class TestBench:
    def test_fixture_suite(self, capsys, tmp_path):
        records = tmp_path / "out.jsonl"
        code, out, _ = run(capsys, "bench", str(FIXTURES), "--timeout", "20", "--jsonl", str(records))
        assert code == 0
        rows = [json.loads(line) for line in records.read_text().splitlines()]
        assert len(rows) == len(list(FIXTURES.glob("*.prop")))
        for row in rows:
            assert row["results"]["auto"]["verdict"] == row["expect"]
        assert "0 mismatches" in out

    def test_empty_directory(self, capsys, tmp_path):
        code, out, _ = run(capsys, "bench", str(tmp_path))
        assert code == 0
        assert "0 problems" in out

    def test_timeout_honored(self, capsys, tmp_path):
        shutil.copy(FIXTURES / "parity.net", tmp_path)
        shutil.copy(FIXTURES / "parity_even.prop", tmp_path)
        start = time.monotonic()
        code, out, _ = run(capsys, "bench", str(tmp_path), "--strategy", "hurdle", "--timeout", "2")
        elapsed = time.monotonic() - start
        assert "UNKNOWN" in out
        assert abs(elapsed - 2) <= 1

    def test_jsonl_stdout(self, capsys, tmp_path):
        shutil.copy(FIXTURES / "parity2.net", tmp_path)
        shutil.copy(FIXTURES / "parity_odd_start.prop", tmp_path)
        code, out, _ = run(capsys, "bench", str(tmp_path), "--strategy", "auto", "--strategy", "state", "--jsonl", "-")
        row = json.loads(out)
        assert row["results"]["auto"]["verdict"] == "REACHABLE"
        assert row["results"]["state"]["verdict"] == "N/A"


class TestGenerate:
    def test_seeded(self, capsys, tmp_path):
        code, _, _ = run(capsys, "generate", str(tmp_path / "a"), "--seed", "5", "--count", "3")
        assert code == 0
        run(capsys, "generate", str(tmp_path / "b"), "--seed", "5", "--count", "3")
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert len(names) == 6
        for name in names:
            assert (tmp_path / "a" / name).read_text() == (tmp_path / "b" / name).read_text()


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "pnpdr", "--version"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "pnpdr" in out.stdout
