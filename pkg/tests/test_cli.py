import os
import subprocess
import sys

import pytest

from epiprover.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main

DATA = os.path.join(os.path.dirname(__file__), "data")
GOLDEN_CERT = os.path.join(DATA, "d31_published.cert")


def test_verify_shipped_certificate(capsys):
    assert main(["verify", GOLDEN_CERT]) == EXIT_OK
    assert capsys.readouterr().out.startswith("PASS")


def test_verify_corrupted_certificate(tmp_path, capsys):
    text = open(GOLDEN_CERT, encoding="utf-8").read()
    bad = tmp_path / "bad.cert"
    bad.write_text(text.replace("sos 1/2036162", "sos 1/2036161"), encoding="utf-8")
    assert main(["verify", str(bad)]) == EXIT_FAIL
    out = capsys.readouterr().out
    assert "FAIL" in out and "residual" in out


def test_verify_unparsable_certificate(tmp_path, capsys):
    bad = tmp_path / "bad.cert"
    bad.write_text("certificate v1\nkind Dmn\nm three\n", encoding="utf-8")
    assert main(["verify", str(bad)]) == EXIT_FAIL
    assert "parse error at line" in capsys.readouterr().out


def test_verify_missing_file(tmp_path):
    assert main(["verify", str(tmp_path / "nope.cert")]) == EXIT_USAGE


def test_prove_writes_verified_certificate(tmp_path, capsys):
    out = tmp_path / "d31.cert"
    assert main(["prove", "--m", "3", "--n", "1", "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "Vars=3" in text and "N2=2" in text and "lambda*=" in text
    assert main(["verify", str(out)]) == EXIT_OK


def test_prove_is_reproducible(tmp_path):
    a, b = tmp_path / "a.cert", tmp_path / "b.cert"
    for p in (a, b):
        assert main(["prove", "--m", "4", "--n", "1", "--seed", "3", "--out", str(p)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_prove_failure_report(capsys):
    assert main(["prove", "--m", "5", "--n", "1"]) == EXIT_FAIL
    out = capsys.readouterr().out
    assert "FAIL at step6" in out
    assert "no_certificate" in out


def test_prove_dumps_sdpa(tmp_path):
    dump = tmp_path / "p.dat-s"
    assert main(["prove", "--m", "3", "--n", "1", "--out", str(tmp_path / "c"), "--dump-sdpa", str(dump)]) == EXIT_OK
    assert "1 = nBLOCK" in dump.read_text(encoding="utf-8")


@pytest.mark.parametrize("m,n,expect", [(3, 2, "Vars=14 N1=143"), (4, 1, "Vars=5 N1=14"), (3, 1, "N2=2")])
def test_stats(m, n, expect, capsys):
    assert main(["stats", "--m", str(m), "--n", str(n)]) == EXIT_OK
    line = capsys.readouterr().out
    assert expect in line
    assert line.startswith(f"Dmn m={m} n={n} ")


def test_stats_two_index(capsys):
    assert main(["stats", "costa", "--general"]) == EXIT_OK
    assert "Vars=6" in capsys.readouterr().out


def test_export_two_index(tmp_path):
    out = tmp_path / "costa.dat-s"
    assert main(["export", "costa", "--general", "--out", str(out)]) == EXIT_OK
    text = out.read_text(encoding="utf-8")
    assert "2 = nBLOCK" in text and "6 6 = bLOCKsTRUCT" in text


def test_oracle_command(capsys):
    assert main(["oracle", "--m", "4", "--n", "1", "--variances", "2"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("value=-3/16")


def test_unsupported_is_usage_error(capsys):
    assert main(["stats", "--m", "6", "--n", "1"]) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_bad_flags_are_usage_errors():
    with pytest.raises(SystemExit) as err:
        main(["prove", "--m", "x"])
    assert err.value.code == 2


def test_module_entry_point_with_thread_cap(tmp_path):
    env = dict(os.environ, EPIPROVER_THREADS="1")
    res = subprocess.run([sys.executable, "-m", "epiprover", "verify", GOLDEN_CERT],
                         capture_output=True, text=True, env=env, cwd=tmp_path)
    assert res.returncode == 0
    assert res.stdout.startswith("PASS")
