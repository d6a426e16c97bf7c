import re
import subprocess
import sys

import pytest

from mixtune.analysis import check_bound, roundoff_error
from mixtune.cli import main
from mixtune.numerics import FLOAT_LADDER, rational
from mixtune.parser import parse, parse_file
from mixtune.pipeline import gen_bounds, optimize, round_up_sig

from tests.helpers import BENCHMARKS, RIGID_BODY_1, spec

F32, F64, F128 = FLOAT_LADDER
RIGID = str(BENCHMARKS / "rigidBody1.daisy")


def _write(tmp_path, text, name="in.daisy"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _sidecar(path):
    records = []
    for block in path.read_text().strip().split("\n\n"):
        records.append(dict(line.split("=", 1) for line in block.splitlines()))
    return records


# -- exit codes ----------------------------------------------------------------

def test_rigid_body_run(tmp_path, capsys):
    assert main([RIGID]) == 0
    out = capsys.readouterr().out
    bound = float(re.search(r"final bound: (\S+)", out).group(1))
    assert bound <= 1.75e-13
    assert "operations per precision" in out


def test_parse_error_exits_1(tmp_path, capsys):
    path = _write(tmp_path, "def f(x: Real): Real = { require(0 <= x && x <= 1) x + }")
    assert main([path]) == 1
    assert ":1:56" in capsys.readouterr().err


def test_missing_file_exits_1(tmp_path):
    assert main([str(tmp_path / "nope.daisy")]) == 1


def test_missing_target_exits_1(tmp_path):
    path = _write(tmp_path, "def f(x: Real): Real = { require(0 <= x && x <= 1) x * x }")
    assert main([path]) == 1


def test_unreachable_target_exits_2(tmp_path):
    path = _write(tmp_path, RIGID_BODY_1.replace("1.75e-13", "1e-40"))
    assert main([path]) == 2


def test_division_by_zero_range_exits_3(tmp_path):
    path = _write(tmp_path, "def f(x: Real, y: Real): Real = { require(1 <= x && x <= 2 && -1 <= y && y <= 1) x / y }"
                            " ensuring (res => res +/- 1)")
    assert main([path]) == 3


def test_worst_status_wins(tmp_path):
    good = "def g(x: Real): Real = { require(1 <= x && x <= 2) x * x } ensuring (res => res +/- 1)"
    bad = "def b(x: Real): Real = { require(-1 <= x && x <= 2) sqrt(x) } ensuring (res => res +/- 1)"
    assert main([_write(tmp_path, good + "\n" + bad)]) == 3


# -- uniform mode ----------------------------------------------------------------

def test_uniform_mode_reports_the_uniform_bound(tmp_path, capsys):
    assert main([RIGID, "--uniform", "f64", "--no-rewrite"]) == 0
    out = capsys.readouterr().out
    expected = roundoff_error(spec(RIGID_BODY_1), None, F64).value
    assert f"final bound: {float(expected):.6e}" in out
    assert "(7)" in out


def test_uniform_fixed_mode(tmp_path, capsys):
    assert main([RIGID, "--uniform", "fixed32", "--no-rewrite", "--codegen", "c", "--out-dir", str(tmp_path)]) == 0
    assert "fixed32" in capsys.readouterr().out
    (code,) = tmp_path.glob("*.c")
    assert "int32_t" in code.read_text()


# -- bound generation --------------------------------------------------------------

def test_round_up_sig_examples():
    assert round_up_sig(rational("3.2152e-13")) == rational("3.22e-13")
    assert round_up_sig(rational("1.23")) == rational("1.23")
    assert round_up_sig(rational("999.1")) == 1000
    assert round_up_sig(rational("0.0012301")) == rational("0.00124")


def _sig_digits(q) -> int:
    digits = str(q.numerator * 10**40 // q.denominator).rstrip("0")
    return len(digits)


def test_gen_bounds_variants(rigid_body):
    variants = gen_bounds(rigid_body.with_target(None))
    names = [v.name for v in variants]
    assert len(variants) == 9
    assert names == [f"rigidBody1_{s}" for s in
                     ("F", "F_0_5", "F_0_1", "F_0_01", "D", "D_0_5", "D_0_1", "D_0_01", "Q")]
    by_name = {v.name: v.target_error for v in variants}
    d = roundoff_error(rigid_body, None, F64).value
    assert by_name["rigidBody1_D"] >= d
    assert _sig_digits(by_name["rigidBody1_D"]) <= 3
    assert by_name["rigidBody1_D_0_5"] == by_name["rigidBody1_D"] / 2
    assert by_name["rigidBody1_F_0_01"] == by_name["rigidBody1_F"] / 100
    f_variant = variants[0]
    assert check_bound(f_variant, F32)


def test_gen_bounds_cli_round_trips(tmp_path, capsys):
    path = _write(tmp_path, "def f(x: Real, y: Real): Real = { require(1 <= x && x <= 2 && 1 <= y && y <= 2) x / y }")
    assert main([path, "--gen-bounds"]) == 0
    functions = parse(capsys.readouterr().out)
    assert len(functions) == 9
    assert all(f.target_error is not None for f in functions)
    assert main([path, "--gen-bounds", "--out-dir", str(tmp_path / "out")]) == 0
    assert len(parse_file(str(tmp_path / "out" / "in_bounds.daisy"))) == 9


# -- reports ------------------------------------------------------------------------

def test_report_and_sidecar(tmp_path):
    report = tmp_path / "report.txt"
    assert main([str(BENCHMARKS / "rigidBody2.daisy"), "--report", str(report)]) == 0
    assert report.exists()
    (record,) = _sidecar(tmp_path / "report.kv")
    assert record["function"] == "rigidBody2"
    assert record["status"] == "ok"
    assert rational(record["final_bound_exact"]) <= rational(record["target"])
    triple = [int(n) for n in record["ops_per_precision"].split(",")]
    assert sum(triple) == int(record["final_ops"])


@pytest.mark.parametrize("name", ["rigidBody1", "doppler", "sqroot", "turbine1"])
def test_triples_sum_to_final_ops(name):
    (f,) = parse_file(str(BENCHMARKS / f"{name}.daisy"))
    for target in (f.target_error, round_up_sig(roundoff_error(f, None, F32).value) / 100):
        res = optimize(f.with_target(target))
        assert res.status == "ok"
        assert sum(res.profile.values()) == res.final_ops
        assert res.final_bound <= target


def test_timings_are_opt_in(tmp_path, capsys):
    assert main([RIGID]) == 0
    assert "wall time" not in capsys.readouterr().out
    assert main([RIGID, "--timings"]) == 0
    assert "wall time" in capsys.readouterr().out


def test_runs_are_byte_identical(tmp_path):
    outputs = []
    for k in range(2):
        out = tmp_path / str(k)
        assert main([RIGID, "--codegen", "both", "--out-dir", str(out), "--report", str(out / "r.txt")]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert set(outputs[0]) == {"r.txt", "r.kv", "rigidBody1_f32-f64-f128_tuned.c", "rigidBody1_f32-f64-f128_tuned.scala"}
    # generated paths differ by directory only
    norm = [{k: v.replace(str(tmp_path / str(i)).encode(), b"OUT") for k, v in o.items()}
            for i, o in enumerate(outputs)]
    assert norm[0] == norm[1]


def test_seed_flag_and_environment(tmp_path, monkeypatch):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert main([RIGID, "--rewrite-seed", "7", "--report", str(a)]) == 0
    monkeypatch.setenv("PRECISION_TUNER_SEED", "7")
    assert main([RIGID, "--report", str(b)]) == 0
    assert a.read_text() == b.read_text()


def test_ladder_and_cost_flags(tmp_path, capsys):
    assert main([RIGID, "--ladder", "f64,f128", "--cost", "opcount"]) == 0
    out = capsys.readouterr().out
    assert "cost (opcount)" in out
    assert "('f64', 'f128')" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mixtune", RIGID, "--uniform", "f128"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "final bound" in proc.stdout
