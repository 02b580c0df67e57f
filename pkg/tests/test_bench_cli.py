from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracsolve import bench
from fracsolve.bench import (
    bench_records_csv,
    estimate_orders,
    parse_compartments,
    read_series_csv,
    read_solution_csv,
    rmsd_against_data,
    run_bench,
    solution_csv,
    trajectory_error,
)
from fracsolve.cli import main
from fracsolve.core import SolverConfig
from fracsolve.errors import LengthMismatch, NoExactSolution
from fracsolve.models import get_model
from fracsolve.solvers import solve


def test_solution_csv_layout():
    text = solution_csv(np.array([0.0, 0.5]), np.array([[1.0, 1 / 3], [2.0, 0.1]]))
    assert text == (
        "t,x1,x2\n0,1,0.33333333333333331\n0.5,2,0.10000000000000001\n"
    )


@given(
    st.lists(
        st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=3, max_size=30
    )
)
@settings(max_examples=50)
def test_csv_round_trip_is_byte_identical(values):
    x = np.array(values).reshape(-1, 1)
    text = solution_csv(np.arange(len(values), dtype=float), x)
    header, parsed = read_solution_csv(text)
    assert header == ["t", "x1"]
    assert solution_csv(parsed[:, 0], parsed[:, 1:]) == text


def test_trajectory_norms():
    x = np.array([[1.0, 0.0], [0.0, 0.0]])
    ref = np.array([[0.0, 0.0], [3.0, 4.0]])
    assert trajectory_error(x, ref, "l2") == pytest.approx(math.sqrt(26))
    assert trajectory_error(x, ref, "max") == 4.0
    assert trajectory_error(x, ref, "end") == 4.0
    with pytest.raises(ValueError):
        trajectory_error(x, ref, "l1")
    with pytest.raises(LengthMismatch):
        trajectory_error(x, ref[:1])


def test_bench_nonstiff_errors_decrease():
    model = get_model("nonstiff")
    hs = [2.0**-k for k in range(3, 9)]
    records = run_bench(model, ["pc", "nr"], hs, repeats=1, warmup=0, workers=1)
    assert len(records) == 12
    for method in ("PC", "NR"):
        errs = [r.error for r in records if r.method == method]
        assert all(a > b for a, b in zip(errs, errs[1:]))
    assert all(r.wall_time > 0 and r.h > 0 for r in records)


def test_bench_stiff_coarse_pc_is_marked():
    model = get_model("stiff")
    (rec,) = run_bench(model, ["pc"], [2.0**-3], config=SolverConfig(nc=4), repeats=1, warmup=0)
    assert rec.error > 1


def test_bench_records_inf_for_divergence():
    model = get_model("nonstiff")
    (rec,) = run_bench(
        model, ["pc"], [0.5], config=SolverConfig(nc=1), repeats=1, warmup=0
    )
    assert rec.diverged and rec.error == math.inf and rec.wall_time > 0
    assert bench_records_csv([rec]).splitlines()[1].split(",")[4] == "inf"


def test_bench_fine_reference_lv3():
    model = get_model("lv3")
    problem = model.problem(t_span=(0.0, 4.0))
    records = run_bench(
        model, ["nr"], [2.0**-3, 2.0**-6], reference="fine", problem=problem,
        repeats=1, warmup=0,
    )
    assert math.isfinite(records[1].error) and records[1].error < records[0].error


def test_thread_cap_env(monkeypatch):
    monkeypatch.setenv("FRACSOLVE_THREADS", "3")
    assert bench._max_workers() == 3
    monkeypatch.setenv("FRACSOLVE_THREADS", "zero")
    with pytest.raises(ValueError):
        bench._max_workers()


def test_parallel_bench_keeps_input_order():
    model = get_model("stiff")
    hs = [2.0**-3, 2.0**-4, 2.0**-5]
    records = run_bench(model, ["nr", "pc"], hs, repeats=1, warmup=0, workers=3)
    assert [(r.method, r.h) for r in records] == [(m, h) for m in ("NR", "PC") for h in hs]


def test_order_needs_exact_solution_and_three_steps():
    with pytest.raises(NoExactSolution):
        estimate_orders(get_model("sir"), "nr", [0.5, 0.25, 0.125])
    with pytest.raises(ValueError):
        estimate_orders(get_model("nonstiff"), "nr", [0.5, 0.25])


def test_order_estimates_nonstiff_nr():
    est = estimate_orders(get_model("nonstiff"), "nr", [2.0**-k for k in range(5, 9)])
    assert len(est.orders) == 3
    assert 1.7 <= est.mean_order <= 2.3


def test_compartment_expressions():
    labels = ("S", "E", "I", "P", "A", "H", "R", "F")
    assert parse_compartments("x3+x4+x6", labels, 8) == [2, 3, 5]
    assert parse_compartments("I + P + H", labels, 8) == [2, 3, 5]
    with pytest.raises(ValueError):
        parse_compartments("x9", labels, 8)


def test_rmsd_against_self_generated_data():
    model = get_model("covid")
    sol = solve(model.problem(t_span=(0.0, 30.0)), SolverConfig(h=2**-4))
    cols = [2, 3, 5]
    daily = sol.x[::16][:, cols].sum(axis=1)
    assert rmsd_against_data(sol, cols, daily) <= 1e-12
    assert rmsd_against_data(sol, cols, daily[:10] + 1.0) == pytest.approx(1.0)
    with pytest.raises(LengthMismatch):
        rmsd_against_data(sol, cols, np.zeros(40))


def test_series_csv_reader(tmp_path):
    good = tmp_path / "cases.csv"
    good.write_text("day,count\n0,1\n1,2.5\n")
    assert read_series_csv(good).tolist() == [1.0, 2.5]
    bad = tmp_path / "noheader.csv"
    bad.write_text("0,1\n1,2\n")
    with pytest.raises(ValueError):
        read_series_csv(bad)


# ---------------------------------------------------------------- CLI


def test_cli_solve_sir_row_count(capsys):
    assert main(["solve", "--model", "sir", "--method", "pc", "--h", "0.015625"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t,x1,x2,x3"
    assert len(lines) == 6402


def test_cli_solve_harmonic_columns(capsys):
    assert main(["solve", "--model", "harmonic", "--method", "nr"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "t,x1"


def test_cli_unknown_model(capsys):
    assert main(["solve", "--model", "nope"]) == 2
    assert "unknown model" in capsys.readouterr().err


def test_cli_usage_error():
    assert main(["solve"]) == 2
    assert main(["solve", "--model", "sir", "--fft", "maybe"]) == 2


def test_cli_divergence_exit_code(capsys):
    args = ["solve", "--model", "stiff", "--method", "pc", "--nc", "4", "--h", "1",
            "--tspan", "0,400"]
    assert main(args) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "diverged at step" in err[0]


def test_cli_rejects_unknown_parameter(capsys):
    assert main(["solve", "--model", "sir", "--param", "delta=1"]) == 2
    assert "delta" in capsys.readouterr().err


def test_cli_overrides(capsys):
    args = ["solve", "--model", "sir", "--beta", "0.8", "--tspan", "0,1", "--h", "0.25",
            "--param", "gamma=0.1", "--fft", "off"]
    assert main(args) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 6 and lines[-1].startswith("1,")


def test_cli_out_file(tmp_path):
    out = tmp_path / "sol.csv"
    assert main(["solve", "--model", "stiff", "--h", "2^-2", "--out", str(out)]) == 0
    data = out.read_bytes()
    assert b"\r" not in data and data.startswith(b"t,x1\n")


def test_cli_bench_and_order(capsys):
    assert main(["bench", "--model", "stiff", "--method", "pc", "--h", "2^-3,2^-5",
                 "--nc", "4", "--repeats", "1"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "model,method,h,wall_time,error,iterations" and len(out) == 3
    assert main(["order", "--model", "harmonic", "--h", "2^-2,2^-3,2^-4"]) == 0
    assert "mean order" in capsys.readouterr().out
    assert main(["order", "--model", "sir"]) == 2


def test_cli_rmsd(tmp_path, capsys):
    data = tmp_path / "cases.csv"
    data.write_text("day,count\n" + "".join(f"{d},0\n" for d in range(5)))
    assert main(["rmsd", "--model", "covid", "--data", str(data),
                 "--compartments", "I+P+H", "--tspan", "0,10"]) == 0
    assert float(capsys.readouterr().out) > 0
    assert main(["rmsd", "--model", "covid", "--data", str(tmp_path / "missing.csv"),
                 "--compartments", "I"]) == 2
