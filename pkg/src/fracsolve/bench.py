"""Benchmarks, convergence-order estimates and CSV helpers.

Errors against a reference trajectory are measured on shared grid points.
``"l2"`` is the Euclidean norm of the whole difference array (the benchmark
default), ``"max"`` the largest absolute difference and ``"end"`` the
difference at the final grid point.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from fracsolve.convolution import ConvPlan
from fracsolve.core import FdeProblem, Solution, SolverConfig
from fracsolve.errors import (
    Diverged,
    LengthMismatch,
    NoExactSolution,
    SingularMatrix,
)
from fracsolve.models import ModelSpec, rmsd
from fracsolve.solvers import solve

__all__ = [
    "BenchRecord",
    "FINE_H",
    "FINE_TOL",
    "OrderEstimate",
    "bench_records_csv",
    "fine_reference",
    "parse_compartments",
    "estimate_orders",
    "format_float",
    "read_series_csv",
    "read_solution_csv",
    "reference_trajectory",
    "rmsd_against_data",
    "run_bench",
    "solution_csv",
    "trajectory_error",
]

log = logging.getLogger(__name__)

FINE_H = 2.0**-10
FINE_TOL = 1e-12
NORMS = ("l2", "max", "end")


def format_float(v: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return f"{v:.17g}"


# --------------------------------------------------------------------------
# CSV


def solution_csv(t: np.ndarray, x: np.ndarray) -> str:
    """Trajectory as CSV with header ``t,x1,...,xM`` and LF line endings."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    lines = [",".join(["t"] + [f"x{i + 1}" for i in range(x.shape[1])])]
    for ti, row in zip(np.asarray(t, dtype=float).tolist(), x.tolist()):
        lines.append(",".join(format_float(v) for v in [ti, *row]))
    return "\n".join(lines) + "\n"


def read_solution_csv(text: str) -> tuple[list[str], np.ndarray]:
    """Parse :func:`solution_csv` output into ``(header, values)``."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty CSV")
    header = rows[0]
    values = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    return header, values.reshape(-1, len(header))


def read_series_csv(path: str | os.PathLike) -> np.ndarray:
    """Read the value column of a two-column CSV (index, count) with a header row."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header row and at least one data row")
    header, body = rows[0], rows[1:]
    if len(header) != 2:
        raise ValueError(f"{path}: expected two columns, header has {len(header)}")
    try:
        float(header[1])
    except ValueError:
        pass
    else:
        raise ValueError(f"{path}: the first row must be a header")
    out = []
    for lineno, row in enumerate(body, start=2):
        if len(row) != 2:
            raise ValueError(f"{path}:{lineno}: expected two fields")
        out.append(float(row[1]))
    return np.array(out)


# --------------------------------------------------------------------------
# errors and references


def trajectory_error(x: np.ndarray, ref: np.ndarray, norm: str = "l2") -> float:
    """Distance between two trajectories sampled on the same grid."""
    x = np.asarray(x, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if x.shape != ref.shape:
        raise LengthMismatch(f"trajectory shapes differ: {x.shape} vs {ref.shape}")
    diff = x - ref
    if norm == "l2":
        return float(np.sqrt(np.sum(diff * diff)))
    if norm == "max":
        return float(np.abs(diff).max())
    if norm == "end":
        return float(np.abs(diff[-1]).max())
    raise ValueError(f"unknown norm {norm!r}; expected one of {NORMS}")


def _stride(h: float, h_fine: float) -> int:
    ratio = h / h_fine
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9 * ratio:
        raise ValueError(f"h={h} is not a multiple of the reference step {h_fine}")
    return k


def reference_trajectory(
    model: ModelSpec,
    problem: FdeProblem,
    t: np.ndarray,
    kind: str = "exact",
    fine: Optional[Solution] = None,
    plan: Optional[ConvPlan] = None,
) -> np.ndarray:
    """Reference values at the times ``t`` (a grid of step ``t[1] - t[0]``).

    ``kind="exact"`` uses the model's exact solution. ``kind="fine"``
    subsamples a solve at step :data:`FINE_H` with tolerance
    :data:`FINE_TOL`; pass ``fine`` to reuse one.
    """
    if kind == "exact":
        return np.asarray(model.exact_solution(t, problem), dtype=float)
    if kind != "fine":
        raise ValueError(f"unknown reference {kind!r}; expected 'exact' or 'fine'")
    if fine is None:
        fine = fine_reference(problem, plan)
    h = float(t[1] - t[0]) if len(t) > 1 else FINE_H
    k = _stride(h, FINE_H)
    sub = fine.x[::k]
    if len(sub) < len(t):
        raise LengthMismatch("reference grid is shorter than the trajectory")
    return sub[: len(t)]


def fine_reference(problem: FdeProblem, plan: Optional[ConvPlan] = None) -> Solution:
    config = SolverConfig(h=FINE_H, nc=50, tol=FINE_TOL, itmax=100)
    return solve(problem, config, plan)


# --------------------------------------------------------------------------
# benchmark


@dataclass(frozen=True)
class BenchRecord:
    """One timed run. ``error`` is ``inf`` for a diverged run."""

    model: str
    method: str
    h: float
    wall_time: float
    error: float
    iterations: int

    @property
    def diverged(self) -> bool:
        return math.isinf(self.error)

    def as_row(self) -> list[str]:
        return [
            self.model,
            self.method,
            format_float(self.h),
            format_float(self.wall_time),
            "inf" if self.diverged else format_float(self.error),
            str(self.iterations),
        ]


BENCH_HEADER = ("model", "method", "h", "wall_time", "error", "iterations")


def bench_records_csv(records: Iterable[BenchRecord]) -> str:
    lines = [",".join(BENCH_HEADER)]
    lines += [",".join(r.as_row()) for r in records]
    return "\n".join(lines) + "\n"


def _max_workers() -> int:
    env = os.environ.get("FRACSOLVE_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"FRACSOLVE_THREADS must be an integer, got {env!r}") from None
        if value < 1:
            raise ValueError("FRACSOLVE_THREADS must be at least 1")
        return value
    return os.cpu_count() or 1


def _timed_solve(problem, config, plan, method, repeats, warmup):
    times = []
    sol = None
    for i in range(warmup + repeats):
        started = time.perf_counter()
        sol = solve(problem, config, plan, method=method)
        elapsed = time.perf_counter() - started
        if i >= warmup:
            times.append(elapsed)
    return sol, statistics.median(times)


def run_bench(
    model: ModelSpec,
    methods: Sequence[str],
    hs: Sequence[float],
    reference: str = "exact",
    config: Optional[SolverConfig] = None,
    problem: Optional[FdeProblem] = None,
    plan: Optional[ConvPlan] = None,
    repeats: int = 5,
    warmup: int = 1,
    workers: Optional[int] = None,
) -> list[BenchRecord]:
    """Time every ``(method, h)`` cell and measure its error against a reference.

    Timing is the median of ``repeats`` runs after ``warmup`` untimed runs.
    Cells run on up to ``workers`` threads (default ``FRACSOLVE_THREADS`` or
    the number of logical cores); records come back in input order.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    config = config or model.default_config
    problem = problem or model.problem()
    fine = fine_reference(problem, plan) if reference == "fine" else None
    cells = [(m.lower(), float(h)) for m in methods for h in hs]

    def run(cell):
        method, h = cell
        cfg = SolverConfig(h=h, nc=config.nc, tol=config.tol, itmax=config.itmax)
        started = time.perf_counter()
        try:
            sol, wall = _timed_solve(problem, cfg, plan, method, repeats, warmup)
        except (Diverged, SingularMatrix) as exc:
            wall = max(time.perf_counter() - started, 1e-9)
            log.info("%s %s h=%g diverged: %s", model.name, method, h, exc)
            return BenchRecord(model.name, method.upper(), h, wall, math.inf, 0)
        ref = reference_trajectory(model, problem, sol.t, reference, fine, plan)
        err = trajectory_error(sol.x, ref, "l2")
        if not math.isfinite(err):
            err = math.inf
        return BenchRecord(
            model.name, method.upper(), h, wall, err, sol.diagnostics.iterations
        )

    n_workers = min(workers or _max_workers(), len(cells)) or 1
    if n_workers == 1:
        return [run(c) for c in cells]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(run, cells))


# --------------------------------------------------------------------------
# convergence order


@dataclass(frozen=True)
class OrderEstimate:
    """Errors per step size and the observed orders between neighbours."""

    hs: tuple[float, ...]
    errors: tuple[float, ...]
    orders: tuple[float, ...]

    @property
    def mean_order(self) -> float:
        return float(np.mean(self.orders))


def estimate_orders(
    model: ModelSpec,
    method: str,
    hs: Sequence[float],
    config: Optional[SolverConfig] = None,
    problem: Optional[FdeProblem] = None,
    norm: str = "max",
    plan: Optional[ConvPlan] = None,
) -> OrderEstimate:
    """Observed orders ``log2(err(2h) / err(h))`` against the exact solution.

    ``hs`` must hold at least three step sizes, each half the previous one.
    The error is measured in ``norm`` (see the module docstring).
    """
    if model.exact is None:
        raise NoExactSolution(f"model {model.name!r} has no exact solution")
    hs = [float(h) for h in hs]
    if len(hs) < 3:
        raise ValueError("need at least three step sizes")
    hs.sort(reverse=True)
    for coarse, fine_h in zip(hs, hs[1:]):
        if not math.isclose(coarse, 2.0 * fine_h, rel_tol=1e-12):
            raise ValueError("step sizes must halve from one to the next")
    config = config or model.default_config
    problem = problem or model.problem()
    errors = []
    for h in hs:
        cfg = SolverConfig(h=h, nc=config.nc, tol=config.tol, itmax=config.itmax)
        sol = solve(problem, cfg, plan, method=method)
        ref = reference_trajectory(model, problem, sol.t, "exact")
        errors.append(trajectory_error(sol.x, ref, norm))
    orders = tuple(math.log2(a / b) for a, b in zip(errors, errors[1:]))
    return OrderEstimate(tuple(hs), tuple(errors), orders)


# --------------------------------------------------------------------------
# RMSD against data


def rmsd_against_data(
    sol: Solution, columns: Sequence[int], data: np.ndarray
) -> float:
    """RMSD between daily samples of ``sum(x[:, columns])`` and ``data``.

    Row ``i`` of ``data`` is compared with the model at ``t0 + i`` days; the
    step must divide one day.
    """
    h = float(sol.t[1] - sol.t[0])
    per_day = _stride(1.0, h)
    series = sol.x[::per_day][:, list(columns)].sum(axis=1)
    data = np.asarray(data, dtype=float)
    if len(data) > len(series):
        raise LengthMismatch(
            f"{len(data)} data rows but the solution covers {len(series)} days"
        )
    return rmsd(data, series[: len(data)])


def parse_compartments(expr: str, labels: Sequence[str], dim: int) -> list[int]:
    """Column indices of an expression like ``x3+x4+x6`` or ``I+P+H``."""
    out = []
    for term in expr.replace(" ", "").split("+"):
        if not term:
            raise ValueError(f"empty term in {expr!r}")
        if term in labels:
            out.append(list(labels).index(term))
            continue
        if term[0] in "xX" and term[1:].isdigit():
            idx = int(term[1:]) - 1
            if 0 <= idx < dim:
                out.append(idx)
                continue
        raise ValueError(f"unknown compartment {term!r}")
    return out
