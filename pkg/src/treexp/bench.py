"""Timing harness: O(N^3) entropy vs the O(N^4) baseline, and the GE
gradient through the factored second-order route vs the pairwise-total route."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .instance import generate
from .quantities import ge_objective, shannon_entropy, shannon_entropy_baseline_n4

DEFAULT_SIZES = (8, 16, 32, 64, 128)
MIN_REPS = 5
ALGORITHMS = ("entropy_first", "entropy_baseline_n4", "ge_grad_second", "ge_grad_hes")
CSV_HEADER = ("n", "algo", "ms", "reps")


@dataclass(frozen=True)
class BenchRow:
    n: int
    algo: str
    ms: float
    reps: int


@dataclass
class BenchResult:
    seed: int
    rows: list[BenchRow] = field(default_factory=list)
    values: dict[tuple[int, str], float] = field(default_factory=dict)

    def ms(self, n: int, algo: str) -> float:
        for row in self.rows:
            if row.n == n and row.algo == algo:
                return row.ms
        raise KeyError((n, algo))

    def speedup(self, n: int, slow: str, fast: str) -> float:
        return self.ms(n, slow) / self.ms(n, fast)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow((row.n, row.algo, f"{row.ms:.6f}", row.reps))
        return buf.getvalue()


def _time(fn: Callable[[], float], reps: int) -> tuple[float, float]:
    """One warm-up call, then the mean over ``reps`` timed calls (ms)."""
    value = fn()
    total = 0.0
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        total += time.perf_counter() - t0
    return 1000.0 * total / reps, value


def _algorithms(inst) -> dict[str, Callable[[], float]]:
    g = inst.graph()
    spec = inst.ge_spec()
    return {
        "entropy_first": lambda: shannon_entropy(g, grad=False).value,
        "entropy_baseline_n4": lambda: shannon_entropy_baseline_n4(g),
        "ge_grad_second": lambda: ge_objective(g, spec, method="second").value,
        "ge_grad_hes": lambda: ge_objective(g, spec, method="hes").value,
    }


def run_bench(sizes: Sequence[int] = DEFAULT_SIZES, reps: int = MIN_REPS, seed: int = 0,
              progress: Callable[[BenchRow], None] | None = None) -> BenchResult:
    """Time every algorithm on ``generate(seed, n)`` for each size."""
    sizes = [int(n) for n in sizes]
    if not sizes or any(n < 1 for n in sizes):
        raise ValueError("sizes must be positive integers")
    if sizes != sorted(sizes):
        raise ValueError("sizes must be sorted ascending")
    if reps < MIN_REPS:
        raise ValueError(f"reps must be >= {MIN_REPS}")
    result = BenchResult(seed)
    for n in sizes:
        for algo, fn in _algorithms(generate(seed, n)).items():
            ms, value = _time(fn, reps)
            row = BenchRow(n, algo, ms, reps)
            result.rows.append(row)
            result.values[(n, algo)] = value
            if progress is not None:
                progress(row)
    return result
