"""Randomised self-check: every fast route against the enumeration oracle
and every analytic gradient against central finite differences."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import oracle
from .expectations import (
    Factored,
    edge_totals,
    first_total,
    hat_tables,
    hat_tables_loop,
    pairwise_totals,
    second_total,
    second_total_hes,
    second_total_vjp,
)
from .graph import EdgeFunction, RootConstraint, WeightedGraph, random_graph, random_tree
from .laplacian import partition_function
from .quantities import (
    GESpec,
    expected_attachment,
    ge_objective,
    kl_divergence,
    lp_norm,
    partition,
    renyi_entropy,
    shannon_entropy,
)

MAX_VERIFY_N = 6
RTOL_TOTALS = 1e-9
RTOL_SECOND = 1e-8
FD_RTOL, FD_ATOL = 1e-4, 1e-8


class CheckFailed(AssertionError):
    pass


def rel_close(actual, expected, rtol: float, scale: float | None = None) -> bool:
    """Entrywise |a - e| <= rtol * max(|e|, 1e-3 * scale).

    ``scale`` is the natural magnitude of the table (Z for totals); the floor
    keeps entries that are exactly zero from demanding a relative match on
    round-off.
    """
    a = np.asarray(actual, dtype=float)
    e = np.asarray(expected, dtype=float)
    if scale is None:
        scale = float(np.max(np.abs(e), initial=0.0))
    bound = rtol * np.maximum(np.abs(e), 1e-3 * scale)
    return bool(np.all(np.abs(a - e) <= bound))


def _require(ok: bool, msg: str) -> None:
    if not ok:
        raise CheckFailed(msg)


def random_edge_function(rng: np.random.Generator, n: int, dim: int, density: int | None) -> EdgeFunction:
    """Dense (density=None) or at most ``density``-sparse random rows."""
    e = n * n
    if density is None:
        return EdgeFunction(n, rng.normal(size=(e, dim)))
    m = np.zeros((e, dim))
    for row in range(e):
        k = int(rng.integers(0, density + 1))
        m[row, rng.choice(dim, size=min(k, dim), replace=False)] = rng.normal(size=min(k, dim))
    return EdgeFunction(n, m)


@dataclass
class Case:
    seed: int
    g: WeightedGraph
    q: WeightedGraph
    gold: object
    spec: GESpec
    r: EdgeFunction
    s: EdgeFunction


def make_case(seed: int, max_n: int) -> Case:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_n + 1))
    constraint = RootConstraint.SINGLE if rng.random() < 0.5 else RootConstraint.MULTI
    g = random_graph(rng, n, constraint)
    q = random_graph(rng, n, constraint)
    gold = random_tree(rng, n, constraint)
    features = random_edge_function(rng, n, 6, 2)
    spec = GESpec(features, rng.uniform(0, 1, 6))
    dense = rng.random() < 0.5
    r = random_edge_function(rng, n, 3, None if dense else 2)
    s = random_edge_function(rng, n, 2, None if dense else 1)
    return Case(seed, g, q, gold, spec, r, s)


def check_z(c: Case):
    _require(rel_close(partition_function(c.g), oracle.brute_partition(c.g), 1e-10), "Z differs from enumeration")


def check_edge_totals(c: Case):
    et = edge_totals(c.g)
    _require(rel_close(et.totals, oracle.brute_edge_totals(c.g), RTOL_TOTALS, et.z), "edge totals differ")


def check_pairwise(c: Case):
    pt = pairwise_totals(c.g)
    _require(rel_close(pt.matrix, oracle.brute_pairwise_totals(c.g), RTOL_TOTALS, pt.z), "pairwise totals differ")
    _require(np.all(np.diag(pt.matrix) == 0.0), "pairwise total of an edge with itself is not 0")


def check_hessian_symmetry(c: Case):
    m = pairwise_totals(c.g).matrix
    _require(np.array_equal(m, m.T), "pairwise totals are not symmetric")


def check_first_total(c: Case):
    _require(rel_close(first_total(c.g, c.r), oracle.brute_first_total(c.g, c.r), RTOL_TOTALS),
             "first-order total differs")


def check_second_agreement(c: Case):
    brute = oracle.brute_second_total(c.g, c.r, c.s)
    for name, fn in (("second", second_total), ("hes", second_total_hes), ("vjp", second_total_vjp)):
        _require(rel_close(fn(c.g, c.r, c.s).t_bar, brute, RTOL_SECOND), f"{name} differs from enumeration")


def check_hat_accumulation(c: Case):
    fac = Factored(c.g)
    r_hat, s_hat = hat_tables(fac, c.r, c.s)
    r_loop, s_loop = hat_tables_loop(fac, c.r, c.s)
    n = c.g.n
    _require(np.allclose(r_hat.toarray(), r_loop.reshape(n * n, -1), rtol=1e-12, atol=1e-12)
             and np.allclose(s_hat.toarray(), s_loop.reshape(n * n, -1), rtol=1e-12, atol=1e-12),
             "vectorised r_hat/s_hat differ from the loop")


def _fd_check(name: str, analytic: np.ndarray, fn: Callable[[WeightedGraph], float], g: WeightedGraph):
    numeric = oracle.finite_difference_gradient(fn, g)
    bad = oracle.gradient_mismatches(analytic, numeric, FD_RTOL, FD_ATOL)
    _require(not bad, f"{name} gradient mismatch at {bad[:3]}")


def check_grad_z(c: Case):
    _fd_check("Z", partition(c.g, grad=True).gradient, partition_function, c.g)


def check_grad_entropy(c: Case):
    _fd_check("entropy", shannon_entropy(c.g).gradient, lambda x: shannon_entropy(x, grad=False).value, c.g)


def check_grad_kl(c: Case):
    _fd_check("KL", kl_divergence(c.g, c.q).gradient, lambda x: kl_divergence(x, c.q, grad=False).value, c.g)


def check_grad_risk(c: Case):
    _fd_check("risk", expected_attachment(c.g, c.gold).gradient,
              lambda x: expected_attachment(x, c.gold, grad=False).value, c.g)


def check_grad_ge(c: Case):
    _fd_check("GE", ge_objective(c.g, c.spec).gradient, lambda x: ge_objective(x, c.spec, grad=False).value, c.g)


def check_values(c: Case):
    g, q = c.g, c.q
    pairs = [
        ("entropy", shannon_entropy(g, grad=False).value, oracle.brute_entropy(g)),
        ("kl", kl_divergence(g, q, grad=False).value, oracle.brute_kl(g, q)),
        ("risk", expected_attachment(g, c.gold, grad=False).value, oracle.brute_attachment(g, c.gold)),
        ("ge", ge_objective(g, c.spec, grad=False).value, oracle.brute_ge(g, c.spec.features, c.spec.target)),
    ]
    pairs += [(f"renyi{a}", renyi_entropy(g, a), oracle.brute_renyi(g, a)) for a in (0.0, 0.5, 2.0)]
    pairs += [(f"lp{k}", lp_norm(g, k), oracle.brute_lp_norm(g, k)) for k in (1.0, 2.0, 3.0)]
    for name, got, want in pairs:
        # single-tree instances have H = 0 exactly; 1e-12 absolute floor
        _require(abs(got - want) <= RTOL_TOTALS * abs(want) + 1e-12, f"{name}: {got!r} != {want!r}")
    _require(kl_divergence(g, q, grad=False).value >= -1e-12, "KL is negative")
    _require(abs(kl_divergence(g, g, grad=False).value) <= 1e-10, "KL(p||p) != 0")


CHECKS: dict[str, Callable[[Case], None]] = {
    "z_vs_brute": check_z,
    "edge_totals_vs_brute": check_edge_totals,
    "pairwise_vs_brute": check_pairwise,
    "hessian_symmetry": check_hessian_symmetry,
    "first_total_vs_brute": check_first_total,
    "second_order_agreement": check_second_agreement,
    "hat_accumulation": check_hat_accumulation,
    "grad_z_fd": check_grad_z,
    "grad_entropy_fd": check_grad_entropy,
    "grad_kl_fd": check_grad_kl,
    "grad_risk_fd": check_grad_risk,
    "grad_ge_fd": check_grad_ge,
    "values_vs_brute": check_values,
}


@dataclass
class VerifyReport:
    passed: int = 0
    failures: list[tuple[int, str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def run_verify(max_n: int, trials: int, seed: int) -> VerifyReport:
    """Run every check on ``trials`` random instances with N <= max_n.

    Instance seeds are drawn from a generator seeded with ``seed`` and are
    reported with each failure so any instance can be replayed.
    """
    if not 1 <= max_n <= MAX_VERIFY_N:
        raise ValueError(f"max_n must be in 1..{MAX_VERIFY_N}")
    seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, size=trials)
    report = VerifyReport()
    for inst_seed in seeds.tolist():
        case = make_case(inst_seed, max_n)
        for name, check in CHECKS.items():
            try:
                check(case)
            except Exception as exc:  # any crash is a failed property
                report.failures.append((inst_seed, name, f"{type(exc).__name__}: {exc}"))
            else:
                report.passed += 1
    return report
