"""Risk, entropy, KL divergence, the GE objective and zeroth-order
quantities (Renyi entropy, l_k norms) of a tree distribution.

Gradients are with respect to the raw edge weights w_ij and returned as
dense (N+1) x (N+1) tables.  They are exact on edges with w_ij > 0; entries
of zero-weight edges (and of structurally absent edges) are 0.  For the
log-parameterisation w = exp(theta) multiply the table by the weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DimensionError, DomainError, SingularError, StructuralError, SupportError
from .expectations import Factored, first_total, second_total, second_total_hes
from .graph import EdgeFunction, Tree, WeightedGraph, edge_table, validate_tree
from .laplacian import laplacian_matrix, log_partition_function
from .linalg import determinant

SUPPORT_RTOL = 1e-12
# outside this range Z is rescaled to 1 before anything is computed
Z_SAFE_RANGE = (1e-150, 1e150)

Method = Literal["second", "hes"]


@dataclass(frozen=True)
class QuantityResult:
    value: float | np.ndarray
    gradient: np.ndarray | None = None


@dataclass(frozen=True)
class GESpec:
    """Features f: edges -> R^F and the target expectations f*."""

    features: EdgeFunction
    target: np.ndarray

    def __post_init__(self):
        target = np.asarray(self.target, dtype=float).ravel()
        if len(target) != self.features.dim:
            raise DimensionError(f"target has {len(target)} entries, features have dim {self.features.dim}")
        object.__setattr__(self, "target", target)


def _normalized(g: WeightedGraph) -> tuple[Factored, float]:
    """Factored data for g / c, with c = 1 unless Z is near the double range.

    Every normalised quantity is unchanged by a global weight scale c, and
    its gradient w.r.t. w is the scaled-graph gradient divided by c.  With
    c = Z^(1/N) the scaled graph has Z = 1.
    """
    lo, hi = Z_SAFE_RANGE
    try:
        fac = Factored(g)
        if lo < fac.z < hi:
            return fac, 1.0
    except SingularError:
        pass
    c = float(np.exp(_log_z(g) / g.n))
    return Factored(g.scaled(1.0 / c)), c


def _gradient_of_total(fac: Factored, r_values: np.ndarray, method: Method = "second") -> np.ndarray:
    """d r_bar / d w_e holding the scalar edge function r fixed (per edge)."""
    r = EdgeFunction(fac.n, r_values[:, None])
    s = EdgeFunction.one_hot_over_weight(fac.g)
    if method == "second":
        t = second_total(fac, r, s).t_bar
    elif method == "hes":
        t = second_total_hes(fac, r, s).t_bar
    else:
        raise ValueError(f"unknown method {method!r}")
    return t.ravel()


def _ratio_gradient(fac: Factored, r_values: np.ndarray, correction=None, method: Method = "second"):
    """Gradient table of r_bar / Z (quotient rule), plus the optional
    first-order term sum_ij w_bar_ij grad r_ij when r depends on w."""
    z = fac.z
    r_bar = float(r_values @ fac.wbar)
    d_total = _gradient_of_total(fac, r_values, method)
    if correction is not None:
        d_total = d_total + correction
    grad = d_total / z - (r_bar / z) * (fac.grad_z / z)
    grad[fac.w <= 0] = 0.0
    return edge_table(fac.n, grad)


def partition(g: WeightedGraph, grad: bool = False) -> QuantityResult:
    fac = Factored(g)
    return QuantityResult(fac.z, edge_table(g.n, fac.grad_z) if grad else None)


def expected_attachment(g: WeightedGraph, gold: Tree, grad: bool = True) -> QuantityResult:
    """Expected unlabeled attachment score against ``gold``, in [0, 1]."""
    validate_tree(gold, g.n, g.root_constraint)
    fac, c = _normalized(g)
    heads, mods = fac.heads, fac.mods
    gold_heads = np.asarray(gold.parent)
    r = np.where(gold_heads[mods - 1] == heads, 1.0 / g.n, 0.0)
    value = float(r @ fac.wbar) / fac.z
    return QuantityResult(value, _ratio_gradient(fac, r) / c if grad else None)


def _entropy_edge_values(fac: Factored) -> np.ndarray:
    pos = fac.w > 0
    out = np.zeros_like(fac.w)
    out[pos] = np.log(fac.z) / fac.n - np.log(fac.w[pos])
    return out


def shannon_entropy(g: WeightedGraph, grad: bool = True) -> QuantityResult:
    """H(p) = E[-log p(d)] in O(N^3), gradient included."""
    fac, c = _normalized(g)
    r = _entropy_edge_values(fac)
    value = float(r @ fac.wbar) / fac.z
    if not grad:
        return QuantityResult(value)
    # first-order term: sum_ij w_bar_ij (grad Z / (N Z) - e_ij / w_ij)
    pos = fac.w > 0
    correction = fac.wbar[pos].sum() / (fac.n * fac.z) * fac.grad_z
    correction[pos] -= fac.wbar[pos] / fac.w[pos]
    return QuantityResult(value, _ratio_gradient(fac, r, correction) / c)


def shannon_entropy_baseline_n4(g: WeightedGraph) -> float:
    """Entropy with one determinant per node, O(N^4).

    Z is linear in the incoming weights of each node, so replacing node j's
    incoming weights w_ij by w_ij log w_ij yields sum_d w(d) log w_{head(j) j}.
    """
    w = g.weights
    z = determinant(laplacian_matrix(w, g.root_constraint))
    if not Z_SAFE_RANGE[0] < z < Z_SAFE_RANGE[1]:
        # entropy is scale-invariant; rescale so that Z = 1
        w = w / np.exp(_log_z(g) / g.n)
        z = determinant(laplacian_matrix(w, g.root_constraint))
    wlogw = np.zeros_like(w)
    pos = w > 0
    wlogw[pos] = w[pos] * np.log(w[pos])
    total = 0.0
    for j in range(1, g.n + 1):
        wj = w.copy()
        wj[:, j] = wlogw[:, j]
        total += determinant(laplacian_matrix(wj, g.root_constraint))
    return float(np.log(z) - total / z)


def _check_pair(p: WeightedGraph, q: WeightedGraph) -> None:
    if p.n != q.n:
        raise DimensionError(f"p has N={p.n}, q has N={q.n}")
    if p.root_constraint is not q.root_constraint:
        raise StructuralError("p and q use different root constraints")


def _log_q_terms(fac: Factored, q: WeightedGraph):
    """Support mask of p, log q_ij on it, and log Z_q."""
    support = fac.wbar > SUPPORT_RTOL * fac.z
    q_w = q.weights[fac.heads, fac.mods]
    if np.any(q_w[support] <= 0):
        e = int(np.flatnonzero(support & (q_w <= 0))[0])
        raise SupportError(f"q has zero weight on edge {fac.heads[e]}->{fac.mods[e]} which p supports")
    log_zq = log_partition_function(q)
    if not np.isfinite(log_zq):
        raise SupportError("q has no tree of positive weight")
    log_q = np.zeros_like(q_w)
    log_q[support] = np.log(q_w[support])
    return support, log_q, log_zq


def cross_entropy(p: WeightedGraph, q: WeightedGraph) -> float:
    """-sum_d p(d) log q(d)."""
    _check_pair(p, q)
    fac, _ = _normalized(p)
    support, log_q, log_zq = _log_q_terms(fac, q)
    return float(log_zq - (fac.wbar[support] @ log_q[support]) / fac.z)


def kl_divergence(p: WeightedGraph, q: WeightedGraph, grad: bool = True) -> QuantityResult:
    """KL(p || q) for two graphs given by unnormalised weights.

    Edge values r_ij = log(w_ij / q_ij) + (log Z_q - log Z_p) / N, so the
    total over a tree is log p(d) - log q(d).  Gradient is w.r.t. p.
    """
    _check_pair(p, q)
    fac, c = _normalized(p)
    support, log_q, log_zq = _log_q_terms(fac, q)
    r = np.zeros_like(fac.w)
    r[support] = np.log(fac.w[support]) - log_q[support] + (log_zq - np.log(fac.z)) / fac.n
    value = float(r @ fac.wbar) / fac.z
    if not grad:
        return QuantityResult(value)
    # first-order term: sum_ij w_bar_ij (e_ij / w_ij - grad Z / (N Z))
    correction = -fac.wbar[support].sum() / (fac.n * fac.z) * fac.grad_z
    correction[support] += fac.wbar[support] / fac.w[support]
    return QuantityResult(value, _ratio_gradient(fac, r, correction) / c)


def ge_objective(g: WeightedGraph, spec: GESpec, grad: bool = True,
                 method: Method = "second") -> QuantityResult:
    """GE = 0.5 ||E[f] - f*||^2 and its gradient.

    With v = E[f] - f* held fixed, grad GE = grad(v . f_bar) / Z
    - (v . f_bar) grad Z / Z^2, and v . f_bar is the total of the scalar
    edge function f_ij . v, so one second-order call with R = 1 suffices.
    ``method="hes"`` swaps in the pairwise-total route (same value).
    """
    if spec.features.n != g.n:
        raise DimensionError(f"features are for N={spec.features.n}, graph has N={g.n}")
    fac, c = _normalized(g)
    expected = first_total(fac, spec.features) / fac.z
    residual = expected - spec.target
    value = 0.5 * float(residual @ residual)
    if not grad:
        return QuantityResult(value)
    r = np.asarray(spec.features.matrix @ residual).ravel()
    return QuantityResult(value, _ratio_gradient(fac, r, method=method) / c)


def edge_marginals(g: WeightedGraph) -> np.ndarray:
    """p(i -> j in d) as an (N+1) x (N+1) table, safe for any size of Z."""
    fac, _ = _normalized(g)
    return edge_table(g.n, fac.wbar / fac.z)


def _powered(g: WeightedGraph, power: float) -> WeightedGraph:
    w = g.weights
    out = np.zeros_like(w)
    pos = w > 0
    out[pos] = w[pos] ** power
    return g.with_weights(out)


def _log_z(g: WeightedGraph) -> float:
    log_z = log_partition_function(g)
    if not np.isfinite(log_z):
        raise SingularError("partition function is 0")
    return log_z


def renyi_entropy(g: WeightedGraph, alpha: float) -> float:
    """H_alpha(p) = log(sum_d p(d)^alpha) / (1 - alpha), from two determinants.

    alpha = 0 gives the log of the number of positive-weight trees.
    """
    if not alpha >= 0 or alpha == 1:
        raise DomainError(f"alpha must be >= 0 and != 1 (got {alpha}); use shannon_entropy for alpha = 1")
    log_z = _log_z(g)
    log_q = _log_z(_powered(g, alpha))
    return float((log_q - alpha * log_z) / (1.0 - alpha))


def lp_norm(g: WeightedGraph, k: float) -> float:
    """||p||_k = (sum_d p(d)^k)^(1/k)."""
    if not k > 0:
        raise DomainError(f"k must be positive, got {k}")
    log_z = _log_z(g)
    log_q = _log_z(_powered(g, k))
    return float(np.exp((log_q - k * log_z) / k))
